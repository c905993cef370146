"""Fully-connected autoencoder with a 2-D bottleneck, trained by Adam on MSE.

Backpropagation is written out by hand in numpy. All parameters live in one
flat float64 buffer so the optimizer update is a handful of vector ops; the
per-layer weight and bias arrays are views into it.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataspace import TabularDataset, restore_order, shuffle_tracked
from .errors import (
    DegenerateAxisError,
    DivergedError,
    InputError,
    NonFiniteActivationError,
    ParseError,
)

DESK_EPOCHS = 2000
DESK_REALIZATIONS = 30
DIVERGENCE_LIMIT = 1e6

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def make_rng(*keys):
    """Generator seeded from a tuple of integers (seed, stream, ...)."""
    return np.random.default_rng([int(k) & _SEED_MASK for k in keys])


# stream ids for the independent random streams of one realization
_SHUFFLE_STREAM = 1
_EPOCH_STREAM = 2


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    encoder_widths: tuple = (128, 128)
    latent_dim: int = 2
    leaky_slope: float = 0.01
    learning_rate: float = 0.001
    batch_size: int = 16
    epochs: int = 10000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    loss: str = "mse"

    def __post_init__(self):
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
        if self.latent_dim != 2:
            raise InputError("latent_dim must be 2")
        if self.input_dim < 1 or any(w < 1 for w in self.encoder_widths):
            raise InputError("layer widths must be >= 1")
        if not 0.0 < self.leaky_slope < 1.0:
            raise InputError("leaky_slope must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise InputError("batch_size must be >= 1 and epochs >= 0")
        if self.loss != "mse":
            raise InputError("only the mse loss is supported")

    @property
    def layer_dims(self):
        enc = [self.input_dim, *self.encoder_widths, self.latent_dim]
        return enc + enc[-2::-1]

    @property
    def latent_layer(self):
        """Index of the layer whose (activated) output is the latent space."""
        return len(self.encoder_widths)

    def to_dict(self):
        d = asdict(self)
        d["encoder_widths"] = list(self.encoder_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class Params:
    """Layer weights ``W[i]`` (fan_in x fan_out) and biases ``b[i]`` as views
    into one flat vector."""

    def __init__(self, layer_dims, flat=None):
        self.layer_dims = list(layer_dims)
        shapes = list(zip(self.layer_dims[:-1], self.layer_dims[1:]))
        size = sum(a * b + b for a, b in shapes)
        self.flat = np.zeros(size) if flat is None else flat
        if self.flat.shape != (size,):
            raise InputError("flat parameter vector has the wrong size")
        self.W, self.b = [], []
        off = 0
        for a, b in shapes:
            self.W.append(self.flat[off : off + a * b].reshape(a, b))
            off += a * b
            self.b.append(self.flat[off : off + b])
            off += b

    @property
    def n_layers(self):
        return len(self.W)

    def copy(self):
        return Params(self.layer_dims, self.flat.copy())

    def zeros_like(self):
        return Params(self.layer_dims)


def init_weights(config: NetworkConfig, seed) -> Params:
    """Glorot-uniform weights, zero biases."""
    params = Params(config.layer_dims)
    rng = make_rng(seed)
    for w in params.W:
        fan_in, fan_out = w.shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return params


def leaky_relu(x, slope=0.01):
    return np.where(x > 0, x, slope * x)


def _forward(params, x, slope, latent_layer):
    acts = [x]
    ders = []
    h = x
    last = params.n_layers - 1
    for i in range(params.n_layers):
        z = h @ params.W[i]
        z += params.b[i]
        if i < last:
            d = np.greater(z, 0.0) * (1.0 - slope)
            d += slope
            z *= d
            ders.append(d)
        acts.append(z)
        h = z
    return h, acts[latent_layer + 1], (acts, ders)


def forward(params: Params, x, slope=0.01, latent_layer=None):
    """Returns (reconstruction, latent, cache).

    LeakyReLU follows every layer except the last (linear) one, so both the
    hidden encoder layers and the latent projection are activated.
    ``latent_layer`` defaults to the middle layer of the symmetric stack.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.layer_dims[0]:
        raise InputError(f"batch must have {params.layer_dims[0]} columns")
    if latent_layer is None:
        latent_layer = params.n_layers // 2 - 1
    recon, latent, cache = _forward(params, x, slope, latent_layer)
    if not np.all(np.isfinite(recon)):
        raise NonFiniteActivationError("non-finite activations in forward pass")
    return recon, latent, cache


def _backward(params, x, cache, out):
    """Gradient of mean-squared reconstruction error into ``out``; returns
    the loss."""
    acts, ders = cache
    resid = acts[-1] - x
    loss = float(np.vdot(resid, resid)) / resid.size
    g = resid * (2.0 / resid.size)
    for i in range(params.n_layers - 1, -1, -1):
        if i < params.n_layers - 1:
            g *= ders[i]
        np.dot(acts[i].T, g, out=out.W[i])
        g.sum(axis=0, out=out.b[i])
        if i > 0:
            g = g @ params.W[i].T
    return loss


def loss_and_grad(params: Params, x, slope=0.01):
    x = np.asarray(x, dtype=float)
    _, _, cache = _forward(params, x, slope, 0)
    out = params.zeros_like()
    loss = _backward(params, x, cache, out)
    return loss, out


def grad(params: Params, x, slope=0.01) -> Params:
    """Analytic gradient of batch MSE (mean over all entries)."""
    return loss_and_grad(params, x, slope)[1]


def mse(params: Params, x, slope=0.01):
    recon, _, _ = _forward(params, np.asarray(x, dtype=float), slope, 0)
    r = recon - x
    return float(np.vdot(r, r)) / r.size


class Adam:
    def __init__(self, size, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self._tmp = np.zeros(size)
        self.t = 0

    def step(self, theta, g):
        # theta -= lr * mhat / (sqrt(vhat) + eps), folded into scalar factors
        self.t += 1
        b1, b2, tmp = self.beta1, self.beta2, self._tmp
        self.m *= b1
        np.multiply(g, 1.0 - b1, out=tmp)
        self.m += tmp
        self.v *= b2
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        self.v += tmp
        c2 = np.sqrt(1.0 - b2**self.t)
        step = self.lr * c2 / (1.0 - b1**self.t)
        np.sqrt(self.v, out=tmp)
        tmp += self.eps * c2
        np.divide(self.m, tmp, out=tmp)
        tmp *= step
        theta -= tmp


@dataclass(eq=False)
class TrainedRealization:
    seed: int
    latent: np.ndarray
    loss_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    final_loss: float = float("nan")
    # trained weights; not persisted by save_ensemble
    params: Params | None = field(default=None, repr=False)


@dataclass(eq=False)
class LatentEnsemble:
    realizations: list
    sample_ids: np.ndarray = None
    config: NetworkConfig | None = None

    def __post_init__(self):
        if not self.realizations:
            raise InputError("ensemble is empty")
        n = self.realizations[0].latent.shape[0]
        for r in self.realizations:
            if r.latent.shape != (n, 2):
                raise InputError("all realizations must be N x 2 over the same samples")
        seeds = [r.seed for r in self.realizations]
        if len(set(seeds)) != len(seeds):
            raise InputError("realization seeds must be distinct")
        if self.sample_ids is None:
            self.sample_ids = np.arange(n)
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)

    @property
    def K(self):
        return len(self.realizations)

    @property
    def N(self):
        return self.realizations[0].latent.shape[0]

    @property
    def seeds(self):
        return [r.seed for r in self.realizations]

    @property
    def latents(self):
        return [r.latent for r in self.realizations]


def train_realization(config: NetworkConfig, dataset: TabularDataset, seed) -> TrainedRealization:
    x_orig = dataset.values
    if x_orig.shape[1] != config.input_dim:
        raise InputError(f"dataset has {x_orig.shape[1]} columns, config expects {config.input_dim}")
    params = init_weights(config, seed)
    slope = config.leaky_slope
    shuffled, perm = shuffle_tracked(dataset, make_rng(seed, _SHUFFLE_STREAM).integers(2**63))
    x = shuffled.values
    n = x.shape[0]
    bs = config.batch_size
    gbuf = params.zeros_like()
    opt = Adam(
        params.flat.size,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_eps,
    )
    trace = np.zeros(config.epochs)
    for epoch in range(config.epochs):
        order = make_rng(seed, _EPOCH_STREAM, epoch).permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            xb = x[order[start : start + bs]]
            _, _, cache = _forward(params, xb, slope, 0)
            loss = _backward(params, xb, cache, gbuf)
            if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
                raise DivergedError(
                    f"training diverged at epoch {epoch} (batch loss {loss})", seed=seed
                )
            opt.step(params.flat, gbuf.flat)
            total += loss * xb.shape[0]
        trace[epoch] = total / n

    recon, latent, _ = forward(params, x, slope, config.latent_layer)
    r = recon - x
    return TrainedRealization(
        seed=int(seed),
        latent=restore_order(latent, perm),
        loss_trace=trace,
        final_loss=float(np.vdot(r, r)) / r.size,
        params=params,
    )


def _train_one(args):
    return train_realization(*args)


def train_ensemble(config, dataset, K, base_seed=0, workers=1, progress=None) -> LatentEnsemble:
    """Train K realizations with seeds base_seed .. base_seed+K-1.

    ``workers > 1`` fans realizations out to processes; results do not
    depend on the worker count.
    """
    if K < 2:
        raise InputError("an ensemble needs K >= 2 realizations")
    jobs = [(config, dataset, base_seed + k) for k in range(K)]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = []
            for r in pool.map(_train_one, jobs):
                results.append(r)
                if progress:
                    progress(len(results), K)
    else:
        results = []
        for job in jobs:
            results.append(_train_one(job))
            if progress:
                progress(len(results), K)
    return LatentEnsemble(results, dataset.sample_ids.copy(), config)


def normalize_latent(z):
    """Per-axis min-max scaling onto [0, 1]."""
    z = np.asarray(z, dtype=float)
    lo = z.min(axis=0)
    hi = z.max(axis=0)
    span = hi - lo
    if np.any(span <= 0):
        raise DegenerateAxisError("latent axis has zero range")
    out = (z - lo) / span
    # exact endpoints regardless of rounding in the division
    out[np.argmin(z, axis=0), [0, 1]] = 0.0
    out[np.argmax(z, axis=0), [0, 1]] = 1.0
    return out


MANIFEST = "manifest.json"


def _write_column_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def save_ensemble(ensemble: LatentEnsemble, directory):
    """Write manifest.json plus realization_<k>.csv (header z1,z2) and
    loss_<k>.csv per realization, rows in original sample order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for k, r in enumerate(ensemble.realizations):
        name = f"realization_{k}.csv"
        _write_column_csv(directory / name, ["z1", "z2"], r.latent)
        _write_column_csv(directory / f"loss_{k}.csv", ["mse"], r.loss_trace[:, None])
        files.append(name)
    manifest = {
        "K": ensemble.K,
        "N": ensemble.N,
        "seeds": [int(s) for s in ensemble.seeds],
        "files": files,
        "final_losses": [float(r.final_loss) for r in ensemble.realizations],
        "sample_ids": [int(i) for i in ensemble.sample_ids],
        "config": None if ensemble.config is None else ensemble.config.to_dict(),
    }
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory


def _read_matrix(path, ncols):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path} is empty")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if data.size == 0:
        return np.zeros((0, ncols))
    if data.ndim != 2 or data.shape[1] != ncols:
        raise ParseError(f"{path}: expected {ncols} columns")
    return data


def load_ensemble(directory) -> LatentEnsemble:
    """Read an ensemble directory. Only K, N (and the realization files) are
    required in the manifest, so latent spaces from other training systems
    can be ingested."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {directory / MANIFEST}: {exc}") from exc
    try:
        K, N = int(manifest["K"]), int(manifest["N"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{directory / MANIFEST}: K and N must be integers") from exc
    seeds = manifest.get("seeds") or list(range(K))
    files = manifest.get("files") or [f"realization_{k}.csv" for k in range(K)]
    losses = manifest.get("final_losses") or [float("nan")] * K
    if len(seeds) != K or len(files) != K:
        raise ParseError("manifest K does not match seeds/files")
    reals = []
    for k in range(K):
        z = _read_matrix(directory / files[k], 2)
        if z.shape[0] != N:
            raise ParseError(f"{files[k]}: expected {N} rows, got {z.shape[0]}")
        loss_path = directory / f"loss_{k}.csv"
        trace = _read_matrix(loss_path, 1)[:, 0] if loss_path.exists() else np.zeros(0)
        reals.append(TrainedRealization(int(seeds[k]), z, trace, float(losses[k])))
    cfg = manifest.get("config")
    return LatentEnsemble(
        reals,
        manifest.get("sample_ids"),
        NetworkConfig.from_dict(cfg) if cfg else None,
    )
