"""Sample traces, threshold classification, report assembly and file output."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .anisotropy import GRID_SIZE, MVEE_TOL, AnisotropyEstimate, LocalRegion, delta_series, estimate_anisotropy
from .assigncluster import align_labels, eta, kmeans
from .autoenc import LatentEnsemble, normalize_latent
from .dataspace import TabularDataset
from .errors import IndexOutOfRangeError, InputError, IoError, LatentStabError, NegativeValueError, RealizationError
from .hullmetrics import epsilon_series, jaccard_matrix, quickhull
from .stressmetrics import DendrogramOrder, DistributionSummary, PairwiseMatrix, stress_matrix, summarize, ward_order

# Table-1 bands, left-closed: [edge_i, edge_{i+1})
BAND_EDGES = (0.2, 0.5, 0.7)
BAND_LABELS = ("significant_stability", "partial_stability", "instability", "significant_instability")
EDGE_NOTE_WIDTH = 0.005

TRACE_STABLE_RANGE = 0.02
TRACE_BINS = 10
TRACE_ALPHA = 0.05
TRACE_MIN_K = 20
N_TRACE_DEFAULT = 5

REPORT_KEYS = (
    "manifest",
    "eta",
    "epsilon",
    "delta_mvee",
    "delta_global",
    "delta_local",
    "stress",
    "jaccard",
    "traces",
    "classifications",
)


def _num(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def _nums(a):
    return [_num(v) for v in np.asarray(a, dtype=float).ravel()]


def _arr(v):
    return np.array([np.nan if x is None else x for x in v], dtype=float)


@dataclass(frozen=True, eq=False)
class SampleTrace:
    sample_index: int
    z1_values: np.ndarray
    classification: str

    def to_dict(self):
        return {
            "sample_index": self.sample_index,
            "z1_values": _nums(self.z1_values),
            "classification": self.classification,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["sample_index"]), _arr(d["z1_values"]), d["classification"])


def _normalized_z1(ensemble: LatentEnsemble):
    return np.stack([normalize_latent(z)[:, 0] for z in ensemble.latents])


def classify_trace(z1_values) -> str:
    """Dirac-like -> total_stability; uniform-looking -> total_instability;
    anything else -> partial_instability."""
    v = np.asarray(z1_values, dtype=float)
    if v.size < TRACE_MIN_K:
        return "insufficient_data"
    if v.max() - v.min() < TRACE_STABLE_RANGE:
        return "total_stability"
    counts, _ = np.histogram(v, bins=TRACE_BINS, range=(0.0, 1.0))
    p = stats.chisquare(counts).pvalue
    return "total_instability" if p > TRACE_ALPHA else "partial_instability"


def trace_sample(ensemble: LatentEnsemble, i, z1=None) -> SampleTrace:
    if not 0 <= i < ensemble.N:
        raise IndexOutOfRangeError(f"sample index {i} outside 0..{ensemble.N - 1}")
    if z1 is None:
        z1 = _normalized_z1(ensemble)
    values = z1[:, i].copy()
    return SampleTrace(int(i), values, classify_trace(values))


def default_trace_indices(z1, n=N_TRACE_DEFAULT):
    """The n samples with the largest trace variance, then the n smallest."""
    var = z1.var(axis=0)
    order = np.argsort(-var, kind="stable")
    top = [int(i) for i in order[:n]]
    low = [int(i) for i in np.argsort(var, kind="stable") if int(i) not in top][:n]
    return top + low


def classify_threshold(value) -> str:
    v = float(value)
    if math.isnan(v):
        raise InputError("cannot classify NaN")
    if v < 0:
        raise NegativeValueError(f"negative metric value {v}")
    band = int(np.searchsorted(BAND_EDGES, v, side="right"))
    return BAND_LABELS[band]


def edge_notes(name, value):
    notes = []
    for edge in BAND_EDGES:
        if abs(value - edge) <= EDGE_NOTE_WIDTH:
            notes.append(
                f"{name} mode {value:.4f} lies within {EDGE_NOTE_WIDTH} of the band edge {edge}; "
                f"classified with left-closed bands as {classify_threshold(value)}"
            )
    return notes


@dataclass(frozen=True)
class ReportOptions:
    grid_size: int = GRID_SIZE
    mvee_tol: float = MVEE_TOL
    use_labels: bool = True
    trace_indices: tuple | None = None
    n_trace: int = N_TRACE_DEFAULT
    workers: int = 1

    def to_dict(self):
        return {
            "grid_size": self.grid_size,
            "mvee_tol": self.mvee_tol,
            "use_labels": self.use_labels,
            "trace_indices": None if self.trace_indices is None else list(self.trace_indices),
            "n_trace": self.n_trace,
        }


@dataclass(eq=False)
class RunManifest:
    dataset_path: str | None
    dataset_hash: str
    K: int
    N: int
    network_config: dict | None
    base_seed: int | None
    seeds: list
    options: dict
    toolkit_version: str = __version__
    # kept out of report.json so identical runs give identical bytes
    timestamps: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "dataset_path": self.dataset_path,
            "dataset_hash": self.dataset_hash,
            "K": self.K,
            "N": self.N,
            "network_config": self.network_config,
            "base_seed": self.base_seed,
            "seeds": [int(s) for s in self.seeds],
            "options": self.options,
            "toolkit_version": self.toolkit_version,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(eq=False)
class SeriesResult:
    values: np.ndarray
    summary: DistributionSummary | None

    @classmethod
    def of(cls, values):
        values = np.asarray(values, dtype=float)
        finite = values[np.isfinite(values)]
        return cls(values, summarize(finite) if finite.size else None)

    def to_dict(self):
        return {
            "values": _nums(self.values),
            "summary": None if self.summary is None else self.summary.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        s = d["summary"]
        return cls(_arr(d["values"]), None if s is None else DistributionSummary(**s))


@dataclass(eq=False)
class MatrixResult:
    matrix: PairwiseMatrix
    summary: DistributionSummary
    order: DendrogramOrder

    @property
    def mode(self):
        return self.summary.mode

    @classmethod
    def of(cls, matrix: PairwiseMatrix):
        return cls(matrix, summarize(matrix.lower_triangle()), ward_order(matrix))

    def sorted_lower(self):
        """(row, col, value) over the Ward-ordered matrix, row > col."""
        leaf = self.order.leaf_order
        m = self.matrix.values[np.ix_(leaf, leaf)]
        i, j = np.tril_indices(self.matrix.K, -1)
        return i, j, m[i, j]

    def to_dict(self):
        return {
            "metric": self.matrix.metric_name,
            "matrix": [_nums(r) for r in self.matrix.values],
            "mode": _num(self.mode),
            "summary": self.summary.to_dict(),
            "ward_order": {
                "leaf_order": [int(i) for i in self.order.leaf_order],
                "merge_heights": _nums(self.order.merge_heights),
                "merges": [[int(a), int(b)] for a, b in self.order.merges],
            },
        }

    @classmethod
    def from_dict(cls, d):
        w = d["ward_order"]
        order = DendrogramOrder(
            np.array(w["leaf_order"], dtype=np.int64),
            _arr(w["merge_heights"]),
            np.array(w["merges"], dtype=np.int64).reshape(-1, 2),
        )
        return cls(
            PairwiseMatrix(np.array(d["matrix"], dtype=float), d["metric"]),
            DistributionSummary(**d["summary"]),
            order,
        )


@dataclass(eq=False)
class StabilityReport:
    manifest: RunManifest
    eta: SeriesResult | None
    epsilon: SeriesResult
    delta_mvee: SeriesResult
    delta_global: SeriesResult
    delta_local: SeriesResult
    stress: MatrixResult
    jaccard: MatrixResult
    anchor_sets: list
    anisotropy: list
    traces: list
    structural_class: str
    inferential_class: str
    notes: list = field(default_factory=list)

    def to_dict(self):
        aniso = self.anisotropy
        return {
            "manifest": self.manifest.to_dict(),
            "eta": None if self.eta is None else self.eta.to_dict(),
            "epsilon": {**self.epsilon.to_dict(), "anchor_sets": [[int(i) for i in s] for s in self.anchor_sets]},
            "delta_mvee": {**self.delta_mvee.to_dict(), "betas": _nums([a.beta_mvee for a in aniso])},
            "delta_global": {
                **self.delta_global.to_dict(),
                "betas": _nums([a.beta_global for a in aniso]),
                "thetas": _nums([a.theta_global for a in aniso]),
            },
            "delta_local": {
                **self.delta_local.to_dict(),
                "betas": [_num(a.beta_harmonic) for a in aniso],
                "regions": [[{"beta": _num(r.beta), "count": r.count, "theta": _num(r.theta)} for r in a.beta_locals] for a in aniso],
            },
            "stress": self.stress.to_dict(),
            "jaccard": self.jaccard.to_dict(),
            "traces": [t.to_dict() for t in self.traces],
            "classifications": {
                "structural": self.structural_class,
                "structural_mode": _num(self.stress.mode),
                "inferential": self.inferential_class,
                "inferential_mode": _num(self.jaccard.mode),
                "notes": list(self.notes),
            },
        }

    @classmethod
    def from_dict(cls, d):
        dm, dg, dl = d["delta_mvee"], d["delta_global"], d["delta_local"]
        aniso = []
        for k in range(len(dm["betas"])):
            regions = [LocalRegion(_arr([r["beta"]])[0], int(r["count"]), _arr([r["theta"]])[0]) for r in dl["regions"][k]]
            aniso.append(
                AnisotropyEstimate(
                    _arr([dm["betas"][k]])[0],
                    dg["betas"][k],
                    dl["betas"][k],
                    regions,
                    dg["thetas"][k],
                    dm["betas"][k] is not None,
                )
            )
        c = d["classifications"]
        return cls(
            manifest=RunManifest.from_dict(d["manifest"]),
            eta=None if d["eta"] is None else SeriesResult.from_dict(d["eta"]),
            epsilon=SeriesResult.from_dict(d["epsilon"]),
            delta_mvee=SeriesResult.from_dict(dm),
            delta_global=SeriesResult.from_dict(dg),
            delta_local=SeriesResult.from_dict(dl),
            stress=MatrixResult.from_dict(d["stress"]),
            jaccard=MatrixResult.from_dict(d["jaccard"]),
            anchor_sets=[list(s) for s in d["epsilon"]["anchor_sets"]],
            anisotropy=aniso,
            traces=[SampleTrace.from_dict(t) for t in d["traces"]],
            structural_class=c["structural"],
            inferential_class=c["inferential"],
            notes=list(c["notes"]),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _per_realization(args):
    k, z, seed, labels, g, grid, tol = args
    try:
        if labels is not None:
            pred = kmeans(z, g, seed=seed).labels
            e = eta(align_labels(pred, labels, g), labels)
        else:
            e = None
        hull = quickhull(z)
        aniso = estimate_anisotropy(z, grid, tol)
    except LatentStabError as exc:
        raise RealizationError(k, exc) from exc
    return e, [int(i) for i in hull.indices], aniso


def _delta_with_gaps(betas):
    """delta_series where spaces without an estimate leave NaN gaps."""
    b = _arr(betas)
    if np.isfinite(b).all():
        return delta_series(b)
    out = np.full(b.size - 1, np.nan)
    ok = np.isfinite(b[1:]) & np.isfinite(b[:-1])
    for k in np.flatnonzero(ok):
        out[k] = delta_series(b[k : k + 2])[0]
    return out


def build_report(dataset: TabularDataset | None, ensemble: LatentEnsemble, options=None, manifest=None) -> StabilityReport:
    """Run every stability metric over ``ensemble`` and classify the result."""
    options = options or ReportOptions()
    K, N = ensemble.K, ensemble.N
    if K < 2:
        raise InputError("a report needs K >= 2 realizations")
    labels, g = None, None
    if dataset is not None:
        if dataset.n_samples != N:
            raise InputError(f"dataset has {dataset.n_samples} samples, ensemble has {N}")
        if options.use_labels and dataset.labels is not None:
            labels, g = dataset.labels, dataset.class_count

    jobs = [(k, z, s, labels, g, options.grid_size, options.mvee_tol) for k, (z, s) in enumerate(zip(ensemble.latents, ensemble.seeds))]
    if options.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=options.workers) as pool:
            results = list(pool.map(_per_realization, jobs))
    else:
        results = [_per_realization(j) for j in jobs]
    etas = [r[0] for r in results]
    anchors = [r[1] for r in results]
    aniso = [r[2] for r in results]

    try:
        smat = stress_matrix(ensemble.latents)
    except LatentStabError as exc:
        raise RealizationError(getattr(exc, "index", -1), exc) from exc
    stress = MatrixResult.of(smat)
    jac = MatrixResult.of(PairwiseMatrix(jaccard_matrix(anchors), "jaccard"))

    z1 = _normalized_z1(ensemble)
    idx = options.trace_indices
    if idx is None:
        idx = default_trace_indices(z1, options.n_trace)
    traces = [trace_sample(ensemble, int(i), z1) for i in idx]

    structural = classify_threshold(stress.mode)
    inferential = classify_threshold(jac.mode)
    notes = edge_notes("adjusted stress", stress.mode) + edge_notes("Jaccard dissimilarity", jac.mode)
    for k, a in enumerate(aniso):
        if not a.mvee_converged:
            notes.append(f"realization {k}: MVEE did not converge; beta_mvee left undefined")

    if manifest is None:
        manifest = RunManifest(
            dataset_path=None if dataset is None else dataset.source,
            dataset_hash="" if dataset is None else dataset.fingerprint(),
            K=K,
            N=N,
            network_config=None if ensemble.config is None else ensemble.config.to_dict(),
            base_seed=int(min(ensemble.seeds)),
            seeds=list(ensemble.seeds),
            options=options.to_dict(),
        )
    return StabilityReport(
        manifest=manifest,
        eta=None if labels is None else SeriesResult.of(etas),
        epsilon=SeriesResult.of(epsilon_series(anchors)),
        delta_mvee=SeriesResult.of(_delta_with_gaps([a.beta_mvee for a in aniso])),
        delta_global=SeriesResult.of(delta_series([a.beta_global for a in aniso])),
        delta_local=SeriesResult.of(_delta_with_gaps([a.beta_harmonic for a in aniso])),
        stress=stress,
        jaccard=jac,
        anchor_sets=anchors,
        anisotropy=aniso,
        traces=traces,
        structural_class=structural,
        inferential_class=inferential,
        notes=notes,
    )


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in r])
    return buf.getvalue()


def _series_rows(series: SeriesResult, first_k):
    return [(first_k + i, _num(v)) for i, v in enumerate(series.values)]


def emit(report: StabilityReport, out_dir):
    """Write report.json and the CSV exports; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {}

        def put(name, text):
            p = out / name
            _atomic_write(p, text)
            files[name] = p

        put("report.json", report.to_json())
        put("stress_matrix.csv", _csv_text(None, report.stress.matrix.values.tolist()))
        put("jaccard_matrix.csv", _csv_text(None, report.jaccard.matrix.values.tolist()))
        series = {
            "epsilon": (report.epsilon, 1),
            "delta_mvee": (report.delta_mvee, 1),
            "delta_global": (report.delta_global, 1),
            "delta_local": (report.delta_local, 1),
        }
        if report.eta is not None:
            series = {"eta": (report.eta, 0), **series}
        long_rows = []
        for name, (s, first) in series.items():
            rows = _series_rows(s, first)
            put(f"{name}.csv", _csv_text(["k", "value"], rows))
            long_rows += [(name, k, v) for k, v in rows]
        put("series_long.csv", _csv_text(["metric", "k", "value"], long_rows))
        put(
            "anisotropy.csv",
            _csv_text(
                ["k", "beta_mvee", "beta_global", "beta_harmonic", "n_local"],
                [(k, _num(a.beta_mvee), _num(a.beta_global), _num(a.beta_harmonic), a.n_local) for k, a in enumerate(report.anisotropy)],
            ),
        )
        for name, m in (("stress", report.stress), ("jaccard", report.jaccard)):
            i, j, v = m.sorted_lower()
            put(f"{name}_sorted_lower.csv", _csv_text(["row", "col", "value"], zip(i.tolist(), j.tolist(), v.tolist())))
        put(
            "traces_long.csv",
            _csv_text(
                ["sample_index", "k", "z1"],
                [(t.sample_index, k, float(v)) for t in report.traces for k, v in enumerate(t.z1_values)],
            ),
        )
        if report.manifest.timestamps:
            put("timing.json", json.dumps(report.manifest.timestamps, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write report to {out}: {exc}") from exc
    return files


def load_report(path) -> StabilityReport:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    return StabilityReport.from_dict(json.loads(p.read_text(encoding="utf-8")))
