"""Adjusted stress between latent spaces, pairwise metric matrices, Ward
ordering and distribution summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ZeroDenominatorError

METRICS = ("adjusted_stress", "jaccard")
MODE_GRID = 512


@dataclass(frozen=True, eq=False)
class PairwiseMatrix:
    values: np.ndarray
    metric_name: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InputError("pairwise matrix must be square")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise InputError("pairwise matrix must be symmetric")
        if np.any(np.diag(v) != 0) or np.any(v < 0):
            raise InputError("pairwise matrix needs a zero diagonal and non-negative entries")
        if self.metric_name not in METRICS:
            raise InputError(f"unknown metric {self.metric_name!r}")
        object.__setattr__(self, "values", v)

    @property
    def K(self):
        return self.values.shape[0]

    def lower_triangle(self):
        """Off-diagonal entries (i > j), row-major."""
        i, j = np.tril_indices(self.K, -1)
        return self.values[i, j]


@dataclass(frozen=True)
class DendrogramOrder:
    leaf_order: np.ndarray
    merge_heights: np.ndarray
    # (a, b) cluster ids merged at each step, scipy-style numbering
    merges: np.ndarray = None


@dataclass(frozen=True)
class DistributionSummary:
    p10: float
    p50: float
    p90: float
    mode: float
    count: int

    def to_dict(self):
        return {"p10": self.p10, "p50": self.p50, "p90": self.p90, "mode": self.mode, "count": self.count}


def pairwise_distances(z):
    """Condensed Euclidean distances, pairs (p, q) with p < q in
    lexicographic order."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] < 2:
        raise InputError("need an N x d matrix with N >= 2")
    p, q = np.triu_indices(z.shape[0], 1)
    diff = z[p] - z[q]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def stress_from_distances(di, dj):
    num = di - dj
    num = float(np.dot(num, num))
    den = float(np.dot(di, dj))
    if den <= 0.0:
        raise ZeroDenominatorError("a latent space has all points coincident")
    return float(np.sqrt(num / den))


def adjusted_stress(zi, zj):
    """sqrt( sum (d_i - d_j)^2 / sum d_i d_j ) over all sample pairs."""
    zi = np.asarray(zi, dtype=float)
    zj = np.asarray(zj, dtype=float)
    if zi.shape[0] != zj.shape[0]:
        raise InputError("latent spaces must have the same number of samples")
    return stress_from_distances(pairwise_distances(zi), pairwise_distances(zj))


def stress_matrix(latents) -> PairwiseMatrix:
    latents = list(latents)
    k = len(latents)
    if k < 2:
        raise InputError("need at least two latent spaces")
    dists = np.stack([pairwise_distances(z) for z in latents])
    sq = np.einsum("ij,ij->i", dists, dists)
    for idx in np.flatnonzero(sq <= 0.0):
        raise ZeroDenominatorError(f"latent space {idx} has all points coincident", index=int(idx))
    out = np.zeros((k, k))
    for i in range(k - 1):
        # direct residuals, not |a|^2+|b|^2-2ab, to keep near-zero stresses exact
        rest = dists[i + 1 :]
        resid = rest - dists[i]
        num = np.einsum("ij,ij->i", resid, resid)
        den = rest @ dists[i]
        out[i, i + 1 :] = np.sqrt(num / den)
    out = out + out.T
    return PairwiseMatrix(out, "adjusted_stress")


def ward_order(matrix) -> DendrogramOrder:
    """Agglomerative clustering with Ward's Lance-Williams update applied to
    the squared dissimilarities; merge heights are reported on the original
    scale (the same convention as scipy's ``method="ward"``).

    Ties in the closest pair go to the lowest (i, j). Leaves are listed by a
    depth-first walk visiting the smaller child first (ties: the child
    holding the lowest leaf index).
    """
    d = matrix.values if isinstance(matrix, PairwiseMatrix) else np.asarray(matrix, dtype=float)
    k = d.shape[0]
    if k == 1:
        return DendrogramOrder(np.array([0]), np.zeros(0), np.zeros((0, 2), dtype=np.int64))
    dist = d.astype(float) ** 2
    np.fill_diagonal(dist, np.inf)
    active = np.ones(k, dtype=bool)
    size = np.ones(k)
    cluster_id = np.arange(k)  # current scipy-style id of the cluster in slot
    children = {}
    members_min = {i: i for i in range(k)}
    members_n = {i: 1 for i in range(k)}
    heights = np.zeros(k - 1)
    merges = np.zeros((k - 1, 2), dtype=np.int64)
    for step in range(k - 1):
        sub = np.where(active[:, None] & active[None, :], dist, np.inf)
        flat = int(np.argmin(sub))
        i, j = divmod(flat, k)
        if i > j:
            i, j = j, i
        h = sub[i, j]
        ni, nj = size[i], size[j]
        others = active.copy()
        others[[i, j]] = False
        nk = size[others]
        # Lance-Williams, Ward
        new = ((ni + nk) * dist[i, others] + (nj + nk) * dist[j, others] - nk * h) / (ni + nj + nk)
        dist[i, others] = new
        dist[others, i] = new
        active[j] = False
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        a, b = cluster_id[i], cluster_id[j]
        nid = k + step
        children[nid] = (a, b)
        members_min[nid] = min(members_min[a], members_min[b])
        members_n[nid] = members_n[a] + members_n[b]
        merges[step] = (a, b)
        heights[step] = np.sqrt(h)
        size[i] = ni + nj
        cluster_id[i] = nid

    order = []
    stack = [2 * k - 2]
    while stack:
        node = stack.pop()
        if node < k:
            order.append(node)
            continue
        a, b = children[node]
        key = lambda c: (members_n[c], members_min[c])  # noqa: E731
        first, second = (a, b) if key(a) <= key(b) else (b, a)
        stack.append(second)
        stack.append(first)
    return DendrogramOrder(np.array(order, dtype=np.int64), heights, merges)


def kde_mode(values, grid_size=MODE_GRID):
    """Argmax of a Gaussian KDE (Scott bandwidth) on a grid over [min, max]."""
    x = np.asarray(values, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if x.size == 1 or hi == lo:
        return lo
    std = x.std(ddof=1)
    if std == 0.0:
        return lo
    h = std * x.size ** (-1.0 / 5.0)
    grid = np.linspace(lo, hi, grid_size)
    dens = np.empty(grid_size)
    chunk = max(1, 2_000_000 // x.size)
    for s in range(0, grid_size, chunk):
        u = (grid[s : s + chunk, None] - x[None, :]) / h
        dens[s : s + chunk] = np.exp(-0.5 * u * u).sum(axis=1)
    return float(grid[int(np.argmax(dens))])


def summarize(values) -> DistributionSummary:
    x = np.asarray(values, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise InputError("cannot summarize an empty series")
    p10, p50, p90 = np.percentile(x, [10, 50, 90])
    return DistributionSummary(float(p10), float(p50), float(p90), kde_mode(x), int(x.size))
