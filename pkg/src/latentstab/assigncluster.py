"""k-means in latent space, label alignment by linear sum assignment, and the
class-label change rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InputError, LengthMismatchError, TooFewSamplesError


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int = 0
    # inertia after each Lloyd iteration of the winning restart
    inertia_history: tuple = ()


@dataclass(frozen=True, eq=False)
class AlignmentMap:
    mapping: np.ndarray  # mapping[row] = assigned column
    total_cost: float


def _sq_dists(z, centroids):
    diff = z[:, None, :] - centroids[None, :, :]
    return np.einsum("nkj,nkj->nk", diff, diff)


def _kmeans_pp(z, g, rng):
    n = z.shape[0]
    centroids = np.empty((g, z.shape[1]))
    centroids[0] = z[rng.integers(n)]
    closest = ((z - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, g):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centroids[c] = z[idx]
        closest = np.minimum(closest, ((z - centroids[c]) ** 2).sum(axis=1))
    return centroids


def _repair_empty(z, labels, centroids, d2):
    """Move each empty centroid onto the point farthest from its own
    centroid. Returns True if anything moved."""
    g = centroids.shape[0]
    counts = np.bincount(labels, minlength=g)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return False
    own = d2[np.arange(z.shape[0]), labels]
    for c in empty:
        far = int(np.argmax(own))
        centroids[c] = z[far]
        labels[far] = c
        own[far] = -1.0
    return True


def _lloyd(z, centroids, max_iter, tol):
    history = []
    g = centroids.shape[0]
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(z, centroids)
        labels = np.argmin(d2, axis=1)
        _repair_empty(z, labels, centroids, d2)
        new = np.empty_like(centroids)
        for c in range(g):
            new[c] = z[labels == c].mean(axis=0)
        shift = float(np.max(np.abs(new - centroids)))
        centroids = new
        history.append(float(_sq_dists(z, centroids)[np.arange(len(z)), labels].sum()))
        if shift < tol:
            break
    d2 = _sq_dists(z, centroids)
    labels = np.argmin(d2, axis=1)
    if _repair_empty(z, labels, centroids, d2):
        for c in range(g):
            centroids[c] = z[labels == c].mean(axis=0)
    inertia = float(((z - centroids[labels]) ** 2).sum())
    return labels, centroids, inertia, it, tuple(history)


def kmeans(z, g, seed=0, n_init=10, max_iter=300, tol=1e-8) -> ClusterAssignment:
    """Lloyd's algorithm from k-means++ seeds; best of ``n_init`` restarts."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise InputError("z must be a 2-D matrix")
    if g < 1:
        raise InputError("g must be >= 1")
    if z.shape[0] < g:
        raise TooFewSamplesError(f"{z.shape[0]} samples for {g} clusters")
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    best = None
    for _ in range(n_init):
        start = _kmeans_pp(z, g, rng)
        labels, centroids, inertia, n_iter, hist = _lloyd(z, start, max_iter, tol)
        if best is None or inertia < best.inertia:
            best = ClusterAssignment(labels, centroids, inertia, n_iter, hist)
    return best


def lloyd_from(z, centroids, max_iter=300, tol=1e-8) -> ClusterAssignment:
    """Single Lloyd run from given starting centroids."""
    labels, c, inertia, n_iter, hist = _lloyd(
        np.asarray(z, dtype=float), np.array(centroids, dtype=float), max_iter, tol
    )
    return ClusterAssignment(labels, c, inertia, n_iter, hist)


def solve_lsap(cost) -> AlignmentMap:
    """Minimum-cost perfect assignment by successive shortest augmenting paths
    with row/column dual potentials (Jonker-Volgenant without the
    initialization phase).

    ``+inf`` entries mark forbidden pairs. Rectangular matrices are padded to
    square with zero-cost dummy rows or columns; the returned mapping and cost
    cover the real rows only (mapping entry -1 for a row left unassigned when
    rows outnumber columns).
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise InputError("cost must be a 2-D matrix")
    if np.isnan(c).any() or np.isneginf(c).any():
        raise InputError("cost entries must be finite or +inf")
    nr, nc = c.shape
    if nr == 0 or nc == 0:
        return AlignmentMap(np.zeros(nr, dtype=np.int64) - 1, 0.0)
    n = max(nr, nc)
    sq = np.zeros((n, n))
    sq[:nr, :nc] = c

    u = np.zeros(n)  # row potentials
    v = np.zeros(n)  # column potentials
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)
    path = np.full(n, -1, dtype=np.int64)

    for cur in range(n):
        spc = np.full(n, np.inf)  # shortest path cost to each column
        sr = np.zeros(n, dtype=bool)
        sc = np.zeros(n, dtype=bool)
        remaining = list(range(n - 1, -1, -1))
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            sr[i] = True
            lowest = np.inf
            idx = -1
            for it, j in enumerate(remaining):
                r = min_val + sq[i, j] - u[i] - v[j]
                if r < spc[j]:
                    path[j] = i
                    spc[j] = r
                if spc[j] < lowest or (spc[j] == lowest and row4col[j] == -1):
                    lowest = spc[j]
                    idx = it
            min_val = lowest
            if not np.isfinite(min_val):
                raise InfeasibleError("no complete assignment avoids forbidden entries")
            j = remaining[idx]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            sc[j] = True
            remaining[idx] = remaining[-1]
            remaining.pop()

        # dual update
        u[cur] += min_val
        for r in np.flatnonzero(sr):
            if r != cur:
                u[r] += min_val - spc[col4row[r]]
        for j in np.flatnonzero(sc):
            v[j] -= min_val - spc[j]

        # augment along the alternating path back to cur
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur:
                break

    mapping = col4row[:nr].copy()
    mapping[mapping >= nc] = -1
    rows = np.flatnonzero(mapping >= 0)
    total = float(c[rows, mapping[rows]].sum())
    return AlignmentMap(mapping, total)


def contingency(pred, truth, g):
    """counts[p, t] = #samples predicted p with truth t."""
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise LengthMismatchError("pred and truth differ in length")
    if pred.size and (pred.min() < 0 or pred.max() >= g or truth.min() < 0 or truth.max() >= g):
        raise InputError(f"labels must lie in 0..{g - 1}")
    counts = np.zeros((g, g), dtype=np.int64)
    np.add.at(counts, (pred, truth), 1)
    return counts


def alignment(pred, truth, g) -> AlignmentMap:
    return solve_lsap(-contingency(pred, truth, g).astype(float))


def align_labels(pred, truth, g):
    """Relabel predicted clusters to maximise agreement with truth."""
    amap = alignment(pred, truth, g)
    return amap.mapping[np.asarray(pred, dtype=np.int64)]


def eta(aligned_pred, truth):
    """Percentage of samples whose aligned predicted label differs from truth."""
    a = np.asarray(aligned_pred)
    t = np.asarray(truth)
    if a.shape != t.shape:
        raise LengthMismatchError(f"lengths differ: {a.shape} vs {t.shape}")
    if a.size == 0:
        raise LengthMismatchError("empty label vectors")
    return 100.0 * np.count_nonzero(a != t) / a.size
