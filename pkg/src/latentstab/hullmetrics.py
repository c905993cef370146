"""Convex-hull anchor sets and the anchor-set dissimilarity metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySetError, InputError, TooFewPointsError

ORIENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AnchorSet:
    indices: np.ndarray  # sorted sample indices of the hull vertices
    order: np.ndarray  # the same indices in counter-clockwise order
    vertices: np.ndarray  # hull points in counter-clockwise order
    degenerate: bool = False

    @property
    def n(self):
        return int(self.indices.size)

    def as_set(self):
        return frozenset(int(i) for i in self.indices)


def _cross(o, a, b):
    """z-component of (a - o) x (b - o); positive when b is left of o->a."""
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (
        b[..., 0] - o[..., 0]
    )


def _hull_side(pts, idx, a, b, out):
    """Append, in order, the hull vertices strictly left of a->b (exclusive
    of a and b). Iterative to keep the stack shallow on round hulls."""
    stack = [(a, b, idx)]
    # depth-first with explicit ordering: emit a..far vertices before far..b
    result = []
    while stack:
        item = stack.pop()
        if isinstance(item, int):
            result.append(item)
            continue
        a, b, cand = item
        if cand.size == 0:
            continue
        cr = _cross(pts[a], pts[b], pts[cand])
        keep = cr > ORIENT_TOL
        cand, cr = cand[keep], cr[keep]
        if cand.size == 0:
            continue
        # several points can tie for the largest distance; only the ends of
        # that tied run are vertices, so take the one furthest along a->b
        tied = cand[cr >= cr.max() - ORIENT_TOL]
        along = (pts[tied] - pts[a]) @ (pts[b] - pts[a])
        far = int(tied[np.argmax(along)])
        left1 = cand[_cross(pts[a], pts[far], pts[cand]) > ORIENT_TOL]
        left2 = cand[_cross(pts[far], pts[b], pts[cand]) > ORIENT_TOL]
        # processed in LIFO order: (a, far) part, then far, then (far, b)
        stack.append((far, b, left2))
        stack.append(far)
        stack.append((a, far, left1))
    out.extend(result)


def quickhull(z) -> AnchorSet:
    """Strict 2-D convex hull: collinear boundary points are dropped, and of
    coincident points only the lowest index is kept.

    A fully collinear input yields its two extreme points and
    ``degenerate=True``.
    """
    pts = np.asarray(z, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError("points must be an N x 2 matrix")
    if pts.shape[0] < 3:
        raise TooFewPointsError(f"need at least 3 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise InputError("points must be finite")
    _, first = np.unique(pts, axis=0, return_index=True)
    idx = np.sort(first)

    # lexicographic extremes are always hull vertices
    lex = np.lexsort((pts[idx, 1], pts[idx, 0]))
    left, right = int(idx[lex[0]]), int(idx[lex[-1]])
    if left == right:
        ind = np.array([left])
        return AnchorSet(ind, ind, pts[ind], True)
    rest = idx[(idx != left) & (idx != right)]
    # each side is emitted clockwise (a -> b); reverse for ccw output
    lower, upper = [], []
    _hull_side(pts, rest, right, left, lower)
    _hull_side(pts, rest, left, right, upper)
    order = np.array([left, *lower[::-1], right, *upper[::-1]], dtype=np.int64)
    degenerate = not upper and not lower
    return AnchorSet(np.sort(order), order, pts[order], degenerate)


def hull_oracle(z, tol=ORIENT_TOL):
    """Brute-force O(N^3) hull vertex indices (same strictness conventions as
    :func:`quickhull`), for testing.

    (i, j) is a hull edge when every other point lies strictly left of i->j
    or on the open segment between them.
    """
    pts = np.asarray(z, dtype=float)
    _, first = np.unique(pts, axis=0, return_index=True)
    idx = np.sort(first)
    p = pts[idx]
    m = len(p)
    verts = set()
    for a in range(m):
        e = p - p[a]  # vectors a->j
        # cr[j, k] = cross(a, j, k)
        cr = e[:, None, 0] * e[None, :, 1] - e[:, None, 1] * e[None, :, 0]
        dot = e[:, None, 0] * e[None, :, 0] + e[:, None, 1] * e[None, :, 1]
        len2 = (e**2).sum(axis=1)
        between = (np.abs(cr) <= tol) & (dot > 0) & (dot < len2[:, None])
        ok = (cr > tol) | between
        ok[:, a] = True
        ok[np.arange(m), np.arange(m)] = True
        good = ok.all(axis=1)
        good[a] = False
        for j in np.flatnonzero(good):
            verts.add(int(idx[a]))
            verts.add(int(idx[j]))
    return np.array(sorted(verts), dtype=np.int64)


def containment_margin(z, anchors: AnchorSet):
    """Smallest signed distance of any point to the hull edges (>= 0 when
    every point is inside or on the hull)."""
    pts = np.asarray(z, dtype=float)
    v = anchors.vertices
    if len(v) < 3:
        return 0.0
    a = v
    b = np.roll(v, -1, axis=0)
    edge = b - a
    length = np.hypot(edge[:, 0], edge[:, 1])
    cr = edge[None, :, 0] * (pts[:, None, 1] - a[None, :, 1]) - edge[None, :, 1] * (
        pts[:, None, 0] - a[None, :, 0]
    )
    return float((cr / length[None, :]).min())


def _as_set(s):
    if isinstance(s, AnchorSet):
        return s.as_set()
    return frozenset(int(i) for i in s)


def jaccard_dissim(a, b):
    """1 - |A & B| / |A | B|."""
    a, b = _as_set(a), _as_set(b)
    if not a or not b:
        raise EmptySetError("Jaccard dissimilarity of an empty set")
    return 1.0 - len(a & b) / len(a | b)


def jaccard_matrix(anchor_sets):
    sets = [_as_set(s) for s in anchor_sets]
    k = len(sets)
    if k < 2:
        raise InputError("need at least two anchor sets")
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = jaccard_dissim(sets[i], sets[j])
    return out


def epsilon_series(anchor_sets):
    """Percentage change between consecutive anchor sets:
    100 * |A_k ^ A_{k-1}| / |A_k | A_{k-1}|, k = 2..K."""
    sets = [_as_set(s) for s in anchor_sets]
    if len(sets) < 2:
        raise InputError("need at least two anchor sets")
    out = np.empty(len(sets) - 1)
    for k in range(1, len(sets)):
        cur, prev = sets[k], sets[k - 1]
        if not cur or not prev:
            raise EmptySetError("percentage change of an empty anchor set")
        out[k - 1] = 100.0 * len(cur ^ prev) / len(cur | prev)
    return out
