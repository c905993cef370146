"""Anisotropic ratios of 2-D point clouds.

Three estimators are provided: the minimum-volume enclosing ellipse
(Khachiyan's algorithm), a global eigen-ellipse of the sample covariance,
and local eigen-ellipses inside the high-density regions of a Gaussian KDE,
aggregated by their harmonic mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateAxisError,
    DegenerateError,
    EmptyListError,
    InputError,
    NoConvergenceError,
    NoRegionsError,
    SingularCovarianceError,
    ZeroBaselineError,
)

MVEE_TOL = 1e-4
MVEE_MAX_ITER = 10000
REFRESH_EVERY = 64
GRID_SIZE = 256
GRID_PAD = 0.10
MASS = 0.95
MIN_REGION_SAMPLES = 3


def _wrap_half_turn(theta):
    """Map an axis angle into (-pi/2, pi/2]."""
    theta = (theta + np.pi / 2) % np.pi - np.pi / 2
    if theta <= -np.pi / 2:
        theta += np.pi
    return float(theta)


@dataclass(frozen=True, eq=False)
class Ellipse:
    center: np.ndarray
    shape: np.ndarray  # B in (x - c)^T B (x - c) <= 1
    semi_major: float
    semi_minor: float
    theta: float

    @classmethod
    def from_shape(cls, center, shape):
        shape = 0.5 * (shape + shape.T)
        evals, evecs = np.linalg.eigh(shape)
        if evals[0] <= 0:
            raise DegenerateError("ellipse matrix is not positive definite")
        axes = 1.0 / np.sqrt(evals)  # ascending eigenvalue -> descending axis
        major = evecs[:, 0]
        theta = _wrap_half_turn(np.arctan2(major[1], major[0]))
        return cls(np.asarray(center, dtype=float), shape, float(axes[0]), float(axes[1]), theta)

    def mahalanobis_sq(self, points):
        d = np.asarray(points, dtype=float) - self.center
        return np.einsum("ni,ij,nj->n", d, self.shape, d)


@dataclass(eq=False)
class MveeSolverState:
    Q: np.ndarray
    u: np.ndarray
    sigma_w: np.ndarray = None
    M: np.ndarray = None
    iteration: int = 0
    tol: float = MVEE_TOL
    step_norm: float = np.inf


@dataclass(frozen=True, eq=False)
class EigenBasis:
    eigenvectors: np.ndarray  # columns, sorted by descending eigenvalue
    eigenvalues: np.ndarray

    @property
    def principal(self):
        return self.eigenvectors[:, 0]


@dataclass(frozen=True, eq=False)
class GlobalAnisotropy:
    beta: float
    basis: EigenBasis
    theta: float

    def __iter__(self):
        return iter((self.beta, self.basis, self.theta))


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: np.ndarray  # grid[ix, iy], ix along z1
    x: np.ndarray  # grid node coordinates along z1
    y: np.ndarray  # along z2
    bandwidth: np.ndarray
    cell_area: float
    raw_mass: float  # KDE mass captured by the grid before renormalization
    mass_threshold: float | None = None

    def cell_of(self, points):
        """(ix, iy) of the grid cell holding each point."""
        p = np.asarray(points, dtype=float)
        dx = self.x[1] - self.x[0]
        dy = self.y[1] - self.y[0]
        ix = np.clip(np.rint((p[:, 0] - self.x[0]) / dx).astype(np.int64), 0, self.x.size - 1)
        iy = np.clip(np.rint((p[:, 1] - self.y[0]) / dy).astype(np.int64), 0, self.y.size - 1)
        return ix, iy

    def total_mass(self):
        return float(self.grid.sum() * self.cell_area)


@dataclass(frozen=True)
class LocalRegion:
    beta: float
    count: int
    theta: float = 0.0


@dataclass(frozen=True, eq=False)
class AnisotropyEstimate:
    beta_mvee: float
    beta_global: float
    beta_harmonic: float | None
    beta_locals: list = field(default_factory=list)
    theta_global: float = 0.0
    mvee_converged: bool = True

    @property
    def n_local(self):
        return len(self.beta_locals)


def _check_points(points, minimum=3):
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise InputError("points must be an N x 2 matrix")
    if p.shape[0] < minimum:
        raise InputError(f"need at least {minimum} points")
    return p


def _is_collinear(p):
    s = np.linalg.svd(p - p.mean(axis=0), compute_uv=False)
    return s[0] == 0 or s[-1] <= 1e-12 * s[0]


def mvee_khachiyan(points, tol=MVEE_TOL, max_iter=MVEE_MAX_ITER, return_state=False):
    """Minimum-volume enclosing ellipse by Khachiyan's coordinate-ascent on
    the sample weights.

    Each iteration moves weight toward the point with the largest
    ``M = diag(Q^T (Q diag(u) Q^T)^{-1} Q)``; iteration stops once the
    Euclidean norm of the weight update falls below ``tol``.
    """
    p = _check_points(points)
    if tol <= 0:
        raise InputError("tol must be positive")
    if _is_collinear(p):
        raise DegenerateError("points are collinear; no enclosing ellipse of positive area")
    n, d = p.shape
    Q = np.vstack([p.T, np.ones(n)])
    u = np.full(n, 1.0 / n)
    state = MveeSolverState(Q, u, tol=tol)
    converged = False
    xs, ys = p[:, 0].copy(), p[:, 1].copy()
    xl, yl = xs.tolist(), ys.tolist()
    for it in range(1, max_iter + 1):
        if it % REFRESH_EVERY == 1:
            # exact recomputation; in between, rank-one (Sherman-Morrison)
            # updates with the common 1/(1 - step) factors kept as scalars:
            # true u = su * u, true M = sm * M, true inverse = sm * a.
            # The symmetric 3 x 3 inverse a is held as Python floats since
            # small-matrix numpy calls cost more than the arithmetic.
            u = u / u.sum()
            inv = np.linalg.inv((Q * u) @ Q.T)
            M = np.einsum("ij,ik,kj->j", Q, inv, Q)
            usq = float(u @ u)
            su = sm = 1.0
            (a00, a01, a02), (_, a11, a12), (_, _, a22) = inv.tolist()
        j = int(M.argmax())
        mj = sm * float(M[j])
        uj = su * float(u[j])
        step = (mj - d - 1.0) / ((d + 1.0) * (mj - 1.0))
        keep = 1.0 - step
        change = step * (usq - 2.0 * uj + 1.0) ** 0.5
        usq = keep * keep * usq + 2.0 * keep * step * uj + step * step
        su *= keep
        u[j] += step / su
        xj, yj = xl[j], yl[j]
        w0 = a00 * xj + a01 * yj + a02
        w1 = a01 * xj + a11 * yj + a12
        w2 = a02 * xj + a12 * yj + a22
        f = sm * step / (keep + step * mj)
        a00 -= f * w0 * w0
        a01 -= f * w0 * w1
        a02 -= f * w0 * w2
        a11 -= f * w1 * w1
        a12 -= f * w1 * w2
        a22 -= f * w2 * w2
        g = xs * w0
        g += ys * w1
        g += w2
        g *= g
        g *= f
        M -= g
        sm /= keep
        if change < tol:
            converged = True
            break
    u = u * su
    u = u / u.sum()
    sigma = (Q * u) @ Q.T
    state.iteration, state.sigma_w, state.step_norm = it, sigma, change
    state.M = np.einsum("ij,ik,kj->j", Q, np.linalg.inv(sigma), Q)
    state.u = u
    if not converged:
        raise NoConvergenceError(f"Khachiyan iteration did not converge in {max_iter} steps")
    c = p.T @ u
    scatter = (p.T * u) @ p - np.outer(c, c)
    shape = np.linalg.inv(scatter) / d
    ell = Ellipse.from_shape(c, shape)
    return (ell, state) if return_state else ell


def beta_from_ellipse(e: Ellipse) -> float:
    return e.semi_major / e.semi_minor


def eigen_basis(points):
    p = _check_points(points)
    cov = np.cov(p - p.mean(axis=0), rowvar=False)
    evals, evecs = np.linalg.eigh(cov)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    if evals[0] <= 0 or evals[1] <= 1e-12 * evals[0]:
        raise SingularCovarianceError("covariance of the points is singular")
    # sign convention: principal axis angle in (-pi/2, pi/2]
    for col in range(2):
        v = evecs[:, col]
        if v[0] < 0 or (v[0] == 0 and v[1] < 0):
            evecs[:, col] = -v
    return EigenBasis(evecs, evals)


def global_anisotropy(points) -> GlobalAnisotropy:
    """Ratio of the principal standard deviations of the centered cloud, and
    the orientation of the principal axis."""
    basis = eigen_basis(points)
    beta = float(np.sqrt(basis.eigenvalues[0] / basis.eigenvalues[1]))
    v = basis.principal
    theta = _wrap_half_turn(np.arctan2(v[1], v[0]))
    return GlobalAnisotropy(beta, basis, theta)


def kde2d(points, grid_size=GRID_SIZE, pad=GRID_PAD) -> DensityField:
    """Product-Gaussian KDE on a grid_size x grid_size lattice over the
    bounding box padded by ``pad`` of its extent on every side.

    Bandwidth per axis is Scott's rule, sigma * N^(-1/6). The field is
    renormalized to unit mass on the grid; ``raw_mass`` keeps the captured
    fraction.
    """
    p = _check_points(points)
    if grid_size < 2:
        raise InputError("grid_size must be >= 2")
    n = p.shape[0]
    sd = p.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        raise DegenerateAxisError("zero variance along a latent axis")
    h = sd * n ** (-1.0 / 6.0)
    lo, hi = p.min(axis=0), p.max(axis=0)
    span = hi - lo
    gx = np.linspace(lo[0] - pad * span[0], hi[0] + pad * span[0], grid_size)
    gy = np.linspace(lo[1] - pad * span[1], hi[1] + pad * span[1], grid_size)
    kx = np.exp(-0.5 * ((gx[None, :] - p[:, 0:1]) / h[0]) ** 2) / (np.sqrt(2 * np.pi) * h[0])
    ky = np.exp(-0.5 * ((gy[None, :] - p[:, 1:2]) / h[1]) ** 2) / (np.sqrt(2 * np.pi) * h[1])
    dens = kx.T @ ky / n
    area = (gx[1] - gx[0]) * (gy[1] - gy[0])
    raw = float(dens.sum() * area)
    dens /= raw
    return DensityField(dens, gx, gy, h, float(area), raw)


def mass_contour_threshold(fld: DensityField, mass=MASS) -> float:
    """Largest density level t whose super-level set {density >= t} holds at
    least ``mass`` of the probability."""
    if not 0.0 < mass <= 1.0:
        raise InputError("mass must lie in (0, 1]")
    if mass >= 1.0:
        return 0.0
    flat = np.sort(fld.grid.ravel())[::-1]
    cum = np.cumsum(flat) * fld.cell_area
    cum /= cum[-1]
    k = int(np.searchsorted(cum, mass, side="left"))
    return float(flat[min(k, flat.size - 1)])


def density_regions(fld: DensityField, mass=MASS):
    """Label array of 4-connected super-threshold regions (0 = background)
    and the threshold used."""
    t = mass_contour_threshold(fld, mass)
    labels, count = ndimage.label(fld.grid >= t)
    return labels, count, t


def local_anisotropy(points, grid_size=GRID_SIZE, mass=MASS, min_samples=MIN_REGION_SAMPLES):
    """Global-method anisotropy inside each contiguous high-density region.

    Samples are assigned to the region of their grid cell; samples in cells
    below the threshold belong to no region. Regions with fewer than
    ``min_samples`` samples, or with a singular covariance, are skipped.
    """
    p = _check_points(points)
    fld = kde2d(p, grid_size)
    labels, count, _ = density_regions(fld, mass)
    ix, iy = fld.cell_of(p)
    member = labels[ix, iy]
    out = []
    for r in range(1, count + 1):
        sel = p[member == r]
        if sel.shape[0] < min_samples:
            continue
        try:
            g = global_anisotropy(sel)
        except SingularCovarianceError:
            continue
        out.append(LocalRegion(g.beta, int(sel.shape[0]), g.theta))
    if not out:
        raise NoRegionsError("no density region holds enough samples")
    return out


def harmonic_mean(betas):
    b = np.asarray(list(betas), dtype=float)
    if b.size == 0:
        raise EmptyListError("harmonic mean of an empty list")
    if np.any(b <= 0):
        raise InputError("anisotropic ratios must be positive")
    return float(b.size / np.sum(1.0 / b))


def delta_series(betas):
    """Absolute percentage change between consecutive values."""
    b = np.asarray(betas, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise InputError("need a series of at least two values")
    prev = b[:-1]
    if np.any(prev == 0):
        raise ZeroBaselineError("zero baseline in percentage change")
    return 100.0 * np.abs(b[1:] - prev) / np.abs(prev)


def estimate_anisotropy(points, grid_size=GRID_SIZE, tol=MVEE_TOL) -> AnisotropyEstimate:
    """All three estimators side by side for one latent space.

    A Khachiyan solve that exhausts its iteration budget leaves
    ``beta_mvee`` as NaN with ``mvee_converged=False`` instead of raising.
    """
    p = _check_points(points)
    try:
        b_mvee, converged = beta_from_ellipse(mvee_khachiyan(p, tol)), True
    except NoConvergenceError:
        b_mvee, converged = float("nan"), False
    glob = global_anisotropy(p)
    try:
        locals_ = local_anisotropy(p, grid_size)
    except NoRegionsError:
        locals_ = []
    harm = harmonic_mean([r.beta for r in locals_]) if locals_ else None
    return AnisotropyEstimate(b_mvee, glob.beta, harm, locals_, glob.theta, converged)
