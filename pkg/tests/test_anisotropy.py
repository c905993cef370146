import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from latentstab.anisotropy import (
    Ellipse,
    beta_from_ellipse,
    delta_series,
    density_regions,
    estimate_anisotropy,
    global_anisotropy,
    harmonic_mean,
    kde2d,
    local_anisotropy,
    mass_contour_threshold,
    mvee_khachiyan,
)
from latentstab.errors import (
    DegenerateAxisError,
    DegenerateError,
    EmptyListError,
    NoConvergenceError,
    SingularCovarianceError,
    ZeroBaselineError,
)

SQUARE = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])


def ellipse_points(a, b, n, phase=0.0):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False) + phase
    return np.c_[a * np.cos(t), b * np.sin(t)]


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def local_maxima(grid):
    g = np.pad(grid, 1, constant_values=-np.inf)
    c = g[1:-1, 1:-1]
    peak = np.ones_like(c, dtype=bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx or dy:
                peak &= c > g[1 + dx : g.shape[0] - 1 + dx, 1 + dy : g.shape[1] - 1 + dy]
    return int(peak.sum())


def test_mvee_square():
    e, state = mvee_khachiyan(SQUARE, return_state=True)
    np.testing.assert_allclose(e.center, [0, 0], atol=1e-9)
    assert beta_from_ellipse(e) == pytest.approx(1.0, abs=1e-2)
    assert e.semi_major == pytest.approx(np.sqrt(2), rel=1e-2)
    assert np.all(state.u >= 0) and abs(state.u.sum() - 1) <= 1e-12


def test_mvee_analytic_ellipse():
    e = mvee_khachiyan(ellipse_points(2.0, 1.0, 12))
    assert beta_from_ellipse(e) == pytest.approx(2.0, abs=2e-2)
    assert abs(e.theta) < 1e-2


def test_mvee_translation_equivariance(rng):
    p = rng.normal(size=(40, 2))
    a = mvee_khachiyan(p)
    b = mvee_khachiyan(p + [5.0, -3.0])
    np.testing.assert_allclose(b.center - a.center, [5.0, -3.0], atol=1e-8)
    np.testing.assert_allclose(b.shape, a.shape, atol=1e-8)


@settings(max_examples=25)
@given(st.integers(0, 2**32), st.floats(-3.0, 3.0))
def test_mvee_rotation_equivariance(seed, angle):
    p = np.random.default_rng(seed).normal(size=(30, 2)) * [2.0, 0.7]
    a = mvee_khachiyan(p)
    r = rotation(angle)
    b = mvee_khachiyan(p @ r.T)
    assert beta_from_ellipse(b) == pytest.approx(beta_from_ellipse(a), abs=1e-6)
    np.testing.assert_allclose(b.shape, r @ a.shape @ r.T, atol=1e-6 * np.abs(a.shape).max())


@settings(max_examples=30)
@given(st.integers(0, 2**32), st.integers(3, 80), st.sampled_from([1e-2, 1e-3, 1e-4]))
def test_mvee_containment(seed, n, tol):
    p = np.random.default_rng(seed).standard_t(3, size=(n, 2))
    e = mvee_khachiyan(p, tol)
    assert e.mahalanobis_sq(p).max() <= 1 + 10 * tol
    assert beta_from_ellipse(e) >= 1.0


def test_mvee_tight_tolerance_with_budget(rng):
    p = rng.standard_t(3, size=(4, 2))
    e, state = mvee_khachiyan(p, 1e-6, max_iter=2_000_000, return_state=True)
    assert state.iteration > 10000
    assert e.mahalanobis_sq(p).max() <= 1 + 1e-5


def test_estimate_tolerates_nonconvergence(rng, monkeypatch):
    import latentstab.anisotropy as mod

    monkeypatch.setattr(mod, "MVEE_MAX_ITER", 3)
    monkeypatch.setattr(mod.mvee_khachiyan, "__defaults__", (mod.MVEE_TOL, 3, False))
    est = estimate_anisotropy(rng.normal(size=(200, 2)))
    assert not est.mvee_converged and np.isnan(est.beta_mvee)
    assert est.beta_global >= 1


def test_mvee_errors():
    with pytest.raises(DegenerateError):
        mvee_khachiyan([[0, 0], [1, 1], [2, 2], [3, 3]])
    with pytest.raises(NoConvergenceError):
        mvee_khachiyan(np.random.default_rng(0).normal(size=(50, 2)), tol=1e-12, max_iter=5)


def test_ellipse_from_shape():
    t = np.pi / 6
    r = rotation(t)
    shape = r @ np.diag([1 / 4.0, 1.0]) @ r.T
    e = Ellipse.from_shape(np.zeros(2), shape)
    assert (e.semi_major, e.semi_minor) == pytest.approx((2.0, 1.0))
    assert beta_from_ellipse(e) == pytest.approx(2.0)
    assert e.theta == pytest.approx(t)


def test_global_circle():
    for radius in (0.01, 1.0, 300.0):
        g = global_anisotropy(radius * ellipse_points(1, 1, 64))
        assert g.beta == pytest.approx(1.0, abs=1e-6)


def test_global_monte_carlo(rng):
    p = rng.multivariate_normal([0, 0], np.diag([4.0, 1.0]), size=50000)
    beta, basis, theta = global_anisotropy(p)
    assert beta == pytest.approx(2.0, abs=0.05)
    assert theta == pytest.approx(0.0, abs=0.05)
    np.testing.assert_allclose(basis.eigenvectors.T @ basis.eigenvectors, np.eye(2), atol=1e-10)
    assert basis.eigenvalues[0] >= basis.eigenvalues[1] >= 0


@pytest.mark.parametrize("angle", [0.3, 1.2, -0.9, np.pi / 2])
def test_global_orientation(rng, angle):
    p = rng.normal(size=(20000, 2)) * [3.0, 1.0] @ rotation(angle).T
    theta = global_anisotropy(p).theta
    assert -np.pi / 2 < theta <= np.pi / 2
    diff = (theta - angle + np.pi / 2) % np.pi - np.pi / 2
    assert abs(diff) < 0.05


def test_global_singular():
    with pytest.raises(SingularCovarianceError):
        global_anisotropy([[0, 0], [1, 1], [2, 2]])


def test_kde_mass_and_unimodal(rng):
    # reflection-symmetric about its mean, so the density peak sits at the mean
    q = rng.normal(size=(100, 2)) * 0.1
    p = np.vstack([q, q * [-1, 1], q * [1, -1], -q]) + [3.0, -1.0]
    f = kde2d(p)
    assert f.grid.shape == (256, 256)
    assert np.all(f.grid >= 0)
    assert f.total_mass() == pytest.approx(1.0, abs=1e-3)
    assert 0.99 < f.raw_mass <= 1.0 + 1e-9
    # ignore sampling ripples in the far tails
    assert local_maxima(np.where(f.grid > 0.05 * f.grid.max(), f.grid, 0.0)) == 1
    peak = np.unravel_index(np.argmax(f.grid), f.grid.shape)
    ix, iy = f.cell_of(p.mean(axis=0)[None, :])
    assert abs(peak[0] - ix[0]) <= 1 and abs(peak[1] - iy[0]) <= 1


def test_kde_bimodal(rng):
    p = np.vstack([rng.normal(size=(300, 2)), rng.normal(size=(300, 2)) + [10.0, 0.0]])
    g = kde2d(p).grid
    assert local_maxima(np.where(g > 0.05 * g.max(), g, 0.0)) == 2


def test_kde_degenerate_axis():
    with pytest.raises(DegenerateAxisError):
        kde2d([[0, 1], [1, 1], [2, 1]])


def test_threshold_limits(rng):
    f = kde2d(rng.normal(size=(300, 2)))
    assert mass_contour_threshold(f, 1.0) == 0.0
    assert mass_contour_threshold(f, 1e-9) == pytest.approx(f.grid.max())
    t = mass_contour_threshold(f, 0.95)
    above = f.grid >= t
    assert f.grid[above].sum() * f.cell_area >= 0.95
    # t is the largest such level: dropping the cells at t loses the mass
    assert f.grid[f.grid > t].sum() * f.cell_area < 0.95


def test_threshold_chi2_area(rng):
    p = rng.normal(size=(20000, 2))
    f = kde2d(p)
    t = mass_contour_threshold(f, 0.95)
    area = (f.grid >= t).sum() * f.cell_area
    expect = np.pi * chi2.ppf(0.95, 2)
    assert area == pytest.approx(expect, rel=0.10)


def test_local_single_cloud(rng):
    p = rng.normal(size=(2000, 2)) * [1.6, 1.0]
    regions = local_anisotropy(p)
    main = max(regions, key=lambda r: r.count)
    assert main.count > 0.9 * len(p)
    assert main.beta == pytest.approx(global_anisotropy(p).beta, abs=0.1)


def test_local_two_round_clusters(rng):
    p = np.vstack([rng.normal(size=(800, 2)), rng.normal(size=(800, 2)) + [12.0, 12.0]])
    labels, count, _ = density_regions(kde2d(p))
    regions = local_anisotropy(p)
    big = [r for r in regions if r.count > 500]
    assert len(big) == 2
    for r in big:
        assert r.beta == pytest.approx(1.0, abs=0.1)
    assert count >= 2


def test_harmonic_examples():
    assert harmonic_mean([1, 1]) == 1.0
    assert harmonic_mean([1.37]) == pytest.approx(1.37)
    assert harmonic_mean([1.70, 1.12]) == pytest.approx(1.3504, abs=1e-4)
    with pytest.raises(EmptyListError):
        harmonic_mean([])


@given(st.lists(st.floats(1.0, 50.0), min_size=1, max_size=20))
def test_am_hm(betas):
    h = harmonic_mean(betas)
    am = float(np.mean(betas))
    assert h <= am * (1 + 1e-12)
    if max(betas) - min(betas) > 1e-6 * max(betas):
        assert h < am


def test_delta_examples():
    np.testing.assert_allclose(delta_series([2.0, 1.5]), [25.0])
    assert np.all(delta_series([1.3] * 6) == 0)
    with pytest.raises(ZeroBaselineError):
        delta_series([1.0, 0.0, 2.0])


@given(st.lists(st.floats(0.1, 100.0), min_size=2, max_size=20), st.floats(0.01, 100.0))
def test_delta_scale_invariant(betas, c):
    np.testing.assert_allclose(delta_series(np.array(betas) * c), delta_series(betas), rtol=1e-9, atol=1e-9)


def test_estimate_all_at_least_one(rng):
    p = rng.normal(size=(300, 2)) @ np.array([[1.0, 0.4], [0.0, 0.6]])
    est = estimate_anisotropy(p)
    assert est.beta_mvee >= 1 and est.beta_global >= 1
    assert all(r.beta >= 1 for r in est.beta_locals)
    assert est.n_local == len(est.beta_locals) >= 1
    assert est.beta_harmonic == pytest.approx(harmonic_mean([r.beta for r in est.beta_locals]))
