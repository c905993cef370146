import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from latentstab.dataspace import (
    HIGH_CORRELATION,
    StandardizationParams,
    SyntheticSpec,
    TabularDataset,
    cholesky_factor,
    generate_synthetic,
    load_csv,
    restore_order,
    shuffle_tracked,
    standardize,
    write_csv,
)
from latentstab.errors import (
    ConstantColumnError,
    InputError,
    NonFiniteError,
    NotPositiveDefiniteError,
    ParseError,
    RaggedRowsError,
    UnknownLabelColumnError,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_standardize_simple_column():
    ds, params = standardize(np.array([[1.0], [2.0], [3.0]]))
    np.testing.assert_allclose(ds.values[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-9)
    assert params.means[0] == 2.0


def test_standardize_moments(rng):
    raw = rng.normal(3.0, 7.0, size=(100, 5))
    ds, _ = standardize(raw)
    # independent recomputation of the moments
    for j in range(5):
        col = ds.values[:, j]
        mean = sum(col) / len(col)
        var = sum((c - mean) ** 2 for c in col) / len(col)
        assert abs(mean) <= 1e-10
        assert abs(var**0.5 - 1) <= 1e-10


def test_standardize_idempotent(rng):
    once, _ = standardize(rng.normal(size=(50, 3)))
    twice, _ = standardize(once.values)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-10)


@given(hnp.arrays(float, st.tuples(st.integers(3, 20), st.integers(1, 4)), elements=finite))
def test_standardize_roundtrip(raw):
    try:
        ds, params = standardize(raw)
    except ConstantColumnError:
        return
    back = params.invert(ds.values)
    scale = np.maximum(np.abs(raw), np.abs(params.means) + params.stddevs)
    assert np.all(np.abs(back - raw) <= 1e-12 * scale)


def test_standardize_errors():
    with pytest.raises(ConstantColumnError):
        standardize(np.array([[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]]))
    with pytest.raises(NonFiniteError):
        standardize(np.array([[1.0], [np.nan], [3.0]]))
    with pytest.raises(InputError):
        standardize(np.ones((2, 1)))


def test_params_apply_invert():
    p = StandardizationParams(np.array([1.0, -2.0]), np.array([2.0, 0.5]))
    x = np.array([[3.0, 0.0]])
    np.testing.assert_allclose(p.invert(p.apply(x)), x, rtol=1e-12)


def test_dataset_invariants():
    with pytest.raises(InputError):
        TabularDataset(np.zeros((5, 2)), labels=np.array([0, 1, 3, 0, 1]), class_count=4)  # class 2 empty
    with pytest.raises(InputError):
        TabularDataset(np.zeros((3, 2)), sample_ids=np.array([0, 0, 1]))
    ds = TabularDataset(np.zeros((4, 2)), labels=np.array([1, 0, 1, 0]))
    assert ds.class_count == 2
    assert ds.feature_names == ["x1", "x2"]


def test_synthetic_low_correlation():
    ds = generate_synthetic(SyntheticSpec.low_correlation(1000, seed=3))
    c = np.corrcoef(ds.values, rowvar=False)
    off = c[~np.eye(4, dtype=bool)]
    # sampling sd of r at N=1000 is ~0.032; 0.1 is > 3 sd
    assert np.abs(off).max() < 0.1
    assert ds.class_count == 4
    assert np.bincount(ds.labels).min() > 0


def test_synthetic_target_correlation():
    target = np.eye(3)
    target[0, 1] = target[1, 0] = 0.8
    ds = generate_synthetic(SyntheticSpec(10000, 3, target, 4, seed=11))
    x, y = ds.values[:, 0], ds.values[:, 1]
    r = np.sum((x - x.mean()) * (y - y.mean())) / np.sqrt(np.sum((x - x.mean()) ** 2) * np.sum((y - y.mean()) ** 2))
    assert abs(r - 0.8) < 0.03


def test_synthetic_deterministic():
    spec = SyntheticSpec.high_correlation(200, seed=42)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a.values.tobytes() == b.values.tobytes()
    assert np.array_equal(a.labels, b.labels)
    c = generate_synthetic(SyntheticSpec.high_correlation(200, seed=43))
    assert not np.array_equal(a.values, c.values)


def test_cholesky_reconstructs_target():
    L = cholesky_factor(HIGH_CORRELATION)
    np.testing.assert_allclose(L @ L.T, HIGH_CORRELATION, atol=1e-12)


def test_not_positive_definite():
    bad = np.array([[1.0, 0.99, -0.99], [0.99, 1.0, 0.99], [-0.99, 0.99, 1.0]])
    with pytest.raises(NotPositiveDefiniteError):
        generate_synthetic(SyntheticSpec(100, 3, bad, 2, 0))


def test_spec_rejects_asymmetric():
    m = np.eye(2)
    m[0, 1] = 0.5
    with pytest.raises(InputError):
        SyntheticSpec(100, 2, m)


def test_spec_from_json(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text('{"sample_size": 50, "target_correlation": [[1, 0.3], [0.3, 1]], "class_count": 3, "seed": 9}')
    spec = SyntheticSpec.from_json(p)
    assert spec.dim == 2 and spec.class_count == 3 and spec.seed == 9
    assert generate_synthetic(spec).n_samples == 50


def test_shuffle_restore(rng):
    ds = TabularDataset(rng.normal(size=(7, 3)))
    sh, perm = shuffle_tracked(ds, 5)
    assert np.array_equal(sh.values, ds.values[perm])
    assert np.array_equal(sh.sample_ids, perm)
    assert np.array_equal(restore_order(sh.values, perm), ds.values)


def test_restore_identity():
    m = np.arange(12.0).reshape(6, 2)
    assert np.array_equal(restore_order(m, np.arange(6)), m)


@given(st.integers(3, 40), st.integers(0, 2**63))
def test_shuffle_preserves_rows(n, seed):
    ds = TabularDataset(np.arange(n * 2, dtype=float).reshape(n, 2))
    sh, perm = shuffle_tracked(ds, seed)
    assert sorted(map(tuple, sh.values)) == sorted(map(tuple, ds.values))
    assert np.array_equal(restore_order(sh.values, perm), ds.values)


def test_csv_roundtrip_and_label_remap(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,class\n1.5,2,3\n0.5,1,1\n2.5,-1,3\n")
    ds = load_csv(p)
    assert ds.feature_names == ["a", "b"]
    assert list(ds.labels) == [1, 0, 1]
    assert ds.class_count == 2
    q = tmp_path / "e.csv"
    write_csv(ds, q)
    again = load_csv(q)
    assert np.array_equal(again.values, ds.values)
    assert np.array_equal(again.labels, ds.labels)


def test_csv_without_labels(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n3,4\n5,7\n")
    ds = load_csv(p)
    assert ds.labels is None and ds.class_count is None


def test_csv_errors(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("a,b\n1,2\n3\n4,5\n")
    with pytest.raises(RaggedRowsError):
        load_csv(p)
    p = tmp_path / "text.csv"
    p.write_text("a,b\n1,2\nx,4\n4,5\n")
    with pytest.raises(ParseError):
        load_csv(p)
    p = tmp_path / "ok.csv"
    p.write_text("a,b\n1,2\n3,4\n4,5\n")
    with pytest.raises(UnknownLabelColumnError):
        load_csv(p, label_column="target")
    with pytest.raises(UnknownLabelColumnError):
        load_csv(p, require_labels=True)


def test_wine_shape():
    sklearn = pytest.importorskip("sklearn.datasets")
    import csv
    import io
    import tempfile

    d = sklearn.load_wine()
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(list(d.feature_names) + ["class"])
    for x, y in zip(d.data, d.target):
        w.writerow(list(x) + [int(y) + 1])
    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        fh.write(buf.getvalue())
    ds = load_csv(fh.name)
    assert (ds.n_samples, ds.n_features, ds.class_count) == (178, 13, 3)
