import logging

import numpy as np
import pytest

from src.data import (
    CSVParseError,
    DataError,
    Dataset,
    DesignMatrix,
    EigenSolverError,
    apply_normalization,
    kfold_split,
    load_csv,
    load_feature_matrix,
    normalize_columns,
    precompute,
    sym_eigendecompose,
    take_rows,
)
from tests.helpers import random_problem

SMALL_CSV = "a,b,y\n1,2,3\n4,5,6\n7,8,9\n"


@pytest.fixture
def small_csv(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text(SMALL_CSV, encoding="utf-8")
    return str(path)


def _signed_permutation(V):
    A = np.abs(V)
    return np.allclose(np.sort(A, axis=1)[:, -1], 1.0) and np.allclose(A.sum(axis=1), 1.0)


# ─── Dataset ─────────────────────────────────────────────────────────


def test_dataset_rejects_non_finite():
    with pytest.raises(DataError, match="non-finite"):
        Dataset(features=np.array([[1.0], [np.inf]]), targets=np.zeros(2))


def test_dataset_rejects_length_mismatch():
    with pytest.raises(DataError, match="does not match"):
        Dataset(features=np.ones((3, 2)), targets=np.zeros(2))


def test_dataset_arrays_are_read_only():
    d = Dataset(features=np.ones((2, 1)), targets=np.zeros(2))
    with pytest.raises(ValueError):
        d.features[0, 0] = 5.0


def test_design_matrix_only_identity_basis():
    with pytest.raises(DataError, match="basis"):
        DesignMatrix(phi=np.eye(2), basis="rbf")


# ─── CSV ingestion ──────────────────────────────────────────────────


def test_load_csv_by_name(small_csv):
    d = load_csv(small_csv, "y")
    assert (d.m, d.n) == (3, 2)
    np.testing.assert_array_equal(d.targets, [3.0, 6.0, 9.0])
    np.testing.assert_array_equal(d.features[:, 0], [1.0, 4.0, 7.0])
    assert d.column_names == ["a", "b"]


@pytest.mark.parametrize("target", [0, "0"])
def test_load_csv_by_index(small_csv, target):
    d = load_csv(small_csv, target)
    np.testing.assert_array_equal(d.targets, [1.0, 4.0, 7.0])
    assert d.column_names == ["b", "y"]


def test_load_csv_without_header(tmp_path):
    path = tmp_path / "nohead.csv"
    path.write_text("1,2,3\n4,5,6\n", encoding="utf-8")
    d = load_csv(str(path), 2, has_header=False)
    np.testing.assert_array_equal(d.targets, [3.0, 6.0])
    assert d.column_names is None


def test_load_csv_unknown_target(small_csv):
    with pytest.raises(DataError, match="unknown target column"):
        load_csv(small_csv, "z")


def test_load_csv_reports_bad_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,y\n1,2,3\n4,NaN,6\n", encoding="utf-8")
    with pytest.raises(CSVParseError) as excinfo:
        load_csv(str(path), "y")
    assert excinfo.value.line == 3
    assert excinfo.value.column == "b"
    assert "line 3" in str(excinfo.value)


def test_load_csv_rejects_text(tmp_path):
    path = tmp_path / "text.csv"
    path.write_text("a,y\n1,2\nabc,3\n", encoding="utf-8")
    with pytest.raises(CSVParseError, match="abc"):
        load_csv(str(path), "y")


def test_load_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        load_csv(str(path), "y")


def test_load_csv_target_only(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("y\n1\n2\n", encoding="utf-8")
    with pytest.raises(DataError, match="no feature columns"):
        load_csv(str(path), "y")


def test_load_feature_matrix_excludes_column(small_csv):
    X = load_feature_matrix(small_csv, exclude_column="y")
    np.testing.assert_array_equal(X, [[1, 2], [4, 5], [7, 8]])
    assert load_feature_matrix(small_csv).shape == (3, 3)


def test_take_rows_keeps_order():
    d = Dataset(features=np.arange(8.0).reshape(4, 2), targets=np.arange(4.0))
    sub = take_rows(d, np.array([3, 1]))
    np.testing.assert_array_equal(sub.targets, [3.0, 1.0])
    np.testing.assert_array_equal(sub.features, [[6.0, 7.0], [2.0, 3.0]])


# ─── Normalization ──────────────────────────────────────────────────


def test_normalize_single_column():
    d = Dataset(features=np.array([[1.0], [2.0], [3.0]]), targets=np.zeros(3))
    phi, report = normalize_columns(d)
    s = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(phi.phi[:, 0], [-s, 0.0, s], atol=1e-15)
    np.testing.assert_allclose(report.means, [2.0])
    np.testing.assert_allclose(report.norms, [np.sqrt(2.0)])


def test_normalize_drops_constant_column(caplog):
    d = Dataset(features=np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]), targets=np.zeros(3))
    with caplog.at_level(logging.WARNING, logger="blrs"):
        phi, report = normalize_columns(d)
    assert report.dropped_columns == [0]
    assert phi.M == 1
    assert report.feature_count == 2
    assert "constant" in caplog.text


def test_normalize_all_constant_is_error():
    d = Dataset(features=np.full((3, 1), 5.0), targets=np.zeros(3))
    with pytest.raises(DataError, match="constant"):
        normalize_columns(d)


def test_normalize_needs_two_rows():
    with pytest.raises(DataError):
        normalize_columns(Dataset(features=np.ones((1, 2)), targets=np.zeros(1)))


def test_normalize_keeps_collinear_columns():
    col = np.array([1.0, 4.0, 2.0, 8.0])
    d = Dataset(features=np.column_stack([col, 2.0 * col]), targets=np.zeros(4))
    phi, report = normalize_columns(d)
    assert report.dropped_columns == []
    np.testing.assert_allclose(phi.phi[:, 0], phi.phi[:, 1], atol=1e-15)


def test_normalize_is_idempotent():
    rng = np.random.default_rng(3)
    d = Dataset(features=rng.normal(5.0, 3.0, (40, 6)), targets=np.zeros(40))
    phi, _ = normalize_columns(d)
    again, _ = normalize_columns(Dataset(features=phi.phi, targets=np.zeros(40)))
    assert np.max(np.abs(again.phi - phi.phi)) <= 1e-12
    np.testing.assert_allclose(np.linalg.norm(phi.phi, axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(phi.phi.mean(axis=0), 0.0, atol=1e-12)


def test_normalize_warns_when_wide(caplog):
    rng = np.random.default_rng(4)
    d = Dataset(features=rng.standard_normal((3, 5)), targets=np.zeros(3))
    with caplog.at_level(logging.WARNING, logger="blrs"):
        phi, _ = normalize_columns(d)
    assert phi.M == 5
    assert "exceeds" in caplog.text


def test_apply_normalization_reproduces_training_design():
    rng = np.random.default_rng(5)
    X = rng.normal(2.0, 4.0, (20, 3))
    X[:, 1] = 7.0
    d = Dataset(features=X, targets=np.zeros(20))
    phi, report = normalize_columns(d)
    assert np.max(np.abs(apply_normalization(X, report) - phi.phi)) <= 1e-12


def test_apply_normalization_checks_column_count():
    d = Dataset(features=np.array([[1.0, 2.0], [3.0, 5.0], [4.0, 4.0]]), targets=np.zeros(3))
    _, report = normalize_columns(d)
    with pytest.raises(DataError, match="expected 2"):
        apply_normalization(np.ones((2, 3)), report)


# ─── Eigendecomposition ─────────────────────────────────────────────


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_eigen_identity(method):
    V, D = sym_eigendecompose(np.eye(2), method=method)
    np.testing.assert_allclose(D, [1.0, 1.0])
    np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-14)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_eigen_diagonal_is_sorted_descending(method):
    V, D = sym_eigendecompose(np.diag([4.0, 9.0]), method=method)
    np.testing.assert_allclose(D, [9.0, 4.0])
    np.testing.assert_allclose(V, [[0.0, 1.0], [1.0, 0.0]], atol=1e-14)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_eigen_random_reconstruction(method):
    rng = np.random.default_rng(8)
    A = rng.standard_normal((8, 8))
    S = A + A.T
    V, D = sym_eigendecompose(S, method=method)
    assert np.max(np.abs(V @ np.diag(D) @ V.T - S)) < 1e-9
    assert np.max(np.abs(V.T @ V - np.eye(8))) <= 1e-10
    assert np.all(np.diff(D) <= 0.0)
    pivots = V[np.argmax(np.abs(V), axis=0), np.arange(8)]
    assert np.all(pivots > 0.0)


def test_eigen_methods_agree():
    rng = np.random.default_rng(9)
    A = rng.standard_normal((6, 6))
    S = A @ A.T
    V1, D1 = sym_eigendecompose(S, method="lapack")
    V2, D2 = sym_eigendecompose(S, method="jacobi")
    np.testing.assert_allclose(D1, D2, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(V1, V2, atol=1e-7)


@pytest.mark.parametrize("seed", range(40))
@pytest.mark.parametrize("normalized", [False, True])
def test_jacobi_converges_on_gram_matrices(seed, normalized):
    rng = np.random.default_rng(seed)
    dataset = Dataset(features=rng.standard_normal((500, 10)) * rng.uniform(0.1, 10.0, 10), targets=np.zeros(500))
    X = normalize_columns(dataset)[0].phi if normalized else dataset.features
    gram = X.T @ X
    V, D = sym_eigendecompose(gram, method="jacobi")
    assert np.max(np.abs(V @ np.diag(D) @ V.T - gram)) < 1e-9 * np.linalg.norm(gram)
    np.testing.assert_allclose(D, np.linalg.eigvalsh(gram)[::-1], rtol=1e-10, atol=1e-10 * D[0])


def test_jacobi_gives_up_after_sweep_budget(monkeypatch):
    monkeypatch.setattr("src.data.JACOBI_MAX_SWEEPS", 1)
    S = np.array([[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]])
    with pytest.raises(EigenSolverError, match="budget of 1 sweeps"):
        sym_eigendecompose(S, method="jacobi")


def test_jacobi_diagonal_input_needs_no_sweep(monkeypatch):
    monkeypatch.setattr("src.data.JACOBI_MAX_SWEEPS", 1)
    V, D = sym_eigendecompose(np.diag([2.0, 5.0, 1.0]), method="jacobi")
    np.testing.assert_allclose(D, [5.0, 2.0, 1.0])


def test_eigen_rejects_unknown_method():
    with pytest.raises(ValueError, match="unknown eigensolver"):
        sym_eigendecompose(np.eye(2), method="qr")


def test_eigen_rejects_non_square():
    with pytest.raises(ValueError, match="square"):
        sym_eigendecompose(np.ones((2, 3)))


# ─── Spectral precomputation ────────────────────────────────────────


def test_precompute_identity_design():
    phi = DesignMatrix(phi=np.eye(3))
    y = np.array([1.0, 2.0, 3.0])
    pre = precompute(phi, y)
    np.testing.assert_allclose(pre.D, [1.0, 1.0, 1.0])
    assert _signed_permutation(pre.V)
    np.testing.assert_allclose(pre.y_p, y)
    assert pre.y_norm_sq == 14.0
    assert (pre.m, pre.M) == (3, 3)


def test_precompute_orthonormal_columns():
    rng = np.random.default_rng(10)
    Q, _ = np.linalg.qr(rng.standard_normal((10, 4)))
    pre = precompute(DesignMatrix(phi=Q), rng.standard_normal(10))
    np.testing.assert_allclose(pre.D, np.ones(4), atol=1e-12)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_precompute_matches_dense_recomputation(method):
    rng = np.random.default_rng(11)
    phi = DesignMatrix(phi=rng.standard_normal((50, 5)))
    y = rng.standard_normal(50)
    pre = precompute(phi, y, method=method)
    gram = phi.phi.T @ phi.phi
    assert np.max(np.abs(gram - pre.V @ np.diag(pre.D) @ pre.V.T)) < 1e-9
    assert np.max(np.abs(pre.y_pV - pre.V.T @ (phi.phi.T @ y))) <= 1e-10
    assert pre.D.sum() == pytest.approx(np.trace(gram), abs=1e-8)
    assert np.linalg.norm(pre.y_pV) == pytest.approx(np.linalg.norm(pre.y_p), abs=1e-10)


def test_precompute_rank_deficient_design():
    _, _, pre = random_problem(3, 5, seed=12)
    assert np.all(pre.D >= 0.0)
    assert np.count_nonzero(pre.D > 1e-10 * pre.D[0]) <= 3


def test_precompute_is_read_only():
    _, _, pre = random_problem(6, 2, seed=13)
    for arr in (pre.V, pre.D, pre.y_p, pre.y_pV):
        assert not arr.flags.writeable


def test_precompute_rejects_negative_eigenvalue(monkeypatch):
    monkeypatch.setattr("src.data.sym_eigendecompose", lambda S, method: (np.eye(2), np.array([1.0, -1e-3])))
    with pytest.raises(EigenSolverError, match="negative eigenvalue"):
        precompute(DesignMatrix(phi=np.eye(2)), np.ones(2))


def test_precompute_clamps_tiny_negative_eigenvalue(monkeypatch):
    monkeypatch.setattr("src.data.sym_eigendecompose", lambda S, method: (np.eye(2), np.array([1.0, -1e-12])))
    pre = precompute(DesignMatrix(phi=np.eye(2)), np.ones(2))
    np.testing.assert_array_equal(pre.D, [1.0, 0.0])


def test_precompute_rejects_length_mismatch():
    with pytest.raises(ValueError, match="entries"):
        precompute(DesignMatrix(phi=np.eye(3)), np.ones(2))


# ─── Fold split ─────────────────────────────────────────────────────


def test_kfold_partitions_rows():
    parts = kfold_split(23, 5, seed=42)
    assert len(parts) == 5
    np.testing.assert_array_equal(np.sort(np.concatenate(parts)), np.arange(23))
    sizes = [len(p) for p in parts]
    assert max(sizes) - min(sizes) <= 1


def test_kfold_is_seeded():
    a = kfold_split(50, 5, seed=1)
    b = kfold_split(50, 5, seed=1)
    c = kfold_split(50, 5, seed=2)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not all(np.array_equal(x, y) for x, y in zip(a, c))


def test_kfold_errors():
    with pytest.raises(ValueError):
        kfold_split(10, 1, seed=0)
    with pytest.raises(DataError):
        kfold_split(3, 5, seed=0)
