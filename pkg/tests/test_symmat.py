import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elliptope.instances import gen_goe
from elliptope.symmat import (MM_ARRAY_HEADER, MM_COORDINATE_HEADER, MatrixMarketError, SymMatrix,
                              min_eig, op_norm, parse_matrix_market, read_matrix_market,
                              write_matrix_market)


def swap():
    return SymMatrix.from_dense([[0.0, 1.0], [1.0, 0.0]])


def random_sym(gen, n, density=1.0):
    m = gen.uniform(-1, 1, (n, n)) * (gen.random((n, n)) < density)
    return np.tril(m) + np.tril(m, -1).T


@pytest.mark.parametrize("a, x, want", [
    ([[0, 1], [1, 0]], [1, 0], [0, 1]),
    (np.eye(3), [1, 2, 3], [1, 2, 3]),
    (np.ones((3, 3)), [1, 1, 1], [3, 3, 3]),
])
def test_matvec_examples(a, x, want):
    np.testing.assert_array_equal(SymMatrix.from_dense(a).matvec(x), want)


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        swap().matvec([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        swap().matmat(np.ones((3, 2)))


def test_from_dense_rejects_asymmetric():
    with pytest.raises(ValueError):
        SymMatrix.from_dense([[0, 1], [2, 0]])


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**32 - 1), density=st.floats(0.05, 1.0))
def test_dense_and_sparse_matvec_agree(n, seed, density):
    gen = np.random.default_rng(seed)
    m = random_sym(gen, n, density)
    r, c = np.nonzero(np.tril(m))
    sparse = SymMatrix.from_triplets(n, r, c, m[r, c])
    dense = SymMatrix.from_dense(m)
    x = gen.standard_normal(n)
    yd, ys = dense.matvec(x), sparse.matvec(x)
    assert np.allclose(yd, ys, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(yd).max()))
    np.testing.assert_array_equal(sparse.dense(), m)


def test_triplets_accept_either_triangle_and_reject_duplicates():
    a = SymMatrix.from_triplets(2, [0], [1], [1.0])
    b = SymMatrix.from_triplets(2, [1], [0], [1.0])
    np.testing.assert_array_equal(a.dense(), b.dense())
    np.testing.assert_array_equal(a.dense(), swap().dense())
    with pytest.raises(ValueError, match="duplicate"):
        SymMatrix.from_triplets(2, [0, 1], [1, 0], [1.0, 1.0])
    with pytest.raises(ValueError, match="range"):
        SymMatrix.from_triplets(2, [2], [0], [1.0])


def test_triplets_are_lower_and_sorted():
    gen = np.random.default_rng(0)
    m = random_sym(gen, 7, 0.5)
    r, c, v = SymMatrix.from_dense(m).triplets()
    assert np.all(r >= c)
    assert list(zip(r, c)) == sorted(zip(r, c))
    np.testing.assert_array_equal(v, m[r, c])


def test_op_norm_examples():
    assert op_norm(swap(), rel_tol=1e-10).value == pytest.approx(1.0, rel=1e-10)
    for n in (1, 5, 30):
        assert op_norm(SymMatrix.from_dense(np.eye(n))).value == pytest.approx(1.0, rel=1e-12)
    zero = op_norm(SymMatrix.from_dense(np.zeros((3, 3))))
    assert zero.value == 0.0 and zero.converged


def test_op_norm_goe_edge():
    est = op_norm(gen_goe(1000, 7))
    assert est.converged
    assert 1.8 <= est.value <= 2.1


def test_op_norm_matches_dense_eigensolver():
    gen = np.random.default_rng(1)
    for n in (3, 20, 60):
        m = random_sym(gen, n)
        want = np.abs(np.linalg.eigvalsh(m)).max()
        got = op_norm(SymMatrix.from_dense(m), rel_tol=1e-12, max_iter=100000)
        assert got.value == pytest.approx(want, rel=1e-6)


def test_op_norm_unconverged_is_flagged():
    m = random_sym(np.random.default_rng(2), 50)
    est = op_norm(SymMatrix.from_dense(m), rel_tol=1e-15, max_iter=3)
    assert not est.converged and est.iterations == 3


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 30), seed=st.integers(0, 2**32 - 1))
def test_op_norm_bounds(n, seed):
    gen = np.random.default_rng(seed)
    a = SymMatrix.from_dense(random_sym(gen, n))
    est = op_norm(a)
    assert 0.0 <= est.value <= a.frobenius_norm() * (1 + 1e-12)
    for _ in range(10):
        x = gen.standard_normal(n)
        assert est.value >= abs(x @ a.matvec(x)) / (x @ x) * (1 - 1e-9)


@pytest.mark.parametrize("m, want", [
    (np.diag([1.0, 2.0, 3.0]), 1.0),
    ([[0.0, 1.0], [1.0, 0.0]], -1.0),
    (np.ones((3, 3)), 0.0),
])
def test_min_eig_examples(m, want):
    assert min_eig(SymMatrix.from_dense(m)).value == pytest.approx(want, abs=1e-12)


def test_min_eig_lanczos_path_matches_dense():
    gen = np.random.default_rng(3)
    m = random_sym(gen, 80)
    a = SymMatrix.from_dense(m)
    dense = min_eig(a).value
    lanczos = min_eig(a, dense_threshold=10)
    assert lanczos.converged
    assert lanczos.value == pytest.approx(dense, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 25), seed=st.integers(0, 2**32 - 1))
def test_min_eig_interlacing(n, seed):
    m = random_sym(np.random.default_rng(seed), n)
    lo = min_eig(SymMatrix.from_dense(m)).value
    assert np.all(lo <= np.diag(m) + 1e-12)


def test_shifted_matches_dense_formula():
    gen = np.random.default_rng(4)
    m = random_sym(gen, 6, 0.5)
    lam = gen.random(6)
    want = np.diag(lam) - m
    r, c = np.nonzero(np.tril(m))
    for a in (SymMatrix.from_dense(m), SymMatrix.from_triplets(6, r, c, m[r, c])):
        np.testing.assert_allclose(a.shifted(lam).dense(), want, atol=0)


def test_matrix_market_single_entry(tmp_path):
    p = tmp_path / "a.mtx"
    p.write_text(f"{MM_COORDINATE_HEADER}\n2 2 1\n2 1 1.0\n")
    np.testing.assert_array_equal(read_matrix_market(p).dense(), [[0, 1], [1, 0]])


def test_matrix_market_empty_coordinate_list():
    a = parse_matrix_market(f"{MM_COORDINATE_HEADER}\n% comment\n3 3 0\n")
    np.testing.assert_array_equal(a.dense(), np.zeros((3, 3)))


def test_matrix_market_upper_triangle_entry_is_normalized():
    a = parse_matrix_market(f"{MM_COORDINATE_HEADER}\n3 3 2\n1 3 2.5\n2 2 -1\n")
    r, c, v = a.triplets()
    assert list(zip(r.tolist(), c.tolist(), v.tolist())) == [(1, 1, -1.0), (2, 0, 2.5)]


@pytest.mark.parametrize("fmt", ["array", "coordinate"])
def test_matrix_market_round_trip_goe(tmp_path, fmt):
    a = gen_goe(40, 11)
    p = tmp_path / "goe.mtx"
    write_matrix_market(a, p, fmt=fmt)
    b = read_matrix_market(p)
    np.testing.assert_array_equal(a.dense(), b.dense())
    header = p.read_text().splitlines()[0]
    assert header == (MM_ARRAY_HEADER if fmt == "array" else MM_COORDINATE_HEADER)


def test_matrix_market_sparse_round_trip(tmp_path):
    a = SymMatrix.from_triplets(4, [0, 3, 2], [0, 1, 2], [0.1, -1 / 3, 2.0])
    p = tmp_path / "s.mtx"
    write_matrix_market(a, p)
    b = read_matrix_market(p)
    assert b.is_sparse
    np.testing.assert_array_equal(a.dense(), b.dense())
    assert "-0.33333333333333331" in p.read_text()


@pytest.mark.parametrize("text, line", [
    ("%%MatrixMarket matrix coordinate real general\n2 2 0\n", 1),
    (f"{MM_COORDINATE_HEADER}\n2 2 1\n3 1 1.0\n", 3),
    (f"{MM_COORDINATE_HEADER}\n2 2 2\n2 1 1.0\n1 2 1.0\n", 4),
    (f"{MM_COORDINATE_HEADER}\n2 3 0\n", 2),
    (f"{MM_COORDINATE_HEADER}\n2 2 1\n2 1 abc\n", 3),
    (f"{MM_ARRAY_HEADER}\n2 2\n1\n2\n", 4),
])
def test_matrix_market_errors_carry_line_numbers(text, line):
    with pytest.raises(MatrixMarketError) as err:
        parse_matrix_market(text)
    assert err.value.lineno == line
