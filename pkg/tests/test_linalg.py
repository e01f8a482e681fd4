import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prism.linalg import (
    CUBIC,
    DEFAULT_NS,
    MUON_QUINTIC,
    NsCoefficients,
    as_matrix,
    exact_polar,
    frobenius_norm,
    gram_right,
    inv_sqrt_psd,
    matmul,
    newton_schulz_polar,
    svd_polar_oracle,
    symmetric_eig,
)


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def with_condition(rng, rows, cols, cond):
    k = min(rows, cols)
    u = np.linalg.qr(rng.standard_normal((rows, k)))[0]
    v = np.linalg.qr(rng.standard_normal((cols, k)))[0]
    s = np.geomspace(cond, 1.0, k) if k > 1 else np.ones(1)
    return u @ np.diag(s) @ v.T


def numpy_polar(m):
    u, _, vt = np.linalg.svd(m, full_matrices=False)
    return u @ vt


# --- construction ---------------------------------------------------------

def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        as_matrix([1.0, 2.0])
    with pytest.raises(ValueError):
        as_matrix(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_matrix([[np.inf]])


# --- matmul / gram / norm -------------------------------------------------

def test_matmul_examples():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matmul(np.eye(2), a), a)
    np.testing.assert_array_equal(matmul(a, np.eye(2)), a)
    np.testing.assert_array_equal(matmul([[1.0, 1.0]], [[1.0], [1.0]]), [[2.0]])


def test_matmul_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_gram_right_examples():
    np.testing.assert_array_equal(gram_right(np.eye(2)), np.eye(2))
    np.testing.assert_array_equal(gram_right(np.diag([2.0, 3.0])), np.diag([4.0, 9.0]))


def test_gram_right_matches_triple_loop():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((5, 3))
    expected = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(5):
                expected[i, j] += m[k, i] * m[k, j]
    g = gram_right(m)
    np.testing.assert_allclose(g, expected, atol=1e-14)
    np.testing.assert_array_equal(g, g.T)


def test_frobenius_norm_examples():
    assert frobenius_norm(np.zeros((3, 2))) == 0.0
    assert frobenius_norm([[3.0, 4.0]]) == 5.0
    assert frobenius_norm(np.eye(3)) == pytest.approx(np.sqrt(3.0), abs=1e-15)


# --- NS coefficients ------------------------------------------------------

def test_ns_coefficients_validation():
    with pytest.raises(ValueError):
        NsCoefficients(1.5, -0.5, 0.0, iterations=0)
    with pytest.raises(ValueError, match="convergent"):
        NsCoefficients(3.4445, -4.7750, 2.0315, iterations=5)
    assert DEFAULT_NS.a + DEFAULT_NS.b + DEFAULT_NS.c == pytest.approx(1.0, abs=1e-12)
    assert CUBIC.a + CUBIC.b + CUBIC.c == 1.0


def test_muon_quintic_is_not_a_fixed_point_schedule():
    # a+b+c = 0.701: a unit singular value is pushed down, not kept
    assert MUON_QUINTIC.a + MUON_QUINTIC.b + MUON_QUINTIC.c == pytest.approx(0.701, abs=1e-9)
    band = MUON_QUINTIC.scalar_map(np.geomspace(1e-2, 1.0, 500))
    assert 0.6 < band.min() and band.max() < 1.25


# --- Newton-Schulz --------------------------------------------------------

@pytest.mark.parametrize("m", [np.eye(4), np.array([[0.0, 1.0], [1.0, 0.0]])])
def test_ns_fixed_points_cubic(m):
    np.testing.assert_allclose(newton_schulz_polar(m, CUBIC), m, atol=1e-6)


@pytest.mark.parametrize("m", [np.eye(4), np.array([[0.0, 1.0], [1.0, 0.0]])])
def test_ns_fixed_points_default(m):
    np.testing.assert_allclose(newton_schulz_polar(m), m, atol=2e-3)


def test_ns_diag_against_oracle():
    m = np.diag([2.0, 0.5])
    u = newton_schulz_polar(m)
    assert np.linalg.norm(u - svd_polar_oracle(m)) / np.sqrt(2) <= 0.35
    np.testing.assert_allclose(newton_schulz_polar(m, CUBIC), np.eye(2), atol=1e-6)


def test_ns_zero_matrix_errors():
    with pytest.raises(ValueError, match="zero"):
        newton_schulz_polar(np.zeros((3, 2)))


def test_ns_wide_input_runs_on_transpose():
    rng = np.random.default_rng(0)
    m = with_condition(rng, 3, 7, 5.0)
    np.testing.assert_allclose(newton_schulz_polar(m, CUBIC), numpy_polar(m), atol=1e-8)
    np.testing.assert_allclose(newton_schulz_polar(m, CUBIC), newton_schulz_polar(m.T, CUBIC).T, atol=1e-14)


@pytest.mark.parametrize("seed", range(6))
def test_ns_fixed_point_random_orthogonal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 65))
    q = random_orthogonal(rng, n)
    np.testing.assert_allclose(newton_schulz_polar(q, CUBIC), q, atol=1e-6)
    np.testing.assert_allclose(newton_schulz_polar(q), q, atol=2e-3)


@pytest.mark.parametrize("seed", range(20))
def test_ns_agrees_with_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    rows, cols = (int(x) for x in rng.integers(1, 65, size=2))
    m = with_condition(rng, rows, cols, float(rng.uniform(1.0, 20.0)))
    exact = svd_polar_oracle(m)
    cols_eff = min(rows, cols)
    assert np.linalg.norm(newton_schulz_polar(m) - exact) / np.sqrt(cols_eff) <= 0.35
    assert np.linalg.norm(newton_schulz_polar(m, CUBIC) - exact) / np.sqrt(cols_eff) <= 1e-4
    u = newton_schulz_polar(m)
    gram = u.T @ u if rows >= cols else u @ u.T
    assert np.max(np.abs(gram - np.eye(cols_eff))) <= 0.3


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(1, 24), cols=st.integers(1, 12))
def test_ns_rotation_equivariance(seed, rows, cols):
    rng = np.random.default_rng(seed)
    m = with_condition(rng, rows, cols, 10.0)
    r = random_orthogonal(rng, cols)
    np.testing.assert_allclose(newton_schulz_polar(m @ r), newton_schulz_polar(m) @ r, atol=1e-6)


# --- exact polar ----------------------------------------------------------

def test_oracle_examples():
    rng = np.random.default_rng(1)
    q = random_orthogonal(rng, 5)
    np.testing.assert_allclose(svd_polar_oracle(q), q, atol=1e-10)
    np.testing.assert_allclose(svd_polar_oracle(np.diag([5.0, 1.0])), np.eye(2), atol=1e-10)


def test_oracle_reconstruction():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((6, 4))
    u = svd_polar_oracle(m)
    np.testing.assert_allclose(u.T @ u, np.eye(4), atol=1e-8)
    vecs, vals = symmetric_eig(gram_right(m))
    sqrt_gram = (vecs * np.sqrt(vals)) @ vecs.T
    np.testing.assert_allclose(u @ sqrt_gram, m, atol=1e-8)
    np.testing.assert_allclose(u, numpy_polar(m), atol=1e-10)


def test_oracle_rejects_rank_deficiency():
    m = np.outer([1.0, 2.0, 3.0], [1.0, 1.0])
    with pytest.raises(ValueError, match="rank-deficient"):
        svd_polar_oracle(m)


def test_exact_polar_partial_isometry():
    m = np.outer([1.0, 2.0, 2.0], [3.0, 4.0])
    u = exact_polar(m)
    expected = np.outer([1.0, 2.0, 2.0], [3.0, 4.0]) / 15.0
    np.testing.assert_allclose(u, expected, atol=1e-12)
    np.testing.assert_array_equal(exact_polar(np.zeros((2, 3))), np.zeros((2, 3)))


# --- eigensolver ----------------------------------------------------------

def test_eig_diagonal():
    vecs, vals = symmetric_eig(np.diag([3.0, 1.0]))
    np.testing.assert_array_equal(vals, [3.0, 1.0])
    np.testing.assert_allclose(np.abs(vecs), np.eye(2), atol=1e-15)


def test_eig_classic_2x2():
    vecs, vals = symmetric_eig([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(vals, [3.0, 1.0], atol=1e-14)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(np.abs(vecs[:, 0]), [s, s], atol=1e-14)
    np.testing.assert_allclose(np.abs(vecs[:, 1]), [s, s], atol=1e-14)
    assert vecs[0, 1] * vecs[1, 1] < 0


@pytest.mark.parametrize("n", [1, 2, 3, 8, 9, 16, 33])
def test_eig_reconstruction(n):
    rng = np.random.default_rng(n)
    a = rng.standard_normal((n, n))
    s = a + a.T
    vecs, vals = symmetric_eig(s)
    assert np.max(np.abs(vecs @ np.diag(vals) @ vecs.T - s)) < 1e-8
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)
    assert np.all(np.diff(vals) <= 0)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(s)[::-1], atol=1e-10)
    assert abs(vals.sum() - np.trace(s)) <= 1e-9 * np.linalg.norm(s)


def test_eig_rejects_non_symmetric():
    with pytest.raises(ValueError, match="symmetric"):
        symmetric_eig([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="square"):
        symmetric_eig(np.ones((2, 3)))


def test_eig_repeated_eigenvalues():
    rng = np.random.default_rng(5)
    q = random_orthogonal(rng, 6)
    s = q @ np.diag([2.0, 2.0, 2.0, 1.0, 0.0, 0.0]) @ q.T
    vecs, vals = symmetric_eig(0.5 * (s + s.T))
    np.testing.assert_allclose(vals, [2, 2, 2, 1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(6), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 12))
def test_eig_trace_property(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) * 10 ** rng.uniform(-3, 3)
    s = a + a.T
    vecs, vals = symmetric_eig(s)
    assert abs(vals.sum() - np.trace(s)) <= 1e-9 * max(np.linalg.norm(s), 1e-300)
    assert np.max(np.abs(vecs @ np.diag(vals) @ vecs.T - s)) <= 1e-8 * max(np.linalg.norm(s), 1.0)


# --- inverse square root --------------------------------------------------

def test_inv_sqrt_examples():
    np.testing.assert_allclose(inv_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(inv_sqrt_psd(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]), atol=1e-15)


def test_inv_sqrt_sandwich():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((7, 5))
    s = a.T @ a
    p = inv_sqrt_psd(s)
    np.testing.assert_allclose(p @ s @ p, np.eye(5), atol=1e-7)


def test_inv_sqrt_floor_and_errors():
    p = inv_sqrt_psd(np.diag([4.0, 0.0]))
    assert p[1, 1] == pytest.approx((4e-12) ** -0.5)
    np.testing.assert_allclose(inv_sqrt_psd(np.diag([4.0, 0.0]), floor=1.0), np.diag([0.5, 1.0]))
    with pytest.raises(ValueError):
        inv_sqrt_psd([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        inv_sqrt_psd(np.zeros((2, 2)))
