"""Small dense real linear algebra used by the optimizers.

Matrices are plain 2-D ``float64`` numpy arrays. Functions never modify
their inputs. Besides the Newton-Schulz polar iteration used in training,
this module carries exact references (Jacobi eigensolver, eigen-based
polar factor, PSD inverse square root) that the test-suite and the
spectral probe check the fast path against.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

SCALE_EPS = 1e-7
SYMMETRY_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce ``x`` to a finite 2-D float64 array (a copy-free view if possible)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("matmul overflowed")
    return out


def gram_right(m) -> np.ndarray:
    """Column Gram matrix ``m.T @ m``, symmetrized."""
    m = as_matrix(m)
    g = m.T @ m
    return 0.5 * (g + g.T)


def frobenius_norm(m) -> float:
    return float(np.sqrt(np.sum(np.square(as_matrix(m)))))


@dataclass(frozen=True)
class NsCoefficients:
    """Odd matrix polynomial ``a X + b X(XᵀX) + c X(XᵀX)²`` applied ``iterations`` times.

    ``convergent`` schedules must satisfy ``a + b + c = 1`` so that a unit
    singular value is a fixed point. Tuned schedules such as
    :data:`MUON_QUINTIC` deliberately give this up for a steeper slope near
    zero and are constructed with ``convergent=False``.
    """

    a: float
    b: float
    c: float
    iterations: int
    convergent: bool = True

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError(f"iterations must be a positive integer, got {self.iterations}")
        if self.convergent and abs(self.a + self.b + self.c - 1.0) > 1e-6:
            raise ValueError(
                f"a + b + c = {self.a + self.b + self.c:.6g}; a convergent schedule needs 1"
            )

    def with_iterations(self, iterations: int) -> NsCoefficients:
        return NsCoefficients(self.a, self.b, self.c, iterations, self.convergent)

    def scalar_map(self, x):
        """Action of the whole schedule on a single (pre-scaled) singular value."""
        y = np.asarray(x, dtype=np.float64)
        for _ in range(self.iterations):
            y2 = y * y
            y = y * (self.a + y2 * (self.b + self.c * y2))
        return y


# Order-3 convergent quintic (Padé family); 6 steps cover condition numbers
# up to ~20 after Frobenius pre-scaling.
DEFAULT_NS = NsCoefficients(15 / 8, -10 / 8, 3 / 8, iterations=7)
# Muon's tuned quintic: steep near 0, but singular values settle in a band
# around 0.7-1.2 instead of converging to 1.
MUON_QUINTIC = NsCoefficients(3.4445, -4.7750, 2.0315, iterations=5, convergent=False)
# Plain Newton-Schulz; converges quadratically once singular values are O(1).
CUBIC = NsCoefficients(1.5, -0.5, 0.0, iterations=30)


def newton_schulz_polar(m, coeffs: NsCoefficients = DEFAULT_NS) -> np.ndarray:
    """Approximate the orthogonal polar factor of ``m`` with matmuls only.

    The input is divided by ``‖m‖_F + 1e-7`` so every singular value starts
    in (0, 1]. Wide inputs are iterated on their transpose, keeping the
    inner Gram product at the smaller dimension.
    """
    m = as_matrix(m)
    norm = frobenius_norm(m)
    if norm == 0.0:
        raise ValueError("polar factor of the zero matrix is undefined")
    transposed = m.shape[0] < m.shape[1]
    x = m.T if transposed else m
    x = x / (norm + SCALE_EPS)
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    for _ in range(coeffs.iterations):
        g = x.T @ x
        if c == 0.0:
            x = a * x + b * (x @ g)
        else:
            x = a * x + x @ (b * g + c * (g @ g))
    return x.T if transposed else x


class EigenPair(NamedTuple):
    """Eigendecomposition ``s = vectors @ diag(values) @ vectors.T``, values descending."""

    vectors: np.ndarray
    values: np.ndarray


@lru_cache(maxsize=None)
def _round_robin(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    # Tournament schedule: every index pair meets exactly once in n-1 rounds
    # of n/2 disjoint pairs (n even).
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        p = np.array([players[i] for i in range(n // 2)])
        q = np.array([players[n - 1 - i] for i in range(n // 2)])
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        rounds.append((lo, hi))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return tuple(rounds)


def _check_symmetric(s: np.ndarray) -> None:
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"matrix must be square, got {s.shape}")
    scale = max(1.0, float(np.max(np.abs(s))))
    asym = float(np.max(np.abs(s - s.T)))
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(f"matrix is not symmetric (max |s - sᵀ| = {asym:.3g})")


def symmetric_eig(s) -> EigenPair:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every (p, q) pair once, in round-robin order so that
    the n/2 rotations of a round act on disjoint index pairs and can be
    applied together. Iteration stops once the off-diagonal Frobenius mass
    drops below ``1e-12 * ‖s‖_F``. Eigenvector signs are fixed so that the
    largest-magnitude entry of each column is positive.
    """
    s = as_matrix(s)
    _check_symmetric(s)
    n = s.shape[0]
    a = 0.5 * (s + s.T)
    size = n + (n % 2)
    if size != n:
        # the padded coordinate is decoupled, so every rotation touching it is the identity
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(size)
    scale = np.sqrt(np.sum(a * a))
    tol = JACOBI_TOL * scale
    rounds = _round_robin(size) if size > 1 else ()

    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.square(a - np.diag(np.diag(a)))))
        if off <= tol:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 0.0
            if not np.any(active):
                continue
            app, aqq = a[p, p], a[q, q]
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.where(active, np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            t = np.where(active & (theta == 0.0), 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * c
            rot = np.eye(size)
            rot[p, p] = c
            rot[q, q] = c
            rot[p, q] = sn
            rot[q, p] = -sn
            a = rot.T @ a @ rot
            v = v @ rot
        a = 0.5 * (a + a.T)
    else:
        raise RuntimeError("Jacobi eigensolver did not converge")

    if size != n:
        a = a[:n, :n]
        v = v[:n, :n]
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(n)])
    signs[signs == 0] = 1.0
    return EigenPair(v * signs, values)


def inv_sqrt_psd(s, floor: float | None = None) -> np.ndarray:
    """``s^{-1/2}`` for symmetric PSD ``s`` with eigenvalues clamped below at ``floor``.

    ``floor`` defaults to ``1e-12 * λ_max``.
    """
    vectors, values = symmetric_eig(s)
    lam_max = float(max(values[0], 0.0))
    if floor is None:
        floor = 1e-12 * lam_max
    if floor <= 0.0:
        raise ValueError("inv_sqrt_psd needs a positive floor (matrix is zero?)")
    scaled = vectors * (np.maximum(values, floor) ** -0.5)
    out = scaled @ vectors.T
    return 0.5 * (out + out.T)


def exact_polar(m, rcond: float = 1e-12) -> np.ndarray:
    """Polar factor through the eigendecomposition of the smaller Gram matrix.

    Directions whose Gram eigenvalue is at most ``rcond * λ_max`` are treated
    as null, so rank-deficient inputs give the partial isometry rather than
    an error. Zero input gives a zero result.
    """
    m = as_matrix(m)
    transposed = m.shape[0] < m.shape[1]
    x = m.T if transposed else m
    vectors, values = symmetric_eig(gram_right(x))
    lam_max = float(values[0])
    if lam_max <= 0.0:
        return np.zeros_like(m)
    keep = values > rcond * lam_max
    weights = np.zeros_like(values)
    weights[keep] = values[keep] ** -0.5
    u = x @ ((vectors * weights) @ vectors.T)
    return u.T if transposed else u


def svd_polar_oracle(m) -> np.ndarray:
    """Exact polar factor ``m (mᵀm)^{-1/2}`` of a full-rank matrix.

    Wide matrices are handled through their transpose. Raises if the
    smallest singular value is not above ``1e-10`` times the largest.
    """
    m = as_matrix(m)
    transposed = m.shape[0] < m.shape[1]
    x = m.T if transposed else m
    vectors, values = symmetric_eig(gram_right(x))
    lam_max = float(values[0])
    if lam_max <= 0.0 or values[-1] <= (1e-10) ** 2 * lam_max:
        k = int(x.shape[1])
        raise ValueError(
            f"rank-deficient input: fewer than {k} independent "
            f"{'rows' if transposed else 'columns'} (dimension {k})"
        )
    u = x @ ((vectors * values ** -0.5) @ vectors.T)
    return u.T if transposed else u
