"""Synthetic test problems with controllable gradient noise."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix


def _stream_key(*parts) -> int:
    text = "/".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


class Rng:
    """Counter-based random stream addressed by ``(seed, stream)``.

    Backed by Philox-4x64 with the 128-bit key ``(seed, stream)``, so every
    stream is an independent counter sequence and identical addresses give
    identical numbers on every platform. Normals come from the Box-Muller
    transform applied to consecutive uniform pairs ``(u1, u2)``:
    ``z0 = r cos(2πu2)``, ``z1 = r sin(2πu2)`` with ``r = √(-2 ln(1 - u1))``,
    emitted in that order.
    """

    def __init__(self, seed: int, stream: int | str = 0):
        self.seed = int(seed)
        self.stream = stream if isinstance(stream, int) else _stream_key(stream)
        key = np.array([self.seed % 2**64, self.stream % 2**64], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def split(self, name) -> Rng:
        """Child stream; depends only on this stream's address and ``name``."""
        return Rng(self.seed, _stream_key(self.stream, name))

    def uniform(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def normal(self, size=None) -> np.ndarray:
        shape = () if size is None else (size if isinstance(size, tuple) else (size,))
        count = int(np.prod(shape, dtype=np.int64))
        pairs = (count + 1) // 2
        u = self._gen.random(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        z = np.column_stack([r * np.cos(angle), r * np.sin(angle)]).ravel()[:count]
        return z.reshape(shape) if shape else float(z[0])

    def integers(self, high: int, size=None) -> np.ndarray:
        return self._gen.integers(0, high, size=size)


# ---------------------------------------------------------------------------
# Noisy quadratic


@dataclass(frozen=True)
class NoisyQuadratic:
    """``L(W) = ½ Σ_j h_j ‖W[:, j]‖²`` observed through column-wise Gaussian noise.

    The stochastic gradient is ``W diag(h) + E`` with ``E[:, j] ~ N(0, σ_j² I)``,
    so the gradient covariance is diagonal in the column basis and known.
    """

    curvature: tuple[float, ...]
    noise_scales: tuple[float, ...]
    rows: int = 8
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.curvature, dtype=np.float64)
        s = np.asarray(self.noise_scales, dtype=np.float64)
        if h.ndim != 1 or h.size == 0 or np.any(h <= 0):
            raise ValueError("curvature must be a non-empty list of positive reals")
        if s.shape != h.shape or np.any(s < 0):
            raise ValueError("noise_scales must be non-negative and match curvature in length")
        if self.rows < 1:
            raise ValueError("rows must be >= 1")
        object.__setattr__(self, "curvature", tuple(float(x) for x in h))
        object.__setattr__(self, "noise_scales", tuple(float(x) for x in s))

    @classmethod
    def anisotropic(cls, rows: int, cols: int, condition: float = 1e3, noise: float = 1.0,
                    noisy_fraction: float = 0.5, seed: int = 0, init_scale: float = 1.0) -> NoisyQuadratic:
        """Log-spaced curvatures from 1 to ``condition``; the stiffest columns carry noise ``noise``.

        The ``noisy_fraction`` of columns with the largest curvature get noise
        scale ``noise`` (a high-variance canyon); the rest are noiseless.
        """
        h = np.logspace(0.0, np.log10(condition), cols) if cols > 1 else np.ones(1)
        n_noisy = int(round(noisy_fraction * cols))
        sigma = np.zeros(cols)
        if n_noisy:
            sigma[cols - n_noisy:] = noise
        return cls(tuple(h), tuple(sigma), rows=rows, seed=seed, init_scale=init_scale)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, len(self.curvature))

    def initial_point(self) -> np.ndarray:
        return self.init_scale * Rng(self.seed, "quadratic-init").normal(self.shape)


def quadratic_loss(problem: NoisyQuadratic, W) -> float:
    W = np.asarray(W, dtype=np.float64)
    h = np.asarray(problem.curvature)
    return 0.5 * float(np.sum(h * np.sum(W * W, axis=0)))


def quadratic_grad(problem: NoisyQuadratic, W, rng: Rng | None = None) -> np.ndarray:
    W = as_matrix(W, "W")
    if W.shape != problem.shape:
        raise ValueError(f"W has shape {W.shape}, problem expects {problem.shape}")
    g = W * np.asarray(problem.curvature)
    sigma = np.asarray(problem.noise_scales)
    if rng is not None and np.any(sigma > 0):
        g = g + rng.normal(W.shape) * sigma
    return g


# ---------------------------------------------------------------------------
# Two-layer tanh MLP


@dataclass
class ToyMlp:
    """``y = tanh(x W1 + b1) W2 + b2`` trained on mean squared error."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, rng: Rng, d_in: int, d_hidden: int, d_out: int) -> ToyMlp:
        return cls(
            W1=rng.normal((d_in, d_hidden)) / np.sqrt(d_in),
            b1=np.zeros(d_hidden),
            W2=rng.normal((d_hidden, d_out)) / np.sqrt(d_hidden),
            b2=np.zeros(d_out),
        )

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    @classmethod
    def from_params(cls, params: dict) -> ToyMlp:
        return cls(**{k: np.asarray(params[k], dtype=np.float64) for k in ("W1", "b1", "W2", "b2")})

    def predict(self, x) -> np.ndarray:
        return np.tanh(x @ self.W1 + self.b1) @ self.W2 + self.b2


def mlp_forward_backward(mlp: ToyMlp, batch_x, batch_y) -> tuple[float, dict[str, np.ndarray]]:
    """Loss ``mean((ŷ - y)²)`` over all batch entries and its exact gradients."""
    x = as_matrix(batch_x, "batch_x")
    y = as_matrix(batch_y, "batch_y")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"batch sizes differ: {x.shape[0]} inputs, {y.shape[0]} targets")
    if x.shape[1] != mlp.W1.shape[0] or y.shape[1] != mlp.W2.shape[1]:
        raise ValueError(
            f"batch shapes {x.shape}, {y.shape} do not fit the network "
            f"({mlp.W1.shape[0]} -> {mlp.W2.shape[1]})"
        )
    h = np.tanh(x @ mlp.W1 + mlp.b1)
    err = h @ mlp.W2 + mlp.b2 - y
    loss = float(np.mean(err * err))
    d_out = 2.0 * err / err.size
    d_h = (d_out @ mlp.W2.T) * (1.0 - h * h)
    grads = {
        "W1": x.T @ d_h,
        "b1": d_h.sum(axis=0),
        "W2": h.T @ d_out,
        "b2": d_out.sum(axis=0),
    }
    return loss, grads


def make_regression_data(rng: Rng, n: int, d_in: int, d_out: int,
                         teacher_noise: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian inputs and a noisy linear teacher ``Y = X W* + noise``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = rng.split("inputs").normal((n, d_in))
    teacher = rng.split("teacher").normal((d_in, d_out)) / np.sqrt(d_in)
    y = x @ teacher
    if teacher_noise > 0:
        y = y + teacher_noise * rng.split("label-noise").normal((n, d_out))
    return x, y


@dataclass(frozen=True)
class MlpTask:
    """Regression dataset plus network sizes for the MLP scenario."""

    d_in: int = 8
    d_hidden: int = 16
    d_out: int = 4
    n_samples: int = 256
    batch_size: int = 32
    teacher_noise: float = 0.1
    seed: int = 0
    data: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if min(self.d_in, self.d_hidden, self.d_out, self.n_samples, self.batch_size) < 1:
            raise ValueError("MLP task dimensions must be positive")
        x, y = make_regression_data(Rng(self.seed, "mlp-data"), self.n_samples, self.d_in,
                                    self.d_out, self.teacher_noise)
        object.__setattr__(self, "data", (x, y))

    def init_model(self) -> ToyMlp:
        return ToyMlp.init(Rng(self.seed, "mlp-init"), self.d_in, self.d_hidden, self.d_out)

    def sample_batch(self, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.data
        idx = rng.integers(self.n_samples, size=self.batch_size)
        return x[idx], y[idx]

    def full_loss(self, mlp: ToyMlp) -> float:
        x, y = self.data
        err = mlp.predict(x) - y
        return float(np.mean(err * err))
