"""PRISM, Muon, Tikhonov-damped Muon and AdamW for numpy parameters.

The spectral optimizers share one piece of persistent state per matrix,
the momentum accumulator. PRISM rebuilds its innovation term from the
current gradient at every step and keeps no curvature history.

Typical use::

    opt = Prism(PrismConfig(gamma=1.0))
    state = opt.init_state(W)
    for t in range(steps):
        W = opt.step(W, grad(W), state, lr=cosine_schedule(t, sched))
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .linalg import (
    DEFAULT_NS,
    NsCoefficients,
    as_matrix,
    exact_polar,
    gram_right,
    inv_sqrt_psd,
    newton_schulz_polar,
)

SIDES = ("right", "left")
POLAR_MODES = ("iterative", "exact")
LR_SCALE_MODES = ("none", "dim_scaled")


@dataclass(frozen=True)
class PrismConfig:
    """Hyperparameters of a PRISM step.

    ``gamma`` weighs the innovation block; ``gamma=0`` is Muon. ``side``
    picks which Gram matrix gets preconditioned: ``"right"`` stacks
    ``[M; γD]`` (column correlations), ``"left"`` places ``[M, γD]`` side by
    side (row correlations). ``polar="exact"`` replaces Newton-Schulz with
    an eigendecomposition, which the verification code relies on.
    """

    beta: float = 0.95
    gamma: float = 1.0
    nesterov: bool = False
    side: str = "right"
    polar: str = "iterative"
    ns: NsCoefficients = DEFAULT_NS
    lr_scale: str = "none"
    lr_scale_c: float = 0.2
    weight_decay: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        if self.polar not in POLAR_MODES:
            raise ValueError(f"polar must be one of {POLAR_MODES}, got {self.polar!r}")
        if self.lr_scale not in LR_SCALE_MODES:
            raise ValueError(f"lr_scale must be one of {LR_SCALE_MODES}, got {self.lr_scale!r}")


@dataclass(frozen=True)
class TikhonovConfig:
    """Muon with a uniform ``λI`` added to the momentum Gram matrix."""

    lam: float = 0.1
    beta: float = 0.95
    nesterov: bool = False
    polar: str = "iterative"
    ns: NsCoefficients = DEFAULT_NS
    lr_scale: str = "none"
    lr_scale_c: float = 0.2
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if self.polar not in POLAR_MODES:
            raise ValueError(f"polar must be one of {POLAR_MODES}, got {self.polar!r}")
        if self.lr_scale not in LR_SCALE_MODES:
            raise ValueError(f"lr_scale must be one of {LR_SCALE_MODES}, got {self.lr_scale!r}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


# ---------------------------------------------------------------------------
# State

_MAGIC = b"PRSM"
_HEADER = struct.Struct("<4sBBQ")  # magic, matrix count, ndim, step; then ndim uint32 dims


@dataclass
class OptimizerState:
    """Momentum accumulator of one parameter plus a step counter."""

    momentum: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, param) -> OptimizerState:
        return cls(np.zeros_like(as_matrix(param, "param")))

    def matrices(self) -> list[np.ndarray]:
        return [self.momentum]

    def to_dict(self) -> dict:
        return {
            "kind": type(self).__name__,
            "shape": list(self.momentum.shape),
            "step": self.step_count,
            "data": [m.ravel().tolist() for m in self.matrices()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_bytes(self) -> bytes:
        shape = self.momentum.shape
        mats = self.matrices()
        header = _HEADER.pack(_MAGIC, len(mats), len(shape), self.step_count)
        dims = struct.pack(f"<{len(shape)}I", *shape)
        return header + dims + b"".join(np.ascontiguousarray(m, dtype="<f8").tobytes() for m in mats)

    @classmethod
    def from_dict(cls, blob: dict) -> OptimizerState:
        shape = tuple(blob["shape"])
        mats = [np.asarray(d, dtype=np.float64).reshape(shape) for d in blob["data"]]
        return cls._from_parts(mats, int(blob["step"]))

    @classmethod
    def from_json(cls, text: str) -> OptimizerState:
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_bytes(cls, raw: bytes) -> OptimizerState:
        magic, count, ndim, step = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise ValueError("not a serialized optimizer state")
        shape = struct.unpack_from(f"<{ndim}I", raw, _HEADER.size)
        body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size + 4 * ndim)
        size = math.prod(shape)
        if body.size != count * size:
            raise ValueError(f"expected {count * size} reals, found {body.size}")
        mats = [m.reshape(shape).astype(np.float64) for m in np.split(body, count)]
        return cls._from_parts(mats, step)

    @classmethod
    def _from_parts(cls, mats, step):
        if len(mats) != 1:
            raise ValueError(f"{cls.__name__} holds one matrix, got {len(mats)}")
        return cls(mats[0], step)


@dataclass
class AdamWState(OptimizerState):
    """First and second moment estimates; ``momentum`` is the first moment."""

    second_moment: np.ndarray = field(default=None)

    @classmethod
    def zeros_like(cls, param) -> AdamWState:
        param = np.asarray(param, dtype=np.float64)
        return cls(np.zeros_like(param), 0, np.zeros_like(param))

    @property
    def first_moment(self) -> np.ndarray:
        return self.momentum

    def matrices(self) -> list[np.ndarray]:
        return [self.momentum, self.second_moment]

    @classmethod
    def _from_parts(cls, mats, step):
        if len(mats) != 2:
            raise ValueError(f"AdamWState holds two matrices, got {len(mats)}")
        return cls(mats[0], step, mats[1])


# ---------------------------------------------------------------------------
# Building blocks


class MomentumStep(NamedTuple):
    effective: np.ndarray
    innovation: np.ndarray


def momentum_update(state: OptimizerState, grad, beta: float, nesterov: bool = False) -> MomentumStep:
    """Advance the EMA in ``state`` and return the polar input and the innovation.

    The innovation is taken against the *updated* momentum,
    ``D = G - M_t = β(G - M_{t-1})``. With ``nesterov`` the polar input
    becomes ``βM_t + (1-β)G`` while ``D`` is unchanged.
    """
    grad = as_matrix(grad, "grad")
    if grad.shape != state.momentum.shape:
        raise ValueError(f"gradient shape {grad.shape} != momentum shape {state.momentum.shape}")
    m = beta * state.momentum + (1.0 - beta) * grad
    state.momentum = m
    state.step_count += 1
    d = grad - m
    effective = beta * m + (1.0 - beta) * grad if nesterov else m
    return MomentumStep(effective, d)


def build_augmented(m, d, gamma: float, side: str = "right") -> np.ndarray:
    m = as_matrix(m, "momentum")
    d = as_matrix(d, "innovation")
    if m.shape != d.shape:
        raise ValueError(f"momentum {m.shape} and innovation {d.shape} differ in shape")
    if side == "right":
        return np.vstack([m, gamma * d])
    if side == "left":
        return np.hstack([m, gamma * d])
    raise ValueError(f"side must be one of {SIDES}, got {side!r}")


def polar_factor(m, polar: str = "iterative", ns: NsCoefficients = DEFAULT_NS) -> np.ndarray:
    if polar == "exact":
        return exact_polar(m)
    if polar == "iterative":
        return newton_schulz_polar(m, ns)
    raise ValueError(f"polar must be one of {POLAR_MODES}, got {polar!r}")


def prism_direction(m, d, cfg: PrismConfig) -> np.ndarray:
    """Slice of the polar factor of the innovation-augmented momentum.

    Right side: top ``rows`` of ``polar([M; γD])``, equal to
    ``M (MᵀM + γ²DᵀD)^{-1/2}``. Left side: first ``cols`` columns of
    ``polar([M, γD])``, equal to ``(MMᵀ + γ²DDᵀ)^{-1/2} M``.
    A zero momentum gives a zero direction.
    """
    m = as_matrix(m, "momentum")
    if not np.any(m):
        return np.zeros_like(m)
    aug = build_augmented(m, d, cfg.gamma, cfg.side)
    o = polar_factor(aug, cfg.polar, cfg.ns)
    rows, cols = m.shape
    return o[:rows, :] if cfg.side == "right" else o[:, :cols]


def muon_direction(m, polar: str = "iterative", ns: NsCoefficients = DEFAULT_NS) -> np.ndarray:
    m = as_matrix(m, "momentum")
    if not np.any(m):
        return np.zeros_like(m)
    return polar_factor(m, polar, ns)


def tikhonov_direction(m, lam: float, polar: str = "iterative", ns: NsCoefficients = DEFAULT_NS) -> np.ndarray:
    """``M (MᵀM + λI)^{-1/2}``.

    The iterative form stacks ``√λ I`` under ``M``; the stacked Gram matrix is
    exactly ``MᵀM + λI``, so the top block of its polar factor is the update.
    """
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    m = as_matrix(m, "momentum")
    if not np.any(m):
        return np.zeros_like(m)
    rows, cols = m.shape
    if polar == "exact":
        if lam == 0.0:
            return exact_polar(m)
        return m @ inv_sqrt_psd(gram_right(m) + lam * np.eye(cols))
    if polar == "iterative":
        aug = np.vstack([m, math.sqrt(lam) * np.eye(cols)])
        return newton_schulz_polar(aug, ns)[:rows, :]
    raise ValueError(f"polar must be one of {POLAR_MODES}, got {polar!r}")


def apply_update(param, direction, lr: float, weight_decay: float = 0.0, lr_scale: float = 1.0) -> np.ndarray:
    """Decoupled decay then step: ``θ(1 - lr·wd) - lr·lr_scale·direction``."""
    param = np.asarray(param, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if param.shape != direction.shape:
        raise ValueError(f"param {param.shape} and direction {direction.shape} differ in shape")
    if lr < 0.0:
        raise ValueError(f"lr must be >= 0, got {lr}")
    if not np.all(np.isfinite(direction)):
        raise FloatingPointError("update direction is not finite")
    return param * (1.0 - lr * weight_decay) - (lr * lr_scale) * direction


def lr_scale_for_shape(rows: int, cols: int, mode: str = "none", c: float = 0.2) -> float:
    """Per-matrix lr multiplier: 1, or ``c·√max(rows, cols)`` in ``dim_scaled`` mode."""
    if rows < 1 or cols < 1:
        raise ValueError(f"shape must be positive, got {rows}x{cols}")
    if mode == "none":
        return 1.0
    if mode == "dim_scaled":
        return c * math.sqrt(max(rows, cols))
    raise ValueError(f"lr scale mode must be one of {LR_SCALE_MODES}, got {mode!r}")


def adamw_step(param, grad, state: AdamWState, beta1: float = 0.9, beta2: float = 0.95,
               eps: float = 1e-8, lr: float = 1e-3, weight_decay: float = 0.0) -> np.ndarray:
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != param.shape:
        raise ValueError(f"gradient shape {grad.shape} != param shape {param.shape}")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("gradient is not finite")
    state.step_count += 1
    t = state.step_count
    state.momentum = beta1 * state.momentum + (1.0 - beta1) * grad
    state.second_moment = beta2 * state.second_moment + (1.0 - beta2) * grad * grad
    m_hat = state.momentum / (1.0 - beta1 ** t)
    v_hat = state.second_moment / (1.0 - beta2 ** t)
    denom = np.sqrt(v_hat) + eps
    direction = np.divide(m_hat, denom, out=np.zeros_like(m_hat), where=denom > 0)
    return param * (1.0 - lr * weight_decay) - lr * direction


@dataclass(frozen=True)
class Schedule:
    """Linear warmup to ``lr_max`` then cosine decay to ``lr_final``."""

    warmup_steps: int
    total_steps: int
    lr_max: float
    lr_final: float = 0.0

    def __post_init__(self):
        if self.warmup_steps < 0 or self.total_steps < self.warmup_steps:
            raise ValueError(
                f"need 0 <= warmup_steps <= total_steps, got {self.warmup_steps}, {self.total_steps}"
            )


def cosine_schedule(step: int, sched: Schedule) -> float:
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if step >= sched.total_steps:
        return sched.lr_final
    if step < sched.warmup_steps:
        return sched.lr_max * step / sched.warmup_steps
    progress = (step - sched.warmup_steps) / (sched.total_steps - sched.warmup_steps)
    return sched.lr_final + 0.5 * (sched.lr_max - sched.lr_final) * (1.0 + math.cos(math.pi * progress))


def clip_gradients(grads: Sequence, threshold: float) -> tuple[list[np.ndarray], float]:
    """Scale all gradients together so their global norm is at most ``threshold``."""
    if threshold <= 0.0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > threshold:
        scale = threshold / norm
        grads = [g * scale for g in grads]
    return grads, norm


# ---------------------------------------------------------------------------
# Optimizers


class SpectralStep(NamedTuple):
    direction: np.ndarray
    momentum: np.ndarray
    innovation: np.ndarray


class Prism:
    """PRISM for a single matrix parameter (state lives with the caller)."""

    def __init__(self, config: PrismConfig | None = None, **overrides):
        config = config or PrismConfig()
        self.config = replace(config, **overrides) if overrides else config

    def init_state(self, param) -> OptimizerState:
        return OptimizerState.zeros_like(param)

    def _direction(self, m, d):
        return prism_direction(m, d, self.config)

    def compute(self, state: OptimizerState, grad) -> SpectralStep:
        cfg = self.config
        m, d = momentum_update(state, grad, cfg.beta, cfg.nesterov)
        return SpectralStep(self._direction(m, d), m, d)

    def lr_scale(self, shape) -> float:
        return lr_scale_for_shape(shape[0], shape[1], self.config.lr_scale, self.config.lr_scale_c)

    def apply(self, param, direction, lr: float) -> np.ndarray:
        return apply_update(param, direction, lr, self.config.weight_decay, self.lr_scale(np.shape(param)))

    def step(self, param, grad, state: OptimizerState, lr: float) -> np.ndarray:
        return self.apply(param, self.compute(state, grad).direction, lr)


class Muon(Prism):
    """Polar factor of the momentum; PRISM with the innovation ignored."""

    def __init__(self, config: PrismConfig | None = None, **overrides):
        super().__init__(config, **overrides)
        self.config = replace(self.config, gamma=0.0)

    def _direction(self, m, d):
        return muon_direction(m, self.config.polar, self.config.ns)


class TikhonovMuon(Prism):
    def __init__(self, config: TikhonovConfig | None = None, **overrides):
        config = config or TikhonovConfig()
        self.config = replace(config, **overrides) if overrides else config

    def _direction(self, m, d):
        return tikhonov_direction(m, self.config.lam, self.config.polar, self.config.ns)


class AdamW:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.95, eps: float = 1e-8, weight_decay: float = 0.0):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay

    def init_state(self, param) -> AdamWState:
        return AdamWState.zeros_like(param)

    def step(self, param, grad, state: AdamWState, lr: float) -> np.ndarray:
        return adamw_step(param, grad, state, self.beta1, self.beta2, self.eps, lr, self.weight_decay)


def is_structured(param) -> bool:
    """Matrices with both dimensions > 1 go to the spectral optimizer."""
    shape = np.shape(param)
    return len(shape) == 2 and min(shape) > 1


class HybridOptimizer:
    """Spectral optimizer on weight matrices, AdamW on everything else.

    Both groups follow the same schedule; ``adamw_lr_ratio`` rescales the
    spectral learning rate into the AdamW one.
    """

    def __init__(self, params: dict, spectral, adamw: AdamW | None = None, adamw_lr_ratio: float = 0.25):
        self.spectral = spectral
        self.adamw = adamw or AdamW()
        self.adamw_lr_ratio = adamw_lr_ratio
        self.groups = {name: ("spectral" if spectral is not None and is_structured(p) else "adamw")
                       for name, p in params.items()}
        self.state = {
            name: (self.spectral if g == "spectral" else self.adamw).init_state(params[name])
            for name, g in self.groups.items()
        }
        self.last_steps: dict[str, SpectralStep] = {}

    def step(self, params: dict, grads: dict, lr: float) -> dict:
        out = {}
        self.last_steps = {}
        for name, group in self.groups.items():
            if group == "spectral":
                info = self.spectral.compute(self.state[name], grads[name])
                self.last_steps[name] = info
                out[name] = self.spectral.apply(params[name], info.direction, lr)
            else:
                out[name] = self.adamw.step(params[name], grads[name], self.state[name],
                                            lr * self.adamw_lr_ratio)
        return out
