"""Per-direction signal/noise energies and spectral gains of a PRISM step."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, symmetric_eig
from .optim import PrismConfig, prism_direction

DEGENERATE_RCOND = 1e-12


def augmented_gram(m, d, gamma: float) -> np.ndarray:
    """``MᵀM + γ² DᵀD``, symmetrized."""
    m = as_matrix(m, "momentum")
    d = as_matrix(d, "innovation")
    if m.shape != d.shape:
        raise ValueError(f"momentum {m.shape} and innovation {d.shape} differ in shape")
    g = m.T @ m + (gamma * gamma) * (d.T @ d)
    return 0.5 * (g + g.T)


def spectral_gain(signal_energy, noise_energy, gamma: float):
    """``‖Mv‖ / √(‖Mv‖² + γ²‖Dv‖²)`` from the two energies; 0 where both vanish."""
    signal = np.asarray(signal_energy, dtype=np.float64)
    total = signal + gamma * gamma * np.asarray(noise_energy, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(total > 0, np.sqrt(signal) / np.sqrt(np.where(total > 0, total, 1.0)), 0.0)
    return out


def gain_from_snr(snr):
    """``1/√(1 + 1/snr²)`` with gain 1 at snr = inf and 0 at snr = 0."""
    snr = np.asarray(snr, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.isinf(snr), 1.0, snr / np.sqrt(1.0 + snr * snr))
    return np.where(np.isnan(snr), 0.0, out)


@dataclass
class SpectralReport:
    """Eigen-directions of the augmented Gram matrix, strongest first.

    ``snr`` is ``inf`` for noise-free directions and ``nan`` for degenerate
    ones (eigenvalue below ``1e-12 λ_max``), which also get zero gains.
    """

    gamma: float
    eigenvalues: np.ndarray
    directions: np.ndarray
    signal_energy: np.ndarray
    noise_energy: np.ndarray
    snr: np.ndarray
    gain_theoretical: np.ndarray
    gain_empirical: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def rows(self) -> list[dict]:
        return [
            {
                "k": k,
                "eigenvalue": float(self.eigenvalues[k]),
                "signal_energy": float(self.signal_energy[k]),
                "noise_energy": float(self.noise_energy[k]),
                "snr": float(self.snr[k]),
                "gain_theoretical": float(self.gain_theoretical[k]),
                "gain_empirical": float(self.gain_empirical[k]),
            }
            for k in range(len(self))
        ]


def spectral_report(m, d, gamma: float, direction=None, polar: str = "exact",
                    cfg: PrismConfig | None = None) -> SpectralReport:
    """Decompose a PRISM step into per-direction energies and gains.

    ``direction`` is the update actually applied; when omitted it is
    recomputed with ``prism_direction`` in ``polar`` mode (right side).
    """
    m = as_matrix(m, "momentum")
    d = as_matrix(d, "innovation")
    g = augmented_gram(m, d, gamma)
    vectors, values = symmetric_eig(g)
    lam_max = float(values[0])
    if lam_max <= 0.0:
        raise ValueError("momentum and innovation are both zero; nothing to report")
    if direction is None:
        cfg = cfg or PrismConfig(gamma=gamma, polar=polar, side="right")
        direction = prism_direction(m, d, cfg)
    direction = as_matrix(direction, "direction")

    values = np.maximum(values, 0.0)
    signal = np.sum((m @ vectors) ** 2, axis=0)
    noise = np.sum((d @ vectors) ** 2, axis=0)
    degenerate = values <= DEGENERATE_RCOND * lam_max
    noise_amp = gamma * np.sqrt(noise)
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = np.where(noise_amp > 0, np.sqrt(signal) / np.where(noise_amp > 0, noise_amp, 1.0), np.inf)
    snr = np.where(degenerate, np.nan, snr)
    gain_theory = np.where(degenerate, 0.0, gain_from_snr(snr))
    gain_emp = np.where(degenerate, 0.0, np.linalg.norm(direction @ vectors, axis=0))
    return SpectralReport(
        gamma=float(gamma),
        eigenvalues=values,
        directions=vectors,
        signal_energy=signal,
        noise_energy=noise,
        snr=snr,
        gain_theoretical=gain_theory,
        gain_empirical=gain_emp,
        degenerate=degenerate,
    )


def low_snr_asymptote_check(report: SpectralReport, threshold: float = 0.1) -> list[tuple[float, float]]:
    """``(snr, gain / snr)`` for every direction with ``0 < snr <= threshold``.

    In that regime the gain is close to the snr itself, so the ratios
    should sit in ``[0.99, 1]``.
    """
    out = []
    for snr, gain in zip(report.snr, report.gain_theoretical):
        if np.isfinite(snr) and 0.0 < snr <= threshold:
            out.append((float(snr), float(gain / snr)))
    return out


@dataclass
class TrajectoryStats:
    param_norms: list[float]
    update_norms: list[float]
    mean_gains: list[float]

    @property
    def final_param_norm(self) -> float:
        return self.param_norms[-1] if self.param_norms else 0.0

    @property
    def norm_growth(self) -> float:
        return self.param_norms[-1] - self.param_norms[0] if self.param_norms else 0.0


def _total_norm(x) -> float:
    if isinstance(x, dict):
        x = list(x.values())
    if isinstance(x, (list, tuple)):
        return float(np.sqrt(sum(np.sum(np.square(np.asarray(p, dtype=np.float64))) for p in x)))
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64)))


def trajectory_stats(params, updates, gains=None) -> TrajectoryStats:
    """Norm statistics over a training run.

    ``params`` holds parameter snapshots (a matrix, or a list/dict of
    matrices making up a model); ``updates`` the per-step update matrices.
    ``gains``, if given, is a per-step sequence of gain vectors whose
    running mean is tracked.
    """
    param_norms = [_total_norm(p) for p in params]
    update_norms = [_total_norm(u) for u in updates]
    mean_gains = []
    total, count = 0.0, 0
    for g in gains or []:
        g = np.asarray(g, dtype=np.float64).ravel()
        total += float(np.sum(g))
        count += g.size
        mean_gains.append(total / count if count else float("nan"))
    return TrajectoryStats(param_norms, update_norms, mean_gains)
