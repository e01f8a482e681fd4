import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prism.optim import Prism, PrismConfig, prism_direction
from prism.problems import NoisyQuadratic, Rng, quadratic_grad
from prism.spectral import (
    augmented_gram,
    gain_from_snr,
    low_snr_asymptote_check,
    spectral_gain,
    spectral_report,
    trajectory_stats,
)


def test_augmented_gram_examples():
    rng = np.random.default_rng(0)
    m, d = rng.standard_normal((5, 3)), rng.standard_normal((5, 3))
    np.testing.assert_allclose(augmented_gram(m, d, 0.0), m.T @ m, atol=1e-14)
    np.testing.assert_array_equal(augmented_gram([[1.0, 0.0]], [[0.0, 1.0]], 3.0), np.diag([1.0, 9.0]))
    stacked = np.vstack([m, 2.0 * d])
    np.testing.assert_allclose(augmented_gram(m, d, 2.0), stacked.T @ stacked, atol=1e-10)
    with pytest.raises(ValueError):
        augmented_gram(m, d[:, :2], 1.0)


def test_spectral_gain_examples():
    assert spectral_gain(4.0, 0.0, 5.0) == 1.0
    assert spectral_gain(9.0, 16.0, 1.0) == pytest.approx(0.6, abs=1e-15)
    assert spectral_gain(0.0, 0.0, 1.0) == 0.0
    assert gain_from_snr(1.0) == pytest.approx(1 / np.sqrt(2), abs=1e-15)
    assert gain_from_snr(np.inf) == 1.0
    assert gain_from_snr(0.0) == 0.0


@settings(max_examples=60, deadline=None)
@given(a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3))
def test_gain_monotone_in_snr(a, b):
    lo, hi = sorted((a, b))
    if hi > lo * (1 + 1e-9):
        assert gain_from_snr(lo) < gain_from_snr(hi)
    assert 0.0 <= gain_from_snr(lo) <= 1.0


@settings(max_examples=60, deadline=None)
@given(sig=st.floats(1e-3, 1e3), noise=st.floats(1e-3, 1e3), g=st.floats(0.01, 10.0))
def test_gain_decreasing_in_gamma(sig, noise, g):
    assert spectral_gain(sig, noise, g * 1.5) < spectral_gain(sig, noise, g)


def test_low_snr_ratios():
    report = spectral_report(np.diag([0.1, 0.01, 10.0]), np.eye(3), 1.0)
    pairs = sorted(low_snr_asymptote_check(report))
    assert [s for s, _ in pairs] == pytest.approx([0.01, 0.1])
    assert [r for _, r in pairs] == pytest.approx([0.99995000, 0.99503719], abs=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_report_invariants(seed):
    rng = np.random.default_rng(seed)
    m, d = rng.standard_normal((12, 6)), rng.uniform(0.1, 3) * rng.standard_normal((12, 6))
    gamma = 2.0
    rep = spectral_report(m, d, gamma)
    assert len(rep) == 6
    np.testing.assert_allclose(rep.eigenvalues, rep.signal_energy + gamma**2 * rep.noise_energy, rtol=1e-8)
    total = np.sum(m * m) + gamma**2 * np.sum(d * d)
    assert rep.eigenvalues.sum() == pytest.approx(total, rel=1e-8)
    np.testing.assert_allclose(rep.gain_theoretical, gain_from_snr(rep.snr), atol=1e-10)
    np.testing.assert_allclose(rep.gain_empirical, rep.gain_theoretical, atol=1e-6)
    assert np.all((rep.gain_theoretical >= 0) & (rep.gain_theoretical <= 1))


def test_muon_gains_are_one():
    rng = np.random.default_rng(11)
    m, d = rng.standard_normal((8, 5)), rng.standard_normal((8, 5))
    rep = spectral_report(m, d, 0.0)
    assert np.all(np.isinf(rep.snr))
    np.testing.assert_allclose(rep.gain_empirical, 1.0, atol=1e-9)
    np.testing.assert_array_equal(rep.gain_theoretical, 1.0)


def test_iterative_report_measures_shipped_update():
    rng = np.random.default_rng(12)
    m, d = rng.standard_normal((10, 4)), rng.standard_normal((10, 4))
    rep = spectral_report(m, d, 1.0, polar="iterative")
    assert np.max(np.abs(rep.gain_empirical - rep.gain_theoretical)) <= 0.15
    direction = prism_direction(m, d, PrismConfig(gamma=1.0))
    np.testing.assert_allclose(spectral_report(m, d, 1.0, direction=direction).gain_empirical,
                               rep.gain_empirical, atol=1e-12)


def test_degenerate_directions_flagged():
    m = np.zeros((3, 3))
    m[0, 0] = 1.0
    rep = spectral_report(m, np.zeros((3, 3)), 1.0)
    assert rep.degenerate.tolist() == [False, True, True]
    assert np.isinf(rep.snr[0]) and np.all(np.isnan(rep.snr[1:]))
    np.testing.assert_array_equal(rep.gain_theoretical[1:], 0.0)
    np.testing.assert_array_equal(rep.gain_empirical[1:], 0.0)
    with pytest.raises(ValueError):
        spectral_report(np.zeros((2, 2)), np.zeros((2, 2)), 1.0)


def test_report_rows():
    rep = spectral_report(np.eye(2), np.eye(2), 1.0)
    rows = rep.rows()
    assert [r["k"] for r in rows] == [0, 1]
    assert set(rows[0]) == {"k", "eigenvalue", "signal_energy", "noise_energy", "snr",
                            "gain_theoretical", "gain_empirical"}


def test_noisy_column_gets_lower_gain():
    # near the minimizer the stiff column's gradient is mostly noise
    problem = NoisyQuadratic((1.0, 100.0), (0.0, 5.0), rows=4, seed=1, init_scale=0.01)
    opt = Prism(gamma=2.0, polar="exact")
    w = problem.initial_point()
    state = opt.init_state(w)
    rng = Rng(1, "gains")
    for _ in range(30):
        info = opt.compute(state, quadratic_grad(problem, w, rng))
    rep = spectral_report(info.momentum, info.innovation, 2.0)
    # eigenvectors align with columns; find the one concentrated on column 1
    noisy_k = int(np.argmax(np.abs(rep.directions[1, :])))
    clean_k = 1 - noisy_k
    assert rep.gain_empirical[noisy_k] < 0.5 * rep.gain_empirical[clean_k]


def test_trajectory_stats():
    stats = trajectory_stats([np.eye(2)] * 3, [np.zeros((2, 2))] * 3)
    assert stats.param_norms == pytest.approx([np.sqrt(2)] * 3)
    assert stats.norm_growth == 0.0
    assert stats.final_param_norm == pytest.approx(np.sqrt(2))
    model = {"W": np.array([[3.0]]), "b": np.array([4.0])}
    assert trajectory_stats([model], []).final_param_norm == 5.0
    s = trajectory_stats([], [], gains=[[1.0, 0.0], [1.0, 1.0]])
    assert s.mean_gains == [0.5, 0.75]
    assert s.final_param_norm == 0.0


def test_gamma_two_norm_below_muon_on_quadratic():
    problem = NoisyQuadratic.anisotropic(8, 4, condition=1e2, noise=3.0, seed=2)
    finals = {}
    for gamma in (0.0, 2.0):
        opt = Prism(gamma=gamma, polar="exact")
        w = problem.initial_point()
        state, rng = opt.init_state(w), Rng(2, "norm")
        history = [w]
        for _ in range(300):
            w = opt.step(w, quadratic_grad(problem, w, rng), state, lr=0.02)
            history.append(w)
        finals[gamma] = trajectory_stats(history, []).final_param_norm
    assert finals[2.0] <= finals[0.0]
