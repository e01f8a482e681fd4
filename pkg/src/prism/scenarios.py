"""Canonical desk-scale experiments, as plain config dicts.

The TOML files under ``demos/configs`` mirror these one to one.
"""

from __future__ import annotations

from .harness import ExperimentConfig

# Stiff, noisy canyon: curvature 1..1e3, the stiffest half of the columns
# carries strong gradient noise. Learning rates run far past the usable range.
STRESS = {
    "name": "stress",
    "steps": 300,
    "seed": 0,
    "clip_threshold": 10.0,
    "problem": {"kind": "quadratic", "rows": 16, "cols": 8, "condition": 1e3,
                "noise": 10.0, "noisy_fraction": 0.5, "init_scale": 1.0},
    "optimizer": {"kind": "prism", "beta": 0.95, "polar": "iterative"},
    "schedule": {"warmup_steps": 30, "lr_max": 0.02, "lr_final": 0.002},
    "grid": {"gamma": [0.0, 2.0], "lr_max": [0.02, 0.05, 0.1, 0.5, 2.0, 10.0]},
}

GAMMA_SWEEP = {
    "name": "gamma-sweep",
    "steps": 500,
    "seed": 0,
    "clip_threshold": 10.0,
    "problem": {"kind": "quadratic", "rows": 16, "cols": 8, "condition": 1e3,
                "noise": 1.0, "noisy_fraction": 0.5, "init_scale": 1.0},
    "optimizer": {"kind": "prism", "beta": 0.95, "polar": "iterative"},
    "schedule": {"warmup_steps": 50, "lr_max": 0.05, "lr_final": 0.005},
    "grid": {"gamma": [0.0, 0.1, 0.5, 1.0, 2.0, 5.0]},
}

# Label noise dominates the minibatch gradients, which is where the
# update-norm regularization shows.
MLP_NORM = {
    "name": "mlp-norm",
    "steps": 1000,
    "seed": 0,
    "clip_threshold": 10.0,
    "problem": {"kind": "mlp", "d_in": 8, "d_hidden": 16, "d_out": 4,
                "n_samples": 256, "batch_size": 8, "teacher_noise": 1.0},
    "optimizer": {"kind": "prism", "beta": 0.95, "polar": "iterative", "adamw_lr_ratio": 0.25},
    "schedule": {"warmup_steps": 100, "lr_max": 0.05, "lr_final": 0.005},
    "grid": {"gamma": [0.0, 1.0, 2.0]},
}

PROBE = {
    "name": "probe",
    "steps": 200,
    "seed": 0,
    "probe_every": 20,
    "problem": {"kind": "quadratic", "rows": 16, "cols": 8, "condition": 1e2,
                "noise": 1.0, "noisy_fraction": 0.5},
    "optimizer": {"kind": "prism", "polar": "exact"},
    "schedule": {"warmup_steps": 20, "lr_max": 0.05, "lr_final": 0.005},
    "grid": {"gamma": [0.0, 1.0]},
}

ALL = {"stress": STRESS, "gamma-sweep": GAMMA_SWEEP, "mlp-norm": MLP_NORM, "probe": PROBE}


def load(name: str, **overrides) -> ExperimentConfig:
    raw = {**ALL[name], **overrides}
    return ExperimentConfig.from_dict(raw)
