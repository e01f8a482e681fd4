"""PRISM: innovation-augmented polar-decomposition spectral descent, with
Muon, Tikhonov-damped Muon and AdamW baselines, spectral instrumentation,
desk-scale test problems and an experiment harness."""

from .linalg import (
    CUBIC,
    DEFAULT_NS,
    MUON_QUINTIC,
    EigenPair,
    NsCoefficients,
    exact_polar,
    frobenius_norm,
    gram_right,
    inv_sqrt_psd,
    matmul,
    newton_schulz_polar,
    svd_polar_oracle,
    symmetric_eig,
)
from .optim import (
    AdamW,
    AdamWState,
    HybridOptimizer,
    Muon,
    OptimizerState,
    Prism,
    PrismConfig,
    Schedule,
    TikhonovConfig,
    TikhonovMuon,
    adamw_step,
    apply_update,
    build_augmented,
    clip_gradients,
    cosine_schedule,
    lr_scale_for_shape,
    momentum_update,
    muon_direction,
    prism_direction,
    tikhonov_direction,
)
from .problems import (
    MlpTask,
    NoisyQuadratic,
    Rng,
    ToyMlp,
    make_regression_data,
    mlp_forward_backward,
    quadratic_grad,
    quadratic_loss,
)
from .spectral import (
    SpectralReport,
    augmented_gram,
    low_snr_asymptote_check,
    spectral_report,
    trajectory_stats,
)

__version__ = "0.1.0"
