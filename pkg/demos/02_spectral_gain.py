"""
Per-direction gain of a PRISM step
==================================

Stacking γD under the momentum shrinks every eigendirection of the
augmented Gram matrix by 1/sqrt(1 + 1/snr²).
"""

import numpy as np

from prism import PrismConfig, prism_direction, spectral_report

rng = np.random.default_rng(1)
m = rng.standard_normal((16, 6))
d = rng.standard_normal((16, 6)) * np.array([0.1, 0.1, 0.5, 1.0, 3.0, 3.0])

# %%
# Exact mode: theory and measurement coincide.
rep = spectral_report(m, d, gamma=1.0)
print(" k      snr   theory  measured")
for r in rep.rows():
    print(f"{r['k']:2d} {r['snr']:8.3f} {r['gain_theoretical']:8.4f} {r['gain_empirical']:8.4f}")

# %%
# Newton-Schulz mode: the gap measures the iteration error.
rep_ns = spectral_report(m, d, gamma=1.0, polar="iterative")
print("max |measured - theory| with Newton-Schulz:",
      np.abs(rep_ns.gain_empirical - rep_ns.gain_theoretical).max())

# %%
# γ = 0 is plain orthogonalization: all gains are 1.
print("gamma=0 gains:", spectral_report(m, d, gamma=0.0).gain_empirical.round(12))

# %%
# Raising γ damps the noisy directions first.
for gamma in (0.5, 1.0, 2.0, 5.0):
    o = prism_direction(m, d, PrismConfig(gamma=gamma, polar="exact"))
    print(f"gamma={gamma:3.1f} singular values of update:", np.linalg.svd(o, compute_uv=False).round(3))
