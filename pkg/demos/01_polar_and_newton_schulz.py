"""
Polar factors by eigendecomposition and by Newton-Schulz
========================================================

"""

# %%
# The exact polar factor of a tall matrix comes from the Gram matrix.
import numpy as np

from prism.linalg import CUBIC, DEFAULT_NS, MUON_QUINTIC, exact_polar, newton_schulz_polar, symmetric_eig

rng = np.random.default_rng(0)
m = rng.standard_normal((12, 5))
u = exact_polar(m)
print("exact  |UᵀU - I|max =", np.abs(u.T @ u - np.eye(5)).max())

vecs, vals = symmetric_eig(m.T @ m)
print("singular values of m:", np.sqrt(vals).round(3))

# %%
# Newton-Schulz only multiplies matrices. Each schedule maps a singular
# value s to a s + b s^3 + c s^5; the default converges to 1, Muon's
# quintic parks everything in a band.
s = np.geomspace(1e-3, 1.0, 7)
for name, ns in [("default", DEFAULT_NS), ("muon", MUON_QUINTIC), ("cubic", CUBIC)]:
    x = s.copy()
    for _ in range(ns.iterations):
        x = ns.scalar_map(x)
    print(f"{name:8s}", x.round(3))

# %%
# Agreement with the exact factor on the same matrix.
for name, ns in [("default", DEFAULT_NS), ("muon", MUON_QUINTIC), ("cubic", CUBIC)]:
    err = np.linalg.norm(newton_schulz_polar(m, ns) - u) / np.sqrt(5)
    print(f"{name:8s} error {err:.2e}")
