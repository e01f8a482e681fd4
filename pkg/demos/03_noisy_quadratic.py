"""
Noisy quadratic: damping sweep and learning-rate stress
=======================================================

Both experiments also ship as TOML files under configs/ for the CLI.
"""

from prism import scenarios
from prism.harness import run_experiment

# %%
# Sweep γ at a fixed learning rate.
result = run_experiment(scenarios.load("gamma-sweep"))
for r in result.runs:
    print(f"gamma={r.gamma:4.1f}  final loss {r.final_loss:.4f}")

# %%
# Push the learning rate far past its useful range.
# Spectral steps have bounded size, so nothing blows up;
# what changes is where each method settles.
result = run_experiment(scenarios.load("stress"))
print("initial loss", round(result.runs[0].initial_loss, 1))
for row in result.ranking():
    tag = " (diverged)" if row["diverged"] else ""
    print(f"gamma={row['gamma']:3.1f} lr={row['lr_max']:6.2f}  final {row['final_loss']:10.4f}{tag}")
