"""
Training a small MLP with PRISM on the matrices and AdamW on the biases
=======================================================================

"""

import numpy as np

from prism import scenarios
from prism.harness import run_experiment
from prism.problems import MlpTask, Rng, mlp_forward_backward

# %%
# Gradient check of the hand-written backward pass.
task = MlpTask(d_in=4, d_hidden=6, d_out=2, n_samples=16, batch_size=16)
mlp = task.init_model()
x, y = task.data
_, grads = mlp_forward_backward(mlp, x, y)
eps = 1e-5
mlp.W1[0, 0] += eps
up, _ = mlp_forward_backward(mlp, x, y)
mlp.W1[0, 0] -= 2 * eps
down, _ = mlp_forward_backward(mlp, x, y)
mlp.W1[0, 0] += eps
print("dL/dW1[0,0] analytic", grads["W1"][0, 0], "numeric", (up - down) / (2 * eps))

# %%
# Noisy labels, small batches. The final parameter norm drops as γ grows.
result = run_experiment(scenarios.load("mlp-norm"))
for r in result.runs:
    print(f"gamma={r.gamma:3.1f}  loss {r.final_loss:.4f}  |theta|_F {r.final_param_norm:.3f}")

# %%
# Norm over time, every 100 steps.
for r in result.runs:
    norms = [row["param_fro_norm"] for row in r.metrics][99::100]
    print(f"gamma={r.gamma:3.1f}", np.round(norms, 2))
