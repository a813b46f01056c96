# %% [markdown]
# # Checking the hand-written backward pass
#
# The LSTM gradients in `charrnn.model` are derived by hand. Here we compare
# them against central finite differences on a tiny model, first for one
# window and then for a batch of random configurations.

# %%
import numpy as np

from charrnn.model import (
    backward_window,
    finite_difference_grad,
    forward_window,
    gradient_suite,
    init_params,
    max_relative_error,
    window_loss,
)

# %% A tiny model: 5 symbols, 4 hidden units, a window of 3 characters.
params = init_params(seed=0, V=5, H=4)
params.flat[:] += np.random.default_rng(0).uniform(-0.5, 0.5, params.flat.size)
chars, targets = [3, 0, 2], [0, 2, 4]

trace = forward_window(params, chars, targets, loss_positions="all")
print("losses per position:", [round(l, 4) for _, l in trace.losses])

analytic = backward_window(params, trace)
numeric = finite_difference_grad(params, lambda p: window_loss(p, chars, targets, "all"))

for name, value in analytic.items():
    other = dict(numeric.items())[name]
    print(f"{name:>3}  max rel error {max_relative_error(value, other):.2e}")

# %% [markdown]
# The learned initial state (h0, c0) gets a gradient too, since every window
# here starts from it.

# %%
print("d_h0:", analytic.h0)
print("d_c0:", analytic.c0)

# %% Twenty random configurations, both loss placements.
results = gradient_suite(n_configs=20, seed=0)
worst = max(r["max_rel_error"] for r in results)
print(f"{len(results)} windows checked, worst relative error {worst:.2e}")
