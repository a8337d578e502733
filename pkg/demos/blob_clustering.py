"""
Inferring the cluster count by pruning
======================================

Start a mixture with ten components on data that has three clusters.
Mini-batch EM drives the weights of redundant components towards zero and
pruning removes them, so the number of survivors is the inferred count.
"""

import numpy as np

from seiswarp import TrainConfig, adjusted_rand_index, assign_all, fit

rng = np.random.default_rng(0)
centers = [(0.0, 0.0), (6.0, 0.0), (3.0, 6.0)]
data = np.concatenate([rng.normal(c, 0.1, (100, 2)) for c in centers])
truth = np.repeat([0, 1, 2], 100)

cfg = TrainConfig(K_init=10, max_epochs=1000, batch_size=64, seed=0)
model, history = fit(data, cfg)
ids, confidence = assign_all(model, data)

print(f"NLL: {history[0]:.1f} at init, {history.min():.1f} best, {history[-1]:.1f} final")
print(f"{model.K} components survive out of {cfg.K_init}")
print("weights:", np.round(model.weights, 3))
print("means:\n", np.round(model.means, 2))
print("adjusted Rand index vs truth:", adjusted_rand_index(truth, ids))

# With every point in every batch the same start keeps all ten components:
# EM alone never empties a component, it only shrinks it.
full, full_history = fit(data, TrainConfig(K_init=10, max_epochs=200, batch_size=None, seed=0))
print(f"full batch: {full.K} components, NLL never increases: {np.diff(full_history).max() <= 1e-8}")
