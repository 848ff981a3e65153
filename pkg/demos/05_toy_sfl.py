"""
Split federated LoRA on a toy linear model
==========================================

A frozen two-layer linear network is cut after the first layer. Clients
adapt the first layer, the server adapts the second, and every ``I``
steps the client adapters are averaged with weights ``D_k / D``. With
one client and one local step this is exactly gradient descent on the
whole model, which the script checks before training five clients.
"""

import numpy as np

from splitfed_latency.toy_sfl import ToyModel, ToyTask, train_centralized_toy, train_sfl_toy

task = ToyTask()
W_c, W_s, data = task.build(seed=0)

# %%
# One client, one local step: the two trainers agree step for step.
model = ToyModel(W_c, W_s, rank=4, lr_c=task.lr, lr_s=task.lr)
X, Y = data[0]
sfl = train_sfl_toy([(X, Y)], model, I=1, E=50, seed=1)
cen = train_centralized_toy(X, Y, model, 50, seed=1)
gap = np.max(np.abs(np.array(sfl.step_losses) - np.array(cen.step_losses)))
print(f"K=1, I=1 vs centralised: max loss difference over 50 steps {gap:.1e}")

# %%
# Five clients, different ranks: loss after each global round.
print("\nround   " + "".join(f"   r={r}" for r in (1, 2, 4, 8)))
curves = {}
for r in (1, 2, 4, 8):
    model = ToyModel(W_c, W_s, rank=r, lr_c=task.lr, lr_s=task.lr)
    curves[r] = train_sfl_toy(data, model, I=task.local_steps, E=400, seed=1,
                              batch_size=task.batch_size).round_losses
for e in (1, 50, 100, 200, 400):
    print(f"{e:>5}   " + "".join(f"{curves[r][e - 1]:7.3f}" for r in curves))
