"""
Where the time goes in one training run
=======================================

Five clients fine-tune GPT2-S with LoRA. Each keeps the first ``split``
transformer blocks, ships activations to a main server that runs the
rest, and once per global round uploads its adapters to a federated
server. This script builds the default scenario, picks a simple decision
by hand and breaks its delay into phases.
"""

import numpy as np

from splitfed_latency import default_scenario, phase_delays, simulate_timeline
from splitfed_latency.optimizer import initial_decision

# %%
# The scenario: client placement, compute speeds and shadowing are drawn
# from the seed, everything else is the default parameter set.
s = default_scenario(seed=0)
print(f"K={s.K} clients, M={s.M} main / N={s.N} federated subchannels, "
      f"{s.model.num_layers} layers")
for c in s.clients:
    print(f"  client {c.id}: f={c.compute_rate / 1e9:.2f} GHz, "
          f"{c.dist_main * 1e3:.0f} m to main, {c.dist_fed * 1e3:.1f} m to fed server")

# %%
# A starting decision: split in the middle, smallest rank, equal PSD on
# every subchannel, channels handed out greedily.
d = initial_decision(s)
b = phase_delays(s, d)
print(f"\nsplit={d.split} rank={d.rank} -> E(r)={b.E} rounds, I={b.I} local step(s)")
print("client   FP[s]   upload[s]   BP[s]   fed upload[s]")
for k in range(s.K):
    print(f"{k:>6} {b.client_fp[k]:7.2f} {b.upload[k]:10.2f} {b.client_bp[k]:7.2f} {b.fed_upload[k]:12.3f}")
print(f"server FP {b.server_fp:.2f} s, server BP {b.server_bp:.2f} s")
print(f"one local step {b.t_local:.2f} s, whole run {b.total / 3600:.2f} h")

# %%
# The straggler sets each barrier: the slowest FP+upload client gates the
# server, the slowest BP client gates the next step.
print(f"straggler on the uplink barrier: client {int(np.argmax(b.client_fp + b.upload))}")

# %%
# The event simulator replays the same round as timestamped events and
# must land on the same total.
log, total = simulate_timeline(s, d)
print(f"\nevent simulation: {len(log)} events, total {total / 3600:.6f} h "
      f"(closed form {b.total / 3600:.6f} h)")
for e in log[:8]:
    print(f"  t={e.time:8.3f}s  {e.phase:<10} {e.actor_name}")
