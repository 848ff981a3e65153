"""
Joint optimisation against the four baselines
=============================================

Block coordinate descent alternates greedy subchannel assignment, the
power allocation, the split point and the LoRA rank. The baselines
randomise some of these blocks:

a. everything random
b. random channels and power, optimised split and rank
c. random split, the rest optimised
d. random rank, the rest optimised
"""

import numpy as np

from splitfed_latency import check_constraints, default_scenario, evaluate_baseline, optimize_bcd

# %%
# One scenario in detail.
s = default_scenario(seed=1)
d, trace = optimize_bcd(s)
print("BCD objective per iteration [h]:", " ".join(f"{v / 3600:.3f}" for v in trace.objectives))
print(f"stopped after {trace.iterations} iterations ({trace.reason}); split={d.split} rank={d.rank}")
print("constraint violations:", check_constraints(s, d) or "none")

# %%
# Thirty seeds: mean total delay per strategy.
seeds = range(30)
totals = {name: [] for name in ("proposed", "a", "b", "c", "d")}
for seed in seeds:
    s = default_scenario(seed)
    totals["proposed"].append(optimize_bcd(s)[1].objectives[-1])
    for w in "abcd":
        totals[w].append(evaluate_baseline(s, w, seed=seed)[1])

ours = np.array(totals["proposed"])
print(f"\n{'strategy':<10}{'mean [h]':>10}{'proposed saves':>16}")
for name, v in totals.items():
    v = np.array(v)
    saving = "" if name == "proposed" else f"{np.mean(1 - ours / v):15.1%}"
    print(f"{name:<10}{v.mean() / 3600:10.3f}{saving}")
