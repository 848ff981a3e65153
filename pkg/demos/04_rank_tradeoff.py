"""
Which LoRA rank is fastest depends on the link
==============================================

A larger rank costs a little more compute and upload per round but needs
fewer rounds. Whether that pays off depends on how expensive the adapter
upload is. The bundled ``narrowband_fed.toml`` reaches the federated
server over only 20 kHz, which makes the trade visible.
"""

import dataclasses

from splitfed_latency import load_scenario, optimize_bcd
from splitfed_latency.cli import bundled_config
from splitfed_latency.delay import link_rates
from splitfed_latency.split_rank import rank_objectives

template = load_scenario(bundled_config("narrowband_fed.toml"))
print("calibrated E(r):", dict(template.ranks.rounds))

# %%
# Scale every subchannel of both servers and re-optimise.
for factor in (0.1, 0.3, 1.0, 3.0, 10.0):
    ch = template.channels
    s = template.replace(channels=dataclasses.replace(
        ch, bw_main=tuple(b * factor for b in ch.bw_main),
        bw_fed=tuple(b * factor for b in ch.bw_fed)))
    d, _ = optimize_bcd(s)
    per_rank = rank_objectives(s, d, link_rates(s, d)) / 3600
    table = "  ".join(f"r={r}:{t:7.2f}h" for r, t in zip(s.ranks.candidates, per_rank))
    print(f"bandwidth x{factor:<4g} -> rank {d.rank}, split {d.split} | {table}")
