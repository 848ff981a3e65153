"""
Regenerate the bundled E(r) table
=================================

Trains the toy model at every candidate rank until the training loss
reaches 0.1 and records the rounds needed, averaged over five task
draws. The result is the ``[lora]`` table in
``src/splitfed_latency/data/rank_profile.toml``. Takes about half a
minute.

``python demos/calibrate_rank_profile.py [output.toml]``
"""

import sys

import tomli_w

from splitfed_latency.toy_sfl import ToyTask, calibrate_rank_profile

cal = calibrate_rank_profile(ToyTask(), [1, 2, 4, 6, 8], target_loss=0.1, seed=0,
                             max_rounds=3000, repeats=5)
for r, why in cal.unreachable.items():
    print(f"rank {r} dropped: {why}", file=sys.stderr)
print("E(r):", dict(cal.profile.rounds), file=sys.stderr)

text = tomli_w.dumps({"lora": cal.profile.to_toml_table()})
if len(sys.argv) > 1:
    with open(sys.argv[1], "w") as fh:
        fh.write(text)
else:
    sys.stdout.write(text)
