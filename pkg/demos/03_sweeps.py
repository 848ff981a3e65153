"""
Latency against bandwidth, client compute, server compute and power
===================================================================

Each sweep re-optimises the proposed scheme and reruns all baselines at
every value, for several sampled scenarios. The CSV written here has the
same columns as ``splitfed-latency sweep``; a figure per axis is drawn
when matplotlib is installed.

Run with ``python demos/03_sweeps.py [seeds]`` (default 10 seeds).
"""

import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from splitfed_latency import default_scenario, emit_csv, run_sweep

seeds = range(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
out = Path("sweep_out")
out.mkdir(exist_ok=True)

SWEEPS = {
    "bandwidth": ([300e3, 400e3, 500e3, 600e3], "total bandwidth per server [kHz]", 1e-3),
    "kappa_inv": ([256, 512, 1024, 2048], "client FLOPs per cycle", 1.0),
    "fs": ([1e9, 2.5e9, 5e9, 7.5e9, 10e9], "main server compute [GHz]", 1e-9),
    "pmax": ([30.0, 35.0, 41.76, 45.0], "client power cap [dBm]", 1.0),
}


def mean_curves(rows):
    acc = defaultdict(list)
    for r in rows:
        acc[(r["strategy"], r["value"])].append(r["total_s"])
    curves = defaultdict(dict)
    for (strategy, value), v in acc.items():
        curves[strategy][value] = float(np.mean(v)) / 3600
    return curves


template = default_scenario(0)
results = {}
for param, (values, label, scale) in SWEEPS.items():
    rows = run_sweep(template, param, values, seeds)
    emit_csv(rows, out / f"{param}.csv")
    curves = mean_curves(rows)
    results[param] = curves
    print(f"\n{label}")
    print("value      " + "".join(f"{s:>13}" for s in curves))
    for v in values:
        print(f"{v * scale:<10g} " + "".join(f"{curves[s][v]:13.3f}" for s in curves))

# %%
# Figures, if matplotlib is around.
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("\nmatplotlib not installed; CSVs are in", out)
else:
    for param, (values, label, scale) in SWEEPS.items():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for strategy, pts in results[param].items():
            xs = sorted(pts)
            ax.plot([x * scale for x in xs], [pts[x] for x in xs], marker="o", label=strategy)
        ax.set_xlabel(label)
        ax.set_ylabel("mean total latency [h]")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out / f"{param}.png", dpi=120)
        plt.close(fig)
    print("\nCSVs and figures written to", out)
