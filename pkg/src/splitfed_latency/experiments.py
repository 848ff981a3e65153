"""Parameter sweeps comparing the BCD optimiser with the four baselines."""

from __future__ import annotations

import csv
import dataclasses
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channel import dbm_to_watts
from .decision import Decision
from .delay import phase_delays
from .optimizer import BASELINES, optimize_bcd, run_baseline
from .scenario import NetworkScenario, sample_scenario

SWEEP_PARAMS = ("bandwidth", "kappa_inv", "fs", "pmax")
STRATEGIES = ("proposed",) + tuple(f"baseline_{w}" for w in BASELINES)
CSV_COLUMNS = ("sweep_param", "value", "strategy", "seed", "total_s", "t_local_s",
               "T1_s", "T2_s", "T3_s", "split", "rank", "E", "iterations")


def apply_param(s: NetworkScenario, param: str, value: float) -> NetworkScenario:
    """Scenario with one swept quantity replaced.

    bandwidth: total Hz per server, split evenly over the existing subchannels;
    kappa_inv: client FLOPs per cycle; fs: main-server cycles/s;
    pmax: per-client transmit power cap in dBm.
    """
    if param == "bandwidth":
        ch = s.channels
        return s.replace(channels=dataclasses.replace(
            ch, bw_main=(value / s.M,) * s.M, bw_fed=(value / s.N,) * s.N))
    if param == "kappa_inv":
        return s.replace(clients=tuple(dataclasses.replace(c, cycles_per_flop=1.0 / value)
                                       for c in s.clients))
    if param == "fs":
        return s.replace(server=dataclasses.replace(s.server, compute_rate=float(value)))
    if param == "pmax":
        return s.replace(clients=tuple(dataclasses.replace(c, max_power=dbm_to_watts(value))
                                       for c in s.clients))
    raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")


def carry_over(prev_s: NetworkScenario, new_s: NetworkScenario, d: Decision) -> Decision:
    """Map a decision onto a scenario with changed bandwidths, keeping per-channel power."""
    return d.replace(psd_main=d.psd_main * prev_s.bw_main / new_s.bw_main,
                     psd_fed=d.psd_fed * prev_s.bw_fed / new_s.bw_fed)


def result_row(param, value, strategy, seed, s, d, iterations) -> dict:
    b = phase_delays(s, d)
    return {"sweep_param": param, "value": value, "strategy": strategy, "seed": seed,
            "total_s": b.total, "t_local_s": b.t_local, "T1_s": b.T1, "T2_s": b.T2, "T3_s": b.T3,
            "split": d.split, "rank": d.rank, "E": b.E, "iterations": iterations}


def sweep_seed(template: NetworkScenario, param: str, values: Sequence[float], seed: int,
               eps: float = 1e-3, max_iter: int = 50) -> list[dict]:
    """All strategies at every value for one sampled scenario.

    Values are visited in increasing order and the proposed method is also
    warm-started from the previous value's solution; the better of the cold
    and warm runs is kept. Every swept quantity makes the old decision
    feasible and no slower at a larger value, so the proposed curve is
    non-increasing per seed.
    """
    base = sample_scenario(template, seed)
    rows = []
    prev = None
    for value in sorted(values):
        s = apply_param(base, param, value)
        d, tr = optimize_bcd(s, eps, max_iter)
        best, best_obj, iters = d, tr.objectives[-1], tr.iterations
        if prev is not None:
            warm = carry_over(prev[0], s, prev[1])
            dw, trw = optimize_bcd(s, eps, max_iter, init=warm)
            if trw.objectives[-1] < best_obj:
                best, best_obj, iters = dw, trw.objectives[-1], trw.iterations
        prev = (s, best)
        rows.append(result_row(param, value, "proposed", seed, s, best, iters))
        for w in BASELINES:
            dw, _, it = run_baseline(s, w, seed, eps, max_iter)
            rows.append(result_row(param, value, f"baseline_{w}", seed, s, dw, it))
    return rows


def _sweep_job(args):
    return sweep_seed(*args)


def run_sweep(template: NetworkScenario, param: str, values: Sequence[float], seeds: Iterable[int],
              eps: float = 1e-3, max_iter: int = 50, workers: int = 1) -> list[dict]:
    """One row per (value, strategy, seed), sorted in that order."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
    jobs = [(template, param, list(values), int(sd), eps, max_iter) for sd in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_sweep_job, jobs))
    else:
        chunks = [_sweep_job(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    order = {name: i for i, name in enumerate(STRATEGIES)}
    rows.sort(key=lambda r: (r["value"], order[r["strategy"]], r["seed"]))
    return rows


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_cell(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def emit_csv(rows: Iterable[dict], path: str | Path) -> None:
    """Write rows under the fixed header; ``-`` writes to stdout. Infinite delays print as ``inf``."""
    text = format_csv(rows)
    if str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
