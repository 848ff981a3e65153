"""Greedy FDMA subchannel assignment.

Phase 1 hands every client one subchannel per server: the widest channels
go first to the slowest clients (main server) and to the farthest clients
(federated server). Phase 2 repeatedly grants the widest free channel to
the client that currently lags the most, skipping clients whose power
budget the grant would break.
"""

from __future__ import annotations

import logging

import numpy as np

from .decision import Assignment
from .delay import transfer_time, workloads
from .scenario import NetworkScenario

log = logging.getLogger(__name__)

_REL = 1e-9


class AllocationWarning(UserWarning):
    pass


def _widest(bw: np.ndarray, free: list[int]) -> int:
    # ties go to the lowest subchannel index
    return max(free, key=lambda i: (bw[i], -i))


def _phase1(order_key, bw: np.ndarray, K: int, owner: np.ndarray, free: list[int]) -> None:
    unserved = list(range(K))
    for _ in range(K):
        n = min(unserved, key=lambda k: (order_key[k], k))
        m = _widest(bw, free)
        owner[m] = n
        unserved.remove(n)
        free.remove(m)


def _phase2(lag, bw, psd, snr, pmax, p_total_cap, owner, free, warnings, side):
    """Grant ``free`` channels one by one. ``lag(k, rate_k)`` is the client's delay."""
    K = len(pmax)
    rate = np.zeros(K)
    power = np.zeros(K)
    for i in np.flatnonzero(owner >= 0):
        k = owner[i]
        rate[k] += bw[i] * np.log2(1.0 + psd[i] * snr[k])
        power[k] += psd[i] * bw[i]
    active = list(range(K))
    last_dropped = None
    while free:
        m = _widest(bw, free)
        extra = psd[m] * bw[m]
        if not active:
            warnings.append(f"{side}: every client hit a power limit; "
                            f"{len(free)} subchannel(s) left to client {last_dropped}")
            for i in list(free):
                owner[i] = last_dropped
            free.clear()
            break
        delays = np.array([lag(k, rate[k]) for k in active])
        n = active[int(np.argmax(delays))]  # argmax picks the first (lowest index) on ties
        fits_client = power[n] + extra <= pmax[n] * (1 + _REL)
        fits_total = power.sum() + extra <= p_total_cap * (1 + _REL)
        if not (fits_client and fits_total):
            active.remove(n)
            last_dropped = n
            continue
        owner[m] = n
        free.remove(m)
        rate[n] += bw[m] * np.log2(1.0 + psd[m] * snr[n])
        power[n] += extra


def allocate_greedy(s: NetworkScenario, split: int, rank: int,
                    psd_main_prev, psd_fed_prev, warnings: list[str] | None = None) -> Assignment:
    """Assign all subchannels of both servers; delays are judged at the previous PSDs.

    Infeasibility in phase 2 is not fatal: leftover channels go to the last
    deactivated client and a message is appended to ``warnings`` (and logged).
    """
    if s.M < s.K or s.N < s.K:
        raise ValueError(f"need at least one subchannel per client (K={s.K}, M={s.M}, N={s.N})")
    psd_main = np.asarray(psd_main_prev, dtype=float)
    psd_fed = np.asarray(psd_fed_prev, dtype=float)
    if (psd_main < 0).any() or (psd_fed < 0).any():
        raise ValueError("previous PSDs must be non-negative")
    warnings = [] if warnings is None else warnings
    K = s.K
    c = s.client_arrays
    w = workloads(s.model, split, rank)
    b = s.model.batch_size
    t_fp = b * c["cycles_per_flop"] * (w.client_fp + w.client_fp_lora) / c["compute_rate"]
    act_bits = b * w.activation_bits
    pmax = c["max_power"]

    main_owner = np.full(s.M, -1)
    fed_owner = np.full(s.N, -1)
    free_main = list(range(s.M))
    free_fed = list(range(s.N))
    _phase1(c["compute_rate"], s.bw_main, K, main_owner, free_main)
    _phase1(-c["dist_fed"], s.bw_fed, K, fed_owner, free_fed)

    n_warn = len(warnings)
    _phase2(lambda k, r: t_fp[k] + float(transfer_time(act_bits, r)),
            s.bw_main, psd_main, s.snr_main, pmax, s.server.power_cap_main,
            main_owner, free_main, warnings, "main")
    _phase2(lambda k, r: float(transfer_time(w.client_lora_bits, r)),
            s.bw_fed, psd_fed, s.snr_fed, pmax, s.server.power_cap_fed,
            fed_owner, free_fed, warnings, "fed")
    for msg in warnings[n_warn:]:
        log.warning("greedy allocation: %s", msg)
    return Assignment.from_owners(main_owner, fed_owner, K)
