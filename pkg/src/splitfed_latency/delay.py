"""Closed-form workload and latency model of one split-federated training run.

A decision's delay is built from six per-round phases: client forward
pass, activation upload, server forward and backward passes, client
backward pass, and (once per global round) the upload of the client-side
adapters to the federated server. Unreachable phases (positive data over a
zero-rate link) evaluate to ``math.inf``, which propagates through the
``max``/``sum`` reductions and keeps every comparison total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import rates_from_psd
from .decision import Decision
from .scenario import ModelProfile, NetworkScenario

INF = math.inf


@dataclass(frozen=True)
class WorkloadSummary:
    """Per-sample FLOP and bit totals for a given split point and rank."""

    client_fp: float
    client_fp_lora: float
    client_bp: float
    client_bp_lora: float
    server_fp: float
    server_fp_lora: float
    server_bp: float
    server_bp_lora: float
    activation_bits: float
    client_lora_bits: float


def mu_vector(split: int, num_layers: int) -> np.ndarray:
    """Binary placement vector: 1 for client-side layers, 0 for server-side."""
    return (np.arange(1, num_layers + 1) <= split).astype(float)


def check_split(split: int, num_layers: int) -> None:
    if not (1 <= split <= num_layers - 1):
        raise ValueError(f"split point must lie in [1, {num_layers - 1}], got {split}")


def workloads(model: ModelProfile, split: int, rank: int) -> WorkloadSummary:
    check_split(split, model.num_layers)
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    a = model.arrays
    mu = mu_vector(split, model.num_layers)
    nu = 1.0 - mu
    # Gamma_s = sum_j (mu_j - mu_{j+1}) psi_j: only the boundary layer survives
    gamma = float(np.dot(mu[:-1] - mu[1:], a["activation_bits"][:-1]))
    return WorkloadSummary(
        client_fp=float(mu @ a["fp_flops"]),
        client_fp_lora=float(rank * (mu @ a["lora_fp_flops"])),
        client_bp=float(mu @ a["bp_flops"]),
        client_bp_lora=float(rank * (mu @ a["lora_bp_flops"])),
        server_fp=float(nu @ a["fp_flops"]),
        server_fp_lora=float(rank * (nu @ a["lora_fp_flops"])),
        server_bp=float(nu @ a["bp_flops"]),
        server_bp_lora=float(rank * (nu @ a["lora_bp_flops"])),
        activation_bits=gamma,
        client_lora_bits=float(rank * (mu @ a["lora_param_bits"])),
    )


def transfer_time(bits, rate):
    """``bits / rate`` with 0 for empty payloads and ``inf`` for dead links."""
    bits = np.asarray(bits, dtype=float)
    rate = np.asarray(rate, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(rate > 0, bits / np.where(rate > 0, rate, 1.0), INF)
    return np.where(bits == 0, 0.0, t)


CSV_COLUMNS = ("client", "T_fp_s", "T_up_s", "T_bp_s", "T_fed_s",
               "T_server_fp_s", "T_server_bp_s", "t_local_s", "total_s")


@dataclass(frozen=True, eq=False)
class DelayBreakdown:
    """Phase delays of one decision.

    Per-client arrays have length K; ``E`` and ``I`` are the global rounds
    and local steps used for ``total``.
    """

    client_fp: np.ndarray
    upload: np.ndarray
    client_bp: np.ndarray
    fed_upload: np.ndarray
    server_fp: float
    server_bp: float
    E: int
    I: int

    @property
    def t_local(self) -> float:
        return local_round_delay(self)

    @property
    def total(self) -> float:
        return total_delay(self, self.E, self.I)

    @property
    def T1(self) -> float:
        return float(np.max(self.client_fp + self.upload))

    @property
    def T2(self) -> float:
        return float(np.max(self.client_bp))

    @property
    def T3(self) -> float:
        return float(np.max(self.fed_upload))

    def csv_rows(self) -> list[list]:
        """One row per client in :data:`CSV_COLUMNS` order; round-level fields repeat."""
        return [[k, self.client_fp[k], self.upload[k], self.client_bp[k], self.fed_upload[k],
                 self.server_fp, self.server_bp, self.t_local, self.total]
                for k in range(len(self.client_fp))]

    def csv_row(self) -> list:
        """Single-row summary: straggler values in :data:`CSV_COLUMNS` order."""
        return ["max", float(np.max(self.client_fp)), float(np.max(self.upload)), self.T2, self.T3,
                self.server_fp, self.server_bp, self.t_local, self.total]


def local_round_delay(b: DelayBreakdown) -> float:
    """One local step: FP+upload barrier, server FP and BP, client-BP barrier."""
    return float(np.max(b.client_fp + b.upload) + b.server_fp + b.server_bp + np.max(b.client_bp))


def total_delay(b: DelayBreakdown, E: int, I: int) -> float:
    """``E * (I * t_local + max_k T_k^f)``."""
    if E < 1 or I < 1:
        raise ValueError("E and I must be >= 1")
    t = I * local_round_delay(b) + float(np.max(b.fed_upload))
    return E * t


def link_rates(s: NetworkScenario, d: Decision) -> tuple[np.ndarray, np.ndarray]:
    """Achieved uplink rates (bit/s) per client towards main and federated server."""
    a = d.assignment
    main_owner = a.main_owner()
    fed_owner = a.fed_owner()
    r_main = rates_from_psd(s.bw_main, d.psd_main, s.snr_main[main_owner])
    r_fed = rates_from_psd(s.bw_fed, d.psd_fed, s.snr_fed[fed_owner])
    return a.main @ r_main, a.fed @ r_fed


def delays_from_rates(s: NetworkScenario, split: int, rank: int,
                      rate_main, rate_fed) -> DelayBreakdown:
    """Phase delays at ``(split, rank)`` for already-achieved link rates."""
    w = workloads(s.model, split, rank)
    b = s.model.batch_size
    c = s.client_arrays
    client_scale = b * c["cycles_per_flop"] / c["compute_rate"]
    server_scale = s.K * b * s.server.cycles_per_flop / s.server.compute_rate
    return DelayBreakdown(
        client_fp=client_scale * (w.client_fp + w.client_fp_lora),
        upload=transfer_time(b * w.activation_bits, rate_main),
        client_bp=client_scale * (w.client_bp + w.client_bp_lora),
        fed_upload=transfer_time(w.client_lora_bits, rate_fed),
        server_fp=server_scale * (w.server_fp + w.server_fp_lora),
        server_bp=server_scale * (w.server_bp + w.server_bp_lora),
        E=s.ranks.E(rank),
        I=s.ranks.local_steps,
    )


def _structural_errors(s: NetworkScenario, d: Decision) -> list[str]:
    errs = []
    a = d.assignment
    for name, mat, n in (("main", a.main, s.M), ("fed", a.fed, s.N)):
        if mat.shape != (s.K, n):
            errs.append(f"{name} assignment must be {s.K}x{n}, got {mat.shape}")
            continue
        if not np.isin(mat, (0, 1)).all():
            errs.append(f"{name} assignment is not binary")
        if not (mat.sum(axis=0) == 1).all():
            errs.append(f"{name} assignment: every subchannel needs exactly one owner")
    if d.psd_main.shape != (s.M,) or d.psd_fed.shape != (s.N,):
        errs.append("PSD vectors must have one entry per subchannel")
    elif (d.psd_main < 0).any() or (d.psd_fed < 0).any():
        errs.append("negative PSD")
    if not (1 <= d.split <= s.model.num_layers - 1):
        errs.append(f"split point {d.split} outside [1, {s.model.num_layers - 1}]")
    return errs


def phase_delays(s: NetworkScenario, d: Decision) -> DelayBreakdown:
    errs = _structural_errors(s, d)
    if errs:
        raise ValueError("; ".join(errs))
    r_main, r_fed = link_rates(s, d)
    return delays_from_rates(s, d.split, d.rank, r_main, r_fed)


def objective(s: NetworkScenario, d: Decision) -> float:
    """Total training delay of ``d`` in seconds."""
    return phase_delays(s, d).total
