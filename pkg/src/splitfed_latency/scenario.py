"""Experiment scenarios: clients, servers, channels, model and rank profiles.

A :class:`NetworkScenario` is immutable and fully describes one experiment.
Scenarios are loaded from TOML configs (see ``data/default.toml``), sampled
from a template with :func:`sample_scenario`, or built with
:func:`default_scenario`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np
import tomli
import tomli_w

from .channel import channel_gain, dbm_to_watts

NOISE_PSD_DBM_HZ = -174.0


class ConfigError(ValueError):
    """Raised for unparsable or invalid scenario configs."""


@dataclass(frozen=True)
class ClientProfile:
    id: int
    compute_rate: float        # cycles/s
    cycles_per_flop: float
    dist_main: float           # km
    dist_fed: float            # km
    max_power: float           # W
    dataset_size: int = 1


@dataclass(frozen=True)
class ServerProfile:
    compute_rate: float = 5e9
    cycles_per_flop: float = 1.0 / 32768
    power_cap_main: float = dbm_to_watts(46.99)
    power_cap_fed: float = dbm_to_watts(46.99)
    antenna_main: float = 160.0
    antenna_fed: float = 80.0
    noise_psd_main: float = dbm_to_watts(NOISE_PSD_DBM_HZ)
    noise_psd_fed: float = dbm_to_watts(NOISE_PSD_DBM_HZ)


@dataclass(frozen=True)
class LayerProfile:
    """Per-sample workload of one layer (LoRA terms are per unit rank)."""

    fp_flops: float
    bp_flops: float
    lora_fp_flops: float = 0.0
    lora_bp_flops: float = 0.0
    activation_bits: float = 0.0
    lora_param_bits: float = 0.0


@dataclass(frozen=True)
class ModelProfile:
    layers: tuple[LayerProfile, ...]
    batch_size: int = 16
    name: str = "custom"

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @cached_property
    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: np.array([getattr(l, f.name) for l in self.layers], dtype=float)
                for f in dataclasses.fields(LayerProfile)}


@dataclass(frozen=True)
class RankProfile:
    """Candidate LoRA ranks and the global rounds ``E(r)`` each one needs."""

    candidates: tuple[int, ...]
    rounds: Mapping[int, int]
    local_steps: int = 1

    def E(self, rank: int) -> int:
        return self.rounds[rank]

    def to_toml_table(self) -> dict:
        return {"candidates": list(self.candidates),
                "rounds": {str(r): int(self.rounds[r]) for r in self.candidates},
                "local_steps": int(self.local_steps)}


@dataclass(frozen=True)
class ChannelSpec:
    bw_main: tuple[float, ...]
    bw_fed: tuple[float, ...]
    shadow_sigma_db: float = 8.0
    include_shadowing: bool = True

    @classmethod
    def equal_split(cls, total_main: float, m: int, total_fed: float, n: int, **kw) -> ChannelSpec:
        return cls(tuple([total_main / m] * m), tuple([total_fed / n] * n), **kw)


@dataclass(frozen=True)
class Geometry:
    """Placement and heterogeneity ranges used when sampling clients."""

    d_max: float = 0.020              # km, disk radius around the federated server
    main_offset: float = 0.100        # km, main server distance from the centroid
    min_distance: float = 0.001       # km, floor on every link length
    compute_range: tuple[float, float] = (1.0e9, 1.6e9)


@dataclass(frozen=True)
class NetworkScenario:
    clients: tuple[ClientProfile, ...]
    server: ServerProfile
    model: ModelProfile
    ranks: RankProfile
    channels: ChannelSpec
    shadow_main_db: tuple[float, ...]
    shadow_fed_db: tuple[float, ...]
    geometry: Geometry = field(default_factory=Geometry)
    seed: int = 0

    @property
    def K(self) -> int:
        return len(self.clients)

    @property
    def M(self) -> int:
        return len(self.channels.bw_main)

    @property
    def N(self) -> int:
        return len(self.channels.bw_fed)

    @cached_property
    def gain_main(self) -> np.ndarray:
        return _gains([c.dist_main for c in self.clients], self.shadow_main_db,
                      self.channels.include_shadowing)

    @cached_property
    def gain_fed(self) -> np.ndarray:
        return _gains([c.dist_fed for c in self.clients], self.shadow_fed_db,
                      self.channels.include_shadowing)

    @cached_property
    def snr_main(self) -> np.ndarray:
        """``G * gamma / sigma^2`` per client towards the main server (1/(W/Hz))."""
        return self.server.antenna_main * self.gain_main / self.server.noise_psd_main

    @cached_property
    def snr_fed(self) -> np.ndarray:
        return self.server.antenna_fed * self.gain_fed / self.server.noise_psd_fed

    @cached_property
    def client_arrays(self) -> dict[str, np.ndarray]:
        return {f.name: np.array([getattr(c, f.name) for c in self.clients], dtype=float)
                for f in dataclasses.fields(ClientProfile)}

    @cached_property
    def bw_main(self) -> np.ndarray:
        return np.array(self.channels.bw_main, dtype=float)

    @cached_property
    def bw_fed(self) -> np.ndarray:
        return np.array(self.channels.bw_fed, dtype=float)

    def replace(self, **changes) -> NetworkScenario:
        return dataclasses.replace(self, **changes)


def _gains(distances, shadows, include_shadowing):
    return np.array([channel_gain(d, s if include_shadowing else 0.0)
                     for d, s in zip(distances, shadows)], dtype=float)


# ---------------------------------------------------------------------------
# Model profiles
# ---------------------------------------------------------------------------

GFLOP = 1e9


def gpt2_small_profile(batch_size: int = 16, seq_len: int = 512, hidden: int = 768,
                       num_blocks: int = 12, activation_bits_per_value: int = 16,
                       lora_bits_per_param: int = 32) -> ModelProfile:
    """GPT2-S workload: 12 transformer blocks, LM head folded into the last.

    Forward FLOPs per block are LayerNorm + attention + feed-forward at
    sequence length 512; backward is taken as twice the forward. LoRA
    adapts the query and value projections of every block.
    """
    block_fp = (0.025 + 257.7 + 309.2) * GFLOP
    head_fp = (1264.1 + 0.025) * GFLOP    # LM head + final LayerNorm
    lora_fp = 0.050 * GFLOP
    act_bits = float(seq_len * hidden * activation_bits_per_value)
    lora_bits = float(2 * (hidden + hidden) * lora_bits_per_param)
    layers = []
    for j in range(num_blocks):
        fp = block_fp + (head_fp if j == num_blocks - 1 else 0.0)
        layers.append(LayerProfile(fp, 2 * fp, lora_fp, 2 * lora_fp, act_bits, lora_bits))
    return ModelProfile(tuple(layers), batch_size=batch_size, name="gpt2-small")


def bundled_rank_profile() -> RankProfile:
    """E(r) table produced by the toy SFL calibration run (``data/rank_profile.toml``)."""
    text = resources.files("splitfed_latency").joinpath("data/rank_profile.toml").read_text()
    return _parse_lora(tomli.loads(text).get("lora", {}), RankProfile((1,), {1: 1}))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_scenario(template: NetworkScenario, seed: int) -> NetworkScenario:
    """Redraw client placement, compute rates and shadowing from ``seed``.

    Clients are uniform in a disk of radius ``d_max`` around the federated
    server; the main server sits ``main_offset`` away from the centroid.
    Everything else is copied from ``template``.
    """
    problems = validate_scenario(template)
    if problems:
        raise ConfigError("invalid template: " + "; ".join(problems))
    geo = template.geometry
    rng = np.random.default_rng(seed)
    K = template.K
    radius = geo.d_max * np.sqrt(rng.uniform(0.0, 1.0, K))
    angle = rng.uniform(0.0, 2.0 * np.pi, K)
    x, y = radius * np.cos(angle), radius * np.sin(angle)
    d_fed = np.maximum(np.hypot(x, y), geo.min_distance)
    d_main = np.maximum(np.hypot(x - geo.main_offset, y), geo.min_distance)
    lo, hi = geo.compute_range
    f = rng.uniform(lo, hi, K)
    sigma = template.channels.shadow_sigma_db
    shadow_main = rng.normal(0.0, sigma, K)
    shadow_fed = rng.normal(0.0, sigma, K)
    clients = tuple(dataclasses.replace(c, id=k, compute_rate=float(f[k]),
                                        dist_main=float(d_main[k]), dist_fed=float(d_fed[k]))
                    for k, c in enumerate(template.clients))
    return dataclasses.replace(template, clients=clients,
                               shadow_main_db=tuple(float(v) for v in shadow_main),
                               shadow_fed_db=tuple(float(v) for v in shadow_fed),
                               seed=int(seed))


def default_scenario(seed: int = 0, num_clients: int = 5, ranks: RankProfile | None = None,
                     **overrides) -> NetworkScenario:
    """Sampled scenario with the default parameter set (see ``data/default.toml``)."""
    clients = tuple(ClientProfile(k, 1.0e9, 1.0 / 1024, 0.01, 0.01, dbm_to_watts(41.76), 1)
                    for k in range(num_clients))
    template = NetworkScenario(
        clients=clients,
        server=ServerProfile(),
        model=gpt2_small_profile(),
        ranks=ranks if ranks is not None else bundled_rank_profile(),
        channels=ChannelSpec.equal_split(500e3, 20, 500e3, 20),
        shadow_main_db=(0.0,) * num_clients,
        shadow_fed_db=(0.0,) * num_clients,
    )
    if overrides:
        template = dataclasses.replace(template, **overrides)
    return sample_scenario(template, seed)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_scenario(s: NetworkScenario) -> list[str]:
    """Return a list of invariant violations; empty means valid."""
    out: list[str] = []
    K = len(s.clients)
    if K < 1:
        out.append("clients: K >= 1 required")
    for c in s.clients:
        for name in ("compute_rate", "cycles_per_flop", "dist_main", "dist_fed", "max_power"):
            v = getattr(c, name)
            if not (v > 0 and math.isfinite(v)):
                out.append(f"clients[{c.id}].{name}: must be positive, got {v!r}")
        if c.dataset_size < 1:
            out.append(f"clients[{c.id}].dataset_size: must be >= 1, got {c.dataset_size!r}")
    for f in dataclasses.fields(ServerProfile):
        v = getattr(s.server, f.name)
        if not (v > 0 and math.isfinite(v)):
            out.append(f"server.{f.name}: must be positive, got {v!r}")

    layers = s.model.layers
    if len(layers) < 2:
        out.append(f"model.layers: length >= 2 required, got {len(layers)}")
    for j, layer in enumerate(layers):
        for f in dataclasses.fields(LayerProfile):
            if getattr(layer, f.name) < 0:
                out.append(f"model.layers[{j}].{f.name}: must be >= 0")
        if layer.fp_flops <= 0 and layer.bp_flops <= 0:
            out.append(f"model.layers[{j}]: fp_flops or bp_flops must be positive")
    if s.model.batch_size < 1:
        out.append("model.batch_size: must be >= 1")

    r = s.ranks
    if not r.candidates:
        out.append("lora.candidates: must be non-empty")
    if any(c < 1 for c in r.candidates):
        out.append("lora.candidates: ranks must be positive integers")
    if any(b <= a for a, b in zip(r.candidates, r.candidates[1:])):
        out.append("lora.candidates: must be strictly increasing")
    for c in r.candidates:
        if c not in r.rounds:
            out.append(f"lora.rounds: missing entry for rank {c}")
        elif r.rounds[c] < 1:
            out.append(f"lora.rounds[{c}]: E(r) >= 1 required")
    if r.local_steps < 1:
        out.append("lora.local_steps: must be >= 1")

    ch = s.channels
    if len(ch.bw_main) < K:
        out.append(f"network.subchannel_bw_main: M >= K required (M={len(ch.bw_main)}, K={K})")
    if len(ch.bw_fed) < K:
        out.append(f"network.subchannel_bw_fed: N >= K required (N={len(ch.bw_fed)}, K={K})")
    for side, bws in (("main", ch.bw_main), ("fed", ch.bw_fed)):
        for i, b in enumerate(bws):
            if not b > 0:
                out.append(f"network.subchannel_bw_{side}[{i}]: bandwidth must be positive, got {b!r}")
    if ch.shadow_sigma_db < 0:
        out.append("network.shadow_sigma_db: must be >= 0")

    if len(s.shadow_main_db) != K or len(s.shadow_fed_db) != K:
        out.append("link shadowing: one draw per client and link required")
    else:
        for side in ("main", "fed"):
            g = getattr(s, f"gain_{side}")
            for k in range(K):
                if not (g[k] > 0 and math.isfinite(g[k])):
                    out.append(f"link_gains.{side}[{k}]: must be positive and finite")
    g = s.geometry
    if g.d_max < 0 or g.main_offset < 0 or g.min_distance <= 0:
        out.append("geometry: d_max, main_offset >= 0 and min_distance > 0 required")
    if not (0 < g.compute_range[0] <= g.compute_range[1]):
        out.append("geometry.compute_range: need 0 < low <= high")
    return out


# ---------------------------------------------------------------------------
# TOML config I/O
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSettings:
    seed: int = 0
    eps: float = 1e-3
    max_iter: int = 50


def _watts(section: Mapping, stem: str, default_w: float) -> float:
    if f"{stem}_w" in section:
        return float(section[f"{stem}_w"])
    if f"{stem}_dbm" in section:
        return dbm_to_watts(float(section[f"{stem}_dbm"]))
    return default_w


def _noise(section: Mapping, side: str, default: float) -> float:
    if f"noise_psd_{side}_w_hz" in section:
        return float(section[f"noise_psd_{side}_w_hz"])
    if f"noise_psd_{side}_dbm_hz" in section:
        return dbm_to_watts(float(section[f"noise_psd_{side}_dbm_hz"]))
    if "noise_psd_dbm_hz" in section:
        return dbm_to_watts(float(section["noise_psd_dbm_hz"]))
    return default


def _bandwidths(section: Mapping, side: str, default_total: float, default_n: int) -> tuple:
    if f"subchannel_bw_{side}_hz" in section:
        return tuple(float(b) for b in section[f"subchannel_bw_{side}_hz"])
    n = int(section.get(f"num_subchannels_{side}", default_n))
    if n < 1:
        raise ConfigError(f"network.num_subchannels_{side}: must be >= 1")
    total = float(section.get(f"total_bandwidth_{side}_hz", default_total))
    return tuple([total / n] * n)


def _parse_lora(sec: Mapping, default: RankProfile) -> RankProfile:
    candidates = tuple(int(c) for c in sec.get("candidates", default.candidates))
    raw = sec.get("rounds")
    rounds = {int(k): int(v) for k, v in raw.items()} if raw is not None else dict(default.rounds)
    return RankProfile(candidates, rounds, int(sec.get("local_steps", default.local_steps)))


def _parse_model(sec: Mapping) -> ModelProfile:
    batch = int(sec.get("batch_size", 16))
    if "fp_flops" in sec:
        n = len(sec["fp_flops"])
        cols = {}
        for f in dataclasses.fields(LayerProfile):
            vals = sec.get(f.name)
            if vals is None:
                vals = [2 * v for v in sec["fp_flops"]] if f.name == "bp_flops" else [0.0] * n
            if len(vals) != n:
                raise ConfigError(f"model.{f.name}: expected {n} entries, got {len(vals)}")
            cols[f.name] = [float(v) for v in vals]
        layers = tuple(LayerProfile(**{k: cols[k][j] for k in cols}) for j in range(n))
        return ModelProfile(layers, batch, str(sec.get("name", "custom")))
    profile = sec.get("profile", "gpt2-small")
    if profile != "gpt2-small":
        raise ConfigError(f"model.profile: unknown profile {profile!r}")
    m = gpt2_small_profile(batch_size=batch, seq_len=int(sec.get("seq_len", 512)),
                           hidden=int(sec.get("hidden_dim", 768)),
                           num_blocks=int(sec.get("num_blocks", 12)),
                           activation_bits_per_value=int(sec.get("activation_value_bits", 16)))
    if "activation_bits" in sec:
        psi = float(sec["activation_bits"])
        m = dataclasses.replace(m, layers=tuple(
            dataclasses.replace(l, activation_bits=psi) for l in m.layers))
    return m


def scenario_from_dict(cfg: Mapping) -> NetworkScenario:
    """Build (and validate) a scenario from a parsed config mapping."""
    unknown = set(cfg) - {"network", "clients", "model", "lora", "experiment"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    net = cfg.get("network", {})
    cl = cfg.get("clients", {})
    exp = cfg.get("experiment", {})
    try:
        seed = int(exp.get("seed", 0))
        server = ServerProfile(
            compute_rate=float(net.get("server_compute_hz", 5e9)),
            cycles_per_flop=(1.0 / float(net["server_flops_per_cycle"]) if "server_flops_per_cycle" in net
                             else float(net.get("server_cycles_per_flop", 1.0 / 32768))),
            power_cap_main=_watts(net, "power_cap_main", dbm_to_watts(46.99)),
            power_cap_fed=_watts(net, "power_cap_fed", dbm_to_watts(46.99)),
            antenna_main=float(net.get("antenna_gain_main", 160.0)),
            antenna_fed=float(net.get("antenna_gain_fed", 80.0)),
            noise_psd_main=_noise(net, "main", dbm_to_watts(NOISE_PSD_DBM_HZ)),
            noise_psd_fed=_noise(net, "fed", dbm_to_watts(NOISE_PSD_DBM_HZ)),
        )
        channels = ChannelSpec(_bandwidths(net, "main", 500e3, 20), _bandwidths(net, "fed", 500e3, 20),
                               float(net.get("shadow_sigma_db", 8.0)),
                               bool(net.get("include_shadowing", True)))
        lo, hi = cl.get("compute_hz_range", (1.0e9, 1.6e9))
        geometry = Geometry(float(net.get("d_max_m", 20.0)) / 1e3,
                            float(net.get("main_server_offset_m", 100.0)) / 1e3,
                            float(net.get("min_distance_m", 1.0)) / 1e3,
                            (float(lo), float(hi)))
        explicit = "compute_hz" in cl
        K = len(cl["compute_hz"]) if explicit else int(net.get("num_clients", 5))
        if K < 1:
            raise ConfigError("network.num_clients: K >= 1 required")

        def per_client(key, default, cast=float):
            v = cl.get(key, default)
            if isinstance(v, list):
                if len(v) != K:
                    raise ConfigError(f"clients.{key}: expected {K} entries, got {len(v)}")
                return [cast(x) for x in v]
            return [cast(v)] * K

        kappa = per_client("cycles_per_flop", 1.0 / 1024)
        if "flops_per_cycle" in cl:
            kappa = [1.0 / x for x in per_client("flops_per_cycle", 1024.0)]
        if "max_power_w" in cl:
            pmax = per_client("max_power_w", 0.0)
        else:
            pmax = [dbm_to_watts(v) for v in per_client("max_power_dbm", 41.76)]
        sizes = per_client("dataset_size", 1, int)
        if explicit:
            f = per_client("compute_hz", 0.0)
            dm = per_client("dist_main_km", 0.0)
            dfed = per_client("dist_fed_km", 0.0)
            sm = per_client("shadow_main_db", 0.0)
            sf = per_client("shadow_fed_db", 0.0)
        else:
            f, dm, dfed, sm, sf = [lo] * K, [0.1] * K, [0.01] * K, [0.0] * K, [0.0] * K
        clients = tuple(ClientProfile(k, f[k], kappa[k], dm[k], dfed[k], pmax[k], sizes[k])
                        for k in range(K))
        ranks = _parse_lora(cfg.get("lora", {}), bundled_rank_profile())
        s = NetworkScenario(clients, server, _parse_model(cfg.get("model", {})), ranks, channels,
                            tuple(sm), tuple(sf), geometry, seed)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    problems = validate_scenario(s)
    if problems:
        raise ConfigError("; ".join(problems))
    if not explicit:
        s = sample_scenario(s, seed)
    return s


def load_scenario(path: str | Path) -> NetworkScenario:
    """Parse a TOML scenario config. Missing fields take the default parameters."""
    path = Path(path)
    try:
        cfg = tomli.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    return scenario_from_dict(cfg)


def load_experiment(path: str | Path) -> ExperimentSettings:
    cfg = tomli.loads(Path(path).read_text()).get("experiment", {})
    return ExperimentSettings(int(cfg.get("seed", 0)), float(cfg.get("eps", 1e-3)),
                              int(cfg.get("max_iter", 50)))


def scenario_to_dict(s: NetworkScenario) -> dict:
    """Fully explicit config mapping; ``scenario_from_dict`` inverts it exactly."""
    sv, ch, g = s.server, s.channels, s.geometry
    model = {"name": s.model.name, "batch_size": s.model.batch_size}
    for f in dataclasses.fields(LayerProfile):
        model[f.name] = [getattr(l, f.name) for l in s.model.layers]
    return {
        "network": {
            "num_clients": s.K,
            "d_max_m": g.d_max * 1e3,
            "main_server_offset_m": g.main_offset * 1e3,
            "min_distance_m": g.min_distance * 1e3,
            "shadow_sigma_db": ch.shadow_sigma_db,
            "include_shadowing": ch.include_shadowing,
            "subchannel_bw_main_hz": list(ch.bw_main),
            "subchannel_bw_fed_hz": list(ch.bw_fed),
            "server_compute_hz": sv.compute_rate,
            "server_cycles_per_flop": sv.cycles_per_flop,
            "power_cap_main_w": sv.power_cap_main,
            "power_cap_fed_w": sv.power_cap_fed,
            "antenna_gain_main": sv.antenna_main,
            "antenna_gain_fed": sv.antenna_fed,
            "noise_psd_main_w_hz": sv.noise_psd_main,
            "noise_psd_fed_w_hz": sv.noise_psd_fed,
        },
        "clients": {
            "compute_hz_range": list(g.compute_range),
            "compute_hz": [c.compute_rate for c in s.clients],
            "cycles_per_flop": [c.cycles_per_flop for c in s.clients],
            "dist_main_km": [c.dist_main for c in s.clients],
            "dist_fed_km": [c.dist_fed for c in s.clients],
            "shadow_main_db": list(s.shadow_main_db),
            "shadow_fed_db": list(s.shadow_fed_db),
            "max_power_w": [c.max_power for c in s.clients],
            "dataset_size": [c.dataset_size for c in s.clients],
        },
        "model": model,
        "lora": s.ranks.to_toml_table(),
        "experiment": {"seed": s.seed},
    }


def write_scenario(s: NetworkScenario, path: str | Path) -> None:
    Path(path).write_text(tomli_w.dumps(scenario_to_dict(s)))
