import numpy as np
import pytest

from splitfed_latency.channel import dbm_to_watts
from splitfed_latency.scenario import (ChannelSpec, ClientProfile, LayerProfile, ModelProfile,
                                       NetworkScenario, RankProfile, ServerProfile)


def make_scenario(f=(1e9, 1e9), dist_main=(0.1, 0.1), dist_fed=(0.01, 0.01),
                  bw_main=(25e3, 25e3), bw_fed=(25e3, 25e3), layers=None, ranks=None,
                  pmax=dbm_to_watts(41.76), kappa=1.0 / 1024, batch=16, server=None,
                  sizes=None) -> NetworkScenario:
    """Hand-built scenario with no shadowing, for oracle-style tests."""
    K = len(f)
    if layers is None:
        layers = tuple(LayerProfile(1e9 * (j + 1), 2e9 * (j + 1), 1e6, 2e6, 8e6, 1e5)
                       for j in range(4))
    clients = tuple(ClientProfile(k, f[k], kappa, dist_main[k], dist_fed[k],
                                  pmax[k] if np.ndim(pmax) else pmax,
                                  1 if sizes is None else sizes[k]) for k in range(K))
    return NetworkScenario(clients, server or ServerProfile(), ModelProfile(tuple(layers), batch),
                           ranks or RankProfile((1, 2, 4), {1: 30, 2: 20, 4: 15}),
                           ChannelSpec(tuple(bw_main), tuple(bw_fed), 8.0, False),
                           (0.0,) * K, (0.0,) * K)


@pytest.fixture
def scenario_factory():
    return make_scenario


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line for an acceptance criterion."""
    def report(number: int, ok: bool, text: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}"
        _ACCEPTANCE.append(line)
        print(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
