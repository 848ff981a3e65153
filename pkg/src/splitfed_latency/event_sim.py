"""Discrete-event replay of one global training round in virtual time.

Serves as an independent check of the closed-form delay: phases are
scheduled as completion events on a heap and barriers are enforced by
counting arrivals, so nothing here reuses the ``max``/``sum`` algebra of
:mod:`splitfed_latency.delay`.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from pathlib import Path

from .decision import Decision
from .delay import phase_delays
from .scenario import NetworkScenario

# tie order for simultaneous events
PHASES = ("client_fp", "uplink", "server_fp", "server_bp", "downlink", "client_bp", "fed_upload")
_ORDER = {p: i for i, p in enumerate(PHASES)}
SERVER = -1


@dataclass(frozen=True, order=True)
class Event:
    time: float
    order: int
    actor: int        # client index, or -1 for the main server
    step: int
    phase: str

    @property
    def reachable(self) -> bool:
        return math.isfinite(self.time)

    @property
    def actor_name(self) -> str:
        if self.actor == SERVER:
            return "main-server"
        return f"client-{self.actor}"


def simulate_timeline(s: NetworkScenario, d: Decision) -> tuple[list[Event], float]:
    """Replay one global round; returns the ordered event log and the total delay.

    The total is ``E(r)`` times the length of the simulated round.
    """
    b = phase_delays(s, d)
    K = s.K
    I = s.ranks.local_steps
    heap: list[Event] = []
    log: list[Event] = []

    def schedule(t, phase, actor, step):
        heapq.heappush(heap, Event(t, _ORDER[phase], actor, step, phase))

    def start_step(t, step):
        for k in range(K):
            schedule(t + b.client_fp[k], "client_fp", k, step)

    start_step(0.0, 0)
    pending = 0
    round_end = 0.0
    while heap:
        ev = heapq.heappop(heap)
        log.append(ev)
        t, k, step = ev.time, ev.actor, ev.step
        if ev.phase == "client_fp":
            schedule(t + b.upload[k], "uplink", k, step)
        elif ev.phase == "uplink":
            pending += 1
            if pending == K:      # server waits for every activation
                pending = 0
                schedule(t + b.server_fp, "server_fp", SERVER, step)
        elif ev.phase == "server_fp":
            schedule(t + b.server_bp, "server_bp", SERVER, step)
        elif ev.phase == "server_bp":
            for j in range(K):
                schedule(t, "downlink", j, step)
        elif ev.phase == "downlink":
            schedule(t + b.client_bp[k], "client_bp", k, step)
        elif ev.phase == "client_bp":
            pending += 1
            if pending == K:
                pending = 0
                if step + 1 < I:
                    start_step(t, step + 1)
                else:
                    for j in range(K):
                        schedule(t + b.fed_upload[j], "fed_upload", j, step)
        elif ev.phase == "fed_upload":
            pending += 1
            if pending == K:
                round_end = t
    return log, float(s.ranks.E(d.rank) * round_end)


def format_trace(events: list[Event]) -> str:
    """One event per line: ``time phase actor``."""
    return "".join(f"{float(e.time)!r} {e.phase} {e.actor_name}\n" for e in events)


def write_trace(events: list[Event], path: str | Path) -> None:
    Path(path).write_text(format_trace(events))
