"""Toy split-federated LoRA training on a two-layer linear model.

Clients hold the first layer ``W_c`` and the server holds the second
layer ``W_s``; both are frozen and adapted by low-rank factors
``delta = B @ A`` (``B`` starts at zero, ``A`` small random). One local
step is: client forward, server forward on the stacked activations,
server adapter update, activation-gradient return, client adapter update.
Every ``I`` steps the client adapters are averaged with weights
``D_k / D``. The same model trained by plain gradient descent on pooled
data is the centralised reference.

The module also calibrates rounds-to-target tables ``E(r)`` for
:class:`~splitfed_latency.scenario.RankProfile`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .scenario import RankProfile

DIVERGENCE_LOSS = 1e12


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Adapter:
    """Low-rank update ``B @ A`` with ``A`` (r x cols) and ``B`` (rows x r)."""

    A: np.ndarray
    B: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.B @ self.A

    @property
    def rank(self) -> int:
        return self.A.shape[0]

    def step(self, gA: np.ndarray, gB: np.ndarray, lr: float) -> Adapter:
        return Adapter(self.A - lr * gA, self.B - lr * gB)


@dataclass(frozen=True, eq=False)
class ToyModel:
    W_c: np.ndarray          # d_in x d_hidden, frozen
    W_s: np.ndarray          # d_hidden x d_out, frozen
    rank: int
    lr_c: float = 0.05
    lr_s: float = 0.05
    loss: str = "mse"        # "mse" or "logistic"
    init_scale: float = 0.1

    def init_adapters(self, rng: np.random.Generator) -> tuple[Adapter, Adapter]:
        d_in, d_h = self.W_c.shape
        d_out = self.W_s.shape[1]
        r = self.rank
        client = Adapter(rng.normal(0.0, self.init_scale, (r, d_h)), np.zeros((d_in, r)))
        server = Adapter(rng.normal(0.0, self.init_scale, (r, d_out)), np.zeros((d_h, r)))
        return client, server


def _loss_and_grad(pred: np.ndarray, y: np.ndarray, kind: str) -> tuple[float, np.ndarray]:
    """Mean per-sample loss and its gradient w.r.t. ``pred``."""
    n = pred.shape[0]
    if kind == "mse":
        err = pred - y
        return 0.5 * float(np.sum(err * err)) / n, err / n
    if kind == "logistic":
        # standard logistic loss log(1 + exp(-y * pred)), labels in {-1, +1}
        z = -y * pred
        return float(np.sum(np.logaddexp(0.0, z))) / n, -y / (1.0 + np.exp(-z)) / n
    raise ValueError(f"unknown loss {kind!r}")


def forward_loss(model: ToyModel, client: Adapter, server: Adapter, X, Y) -> float:
    H = X @ (model.W_c + client.delta)
    return _loss_and_grad(H @ (model.W_s + server.delta), Y, model.loss)[0]


def server_step(model: ToyModel, server: Adapter, H: np.ndarray, Y: np.ndarray):
    """Server forward/backward on stacked activations.

    Returns (loss, grad_A, grad_B, dloss/dH); the activation gradient uses
    the pre-update server weights.
    """
    Ws = model.W_s + server.delta
    loss, G = _loss_and_grad(H @ Ws, Y, model.loss)
    gW = H.T @ G
    return loss, server.B.T @ gW, gW @ server.A.T, G @ Ws.T


def client_grads(model: ToyModel, client: Adapter, X: np.ndarray, dH: np.ndarray):
    gW = X.T @ dH
    return client.B.T @ gW, gW @ client.A.T


def adapter_gradients(model: ToyModel, client: Adapter, server: Adapter, X, Y) -> dict:
    """Gradients of the mean loss on ``(X, Y)`` w.r.t. all four adapter factors."""
    H = X @ (model.W_c + client.delta)
    _, gAs, gBs, dH = server_step(model, server, H, Y)
    gAc, gBc = client_grads(model, client, X, dH)
    return {"A_c": gAc, "B_c": gBc, "A_s": gAs, "B_s": gBs}


def aggregate_adapters(adapters: Sequence[Adapter], sizes: Sequence[int]) -> Adapter:
    """Dataset-size weighted mean of client adapters (factor-wise).

    Written as an offset from the first client so that identical inputs
    come back bit-for-bit.
    """
    w = np.asarray(sizes, dtype=float)
    if w.size != len(adapters) or w.size == 0 or np.any(w <= 0):
        raise ValueError("need one positive dataset size per adapter")
    w = w / w.sum()
    a0 = adapters[0]
    A = a0.A + sum(wk * (a.A - a0.A) for wk, a in zip(w[1:], adapters[1:]))
    B = a0.B + sum(wk * (a.B - a0.B) for wk, a in zip(w[1:], adapters[1:]))
    return Adapter(A, B)


@dataclass
class TrainResult:
    client: list[Adapter]
    server: Adapter
    step_losses: list[float] = field(default_factory=list)
    round_losses: list[float] = field(default_factory=list)
    history: list[tuple[Adapter, Adapter]] = field(default_factory=list)


def _check_dims(model: ToyModel, data) -> None:
    d_in, d_h = model.W_c.shape
    if model.W_s.shape[0] != d_h:
        raise ValueError(f"W_s must have {d_h} rows, got {model.W_s.shape[0]}")
    if model.rank < 1:
        raise ValueError("rank must be >= 1")
    for k, (X, Y) in enumerate(data):
        if X.ndim != 2 or X.shape[1] != d_in:
            raise ValueError(f"client {k}: X must be n x {d_in}, got {X.shape}")
        if Y.shape != (X.shape[0], model.W_s.shape[1]):
            raise ValueError(f"client {k}: Y must be {X.shape[0]} x {model.W_s.shape[1]}, got {Y.shape}")


def _batch(rng, n: int, size: int | None) -> np.ndarray:
    if size is None or size >= n:
        return np.arange(n)
    return rng.choice(n, size, replace=False)


def _global_loss(model, clients, server, data) -> float:
    D = sum(X.shape[0] for X, _ in data)
    return sum(forward_loss(model, c, server, X, Y) * X.shape[0]
               for c, (X, Y) in zip(clients, data)) / D


def train_sfl_toy(data: Sequence[tuple[np.ndarray, np.ndarray]], model: ToyModel, I: int, E: int,
                  seed: int = 0, batch_size: int | None = None, record: bool = False,
                  init: tuple[Adapter, Adapter] | None = None) -> TrainResult:
    """Run ``E`` global rounds of ``I`` local steps over the clients in ``data``."""
    _check_dims(model, data)
    if I < 1 or E < 1:
        raise ValueError("I and E must be >= 1")
    rng = np.random.default_rng(seed)
    c0, server = init if init is not None else model.init_adapters(rng)
    clients = [c0] * len(data)
    sizes = [X.shape[0] for X, _ in data]
    res = TrainResult(clients, server)
    for _ in range(E):
        for _ in range(I):
            batches = [_batch(rng, X.shape[0], batch_size) for X, _ in data]
            Xb = [X[idx] for (X, _), idx in zip(data, batches)]
            Yb = [Y[idx] for (_, Y), idx in zip(data, batches)]
            Hs = [X @ (model.W_c + c.delta) for X, c in zip(Xb, clients)]
            loss, gAs, gBs, _ = server_step(model, server, np.vstack(Hs), np.vstack(Yb))
            # per-client activation gradients of each client's own mean loss
            dHs = [server_step(model, server, H, Y)[3] for H, Y in zip(Hs, Yb)]
            server = server.step(gAs, gBs, model.lr_s)
            clients = [c.step(*client_grads(model, c, X, dH), model.lr_c)
                       for c, X, dH in zip(clients, Xb, dHs)]
            if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
                raise DivergenceError(f"training diverged: batch loss {loss:.3g} "
                                      f"(lr_c={model.lr_c}, lr_s={model.lr_s})")
            res.step_losses.append(loss)
            if record:
                res.history.append((clients[0], server))
        agg = aggregate_adapters(clients, sizes)
        clients = [agg] * len(data)
        res.round_losses.append(_global_loss(model, clients, server, data))
    res.client, res.server = clients, server
    return res


def train_centralized_toy(X: np.ndarray, Y: np.ndarray, model: ToyModel, steps: int, seed: int = 0,
                          batch_size: int | None = None, record: bool = False,
                          init: tuple[Adapter, Adapter] | None = None) -> TrainResult:
    """Plain gradient descent on pooled data with the same loss and step sizes."""
    _check_dims(model, [(X, Y)])
    rng = np.random.default_rng(seed)
    client, server = init if init is not None else model.init_adapters(rng)
    res = TrainResult([client], server)
    for _ in range(steps):
        idx = _batch(rng, X.shape[0], batch_size)
        H = X[idx] @ (model.W_c + client.delta)
        loss, gAs, gBs, dH = server_step(model, server, H, Y[idx])
        gAc, gBc = client_grads(model, client, X[idx], dH)
        server = server.step(gAs, gBs, model.lr_s)
        client = client.step(gAc, gBc, model.lr_c)
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
            raise DivergenceError(f"training diverged: batch loss {loss:.3g}")
        res.step_losses.append(loss)
        if record:
            res.history.append((client, server))
    res.client, res.server = [client], server
    return res


# ---------------------------------------------------------------------------
# calibration of E(r)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyTask:
    """Synthetic regression task whose ideal adapters have known rank.

    The labels come from the frozen model plus a client-side shift of rank
    ``true_rank`` (singular values decaying by ``decay``) and a matching
    server-side shift, plus Gaussian noise.
    """

    d_in: int = 16
    d_hidden: int = 16
    d_out: int = 8
    num_clients: int = 5
    samples_per_client: int = 64
    true_rank: int = 8
    decay: float = 0.6
    shift_scale: float = 1.0
    noise: float = 0.05
    lr: float = 0.02
    local_steps: int = 1
    batch_size: int | None = 16

    def build(self, seed: int):
        rng = np.random.default_rng(seed)
        W_c = rng.normal(0.0, 1.0 / math.sqrt(self.d_in), (self.d_in, self.d_hidden))
        W_s = rng.normal(0.0, 1.0 / math.sqrt(self.d_hidden), (self.d_hidden, self.d_out))

        def low_rank(rows, cols):
            U, _ = np.linalg.qr(rng.normal(size=(rows, self.true_rank)))
            V, _ = np.linalg.qr(rng.normal(size=(cols, self.true_rank)))
            sv = self.shift_scale * self.decay ** np.arange(self.true_rank)
            return (U * sv) @ V.T

        dC = low_rank(self.d_in, self.d_hidden)
        data = []
        for _ in range(self.num_clients):
            X = rng.normal(size=(self.samples_per_client, self.d_in))
            Y = X @ (W_c + dC) @ W_s + self.noise * rng.normal(size=(self.samples_per_client, self.d_out))
            data.append((X, Y))
        return W_c, W_s, data


@dataclass
class Calibration:
    profile: RankProfile
    curves: dict[int, list[float]]
    unreachable: dict[int, str]


def rounds_to_target(round_losses: Sequence[float], initial_loss: float, target: float) -> int | None:
    """First global round (1-based) whose loss is at or below ``target``.

    A target at or above the initial loss counts as reached after one round.
    """
    if initial_loss <= target:
        return 1
    for e, loss in enumerate(round_losses, start=1):
        if loss <= target:
            return e
    return None


def calibrate_rank_profile(task: ToyTask, candidates: Sequence[int], target_loss: float,
                           seed: int = 0, max_rounds: int = 2000, repeats: int = 1) -> Calibration:
    """Train the toy model at every candidate rank and record rounds to ``target_loss``.

    Each repeat uses a fresh task instance (seeds ``seed .. seed+repeats-1``);
    ``E(r)`` is the rounded-up mean over repeats. Adapters of different
    ranks share their leading rows of ``A`` so that rank is the only thing
    that changes between candidates. A rank that misses the target within
    ``max_rounds`` in any repeat is left out, with the reason kept in
    ``unreachable``.
    """
    candidates = sorted(int(r) for r in candidates)
    r_max = candidates[-1]
    found: dict[int, list[int]] = {r: [] for r in candidates}
    curves: dict[int, list[float]] = {}
    unreachable: dict[int, str] = {}
    for rep in range(repeats):
        task_seed = seed + rep
        W_c, W_s, data = task.build(task_seed)
        init_rng = np.random.default_rng([task_seed, 1])
        base = ToyModel(W_c, W_s, r_max, task.lr, task.lr)
        c_full, s_full = base.init_adapters(init_rng)
        for r in candidates:
            if r in unreachable:
                continue
            model = ToyModel(W_c, W_s, r, task.lr, task.lr)
            init = (Adapter(c_full.A[:r], c_full.B[:, :r]), Adapter(s_full.A[:r], s_full.B[:, :r]))
            initial = _global_loss(model, [init[0]] * len(data), init[1], data)
            res = train_sfl_toy(data, model, task.local_steps, max_rounds, seed=task_seed,
                                batch_size=task.batch_size, init=init)
            if rep == 0:
                curves[r] = res.round_losses
            e = rounds_to_target(res.round_losses, initial, target_loss)
            if e is None:
                unreachable[r] = (f"repeat {rep}: best loss {min(res.round_losses):.4g} in "
                                  f"{max_rounds} rounds, target {target_loss:.4g}")
            else:
                found[r].append(e)
    rounds = {r: int(math.ceil(np.mean(v))) for r, v in found.items() if r not in unreachable}
    kept = tuple(sorted(rounds))
    return Calibration(RankProfile(kept, rounds, task.local_steps), curves, unreachable)
