"""Diffusive estimation over a simulated monitor network.

Each monitor starts from the minimum-norm solution of its own equations and
repeatedly fuses the estimate of a neighbor: the fused estimate satisfies
both monitors' equations, and the kernel basis shrinks to the intersection
of the two kernels.

The simulator is single threaded and deterministic.  A synchronous round
snapshots every monitor's state as an immutable :class:`EstimateMessage`
first, then each monitor fuses its neighbors' snapshots in ascending id
order (or a seeded shuffle).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .errors import AlgorithmFailure, ContractError
from .linalg import (
    ESTIMATOR_RTOL,
    SubspaceBasis,
    intersection_from_svd,
    kernel_from_svd,
    pinv_from_svd,
    svd,
)
from .network import MonitorGraph


@dataclass
class MonitorNode:
    """One monitor's data and running estimate.

    ``B`` is ``None`` for a noise-free system, in which case the local
    matrix is ``H`` itself; otherwise it is ``[H  eps B]``.
    """

    id: int
    H: np.ndarray
    z: np.ndarray
    B: np.ndarray | None = None
    epsilon: float = 0.0
    x_hat: np.ndarray | None = None
    K: SubspaceBasis | None = None

    @property
    def n_state(self) -> int:
        return self.H.shape[1]

    @property
    def local_matrix(self) -> np.ndarray:
        if self.B is None:
            return self.H
        return np.hstack([self.H, self.epsilon * self.B])

    @property
    def ambient_dim(self) -> int:
        return self.local_matrix.shape[1]

    @property
    def state(self) -> np.ndarray:
        return self.x_hat[: self.n_state]

    def local_residual(self) -> float:
        r = self.z - self.local_matrix @ self.x_hat
        return float(np.max(np.abs(r), initial=0.0))


@dataclass(frozen=True)
class EstimateMessage:
    sender: int
    x_hat: np.ndarray
    K: SubspaceBasis
    time: int

    @classmethod
    def snapshot(cls, node: MonitorNode, time: int) -> "EstimateMessage":
        x = node.x_hat.copy()
        x.setflags(write=False)
        Kb = node.K.basis.copy()
        Kb.setflags(write=False)
        return cls(node.id, x, SubspaceBasis(Kb), time)


def make_nodes(blocks, epsilon: float | None = None) -> list[MonitorNode]:
    """Nodes from ``(H_i, B_i, z_i)`` blocks, or ``(H_i, z_i)`` if noise free."""
    nodes = []
    for i, blk in enumerate(blocks):
        if len(blk) == 3:
            H_i, B_i, z_i = blk
            if epsilon is None or not epsilon > 0:
                raise ContractError("epsilon must be > 0 for noisy blocks")
            nodes.append(MonitorNode(i, np.asarray(H_i, float), np.asarray(z_i, float),
                                     np.asarray(B_i, float), float(epsilon)))
        else:
            H_i, z_i = blk
            nodes.append(MonitorNode(i, np.asarray(H_i, float), np.asarray(z_i, float)))
    return nodes


def local_init(node: MonitorNode, rtol: float = ESTIMATOR_RTOL) -> MonitorNode:
    if node.B is not None and not node.epsilon > 0:
        raise ContractError("epsilon must be > 0")
    A = node.local_matrix
    scale = float(np.linalg.norm(A, 2)) if A.size else 0.0
    res = svd(A, full=True, tol=rtol * max(scale, 1e-300))
    return dataclasses.replace(node, x_hat=pinv_from_svd(res) @ node.z, K=kernel_from_svd(res))


def fuse(
    node: MonitorNode, msg: EstimateMessage, rtol: float = ESTIMATOR_RTOL
) -> MonitorNode:
    """Fold a neighbor's estimate into ``node``."""
    Ki, Kj = node.K, msg.K
    if Ki.ambient_dim != Kj.ambient_dim or node.x_hat.shape != msg.x_hat.shape:
        raise ContractError("ambient dimension mismatch in fuse")
    if Ki.is_zero:
        return node
    M = np.hstack([-Ki.basis, Kj.basis])
    # orthonormal blocks: s_max <= sqrt(2), so an absolute tolerance suffices
    res = svd(M, full=True, tol=rtol)
    v = pinv_from_svd(res) @ (node.x_hat - msg.x_hat)
    x_new = node.x_hat + Ki.basis @ v[: Ki.dim]
    K_new = intersection_from_svd(Ki, res) if not Kj.is_zero else SubspaceBasis.zero(Ki.ambient_dim)
    return dataclasses.replace(node, x_hat=x_new, K=K_new)


def global_kernel_dim(nodes: Sequence[MonitorNode]) -> int:
    """Dimension of the kernel of the stacked local matrices.

    This is where every kernel basis ends up; for the epsilon-embedded
    system with full-row-rank ``B`` it equals ``n + q - p``.
    """
    A = np.vstack([nd.local_matrix for nd in nodes])
    return A.shape[1] - (np.linalg.matrix_rank(A) if A.size else 0)


@dataclass
class DiffusionResult:
    nodes: list[MonitorNode]
    steps: int  # rounds (synchronous) or slots (asynchronous)
    messages: int
    history: list[list[MonitorNode]] = field(default_factory=list)

    @property
    def estimates(self) -> list[np.ndarray]:
        return [nd.x_hat for nd in self.nodes]

    @property
    def state_estimates(self) -> list[np.ndarray]:
        return [nd.state for nd in self.nodes]

    @property
    def rounds_used(self) -> int:
        return self.steps


def _initialized(nodes: Sequence[MonitorNode]) -> list[MonitorNode]:
    out = [nd if nd.x_hat is not None else local_init(nd) for nd in nodes]
    dims = {nd.ambient_dim for nd in out}
    if len(dims) != 1:
        raise ContractError(f"nodes disagree on ambient dimension: {sorted(dims)}")
    return out


def _write_trace(trace: TextIO | None, step: int, nodes: Sequence[MonitorNode]) -> None:
    if trace is None:
        return
    for nd in nodes:
        trace.write(
            f"round={step} monitor={nd.id} dimK={nd.K.dim} residual={nd.local_residual():.17g}\n"
        )


def _check_graph(nodes, graph: MonitorGraph) -> None:
    if graph.monitor_count != len(nodes):
        raise ContractError(
            f"graph has {graph.monitor_count} monitors, got {len(nodes)} nodes"
        )


def run_rounds(
    nodes: Sequence[MonitorNode],
    graph: MonitorGraph,
    *,
    max_rounds: int,
    kernel_floor: int | None = None,
    stop_when_done: bool = True,
    order_seed=None,
    gauss_seidel: bool = False,
    keep_history: bool = False,
    trace: TextIO | None = None,
) -> DiffusionResult:
    """Run up to ``max_rounds`` synchronous rounds.

    A monitor is done once its kernel reaches ``kernel_floor``; done monitors
    stop fusing but still answer neighbors that are not done yet.
    ``gauss_seidel=True`` lets later monitors in a round see states already
    updated in that round (experimental; no round bound is claimed).
    """
    _check_graph(nodes, graph)
    cur = _initialized(nodes)
    floor = global_kernel_dim(cur) if kernel_floor is None else kernel_floor
    rng = np.random.default_rng(order_seed) if order_seed is not None else None
    history = [list(cur)] if keep_history else []
    _write_trace(trace, 0, cur)
    messages = 0
    rounds = 0
    while rounds < max_rounds:
        if stop_when_done and all(nd.K.dim <= floor for nd in cur):
            break
        rounds += 1
        snapshot = [EstimateMessage.snapshot(nd, rounds) for nd in cur]
        order = list(range(len(cur)))
        nxt = list(cur)
        for i in order:
            if cur[i].K.dim <= floor:
                continue
            nbrs = graph.neighbors(i)
            if rng is not None:
                nbrs = list(rng.permutation(nbrs))
            node = nxt[i]
            for j in nbrs:
                msg = EstimateMessage.snapshot(nxt[j], rounds) if gauss_seidel else snapshot[j]
                node = fuse(node, msg)
                messages += 1
            nxt[i] = node
        cur = nxt
        if keep_history:
            history.append(list(cur))
        _write_trace(trace, rounds, cur)
    return DiffusionResult(cur, rounds, messages, history)


def run_synchronous(
    nodes: Sequence[MonitorNode],
    graph: MonitorGraph,
    *,
    kernel_floor: int | None = None,
    order_seed=None,
    gauss_seidel: bool = False,
    trace: TextIO | None = None,
) -> DiffusionResult:
    """Run rounds until every monitor's kernel reaches the global kernel.

    Raises :class:`AlgorithmFailure` if that takes more than ``diameter``
    rounds (snapshot semantics only).
    """
    limit = graph.diameter if not gauss_seidel else max(graph.diameter, 1) * len(nodes)
    res = run_rounds(
        nodes, graph, max_rounds=limit + 1, kernel_floor=kernel_floor,
        order_seed=order_seed, gauss_seidel=gauss_seidel, trace=trace,
    )
    floor = global_kernel_dim(res.nodes) if kernel_floor is None else kernel_floor
    if res.steps > limit or any(nd.K.dim > floor for nd in res.nodes):
        raise AlgorithmFailure(
            f"no termination within {limit} rounds (kernel dims "
            f"{[nd.K.dim for nd in res.nodes]}, floor {floor})"
        )
    return res


# -- asynchronous ------------------------------------------------------------


@dataclass
class Schedule:
    """Activation sequence: slot ``t`` lets ``sequence[t]`` broadcast."""

    mode: str = "asynchronous"
    period: int = 1
    sequence: list[int] = field(default_factory=list)

    def validate(self, monitor_count: int) -> None:
        if self.mode == "synchronous":
            return
        if self.mode != "asynchronous":
            raise ContractError(f"unknown schedule mode {self.mode!r}")
        T = self.period
        if T < 1:
            raise ContractError("fairness period must be >= 1")
        seq = self.sequence
        if any(not 0 <= s < monitor_count for s in seq):
            raise ContractError("schedule names an unknown monitor")
        everyone = set(range(monitor_count))
        for start in range(0, max(len(seq) - T + 1, 0)):
            missing = everyone - set(seq[start : start + T])
            if missing:
                raise ContractError(
                    f"schedule not {T}-fair: monitors {sorted(missing)} silent in "
                    f"slots {start}..{start + T - 1}"
                )
        if len(seq) < T:
            raise ContractError("schedule shorter than one fairness window")

    @classmethod
    def round_robin(cls, m: int, windows: int) -> "Schedule":
        return cls("asynchronous", m, list(range(m)) * windows)

    @classmethod
    def random_fair(cls, m: int, windows: int, seed) -> "Schedule":
        """Concatenated random permutations; any ``2m - 1`` slots see everyone."""
        rng = np.random.default_rng(seed)
        seq: list[int] = []
        for _ in range(windows):
            seq.extend(int(k) for k in rng.permutation(m))
        return cls("asynchronous", max(2 * m - 1, 1), seq)


def run_asynchronous(
    nodes: Sequence[MonitorNode],
    graph: MonitorGraph,
    schedule: Schedule,
    *,
    kernel_floor: int | None = None,
    trace: TextIO | None = None,
) -> DiffusionResult:
    """At each slot one monitor broadcasts and its neighbors fuse."""
    _check_graph(nodes, graph)
    schedule.validate(len(nodes))
    cur = _initialized(nodes)
    floor = global_kernel_dim(cur) if kernel_floor is None else kernel_floor
    _write_trace(trace, 0, cur)
    messages = 0
    slots = 0
    for t, j in enumerate(schedule.sequence, start=1):
        if all(nd.K.dim <= floor for nd in cur):
            break
        slots = t
        msg = EstimateMessage.snapshot(cur[j], t)
        for i in graph.neighbors(j):
            if cur[i].K.dim > floor:
                cur[i] = fuse(cur[i], msg)
                messages += 1
        _write_trace(trace, t, cur)
    if any(nd.K.dim > floor for nd in cur):
        raise AlgorithmFailure(f"schedule of {len(schedule.sequence)} slots ended early")
    return DiffusionResult(cur, slots, messages)
