"""Truncated diffusive estimation and decay analysis.

Stopping the diffusive algorithm after ``h < diameter`` rounds leaves every
monitor with an estimate that is already accurate on its own region; the
error on that region decays roughly like ``C q^(h/2 + 1)``.  The helpers here
measure that decay and the off-diagonal decay of pseudoinverse blocks that
drives it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np

from .diffusive import MonitorNode, run_rounds
from .errors import ContractError, InsufficientDataError
from .linalg import as_matrix, pseudoinverse
from .network import STRUCTURAL_ZERO, MonitorGraph, RegionPartition, block_graph


@dataclass
class BlockLayout:
    partition: RegionPartition
    graph: nx.Graph

    @classmethod
    def from_matrix(cls, H, partition: RegionPartition) -> "BlockLayout":
        return cls(partition, block_graph(H, partition))

    def distance(self, i: int, j: int) -> float:
        try:
            return float(nx.shortest_path_length(self.graph, i, j))
        except nx.NetworkXNoPath:
            return math.inf


@dataclass
class TruncatedRun:
    """Estimates after each round ``h = 0..h_max``; ``full[h][i]`` is monitor i's vector."""

    full: list[list[np.ndarray]]
    state_blocks: list[np.ndarray]

    def own(self, h: int) -> list[np.ndarray]:
        return [self.full[h][i][blk] for i, blk in enumerate(self.state_blocks)]


def truncated_sweep(
    nodes: Sequence[MonitorNode],
    graph: MonitorGraph,
    h_max: int,
    state_blocks: Sequence[np.ndarray],
) -> TruncatedRun:
    """Record every monitor's estimate after each of ``h_max`` rounds."""
    if h_max < 0:
        raise ContractError("h must be >= 0")
    res = run_rounds(
        nodes, graph, max_rounds=h_max, stop_when_done=False, keep_history=True
    )
    full = [[nd.state.copy() for nd in step] for step in res.history]
    return TruncatedRun(full, [np.asarray(b, dtype=int) for b in state_blocks])


def run_truncated(
    nodes: Sequence[MonitorNode],
    graph: MonitorGraph,
    h: int,
    state_blocks: Sequence[np.ndarray],
) -> list[np.ndarray]:
    """Each monitor's estimate of its own region after exactly ``h`` rounds."""
    return truncated_sweep(nodes, graph, h, state_blocks).own(h)


def local_error(full_estimate, partial_estimate, state_block) -> float:
    """Euclidean error restricted to one monitor's region."""
    blk = np.asarray(state_block, dtype=int)
    d = np.asarray(full_estimate)[blk] - np.asarray(partial_estimate)[blk]
    return float(np.linalg.norm(d))


@dataclass
class DecayFit:
    """Fit of ``e_h ≈ C q^(h/2+1)``.

    ``misfit`` is the RMS residual of the fit in decades (log10 units).
    ``C_envelope >= C`` is the smallest constant for which the fitted rate
    bounds every point used in the fit.
    """

    C: float
    q: float
    misfit: float
    C_envelope: float
    points: int

    @property
    def ok(self) -> bool:
        return 0.0 < self.q < 1.0

    def envelope(self, h) -> np.ndarray:
        return self.C_envelope * self.q ** (np.asarray(h, dtype=float) / 2 + 1)


def decay_fit(errors: Sequence[tuple[float, float]], floor: float = 0.0) -> DecayFit:
    """Least-squares fit of ``log e_h`` on ``(h/2 + 1)``.

    Points with ``e_h <= floor`` (exact zeros by default) are skipped.
    """
    pts = [(float(h), float(e)) for h, e in errors if e > floor]
    if len(pts) < 3:
        raise InsufficientDataError(f"need >= 3 points above {floor:g}, got {len(pts)}")
    h = np.array([p[0] for p in pts])
    y = np.log10([p[1] for p in pts])
    A = np.column_stack([np.ones_like(h), h / 2 + 1])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    misfit = float(np.sqrt(np.mean(resid**2)))
    C = 10.0 ** coef[0]
    q = 10.0 ** coef[1]
    C_env = C * 10.0 ** max(float(resid.max()), 0.0)
    return DecayFit(float(C), float(q), misfit, float(C_env), len(pts))


def support_decay_sets(M, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Boolean support set ``S_h`` (union of patterns of ``M^0..M^h``) and its complement."""
    M = as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise ContractError("M must be square")
    if h < 0:
        raise ContractError("h must be >= 0")
    P = (np.abs(M) > STRUCTURAL_ZERO).astype(np.int64)
    cur = np.eye(M.shape[0], dtype=np.int64)
    S = cur.astype(bool)
    for _ in range(h):
        cur = ((cur @ P) > 0).astype(np.int64)
        S |= cur.astype(bool)
    return S, ~S


@dataclass
class PinvDecayTable:
    rows: list[tuple[int, int, float, float]]  # (i, j, distance, max |entry|)
    fit: DecayFit | None
    transposed: bool

    def by_distance(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for _, _, d, v in self.rows:
            out[d] = max(out.get(d, 0.0), v)
        return dict(sorted(out.items()))


def _componentwise_pinv(H: np.ndarray, layout: BlockLayout) -> np.ndarray:
    """Pseudoinverse assembled per connected component of the block graph.

    No nonzero block couples two components, so the pseudoinverse is block
    diagonal over them; computing it this way keeps the cross terms exactly 0.
    """
    part = layout.partition
    P = np.zeros((H.shape[1], H.shape[0]))
    for comp in nx.connected_components(layout.graph):
        rows = np.concatenate(
            [np.arange(H.shape[0])[part.row_slice(i)] for i in sorted(comp)]
        ).astype(int)
        cols = np.unique(np.concatenate([part.state_blocks[i] for i in sorted(comp)]).astype(int))
        if rows.size and cols.size:
            P[np.ix_(cols, rows)] = pseudoinverse(H[np.ix_(rows, cols)])
    return P


def verify_pinv_decay(H, layout: BlockLayout) -> PinvDecayTable:
    """Tabulate max-abs entries of pseudoinverse blocks against block distance.

    Block ``(i, j)`` of ``H^+`` maps monitor j's rows to monitor i's states.
    A full-column-rank (tall) ``H`` is handled through ``H^T``.
    """
    H = as_matrix(H, "H")
    p, n = H.shape
    rank = np.linalg.matrix_rank(H)
    transposed = False
    if rank < p:
        if rank < n:
            raise ContractError("H must have full row or column rank")
        transposed = True
    part = layout.partition
    if sum(part.row_sizes) != p or not part.covers(n):
        raise ContractError("layout does not match the shape of H")
    P = _componentwise_pinv(H, layout)
    rows = []
    for i in range(part.monitor_count):
        cols_i = part.state_blocks[i]
        for j in range(part.monitor_count):
            blk = P[cols_i][:, part.row_slice(j)]
            if blk.size == 0:
                continue
            rows.append((i, j, layout.distance(i, j), float(np.max(np.abs(blk)))))
    table = PinvDecayTable(rows, None, transposed)
    finite = [(d, v) for d, v in table.by_distance().items() if math.isfinite(d)]
    try:
        table.fit = decay_fit(finite, floor=STRUCTURAL_ZERO)
    except InsufficientDataError:
        table.fit = None
    return table


def decay_csv(records: Sequence[tuple[int, int, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["monitor", "h", "error"])
    for i, h, e in records:
        w.writerow([i, h, f"{e:.17g}"])
    return buf.getvalue()


def pinv_decay_csv(table: PinvDecayTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["blockpair_i", "blockpair_j", "distance", "max_abs_entry"])
    for i, j, d, v in table.rows:
        dist = "inf" if math.isinf(d) else str(int(d))
        w.writerow([i, j, dist, f"{v:.17g}"])
    return buf.getvalue()
