"""Power-network measurement models, partitions and monitor graphs.

Buses are numbered from 0 and bus 0 is the angle reference: the DC model
keeps only the angles of buses ``1..n-1`` as state variables, so the state
index of bus ``k`` is ``k - 1``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .errors import ConfigError, ContractError, ModelError
from .linalg import as_matrix

REFERENCE_BUS = 0
STRUCTURAL_ZERO = 1e-12


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Branch:
    a: int
    b: int
    susceptance: float = 1.0


@dataclass
class PowerGrid:
    bus_count: int
    branches: list[Branch] = field(default_factory=list)

    def validate(self) -> None:
        if self.bus_count < 1:
            raise ModelError("grid needs at least one bus")
        for br in self.branches:
            if br.a == br.b:
                raise ModelError(f"branch {br.a}-{br.b} is a self loop")
            for end in (br.a, br.b):
                if not 0 <= end < self.bus_count:
                    raise ModelError(f"branch endpoint {end} out of range")
            if not br.susceptance > 0:
                raise ModelError(f"branch {br.a}-{br.b} has susceptance <= 0")
        if not nx.is_connected(self.graph()):
            raise ModelError("grid is not connected")

    def graph(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(self.bus_count))
        G.add_edges_from((br.a, br.b) for br in self.branches)
        return G

    @property
    def state_dim(self) -> int:
        return self.bus_count - 1


def laplacian(grid: PowerGrid) -> np.ndarray:
    """Susceptance-weighted Laplacian mapping all bus angles to injections."""
    n = grid.bus_count
    L = np.zeros((n, n))
    for br in grid.branches:
        L[br.a, br.a] += br.susceptance
        L[br.b, br.b] += br.susceptance
        L[br.a, br.b] -= br.susceptance
        L[br.b, br.a] -= br.susceptance
    return L


def injection_rows(grid: PowerGrid, buses: Sequence[int]) -> np.ndarray:
    """Rows of the reduced DC model measuring injections at ``buses``.

    Injection at the reference bus is a valid measurement too; its row is
    the reference row of the Laplacian with the reference column removed.
    """
    L = laplacian(grid)
    return L[np.asarray(buses, dtype=int)][:, 1:]


def dc_measurement_matrix(grid: PowerGrid) -> np.ndarray:
    """Reduced DC matrix ``P = H theta`` over the non-reference buses."""
    grid.validate()
    return laplacian(grid)[1:, 1:]


# -- monitor graphs ----------------------------------------------------------


class MonitorGraph:
    """Undirected connected communication graph between monitors."""

    def __init__(self, monitor_count: int, edges: Iterable[tuple[int, int]]):
        G = nx.Graph()
        G.add_nodes_from(range(monitor_count))
        for i, j in edges:
            if i == j:
                continue
            if not (0 <= i < monitor_count and 0 <= j < monitor_count):
                raise ContractError(f"edge ({i}, {j}) out of range")
            G.add_edge(i, j)
        if monitor_count == 0 or not nx.is_connected(G):
            raise ModelError("monitor graph is not connected")
        self._g = G

    @property
    def monitor_count(self) -> int:
        return self._g.number_of_nodes()

    @property
    def edges(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(e) for e in self._g.edges)

    def neighbors(self, i: int) -> list[int]:
        return sorted(self._g.neighbors(i))

    @cached_property
    def distances(self) -> dict[int, dict[int, int]]:
        return {i: dict(d) for i, d in nx.all_pairs_shortest_path_length(self._g)}

    @cached_property
    def diameter(self) -> int:
        return max(max(d.values()) for d in self.distances.values())

    def eccentricity(self, i: int) -> int:
        return max(self.distances[i].values())

    def to_networkx(self) -> nx.Graph:
        return self._g.copy()

    @classmethod
    def path(cls, m: int) -> "MonitorGraph":
        return cls(m, [(i, i + 1) for i in range(m - 1)])

    @classmethod
    def complete(cls, m: int) -> "MonitorGraph":
        return cls(m, [(i, j) for i in range(m) for j in range(i + 1, m)])

    @classmethod
    def random_connected(cls, m: int, seed, extra_prob: float = 0.3) -> "MonitorGraph":
        """Random spanning tree plus Bernoulli extra edges."""
        rng = _rng(seed)
        order = rng.permutation(m)
        edges = [(int(order[k]), int(order[rng.integers(k)])) for k in range(1, m)]
        for i in range(m):
            for j in range(i + 1, m):
                if rng.random() < extra_prob:
                    edges.append((i, j))
        return cls(m, edges)

    def __repr__(self) -> str:
        return f"MonitorGraph(m={self.monitor_count}, edges={sorted(map(sorted, self.edges))})"


# -- partitions --------------------------------------------------------------


@dataclass
class RegionPartition:
    """Row blocks and state regions owned by each monitor.

    ``row_sizes`` splits the measurement rows into consecutive blocks;
    ``state_blocks[i]`` lists the state indices monitor ``i`` is responsible
    for (regions may overlap but must cover every state).
    """

    row_sizes: list[int]
    state_blocks: list[np.ndarray]

    def __post_init__(self):
        if len(self.row_sizes) != len(self.state_blocks):
            raise ContractError("row blocks and state regions differ in count")
        self.state_blocks = [np.asarray(s, dtype=int) for s in self.state_blocks]

    @property
    def monitor_count(self) -> int:
        return len(self.row_sizes)

    @property
    def row_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.row_sizes)]).astype(int)

    def row_slice(self, i: int) -> slice:
        off = self.row_offsets
        return slice(int(off[i]), int(off[i + 1]))

    def covers(self, n: int) -> bool:
        if not self.state_blocks:
            return n == 0
        return set(np.concatenate(self.state_blocks).tolist()) == set(range(n))

    def block(self, H: np.ndarray, i: int, j: int) -> np.ndarray:
        return H[self.row_slice(i)][:, self.state_blocks[j]]


def block_graph(H, partition: RegionPartition) -> nx.Graph:
    """Graph with edge (i, j) iff block H_ij or H_ji has a nonzero entry."""
    H = as_matrix(H, "H")
    m = partition.monitor_count
    G = nx.Graph()
    G.add_nodes_from(range(m))
    nz = np.abs(H) > STRUCTURAL_ZERO
    for i in range(m):
        rows = nz[partition.row_slice(i)]
        for j in range(i + 1, m):
            if rows[:, partition.state_blocks[j]].any() or nz[
                partition.row_slice(j)
            ][:, partition.state_blocks[i]].any():
                G.add_edge(i, j)
    return G


def monitor_graph_from_blocks(H, partition: RegionPartition) -> MonitorGraph:
    G = block_graph(H, partition)
    return MonitorGraph(partition.monitor_count, G.edges)


def lattice_grid(a: int, b: int) -> tuple[PowerGrid, RegionPartition, MonitorGraph]:
    """Square lattice of ``(ab)^2`` buses split into ``b^2`` blocks of ``a^2``.

    Buses are numbered block by block (block-major, then row-major inside
    the block), so each monitor's injection rows are contiguous. Monitors are
    numbered row-major over the ``b x b`` block grid.  The partition rows are
    one injection measurement per non-reference bus, i.e. the square reduced
    DC matrix.
    """
    if a < 1 or b < 1:
        raise ContractError("lattice_grid needs a >= 1 and b >= 1")
    side = a * b

    def bus(r: int, c: int) -> int:
        mon = (r // a) * b + (c // a)
        return mon * a * a + (r % a) * a + (c % a)

    branches = []
    for r in range(side):
        for c in range(side):
            if c + 1 < side:
                branches.append(Branch(bus(r, c), bus(r, c + 1), 1.0))
            if r + 1 < side:
                branches.append(Branch(bus(r, c), bus(r + 1, c), 1.0))
    grid = PowerGrid(side * side, branches)

    owner = lambda k: k // (a * a)  # noqa: E731
    m = b * b
    state_blocks = [[] for _ in range(m)]
    for k in range(1, grid.bus_count):
        state_blocks[owner(k)].append(k - 1)
    row_sizes = [len(s) for s in state_blocks]
    partition = RegionPartition(row_sizes, state_blocks)

    edges = {
        (min(owner(br.a), owner(br.b)), max(owner(br.a), owner(br.b)))
        for br in branches
        if owner(br.a) != owner(br.b)
    }
    return grid, partition, MonitorGraph(m, edges)


def synthetic_grid(
    bus_count: int = 118,
    branch_count: int = 186,
    areas: int = 5,
    seed=0,
    susceptance_range: tuple[float, float] = (3.0, 30.0),
) -> tuple[PowerGrid, list[list[int]]]:
    """Seeded connected grid split into contiguous areas.

    Each area gets a random spanning tree, areas are chained by tie lines,
    and the remaining branches are drawn at random (mostly inside areas).
    Returns the grid and the bus list of every area.
    """
    if branch_count < bus_count - 1:
        raise ContractError("too few branches for a connected grid")
    if areas < 1 or areas > bus_count:
        raise ContractError("bad area count")
    rng = _rng(seed)
    sizes = [bus_count // areas + (1 if k < bus_count % areas else 0) for k in range(areas)]
    starts = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    area_buses = [list(range(starts[k], starts[k + 1])) for k in range(areas)]
    area_of = np.repeat(np.arange(areas), sizes)

    pairs: set[tuple[int, int]] = set()

    def add(u: int, v: int) -> bool:
        e = (min(u, v), max(u, v))
        if u == v or e in pairs:
            return False
        pairs.add(e)
        return True

    for buses in area_buses:
        perm = rng.permutation(buses)
        for k in range(1, len(perm)):
            add(int(perm[k]), int(perm[rng.integers(k)]))
    area_order = rng.permutation(areas)
    for k in range(1, areas):
        u = int(rng.choice(area_buses[area_order[k]]))
        v = int(rng.choice(area_buses[area_order[rng.integers(k)]]))
        add(u, v)
    max_pairs = bus_count * (bus_count - 1) // 2
    if branch_count > max_pairs:
        raise ContractError("too many branches for a simple graph")
    while len(pairs) < branch_count:
        u = int(rng.integers(bus_count))
        if rng.random() < 0.8:
            v = int(rng.choice(area_buses[area_of[u]]))
        else:
            v = int(rng.integers(bus_count))
        add(u, v)

    lo, hi = susceptance_range
    branches = [
        Branch(u, v, float(np.round(rng.uniform(lo, hi), 6))) for u, v in sorted(pairs)
    ]
    grid = PowerGrid(bus_count, branches)
    grid.validate()
    return grid, area_buses


def area_partition(area_buses: Sequence[Sequence[int]], copies: int = 1) -> RegionPartition:
    """Partition for injection rows at every non-reference bus of each area.

    With ``copies > 1`` each monitor measures each of its buses that many
    times (redundant rows kept inside the monitor's block).
    """
    state_blocks = [[k - 1 for k in buses if k != REFERENCE_BUS] for buses in area_buses]
    row_sizes = [copies * len(s) for s in state_blocks]
    return RegionPartition(row_sizes, state_blocks)


def area_measurement_matrix(
    grid: PowerGrid, area_buses: Sequence[Sequence[int]], copies: int = 1
) -> np.ndarray:
    rows = []
    for buses in area_buses:
        measured = [k for k in buses if k != REFERENCE_BUS]
        rows.extend(measured * copies)
    return injection_rows(grid, rows)


# -- measurement systems -----------------------------------------------------


@dataclass
class MeasurementSystem:
    """Linear model ``z = H x + v`` with ``Cov(v) = Sigma = B B^T``."""

    H: np.ndarray
    Sigma: np.ndarray
    B: np.ndarray
    x: np.ndarray
    z: np.ndarray
    row_sizes: list[int]

    def __post_init__(self):
        p, n = self.H.shape
        if sum(self.row_sizes) != p:
            raise ContractError(f"row blocks sum to {sum(self.row_sizes)}, H has {p} rows")
        if self.B.shape[0] != p or self.Sigma.shape != (p, p):
            raise ContractError("noise model does not match H")

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.row_sizes)]).astype(int)

    @property
    def v(self) -> np.ndarray:
        Hx = self.H @ self.x
        return self.z - Hx

    def row_slice(self, i: int) -> slice:
        off = self.offsets
        return slice(int(off[i]), int(off[i + 1]))

    def blocks(self) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Per-monitor ``(H_i, B_i, z_i)`` row blocks of ``H``, ``B`` and ``z``."""
        return [
            (self.H[s], self.B[s], self.z[s])
            for s in (self.row_slice(i) for i in range(len(self.row_sizes)))
        ]

    def plain_blocks(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(Hi, zi) for Hi, _, zi in self.blocks()]


def split_rows(z: np.ndarray, row_sizes: Sequence[int]) -> list[np.ndarray]:
    off = np.concatenate([[0], np.cumsum(row_sizes)]).astype(int)
    return [z[off[i] : off[i + 1]] for i in range(len(row_sizes))]


def draw_noise(B, seed, size: int | None = None, bounded: bool = False) -> np.ndarray:
    """Noise ``v = B g`` with ``g`` standard normal.

    ``bounded=True`` redraws every component of ``g`` outside ``[-2, 2]``;
    for diagonal ``B = sigma I`` this gives ``|v_k| <= 2 sigma`` exactly.
    ``size`` stacks that many independent draws as columns.
    """
    B = np.asarray(B, dtype=float)
    rng = _rng(seed)
    shape = (B.shape[1],) if size is None else (B.shape[1], size)
    g = rng.standard_normal(shape)
    if bounded:
        bad = np.abs(g) > 2.0
        while bad.any():
            g[bad] = rng.standard_normal(int(bad.sum()))
            bad = np.abs(g) > 2.0
    return B @ g


def generate_measurements(H, x, B, seed, *, size: int | None = None, bounded: bool = False):
    """Seeded measurements ``z = H x + B g``.

    ``x`` may be a vector or a matrix of states (one per column); ``size``
    draws that many noisy snapshots of a single state.
    """
    H = np.asarray(H, dtype=float)
    x = np.asarray(x, dtype=float)
    if H.shape[1] != x.shape[0]:
        raise ContractError(f"H has {H.shape[1]} columns, x has {x.shape[0]} rows")
    Hx = H @ x
    if size is None and x.ndim == 2:
        size = x.shape[1]
    v = draw_noise(B, seed, size=size, bounded=bounded)
    if Hx.ndim == 1 and v.ndim == 2:
        Hx = Hx[:, None]
    return Hx + v


def inject_false_data(
    z, monitor: int, row: int, w_max: float, seed, row_sizes: Sequence[int]
) -> tuple[np.ndarray, float]:
    """Add a uniform ``[0, w_max]`` draw to one measurement of one monitor."""
    if w_max < 0:
        raise ContractError("w_max must be >= 0")
    if not 0 <= monitor < len(row_sizes):
        raise ContractError(f"monitor {monitor} out of range")
    if not 0 <= row < row_sizes[monitor]:
        raise ContractError(f"row {row} outside monitor {monitor}'s block")
    rng = _rng(seed)
    w = float(rng.uniform(0.0, w_max)) if w_max > 0 else 0.0
    zc = np.array(z, dtype=float, copy=True)
    zc[int(sum(row_sizes[:monitor])) + row] += w
    return zc, w


def random_consistent_system(
    n: int,
    m: int,
    seed,
    *,
    rows: int | None = None,
    rank: int | None = None,
) -> MeasurementSystem:
    """Random ``z = H x`` (no noise) split into ``m`` nonempty row blocks.

    ``rank`` below ``min(rows, n)`` gives a nontrivial kernel.
    """
    if n < 1 or m < 1:
        raise ContractError("need n >= 1 and m >= 1")
    rng = _rng(seed)
    p = rows if rows is not None else int(rng.integers(max(m, 1), max(m, 2 * n) + 1))
    if p < m:
        raise ContractError("fewer rows than blocks")
    r = rank if rank is not None else min(p, n)
    H = rng.standard_normal((p, r)) @ rng.standard_normal((r, n)) / np.sqrt(r)
    x = rng.standard_normal(n)
    cuts = np.sort(rng.choice(np.arange(1, p), size=m - 1, replace=False)) if m > 1 else []
    sizes = np.diff(np.concatenate([[0], cuts, [p]])).astype(int).tolist()
    return MeasurementSystem(H, np.eye(p), np.eye(p), x, H @ x, sizes)


def random_noisy_system(
    n: int, p: int, m: int, seed, *, bounded: bool = False
) -> MeasurementSystem:
    """Random full-column-rank ``H`` with random SPD noise covariance."""
    from .linalg import noise_factor

    if p < n or p < m:
        raise ContractError("need p >= n and p >= m")
    rng = _rng(seed)
    H = rng.standard_normal((p, n))
    A = rng.standard_normal((p, p)) / np.sqrt(p)
    Sigma = A @ A.T + 0.5 * np.eye(p)
    B = noise_factor(Sigma)
    x = rng.standard_normal(n)
    z = generate_measurements(H, x, B, rng, bounded=bounded)
    cuts = np.sort(rng.choice(np.arange(1, p), size=m - 1, replace=False)) if m > 1 else []
    sizes = np.diff(np.concatenate([[0], cuts, [p]])).astype(int).tolist()
    return MeasurementSystem(H, Sigma, B, x, z, sizes)


# -- grid file ---------------------------------------------------------------


def format_grid(grid: PowerGrid) -> str:
    lines = [f"buses {grid.bus_count}"]
    lines += [f"branch {br.a} {br.b} {br.susceptance!r}" for br in grid.branches]
    return "\n".join(lines) + "\n"


def parse_grid(text: str) -> PowerGrid:
    """Parse the line-oriented grid format (``buses n`` / ``branch a b s``)."""
    bus_count = None
    branches = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "buses" and len(parts) == 2:
                if bus_count is not None:
                    raise ConfigError(f"line {lineno}: duplicate 'buses' header")
                bus_count = int(parts[1])
            elif parts[0] == "branch" and len(parts) == 4:
                if bus_count is None:
                    raise ConfigError(f"line {lineno}: 'branch' before 'buses' header")
                s = float(parts[3])
                if not math.isfinite(s):
                    raise ValueError(parts[3])
                branches.append(Branch(int(parts[1]), int(parts[2]), s))
            else:
                raise ConfigError(f"line {lineno}: unrecognized record {line!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: malformed number in {line!r}") from exc
    if bus_count is None:
        raise ConfigError("missing 'buses' header")
    grid = PowerGrid(bus_count, branches)
    try:
        grid.validate()
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc
    return grid


def read_grid(path) -> PowerGrid:
    return parse_grid(Path(path).read_text())


def write_grid(grid: PowerGrid, path) -> None:
    Path(path).write_text(format_grid(grid))
