import csv
import io

import networkx as nx
import numpy as np
import pytest

from diststate.diffusive import local_init, make_nodes, run_synchronous
from diststate.errors import ContractError, InsufficientDataError
from diststate.finite_memory import (
    BlockLayout,
    decay_csv,
    decay_fit,
    local_error,
    pinv_decay_csv,
    run_truncated,
    support_decay_sets,
    truncated_sweep,
    verify_pinv_decay,
)
from diststate.network import (
    MonitorGraph,
    RegionPartition,
    dc_measurement_matrix,
    lattice_grid,
)


@pytest.fixture(scope="module")
def lattice33():
    grid, part, graph = lattice_grid(3, 3)
    H = dc_measurement_matrix(grid)
    z = H @ np.random.default_rng(0).standard_normal(H.shape[1])
    nodes = make_nodes([(H[part.row_slice(i)], z[part.row_slice(i)])
                        for i in range(part.monitor_count)])
    return H, part, graph, nodes


def test_h0_is_local_init(lattice33):
    _, part, graph, nodes = lattice33
    own = run_truncated(nodes, graph, 0, part.state_blocks)
    for i, nd in enumerate(nodes):
        np.testing.assert_array_equal(own[i], local_init(nd).state[part.state_blocks[i]])


def test_diameter_equals_converged(lattice33):
    _, part, graph, nodes = lattice33
    full = run_synchronous(nodes, graph)
    for h in (graph.diameter, graph.diameter + 2):
        own = run_truncated(nodes, graph, h, part.state_blocks)
        for i, blk in enumerate(part.state_blocks):
            assert np.abs(full.nodes[i].state[blk] - own[i]).max() <= 1e-10


def test_path_h1_middle_monitor():
    # tridiagonal coupling, one state per monitor
    H = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    z = H @ np.array([1.0, 2.0, 3.0])
    nodes = make_nodes([(H[[i]], z[[i]]) for i in range(3)])
    graph = MonitorGraph.path(3)
    sweep = truncated_sweep(nodes, graph, 1, [[0], [1], [2]])
    full = run_synchronous(nodes, graph)
    # after one round the middle monitor has heard everyone and is exact
    assert local_error(full.nodes[1].state, sweep.full[1][1], [1]) <= 1e-12
    assert local_error(full.nodes[0].state, sweep.full[1][0], [0]) > 1e-6


def test_local_error_definition():
    assert local_error([1.0, 5.0, 3.0], [1.0, 2.0, 7.0], [1, 2]) == pytest.approx(5.0)


def test_locality_with_decoupled_block():
    # monitor 0's rows only involve its own states, so it is exact from h = 0
    rng = np.random.default_rng(1)
    H = np.zeros((6, 6))
    H[:2, :2] = rng.standard_normal((2, 2)) + 3 * np.eye(2)
    H[2:, 2:] = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    z = H @ rng.standard_normal(6)
    blocks = [[0, 1], [2, 3], [4, 5]]
    nodes = make_nodes([(H[b], z[b]) for b in blocks])
    graph = MonitorGraph.path(3)
    sweep = truncated_sweep(nodes, graph, 2, blocks)
    exact = np.linalg.solve(H, z)
    for h in range(3):
        assert local_error(exact, sweep.full[h][0], blocks[0]) <= 1e-8


def test_lattice_errors_reach_zero_at_diameter(lattice33):
    _, part, graph, nodes = lattice33
    d = graph.diameter
    sweep = truncated_sweep(nodes, graph, d, part.state_blocks)
    for i in range(part.monitor_count):
        errs = [local_error(sweep.full[d][i], sweep.full[h][i], part.state_blocks[i])
                for h in range(d + 1)]
        assert errs[-1] <= 1e-8
        assert errs[0] > 1e-3


def test_truncated_negative_h():
    with pytest.raises(ContractError):
        truncated_sweep([], MonitorGraph.path(1), -1, [])


# -- decay fit ----------------------------------------------------------------


def test_decay_fit_exact_model():
    pts = [(h, 2.0 * 0.5 ** (h / 2 + 1)) for h in range(6)]
    f = decay_fit(pts)
    assert abs(f.C - 2.0) <= 1e-10 and abs(f.q - 0.5) <= 1e-10
    assert f.misfit <= 1e-12 and f.ok


def test_decay_fit_all_zero():
    with pytest.raises(InsufficientDataError):
        decay_fit([(h, 0.0) for h in range(5)])


def test_decay_fit_envelope_dominates():
    rng = np.random.default_rng(2)
    pts = [(h, 3.0 * 0.4 ** (h / 2 + 1) * np.exp(rng.normal(0, 0.3))) for h in range(8)]
    f = decay_fit(pts)
    assert 0 < f.q < 1 and f.C_envelope >= f.C
    for h, e in pts:
        assert e <= f.envelope(h) * (1 + 1e-12)


def test_decay_fit_floor_skips_points():
    pts = [(0, 1.0), (1, 0.5), (2, 0.25), (3, 1e-20)]
    assert decay_fit(pts, floor=1e-12).points == 3


# -- support and decay sets ---------------------------------------------------


def test_support_h0_is_diagonal():
    M = np.random.default_rng(3).standard_normal((4, 4))
    S, D = support_decay_sets(M, 0)
    np.testing.assert_array_equal(S, np.eye(4, dtype=bool))
    np.testing.assert_array_equal(D, ~np.eye(4, dtype=bool))


def test_support_tridiagonal_h1():
    M = np.eye(5) + np.eye(5, k=1) + np.eye(5, k=-1)
    S, _ = support_decay_sets(M, 1)
    np.testing.assert_array_equal(S, M != 0)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_support_path_laplacian_band(k):
    n = 9
    L = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    S, _ = support_decay_sets(L, k)
    i, j = np.indices((n, n))
    np.testing.assert_array_equal(S, np.abs(i - j) <= k)


def test_support_requires_square():
    with pytest.raises(ContractError):
        support_decay_sets(np.ones((2, 3)), 1)


def test_structural_locality_of_gram_powers(lattice33):
    H, part, _, _ = lattice33
    layout = BlockLayout.from_matrix(H, part)
    S, _ = support_decay_sets(H @ H.T, 2)
    off = part.row_offsets
    for i in range(part.monitor_count):
        for j in range(part.monitor_count):
            if layout.distance(i, j) > 2:
                assert not S[off[i] : off[i + 1], off[j] : off[j + 1]].any()


# -- pseudoinverse decay ------------------------------------------------------


def test_pinv_decay_block_diagonal():
    rng = np.random.default_rng(4)
    H = np.zeros((6, 6))
    for k in range(3):
        H[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = rng.standard_normal((2, 2)) + 3 * np.eye(2)
    part = RegionPartition([2, 2, 2], [[0, 1], [2, 3], [4, 5]])
    table = verify_pinv_decay(H, BlockLayout.from_matrix(H, part))
    for i, j, d, v in table.rows:
        if i != j:
            assert d == float("inf") and v == 0.0


def test_pinv_decay_banded_path():
    n = 12
    H = 3 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    part = RegionPartition([1] * n, [[k] for k in range(n)])
    table = verify_pinv_decay(H, BlockLayout.from_matrix(H, part))
    by_d = table.by_distance()
    vals = [by_d[d] for d in sorted(by_d)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert table.fit is not None and 0 < table.fit.q < 1


def test_pinv_decay_lattice_envelope(lattice33):
    H, part, _, _ = lattice33
    table = verify_pinv_decay(H, BlockLayout.from_matrix(H, part))
    f = table.fit
    assert f is not None and f.ok
    for d, v in table.by_distance().items():
        assert v <= f.envelope(d) * (1 + 1e-12)


def test_pinv_decay_tall_matrix_transposed():
    rng = np.random.default_rng(5)
    H = rng.standard_normal((6, 3))
    part = RegionPartition([3, 3], [[0, 1], [2]])
    assert verify_pinv_decay(H, BlockLayout.from_matrix(H, part)).transposed


def test_pinv_decay_rank_deficient():
    H = np.ones((3, 3))
    part = RegionPartition([1, 1, 1], [[0], [1], [2]])
    with pytest.raises(ContractError):
        verify_pinv_decay(H, BlockLayout.from_matrix(H, part))


def test_block_layout_distance_disconnected():
    H = np.eye(2)
    layout = BlockLayout.from_matrix(H, RegionPartition([1, 1], [[0], [1]]))
    assert layout.distance(0, 1) == float("inf")
    assert isinstance(layout.graph, nx.Graph)


# -- CSV ----------------------------------------------------------------------


def test_decay_csv_schema():
    text = decay_csv([(0, 0, 0.1), (0, 1, 1e-17)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["monitor", "h", "error"]
    assert float(rows[2][2]) == 1e-17


def test_pinv_decay_csv_schema():
    H = np.eye(2)
    table = verify_pinv_decay(H, BlockLayout.from_matrix(H, RegionPartition([1, 1], [[0], [1]])))
    rows = list(csv.reader(io.StringIO(pinv_decay_csv(table))))
    assert rows[0] == ["blockpair_i", "blockpair_j", "distance", "max_abs_entry"]
    assert ["0", "1", "inf", "0"] in rows
