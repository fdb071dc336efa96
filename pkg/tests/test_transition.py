"""Transition graph construction, weights, and subgraph extraction."""

import csv
import functools
import json

import numpy as np
import pytest
from scipy.sparse.csgraph import breadth_first_order, connected_components

from chainrec import (
    InvalidDiscretization,
    Point,
    build_transition_graph,
    epsilon_subgraph,
    make_example,
    zero_subgraph,
)
from chainrec.reports import write_graph_csv

EXAMPLES = ("ex2_1", "ex3_1", "ex3_2", "ex3_3", "ex3_4",
            "identity", "north_south", "rotation")


@functools.lru_cache(maxsize=None)
def _graph(name, cpu, w_max=None):
    system = make_example(name, cells_per_unit=cpu)
    return system, build_transition_graph(system, w_max=w_max)


def _overlap_pairs(system):
    """Pairs (i, j) whose exact interval image meets cell j's interior."""
    X = system.complex
    pairs = set()
    for i, cell in enumerate(X.cells):
        for de, lo, hi in system.map_interval(cell.edge, cell.lo, cell.hi):
            for j, c in enumerate(X.cells):
                if c.edge == de and c.lo < hi and lo < c.hi:
                    pairs.add((i, j))
    return pairs


def _zero_pairs(graph):
    return set(zip(graph.src[graph.overlap].tolist(),
                   graph.dst[graph.overlap].tolist()))


def _image_distance(system, graph, i, j):
    X = system.complex
    ci = X.cells[i]
    cj = X.cells[j]
    fp = system.eval_map(Point(ci.edge, ci.center))
    return X.geodesic_distance(fp, Point(cj.edge, cj.center))


@pytest.mark.parametrize("name", ["north_south", "ex2_1"])
def test_zero_edges_match_image_overlap(name):
    system, graph = _graph(name, 32)
    assert _zero_pairs(graph) == _overlap_pairs(system)


def test_priced_weights_are_image_distances():
    system, graph = _graph("north_south", 64)
    priced = ~graph.overlap
    assert priced.any()
    for i, j, w in zip(graph.src[priced].tolist(),
                       graph.dst[priced].tolist(),
                       graph.w[priced].tolist()):
        assert w > 0.0
        assert w == pytest.approx(_image_distance(system, graph, i, j),
                                  abs=1e-9)


@pytest.mark.parametrize("name", EXAMPLES)
def test_weights_within_two_sided_enclosure(name):
    system, graph = _graph(name, 32)
    assert graph.slack == pytest.approx((system.lipschitz + 1.0) * graph.h)
    assert np.isfinite(graph.w).all()
    assert (graph.w >= 0.0).all()
    for i, j, w in zip(graph.src.tolist(), graph.dst.tolist(),
                       graph.w.tolist()):
        d = _image_distance(system, graph, i, j)
        assert w <= d + 1e-9
        assert w >= d - graph.slack - 1e-9


@pytest.mark.parametrize("name", EXAMPLES)
def test_every_cell_has_zero_out_edge_and_in_edge(name):
    _, graph = _graph(name, 32)
    zero_src = np.unique(graph.src[graph.overlap])
    assert zero_src.size == graph.n
    assert np.unique(graph.dst).size == graph.n


def test_identity_zero_subgraph_is_self_loops():
    _, graph = _graph("identity", 32)
    Z = zero_subgraph(graph)
    assert Z.nnz == graph.n
    assert (Z.diagonal() == 1).all()


def test_rotation_zero_subgraph_is_one_cycle():
    _, graph = _graph("rotation", 64)
    Z = zero_subgraph(graph)
    ncomp, _ = connected_components(Z, directed=True, connection="strong")
    assert ncomp == 1
    out_deg = np.asarray(Z.sum(axis=1)).ravel()
    assert (out_deg >= 1).all()
    assert (out_deg <= 2).all()


def test_north_south_zero_chain_runs_repeller_to_attractor():
    system, graph = _graph("north_south", 64)
    X = system.complex
    rep = X.cell_of_point(Point(0, 0.0))
    att = X.cell_of_point(Point(0, 1.0))
    Z = zero_subgraph(graph)
    down = breadth_first_order(Z, rep, directed=True,
                               return_predecessors=False)
    assert att in set(down.tolist())
    up = breadth_first_order(Z, att, directed=True,
                             return_predecessors=False)
    assert rep not in set(up.tolist())


def test_ex2_1_zero_edges_fix_interval_and_push_arc_forward():
    system, graph = _graph("ex2_1", 64)
    X = system.complex
    L = X.edges[0].length
    succ = {}
    for i, j in _zero_pairs(graph):
        succ.setdefault(i, set()).add(j)
    for i, cell in enumerate(X.cells):
        if 0.05 <= cell.lo and cell.hi <= 0.95:
            assert i in succ[i]
        elif 2.5 <= cell.center <= 4.5:
            assert i not in succ[i]
            for j in succ[i]:
                ahead = (X.cells[j].center - cell.center) % L
                assert 0.0 < ahead < L / 2.0


def test_small_epsilon_subgraph_equals_zero_subgraph():
    _, graph = _graph("ex2_1", 64)
    A = epsilon_subgraph(graph, 0.45 * graph.h)
    B = zero_subgraph(graph)
    assert (A != B).nnz == 0


def test_epsilon_subgraph_threshold_is_strict():
    _, graph = _graph("north_south", 64)
    priced = ~graph.overlap
    k = int(np.flatnonzero(priced)[0])
    i, j, v = int(graph.src[k]), int(graph.dst[k]), float(graph.w[k])
    assert epsilon_subgraph(graph, v)[i, j] == 0
    assert epsilon_subgraph(graph, v * (1.0 + 1e-9) + 1e-15)[i, j] == 1


def test_epsilon_subgraph_grows_with_epsilon():
    _, graph = _graph("north_south", 64)
    sizes = [epsilon_subgraph(graph, e).nnz
             for e in (0.25 * graph.h, graph.h, 4.0 * graph.h)]
    assert sizes[0] <= sizes[1] <= sizes[2]


def test_epsilon_subgraph_rejects_bad_thresholds():
    _, graph = _graph("north_south", 32)
    with pytest.raises(InvalidDiscretization):
        epsilon_subgraph(graph, 0.0)
    with pytest.raises(InvalidDiscretization):
        epsilon_subgraph(graph, -graph.h)
    with pytest.raises(InvalidDiscretization):
        epsilon_subgraph(graph, graph.w_max + 2.0 * graph.h)


def test_epsilon_above_max_weight_keeps_every_edge():
    _, graph = _graph("north_south", 32)
    eps = float(graph.w.max()) * (1.0 + 1e-12) + 1e-15
    assert epsilon_subgraph(graph, eps).nnz == len(graph.src)


@pytest.mark.parametrize("name", ["north_south", "ex3_3"])
def test_refined_weights_pull_back_below_parent(name):
    coarse_sys, coarse = _graph(name, 32)
    w_max = 8.0 * coarse.h
    fine_sys, fine = _graph(name, 64, w_max)
    Xc = coarse_sys.complex
    Xf = fine_sys.complex
    parent = np.array([Xc.cell_of_point(Point(c.edge, c.center))
                       for c in Xf.cells])
    pulled = {}
    for i, j, w in zip(fine.src.tolist(), fine.dst.tolist(),
                       fine.w.tolist()):
        key = (int(parent[i]), int(parent[j]))
        if w < pulled.get(key, np.inf):
            pulled[key] = w
    for i, j, w, ov in zip(coarse.src.tolist(), coarse.dst.tolist(),
                           coarse.w.tolist(), coarse.overlap.tolist()):
        if ov:
            assert pulled[(i, j)] == 0.0
        elif w <= w_max - 2.0 * coarse.h:
            assert pulled[(i, j)] <= w + coarse.h + 1e-12


@pytest.mark.parametrize("name", ["north_south", "ex2_1"])
def test_enclosure_soundness_on_random_orbit_steps(name):
    system, graph = _graph(name, 64)
    X = system.complex
    zero = _zero_pairs(graph)
    rng = np.random.default_rng(7)
    for _ in range(1000):
        i = int(rng.integers(graph.n))
        cell = X.cells[i]
        x = float(rng.uniform(cell.lo, cell.hi))
        j = X.cell_of_point(system.eval_map(Point(cell.edge, x)))
        assert (i, j) in zero


def test_graph_csv_dump_round_trips(tmp_path):
    _, graph = _graph("north_south", 32)
    path = tmp_path / "graph.csv"
    write_graph_csv(path, graph)
    lines = path.read_text().splitlines()
    header = json.loads(lines[0].lstrip("# "))
    assert header == {"n": graph.n, "h": graph.h,
                      "slack": graph.slack, "w_max": graph.w_max}
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["src", "dst", "weight"]
    assert len(rows) - 1 == len(graph.src)
    i, j, w = rows[1]
    assert int(i) == graph.src[0]
    assert int(j) == graph.dst[0]
    assert float(w) == pytest.approx(graph.w[0], abs=1e-9)
