"""Morse components, connection digraphs, and open covers."""

import functools

import networkx as nx
import numpy as np
import pytest

from chainrec import (
    ConnectionDigraph,
    DegenerateCover,
    InvalidDiscretization,
    Point,
    build_transition_graph,
    connection_digraph,
    decompose,
    generalized_recurrent,
    has_cycles,
    make_example,
    open_decomposition,
)

EXAMPLES = ("ex2_1", "ex3_1", "ex3_2", "ex3_3", "ex3_4",
            "identity", "north_south", "rotation")


@functools.lru_cache(maxsize=None)
def _built(name, cpu):
    system = make_example(name, cells_per_unit=cpu)
    graph = build_transition_graph(system)
    return system, graph, generalized_recurrent(graph)


def _zero_digraph(graph):
    G = nx.DiGraph()
    G.add_nodes_from(range(graph.n))
    G.add_edges_from(zip(graph.src[graph.overlap].tolist(),
                         graph.dst[graph.overlap].tolist()))
    return G


def _fattened(X, comp):
    fat = set(comp)
    for a, b in X.adjacency_pairs():
        if a in comp:
            fat.add(b)
        if b in comp:
            fat.add(a)
    return fat


@pytest.mark.parametrize("name", EXAMPLES)
def test_components_partition_recurrent_set(name):
    _, _, res = _built(name, 64)
    comps = decompose(res)
    flat = [i for c in comps for i in c]
    assert len(flat) == len(set(flat))
    assert set(flat) == set(res.gr)


@pytest.mark.parametrize("name", EXAMPLES)
def test_components_invariant_within_enclosure_slack(name):
    system, graph, res = _built(name, 64)
    X = system.complex
    for comp in decompose(res):
        cs = set(comp)
        centers = [Point(X.cells[c].edge, X.cells[c].center) for c in comp]
        sel = np.isin(graph.src[graph.overlap], list(cs))
        for j in graph.dst[graph.overlap][sel].tolist():
            if j in cs:
                continue
            pj = Point(X.cells[j].edge, X.cells[j].center)
            assert min(X.geodesic_distance(pj, c)
                       for c in centers) <= graph.slack + 1e-12


def test_north_south_two_components_one_arc():
    system, _, res = _built("north_south", 128)
    comps = decompose(res)
    assert len(comps) == 2
    X = system.complex
    rep = X.cell_of_point(Point(0, 0.0))
    att = X.cell_of_point(Point(0, 1.0))
    assert rep in comps[0]
    assert att in comps[1]
    cd = connection_digraph(res, comps)
    assert cd.arcs == frozenset({(0, 1)})
    assert cd.one_cycles == {}
    assert not has_cycles(cd)


def test_ex2_1_single_component_carries_a_stray_cycle():
    system, graph, res = _built("ex2_1", 128)
    comps = decompose(res)
    assert len(comps) == 1
    assert comps[0] == tuple(sorted(res.gr))
    cd = connection_digraph(res, comps)
    assert list(cd.one_cycles) == [0]
    witness = cd.one_cycles[0]
    assert witness not in res.gr
    G = _zero_digraph(graph)
    fat = _fattened(system.complex, set(comps[0]))
    assert nx.ancestors(G, witness) & fat
    assert nx.descendants(G, witness) & fat
    assert has_cycles(cd)


def test_ex3_3_alternating_chain_is_acyclic():
    _, _, res = _built("ex3_3", 128)
    comps = decompose(res)
    assert len(comps) == 7
    cd = connection_digraph(res, comps)
    assert cd.arcs == frozenset(
        {(0, 6), (1, 0), (1, 2), (3, 2), (3, 4), (5, 4), (5, 6)})
    assert cd.one_cycles == {}
    assert not has_cycles(cd)


def test_ex3_4_arc_insertion_creates_a_cycle():
    _, _, res = _built("ex3_4", 128)
    comps = decompose(res)
    assert len(comps) == 8
    cd = connection_digraph(res, comps)
    assert cd.one_cycles
    for witness in cd.one_cycles.values():
        assert witness not in res.gr
    assert has_cycles(cd)


def test_has_cycles_on_synthetic_digraphs():
    comps = [(0,), (1,), (2,)]
    assert not has_cycles(ConnectionDigraph(comps, frozenset(), {}))
    assert not has_cycles(
        ConnectionDigraph(comps, frozenset({(0, 1), (1, 2)}), {}))
    assert has_cycles(
        ConnectionDigraph(comps, frozenset({(0, 1), (1, 0)}), {}))
    assert has_cycles(ConnectionDigraph(comps, frozenset(), {1: 5}))


def test_open_cover_north_south_two_disjoint_regions():
    system, graph, res = _built("north_south", 128)
    cover = open_decomposition(res, 4 * graph.h)
    assert len(cover.regions) == 2
    a, b = (set(r) for r in cover.regions)
    assert not (a & b)
    assert set(res.gr) <= a | b
    for core, region in zip(cover.cores, cover.regions):
        assert set(core) <= set(region)
    G = _zero_digraph(graph)
    for region in cover.regions:
        rset = set(region)
        fwd = rset | set().union(*(nx.descendants(G, v) for v in rset))
        bwd = rset | set().union(*(nx.ancestors(G, v) for v in rset))
        assert fwd & bwd == rset


def test_open_cover_resolves_ex3_3_fixed_points():
    _, graph, res = _built("ex3_3", 256)
    comps = decompose(res)
    cover = open_decomposition(res, 4 * graph.h)
    assert len(comps) == len(cover.regions) == 7
    sets = [set(r) for r in cover.regions]
    for i, a in enumerate(sets):
        for b in sets[i + 1:]:
            assert not (a & b)
    for comp in comps:
        homes = [i for i, s in enumerate(sets) if set(comp) <= s]
        assert len(homes) == 1
    assert set(res.gr) <= set().union(*sets)


def test_open_cover_rejects_radius_at_cell_scale():
    _, graph, res = _built("north_south", 128)
    with pytest.raises(InvalidDiscretization):
        open_decomposition(res, 2 * graph.h)


def test_cover_exists_exactly_when_connections_are_acyclic():
    for name, cyclic in (("north_south", False), ("ex3_3", False),
                         ("ex2_1", True), ("ex3_4", True)):
        _, graph, res = _built(name, 128)
        cd = connection_digraph(res)
        assert has_cycles(cd) is cyclic
        if cyclic:
            with pytest.raises(DegenerateCover):
                open_decomposition(res, 4 * graph.h)
        else:
            open_decomposition(res, 4 * graph.h)


def test_open_cover_identity_degenerates():
    _, graph, res = _built("identity", 64)
    with pytest.raises(DegenerateCover):
        open_decomposition(res, 4 * graph.h)
