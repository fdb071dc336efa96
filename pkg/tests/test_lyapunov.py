"""Complete Lyapunov functions, neutral sets, and strict descent."""

import functools

import numpy as np
import pytest

from chainrec import (
    MapPiece,
    Point,
    SystemSpec,
    build_circle,
    build_transition_graph,
    generalized_recurrent,
    make_example,
    neutral_set,
    strict_exists,
)

EXAMPLES = ("ex2_1", "ex3_1", "ex3_2", "ex3_3", "ex3_4",
            "identity", "north_south", "rotation")


@functools.lru_cache(maxsize=None)
def _built(name, cpu):
    system = make_example(name, cells_per_unit=cpu)
    graph = build_transition_graph(system)
    return system, graph, generalized_recurrent(graph)


def _zero_edges(graph):
    return zip(graph.src[graph.overlap].tolist(),
               graph.dst[graph.overlap].tolist())


def _value_at(system, res, s):
    i = system.complex.cell_of_point(Point(0, s))
    return res.lyapunov.values[i]


@pytest.mark.parametrize("name", EXAMPLES)
def test_nonincreasing_along_every_exact_edge(name):
    _, graph, res = _built(name, 64)
    v = res.lyapunov.values
    for i, j in _zero_edges(graph):
        assert v[j] <= v[i] + 1e-12


@pytest.mark.parametrize("name", EXAMPLES)
def test_constant_on_each_class(name):
    _, _, res = _built(name, 64)
    v = res.lyapunov.values
    for cls in res.classes:
        vals = v[list(cls)]
        assert vals.max() == vals.min()


@pytest.mark.parametrize("name", EXAMPLES)
def test_values_span_unit_range(name):
    _, _, res = _built(name, 64)
    v = res.lyapunov.values
    assert v.max() == 1.0
    assert v.min() > 0.0


def test_identity_function_is_constant():
    _, _, res = _built("identity", 32)
    assert np.unique(res.lyapunov.values).size == 1


def test_north_south_descends_from_repeller_to_attractor():
    system, _, res = _built("north_south", 128)
    samples = [_value_at(system, res, s) for s in (0.0, 0.25, 0.5, 0.75, 1.0)]
    for higher, lower in zip(samples, samples[1:]):
        assert higher > lower


def test_ex2_1_constant_inside_interval_descending_on_arc():
    system, _, res = _built("ex2_1", 64)
    X = system.complex
    v = res.lyapunov.values
    inside = [i for i, c in enumerate(X.cells)
              if 0.05 <= c.lo and c.hi <= 0.95]
    assert inside
    assert all(v[i] == 1.0 for i in inside)
    assert _value_at(system, res, 2.0) > _value_at(system, res, 4.0)


def test_neutral_set_of_constant_function_is_everything():
    _, graph, res = _built("identity", 32)
    assert neutral_set(res.lyapunov, graph) == frozenset(range(graph.n))


def test_neutral_set_north_south_is_the_fixed_clusters():
    _, graph, res = _built("north_south", 128)
    assert neutral_set(res.lyapunov, graph) == res.gr


@pytest.mark.parametrize("name", EXAMPLES)
def test_neutral_set_covers_recurrent_cells(name):
    _, graph, res = _built(name, 64)
    assert neutral_set(res.lyapunov, graph) >= res.gr


def test_strict_exists_false_when_everything_recurrent():
    for name in ("identity", "rotation"):
        _, _, res = _built(name, 32)
        assert strict_exists(res) == (False, None)


def test_strict_exists_witness_on_ex2_1_arc():
    system, graph, res = _built("ex2_1", 64)
    strict, pair = strict_exists(res)
    assert strict
    i, j = pair
    assert i not in res.gr
    c = system.complex.cells[i]
    assert not (0.0 <= c.lo and c.hi <= 1.0)
    v = res.lyapunov.values
    assert v[j] < v[i] - res.lyapunov.tol_neutral
    assert (i, j) in set(_zero_edges(graph))


def test_strict_exists_on_ex3_2():
    _, _, res = _built("ex3_2", 64)
    strict, pair = strict_exists(res)
    assert strict
    assert pair[0] not in res.gr


def _shifted_north_south():
    """North-south map conjugated by the half-turn rotation."""
    X = build_circle(2.0, cells_per_unit=128)
    knot = 1.5 + 0.5 / 1.95
    pieces = [
        MapPiece(0, 0.0, 0.5, 0, 0.475, 0.5),
        MapPiece(0, 0.5, 1.0, 0, 0.5, 0.525),
        MapPiece(0, 1.0, 1.5, 0, 0.525, 1.5),
        MapPiece(0, 1.5, knot, 0, 1.5, 2.0),
        MapPiece(0, knot, 2.0, 0, 0.0, 0.475),
    ]
    return SystemSpec(X, pieces, label="shifted")


def test_conjugate_image_of_recurrent_set_matches():
    f_sys, _, f_res = _built("north_south", 128)
    g_sys = _shifted_north_south()
    g_res = generalized_recurrent(build_transition_graph(g_sys))
    X = f_sys.complex
    h = X.h
    targets = [Point(0, X.cells[j].center) for j in f_res.gr]
    for i in g_res.gr:
        moved = Point(0, (g_sys.complex.cells[i].center + 0.5) % 2.0)
        d = min(X.geodesic_distance(moved, t) for t in targets)
        assert d <= 2.0 * h
