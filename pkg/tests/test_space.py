"""Geometry of metric complexes: distances, balls, cells, refinement."""

import json

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainrec.errors import InvalidPoint, InvalidSpace
from chainrec.space import (Point, build_circle, build_metric_graph,
                            cell_set_distances, complex_from_spec,
                            hausdorff_cells, load_complex, merge_intervals)

THETA = [{"from": 0, "to": 1, "length": 1.0},
         {"from": 0, "to": 1, "length": 2.0},
         {"from": 1, "to": 0, "length": 3.0}]


def _theta():
    return build_metric_graph(THETA, cells_per_unit=8)


def _nx_distance(edges, p, q):
    """Shortest path length on the complex via networkx, splicing the two
    query points into the affected edges as extra nodes."""
    g = nx.MultiGraph()
    for k, e in enumerate(edges):
        u, v, L = e["from"], e["to"], e["length"]
        on_edge = sorted([(s, name) for name, (ek, s) in
                          (("p", p), ("q", q)) if ek == k])
        prev, at = u, 0.0
        for s, name in on_edge:
            g.add_edge(prev, name, weight=s - at)
            prev, at = name, s
        g.add_edge(prev, v, weight=L - at)
    return nx.shortest_path_length(g, "p", "q", weight="weight")


def test_circle_cells_tile_circumference():
    X = build_circle(2.0, cells_per_unit=8)
    assert X.n_cells == 16
    b = np.asarray(X.cell_bounds[0])
    assert b[0] == 0.0
    assert np.isclose(b[-1], 2.0)
    assert np.allclose(np.diff(b), 0.125)


def test_cell_bounds_tile_every_edge():
    X = _theta()
    for k, e in enumerate(X.edges):
        b = np.asarray(X.cell_bounds[k])
        assert b[0] == 0.0
        assert np.isclose(b[-1], e.length)
        assert (np.diff(b) > 0).all()
    # the flat cell list mirrors the per-edge bounds
    for c in X.cells:
        b = X.cell_bounds[c.edge]
        assert any(np.isclose(c.lo, lo) and np.isclose(c.hi, hi)
                   for lo, hi in zip(b[:-1], b[1:]))


def test_geodesic_matches_networkx_shortest_path():
    X = _theta()
    samples = [Point(0, 0.2), Point(0, 0.9), Point(1, 0.5), Point(1, 1.7),
               Point(2, 0.1), Point(2, 2.6)]
    for p in samples:
        for q in samples:
            want = 0.0 if p == q else _nx_distance(THETA, p, q)
            got = X.geodesic_distance(p, q)
            assert got == pytest.approx(want, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2), st.floats(0, 1), st.integers(0, 2), st.floats(0, 1),
       st.integers(0, 2), st.floats(0, 1))
def test_geodesic_triangle_inequality(e1, t1, e2, t2, e3, t3):
    X = _theta()
    pts = [Point(e, t * X.edges[e].length)
           for e, t in ((e1, t1), (e2, t2), (e3, t3))]
    a, b, c = pts
    dab = X.geodesic_distance(a, b)
    assert dab == pytest.approx(X.geodesic_distance(b, a), abs=1e-12)
    assert X.geodesic_distance(a, a) == 0.0
    assert X.geodesic_distance(a, c) <= dab + X.geodesic_distance(b, c) + 1e-9


def test_loop_distance_wraps():
    X = build_circle(2.0, cells_per_unit=8)
    assert X.geodesic_distance(Point(0, 0.1), Point(0, 1.9)) == \
        pytest.approx(0.2)


def test_refine_preserves_geometry():
    X = _theta()
    Y = X.refine(2)
    assert Y.n_cells == 2 * X.n_cells
    for p, q in [(Point(0, 0.2), Point(1, 0.5)), (Point(2, 2.9), Point(0, 0.0))]:
        assert Y.geodesic_distance(p, q) == \
            pytest.approx(X.geodesic_distance(p, q), abs=1e-12)
    for k in range(len(X.edges)):
        coarse = set(np.round(np.asarray(X.cell_bounds[k]), 9).tolist())
        fine = set(np.round(np.asarray(Y.cell_bounds[k]), 9).tolist())
        assert coarse <= fine


def test_validate_point_rejects_bad_coordinates():
    X = _theta()
    with pytest.raises(InvalidPoint):
        X.validate_point(Point(7, 0.1))
    with pytest.raises(InvalidPoint):
        X.validate_point(Point(0, -0.1))
    with pytest.raises(InvalidPoint):
        X.validate_point(Point(0, 1.5))


def test_cells_near_matches_center_distance_scan():
    X = _theta()
    for p, r in [(Point(0, 0.05), 0.2), (Point(1, 1.0), 0.4),
                 (Point(2, 2.95), 0.3)]:
        ids, ds = X.cells_near(p, r)
        want = [c.id for c in X.cells
                if X.geodesic_distance(Point(c.edge, c.center), p) <= r]
        assert sorted(ids.tolist()) == want
        for i, d in zip(ids, ds):
            c = X.cells[i]
            assert d == pytest.approx(
                X.geodesic_distance(Point(c.edge, c.center), p), abs=1e-9)


def test_ball_intervals_agree_with_pointwise_distance():
    X = _theta()
    p, r = Point(0, 0.05), 0.35
    ball = X.ball_intervals(p, r)
    ends = [v for ivs in ball.values() for iv in ivs for v in iv]
    for k, e in enumerate(X.edges):
        for s in np.linspace(0.0, e.length, 61):
            if any(abs(s - v) < 1e-9 for v in ends):
                continue
            inside = any(lo < s < hi for lo, hi in ball.get(k, []))
            d = X.geodesic_distance(p, Point(k, float(s)))
            if abs(d - r) > 1e-9:
                assert inside == (d < r)


def test_zero_length_edge_rejected():
    with pytest.raises(InvalidSpace):
        build_metric_graph([{"from": 0, "to": 1, "length": 0.0}], 8)


def test_merge_intervals_collapses_overlaps():
    assert merge_intervals([(0.0, 0.5), (0.4, 0.7), (0.9, 1.0), (0.2, 0.3)]) \
        == [(0.0, 0.7), (0.9, 1.0)]
    assert merge_intervals([]) == []
    assert merge_intervals([(0.3, 0.3)]) == []


def test_identifications_glue_vertices():
    spec = [{"from": 0, "to": 1, "length": 1.0},
            {"from": 2, "to": 3, "length": 1.0}]
    X = build_metric_graph(spec, 8, identifications=((1, 2),))
    assert X.n_vertices == 3
    # the glued point joins the two edges end to start
    assert X.geodesic_distance(Point(0, 0.9), Point(1, 0.1)) == \
        pytest.approx(0.2)


def test_cell_set_distances_telescopes_along_edges():
    X = build_circle(1.0, cells_per_unit=16)
    c = X.cell_of_point(Point(0, 0.3))
    dist = cell_set_distances(X, {c})
    assert dist[c] == 0.0
    center = X.cells[c].center
    for j in range(X.n_cells):
        want = X.geodesic_distance(Point(0, X.cells[j].center),
                                   Point(0, center))
        assert dist[j] == pytest.approx(want, abs=1e-9)


def test_hausdorff_cells_basics():
    X = build_circle(1.0, cells_per_unit=16)
    a = {X.cell_of_point(Point(0, 0.0))}
    b = {X.cell_of_point(Point(0, 0.5))}
    assert hausdorff_cells(X, a, a) == 0.0
    d = hausdorff_cells(X, a, b)
    assert d == pytest.approx(0.5, abs=1.0 / 16)
    assert d == hausdorff_cells(X, b, a)


def test_complex_spec_round_trip(tmp_path):
    spec = {"edges": THETA, "cells_per_unit": 8}
    X = complex_from_spec(spec)
    path = tmp_path / "theta.json"
    path.write_text(json.dumps(spec))
    Y = load_complex(str(path))
    assert X.n_cells == Y.n_cells
    assert X.geodesic_distance(Point(0, 0.2), Point(1, 0.5)) == \
        Y.geodesic_distance(Point(0, 0.2), Point(1, 0.5))
