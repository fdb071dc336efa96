"""Compact 1-dimensional metric complexes and their cell discretizations.

A complex is a finite set of vertices joined by edges of positive length.
Each edge carries an arc-length coordinate in [0, L]; self-loops are
allowed (a bare circle is a single loop edge).  Points are (edge, s)
pairs.  A discretization cuts every edge into closed intervals (cells);
all set-level computations downstream work on cell indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import InvalidDiscretization, InvalidPoint, InvalidSpace


class Point(NamedTuple):
    edge: int
    s: float


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    length: float


@dataclass(frozen=True)
class Cell:
    id: int
    edge: int
    lo: float
    hi: float

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def radius(self):
        return 0.5 * (self.hi - self.lo)


class MetricComplex:
    """Metric graph with a fixed cell decomposition of every edge."""

    def __init__(self, n_vertices, edges, cell_bounds):
        if n_vertices < 1:
            raise InvalidSpace("complex needs at least one vertex")
        if not edges:
            raise InvalidSpace("complex needs at least one edge")
        self.n_vertices = n_vertices
        self.edges = list(edges)
        for e in self.edges:
            if e.length <= 0:
                raise InvalidSpace("edge lengths must be positive")
            if not (0 <= e.u < n_vertices and 0 <= e.v < n_vertices):
                raise InvalidSpace("edge endpoint out of range")
        if len(cell_bounds) != len(self.edges):
            raise InvalidDiscretization("one bounds array per edge required")
        self.cell_bounds = []
        for k, b in enumerate(cell_bounds):
            b = np.asarray(b, dtype=float)
            L = self.edges[k].length
            if b.ndim != 1 or len(b) < 2:
                raise InvalidDiscretization("edge %d has no cells" % k)
            if abs(b[0]) > 1e-12 * L or abs(b[-1] - L) > 1e-12 * max(L, 1.0):
                raise InvalidDiscretization("bounds must span [0, length]")
            if np.any(np.diff(b) <= 0):
                raise InvalidDiscretization("cell bounds must increase")
            b = b.copy()
            b[0] = 0.0
            b[-1] = L
            self.cell_bounds.append(b)

        self.cells = []
        self._edge_cell_start = []
        cid = 0
        for k, b in enumerate(self.cell_bounds):
            self._edge_cell_start.append(cid)
            for i in range(len(b) - 1):
                self.cells.append(Cell(cid, k, float(b[i]), float(b[i + 1])))
                cid += 1
        self.n_cells = cid
        self.h = max(c.hi - c.lo for c in self.cells)
        self._edge_centers = [0.5 * (b[:-1] + b[1:]) for b in self.cell_bounds]

        self._vdist = self._vertex_distances()
        if not np.all(np.isfinite(self._vdist)):
            raise InvalidSpace("complex must be connected")

    def _vertex_distances(self):
        n = self.n_vertices
        if n == 1:
            return np.zeros((1, 1))
        # shortest parallel edge wins; csr_matrix would sum duplicates
        best = {}
        for e in self.edges:
            if e.u != e.v:
                key = (min(e.u, e.v), max(e.u, e.v))
                if e.length < best.get(key, np.inf):
                    best[key] = e.length
        rows = [k[0] for k in best]
        cols = [k[1] for k in best]
        vals = [best[k] for k in best]
        m = csr_matrix((vals, (rows, cols)), shape=(n, n))
        return dijkstra(m, directed=False)

    # -- points ---------------------------------------------------------

    def validate_point(self, p):
        if not (0 <= p.edge < len(self.edges)):
            raise InvalidPoint("edge index %r out of range" % (p.edge,))
        L = self.edges[p.edge].length
        if not (-1e-9 <= p.s <= L + 1e-9):
            raise InvalidPoint("coordinate %r outside [0, %g]" % (p.s, L))
        return Point(p.edge, min(max(p.s, 0.0), L))

    def cell_of_point(self, p):
        """Cell id containing p; boundary points go to the lower id."""
        p = self.validate_point(p)
        b = self.cell_bounds[p.edge]
        i = int(np.searchsorted(b, p.s, side="left")) - 1
        i = min(max(i, 0), len(b) - 2)
        return self._edge_cell_start[p.edge] + i

    def point_to_vertex_distances(self, p):
        """Distances from p to every vertex, as an array."""
        e = self.edges[p.edge]
        du = p.s + self._vdist[e.u]
        dv = (e.length - p.s) + self._vdist[e.v]
        return np.minimum(du, dv)

    def geodesic_distance(self, p, q):
        p = self.validate_point(p)
        q = self.validate_point(q)
        ep, eq = self.edges[p.edge], self.edges[q.edge]
        best = np.inf
        if p.edge == q.edge:
            best = abs(p.s - q.s)
        dp = (p.s, ep.length - p.s)
        dq = (q.s, eq.length - q.s)
        vp = (ep.u, ep.v)
        vq = (eq.u, eq.v)
        for a in range(2):
            for b in range(2):
                cand = dp[a] + self._vdist[vp[a], vq[b]] + dq[b]
                if cand < best:
                    best = cand
        return float(best)

    def distances_to_centers(self, p):
        """Geodesic distance from p to every cell center (vectorized)."""
        p = self.validate_point(p)
        dv = self.point_to_vertex_distances(p)
        out = np.empty(self.n_cells)
        for k, e in enumerate(self.edges):
            c = self._edge_centers[k]
            d = np.minimum(dv[e.u] + c, dv[e.v] + (e.length - c))
            if k == p.edge:
                d = np.minimum(d, np.abs(c - p.s))
            s0 = self._edge_cell_start[k]
            out[s0:s0 + len(c)] = d
        return out

    def cells_near(self, p, r):
        """Cell ids within distance r of p, with center distances.

        Only edges reachable within r are scanned, so this stays cheap
        for small radii.
        """
        p = self.validate_point(p)
        dv = self.point_to_vertex_distances(p)
        ids = []
        ds = []
        for k, e in enumerate(self.edges):
            du, dw = dv[e.u], dv[e.v]
            if k != p.edge and du >= r and dw >= r:
                continue
            c = self._edge_centers[k]
            d = np.minimum(du + c, dw + (e.length - c))
            if k == p.edge:
                d = np.minimum(d, np.abs(c - p.s))
            sel = np.nonzero(d <= r)[0]
            if len(sel):
                ids.append(sel + self._edge_cell_start[k])
                ds.append(d[sel])
        if not ids:
            return np.empty(0, dtype=np.int64), np.empty(0)
        return np.concatenate(ids), np.concatenate(ds)

    # -- balls ----------------------------------------------------------

    def ball_intervals(self, p, r):
        """Open metric ball around p as {edge: [(lo, hi), ...]}."""
        if r <= 0:
            return {}
        p = self.validate_point(p)
        dv = self.point_to_vertex_distances(p)
        out = {}
        for k, e in enumerate(self.edges):
            ivs = []
            ru = r - dv[e.u]
            if ru > 0:
                ivs.append((0.0, min(ru, e.length)))
            rv = r - dv[e.v]
            if rv > 0:
                ivs.append((max(e.length - rv, 0.0), e.length))
            if k == p.edge:
                ivs.append((max(p.s - r, 0.0), min(p.s + r, e.length)))
            ivs = merge_intervals(ivs)
            if ivs:
                out[k] = ivs
        return out

    def cells_overlapping(self, edge, lo, hi):
        """Ids of cells whose open interior meets the open interval (lo, hi)."""
        if hi <= lo:
            return []
        b = self.cell_bounds[edge]
        i0 = int(np.searchsorted(b, lo, side="right")) - 1
        i0 = max(i0, 0)
        i1 = int(np.searchsorted(b, hi, side="left"))
        i1 = min(i1, len(b) - 1)
        s0 = self._edge_cell_start[edge]
        return [s0 + i for i in range(i0, i1)]

    def cells_in_intervals(self, intervals):
        out = set()
        for edge, ivs in intervals.items():
            for lo, hi in ivs:
                out.update(self.cells_overlapping(edge, lo, hi))
        return out

    # -- structure ------------------------------------------------------

    def cells_at_vertex(self, v):
        """Cells with an endpoint lying on vertex v."""
        out = []
        for k, e in enumerate(self.edges):
            s0 = self._edge_cell_start[k]
            n = len(self.cell_bounds[k]) - 1
            if e.u == v:
                out.append(s0)
            if e.v == v:
                out.append(s0 + n - 1)
        return sorted(set(out))

    def adjacency_pairs(self):
        """Unordered pairs of cells sharing at least a boundary point."""
        pairs = set()
        for k in range(len(self.edges)):
            s0 = self._edge_cell_start[k]
            n = len(self.cell_bounds[k]) - 1
            for i in range(n - 1):
                pairs.add((s0 + i, s0 + i + 1))
        for v in range(self.n_vertices):
            ring = self.cells_at_vertex(v)
            for i in range(len(ring)):
                for j in range(i + 1, len(ring)):
                    pairs.add((ring[i], ring[j]))
        return pairs

    def refine(self, factor=2):
        """Split every cell into `factor` equal parts.

        New cell ids follow the old order: the children of old cell i on
        its edge occupy consecutive indices factor*i .. factor*i+factor-1
        within that edge.
        """
        factor = int(factor)
        if factor < 2:
            raise InvalidDiscretization("refinement factor must be >= 2")
        new_bounds = []
        for b in self.cell_bounds:
            parts = [np.linspace(b[i], b[i + 1], factor + 1)[:-1]
                     for i in range(len(b) - 1)]
            nb = np.concatenate(parts + [b[-1:]])
            new_bounds.append(nb)
        return MetricComplex(self.n_vertices, self.edges, new_bounds)

    def __eq__(self, other):
        if not isinstance(other, MetricComplex):
            return NotImplemented
        return (self.n_vertices == other.n_vertices
                and self.edges == other.edges
                and all(np.array_equal(a, b)
                        for a, b in zip(self.cell_bounds, other.cell_bounds)))

    def __hash__(self):
        return hash((self.n_vertices, tuple(self.edges), self.n_cells))


def merge_intervals(ivs):
    ivs = sorted((lo, hi) for lo, hi in ivs if hi > lo)
    out = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def cell_set_distances(X, cells):
    """Geodesic distance from every cell center to the nearest center in
    the given set, along the cell-adjacency graph."""
    n = X.n_cells
    rows, cols, vals = [], [], []
    for a, b in X.adjacency_pairs():
        ca, cb = X.cells[a], X.cells[b]
        d = X.geodesic_distance(Point(ca.edge, ca.center),
                                Point(cb.edge, cb.center))
        rows += [a, b]
        cols += [b, a]
        vals += [d, d]
    adj = csr_matrix((vals, (rows, cols)), shape=(n, n))
    out = dijkstra(adj, directed=False, indices=sorted(cells), min_only=True)
    return out


def hausdorff_cells(X, a, b):
    """Hausdorff distance between two cell-index sets, measured between
    cell centers along the complex."""
    a, b = set(a), set(b)
    if not a or not b:
        return 0.0 if a == b else float("inf")
    if a == b:
        return 0.0
    da = cell_set_distances(X, a)
    db = cell_set_distances(X, b)
    return float(max(db[sorted(a)].max(), da[sorted(b)].max()))


def _edge_cell_count(length, cells_per_unit, density=1):
    n = int(np.ceil(length * cells_per_unit * density - 1e-9))
    return max(n, 1)


def build_circle(circumference=1.0, n_cells=None, cells_per_unit=None):
    """Circle of the given circumference as a single loop edge."""
    if circumference <= 0:
        raise InvalidSpace("circumference must be positive")
    if n_cells is None:
        if cells_per_unit is None:
            raise InvalidDiscretization("pass n_cells or cells_per_unit")
        n_cells = _edge_cell_count(circumference, cells_per_unit)
    n_cells = int(n_cells)
    if n_cells < 3:
        raise InvalidDiscretization("a circle needs at least 3 cells")
    bounds = np.linspace(0.0, circumference, n_cells + 1)
    return MetricComplex(1, [Edge(0, 0, circumference)], [bounds])


def build_metric_graph(edge_specs, cells_per_unit, identifications=(),
                       edge_density=None):
    """Build a complex from edge records.

    edge_specs: iterable of (from, to, length) triples or dicts with keys
    from/to/length (vertex labels may be arbitrary hashables).
    identifications: pairs of vertex labels to glue together.
    edge_density: optional {edge_index: multiplier} refining single edges.
    """
    if cells_per_unit < 1:
        raise InvalidDiscretization("cells_per_unit must be >= 1")
    recs = []
    for spec in edge_specs:
        if isinstance(spec, dict):
            recs.append((spec["from"], spec["to"], float(spec["length"])))
        else:
            u, v, L = spec
            recs.append((u, v, float(L)))

    labels = {}
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v, _ in recs:
        for lab in (u, v):
            if lab not in parent:
                parent[lab] = lab
    for a, b in identifications:
        if a not in parent or b not in parent:
            raise InvalidSpace("identification names unknown vertex %r" % (a,))
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for lab in sorted(parent, key=repr):
        root = find(lab)
        if root not in labels:
            labels[root] = len(labels)

    edges = []
    bounds = []
    density = edge_density or {}
    for k, (u, v, L) in enumerate(recs):
        edges.append(Edge(labels[find(u)], labels[find(v)], L))
        n = _edge_cell_count(L, cells_per_unit, density.get(k, 1))
        bounds.append(np.linspace(0.0, L, n + 1))
    return MetricComplex(len(labels), edges, bounds)


def complex_from_spec(spec, cells_per_unit=None):
    """Complex from a JSON-style dict {edges: [...], identifications, cells_per_unit}."""
    if "edges" not in spec:
        raise InvalidSpace("complex spec needs an 'edges' list")
    cpu = cells_per_unit or spec.get("cells_per_unit")
    if cpu is None:
        raise InvalidDiscretization("complex spec needs cells_per_unit")
    edge_specs = sorted(spec["edges"], key=lambda e: e.get("id", 0))
    density = {}
    for k, e in enumerate(edge_specs):
        if "cells_per_unit" in e:
            density[k] = e["cells_per_unit"] / cpu
    return build_metric_graph(edge_specs, cpu,
                              identifications=spec.get("identifications", ()),
                              edge_density=density or None)


def load_complex(path, cells_per_unit=None):
    with open(path) as fh:
        return complex_from_spec(json.load(fh), cells_per_unit)
