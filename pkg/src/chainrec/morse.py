"""Isolated components of the recurrent set and how orbits connect them.

Components are recurrence classes merged when their cells touch in the
complex.  The connection digraph records which components feed which
through exact transition paths, plus "stray cycles": paths that leave a
fattened component and return to it through nonrecurrent territory.  A
decomposition with no stray cycles and an acyclic digraph certifies the
gradient-like picture; cycles flag recirculation the recurrent set does
not account for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateCover, InternalInvariantError, \
    InvalidDiscretization
from .space import Point
from .transition import zero_subgraph


@dataclass
class ConnectionDigraph:
    components: list
    arcs: frozenset
    one_cycles: dict


@dataclass
class OpenCover:
    regions: list
    cores: list
    centers: list
    eps: float


def _union_find(n):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    return find, union


def decompose(result):
    """Recurrence classes of the final partition, merged whenever two
    classes contain adjacent cells."""
    classes = result.classes
    if not classes:
        return []
    X = result.graph.complex
    cls_of = {}
    for k, cls in enumerate(classes):
        for c in cls:
            cls_of[c] = k
    find, union = _union_find(len(classes))
    for a, b in X.adjacency_pairs():
        ka, kb = cls_of.get(a), cls_of.get(b)
        if ka is not None and kb is not None and ka != kb:
            union(ka, kb)
    groups = {}
    for k, cls in enumerate(classes):
        groups.setdefault(find(k), []).extend(cls)
    return [tuple(sorted(g)) for _, g in sorted(
        (min(g), g) for g in groups.values())]


def _neighbors(X, n):
    nbr = [[] for _ in range(n)]
    for a, b in X.adjacency_pairs():
        nbr[a].append(b)
        nbr[b].append(a)
    return nbr


def _closure(indptr, indices, seeds, n):
    seen = np.zeros(n, dtype=bool)
    stack = [int(s) for s in seeds]
    seen[stack] = True
    while stack:
        u = stack.pop()
        for v in indices[indptr[u]:indptr[u + 1]]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return seen


def connection_digraph(result, components=None):
    """Arcs between fattened components along exact transitions, and
    stray cycles through each component's complement."""
    graph = result.graph
    X = graph.complex
    n = graph.n
    if components is None:
        components = decompose(result)
    nbr = _neighbors(X, n)
    z = zero_subgraph(graph).tocsr()
    zt = z.T.tocsr()

    fats = []
    for comp in components:
        fat = set(comp)
        for c in comp:
            fat.update(nbr[c])
        fats.append(fat)

    in_gr = np.zeros(n, dtype=bool)
    in_gr[sorted(result.gr)] = True

    arcs = set()
    one_cycles = {}
    for i, fat in enumerate(fats):
        fwd = _closure(z.indptr, z.indices, fat, n)
        bwd = _closure(zt.indptr, zt.indices, fat, n)
        for j, other in enumerate(fats):
            if j == i:
                continue
            if any(fwd[c] for c in other):
                arcs.add((i, j))
        fat_mask = np.zeros(n, dtype=bool)
        fat_mask[sorted(fat)] = True
        stray = fwd & bwd & ~fat_mask & ~in_gr
        if stray.any():
            one_cycles[i] = int(np.nonzero(stray)[0][0])
    return ConnectionDigraph(components=components, arcs=frozenset(arcs),
                             one_cycles=one_cycles)


def has_cycles(cd):
    """True when the connection structure recirculates: a stray cycle,
    or a directed cycle among the component arcs."""
    if cd.one_cycles:
        return True
    m = len(cd.components)
    if not cd.arcs or m == 0:
        return False
    rows = [a for a, _ in cd.arcs]
    cols = [b for _, b in cd.arcs]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
    _, labels = connected_components(adj, directed=True, connection="strong")
    counts = np.bincount(labels)
    return bool((counts >= 2).any())


def open_decomposition(result, eps):
    """Cover the recurrent set by eps-balls and saturate into disjoint
    open neighborhoods, merging any two that orbits connect both ways."""
    graph = result.graph
    X = graph.complex
    n = graph.n
    if eps <= 2 * graph.h:
        raise InvalidDiscretization(
            "cover radius %g must exceed twice the cell scale %g"
            % (eps, graph.h))
    gr_cells = sorted(result.gr)
    z = zero_subgraph(graph).tocsr()
    zt = z.T.tocsr()

    centers = []
    balls = []
    uncovered = set(gr_cells)
    while uncovered:
        c = min(uncovered)
        cell = X.cells[c]
        ids, _ = X.cells_near(Point(cell.edge, cell.center), eps)
        ball = set(ids.tolist())
        ball.add(c)
        centers.append(c)
        balls.append(ball)
        uncovered -= ball

    # overlapping or touching balls are one region
    find, union = _union_find(len(balls))
    owner = {}
    for bi, ball in enumerate(balls):
        for c in ball:
            owner.setdefault(c, []).append(bi)
    for c, bis in owner.items():
        for other in bis[1:]:
            union(bis[0], other)
    nbr = _neighbors(X, n)
    for c, bis in owner.items():
        for d in nbr[c]:
            for other in owner.get(d, ()):
                union(bis[0], other)

    regions = {}
    for bi, ball in enumerate(balls):
        regions.setdefault(find(bi), set()).update(ball)
    region_list = sorted(regions.values(), key=min)

    # merge regions that reach each other both ways, until stable
    while True:
        m = len(region_list)
        if m <= 1:
            break
        fwd = [_closure(z.indptr, z.indices, r, n) for r in region_list]
        rows, cols = [], []
        for i in range(m):
            for j in range(m):
                if i != j and any(fwd[i][c] for c in region_list[j]):
                    rows.append(i)
                    cols.append(j)
        if not rows:
            break
        adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
        ncomp, labels = connected_components(adj, directed=True,
                                             connection="strong")
        if ncomp == m:
            break
        merged = {}
        for i, lab in enumerate(labels):
            merged.setdefault(int(lab), set()).update(region_list[i])
        region_list = sorted(merged.values(), key=min)

    cores = [tuple(sorted(r)) for r in region_list]
    sat = []
    for r in region_list:
        fwd = _closure(z.indptr, z.indices, r, n)
        bwd = _closure(zt.indptr, zt.indices, r, n)
        sat.append(fwd & bwd)
    for i in range(len(sat)):
        for j in range(i + 1, len(sat)):
            if (sat[i] & sat[j]).any():
                raise InternalInvariantError(
                    "saturated neighborhoods %d and %d intersect" % (i, j))
    if len(sat) == 1 and sat[0].all():
        raise DegenerateCover(
            "cover collapses to one neighborhood filling the whole space")
    region_sets = [tuple(np.nonzero(s)[0].tolist()) for s in sat]
    return OpenCover(regions=region_sets, cores=cores, centers=centers,
                     eps=eps)
