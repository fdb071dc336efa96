"""Complete Lyapunov functions from a class partition.

The exact (zero-weight) transitions descend through a quotient: each
recurrence class is one node, every other cell is a singleton node, and
arcs are the exact transitions between distinct nodes.  A cycle of
quotient arcs normally sits inside one class, but it can thread several
classes through cells whose own return cost lies between tol and 2 tol;
such strongly connected bundles share one layer.  Layers come from a
longest-path layering of the condensation, and the function value of a
cell is 1 - layer/n_layers: constant on classes, never increasing along
exact transitions, strictly dropping by at least 1/n_layers along every
exact transition that leaves a bundle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InternalInvariantError
from .transition import zero_subgraph


@dataclass
class LyapunovFunction:
    values: np.ndarray
    layers: np.ndarray
    node_of: np.ndarray
    n_nodes: int
    n_layers: int
    tol_neutral: float


def complete_lyapunov(graph, classes, gr):
    """Layered Lyapunov function for the given class partition.

    ``classes`` lists the recurrence classes (disjoint cell tuples) and
    ``gr`` the recurrent cells they partition; cells outside ``gr``
    become singleton nodes.
    """
    n = graph.n
    node_of = np.full(n, -1, dtype=np.int64)
    for k, cls in enumerate(classes):
        node_of[list(cls)] = k
    nxt = len(classes)
    for i in range(n):
        if node_of[i] < 0:
            if i in gr:
                raise InternalInvariantError(
                    "recurrent cell %d missing from class partition" % i)
            node_of[i] = nxt
            nxt += 1
    n_nodes = nxt

    z = zero_subgraph(graph).tocoo()
    a = node_of[z.row]
    b = node_of[z.col]
    sel = a != b
    arcs = np.unique(np.stack([a[sel], b[sel]], axis=1), axis=0) \
        if sel.any() else np.empty((0, 2), dtype=np.int64)

    # bundle strongly connected quotient nodes so the layering sees a DAG
    if len(arcs):
        adj = csr_matrix((np.ones(len(arcs), dtype=np.int8),
                          (arcs[:, 0], arcs[:, 1])),
                         shape=(n_nodes, n_nodes))
        n_comp, comp = connected_components(adj, directed=True,
                                            connection="strong")
        carcs = np.stack([comp[arcs[:, 0]], comp[arcs[:, 1]]], axis=1)
        carcs = np.unique(carcs[carcs[:, 0] != carcs[:, 1]], axis=0)
    else:
        n_comp = n_nodes
        comp = np.arange(n_nodes)
        carcs = arcs

    succ_order = np.argsort(carcs[:, 0], kind="stable")
    carcs = carcs[succ_order]
    starts = np.searchsorted(carcs[:, 0], np.arange(n_comp + 1))
    indeg = np.bincount(carcs[:, 1], minlength=n_comp)

    layer = np.zeros(n_comp, dtype=np.int64)
    queue = list(np.nonzero(indeg == 0)[0])
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for e in range(starts[u], starts[u + 1]):
            v = carcs[e, 1]
            if layer[u] + 1 > layer[v]:
                layer[v] = layer[u] + 1
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    if seen != n_comp:
        raise InternalInvariantError(
            "condensation of the exact-transition quotient has a cycle")

    n_layers = int(layer.max()) + 1 if n_comp else 1
    layers = layer[comp[node_of]]
    values = 1.0 - layers / n_layers
    return LyapunovFunction(values=values, layers=layers, node_of=node_of,
                            n_nodes=n_nodes, n_layers=n_layers,
                            tol_neutral=1.0 / (2 * n_layers))


def neutral_set(lyap, graph):
    """Cells with an exact transition staying in their own layer band.

    Cells outside this set descend strictly along every exact
    transition, so the function witnesses their nonrecurrence.
    """
    z = zero_subgraph(graph).tocoo()
    drop = np.abs(lyap.values[z.col] - lyap.values[z.row])
    level = np.ones(graph.n)
    np.minimum.at(level, z.row, drop)
    return frozenset(np.nonzero(level <= lyap.tol_neutral)[0].tolist())


def strict_exists(result, lyap=None):
    """Whether the function strictly decreases somewhere, with a witness.

    Returns (False, None) when every cell is recurrent.  Otherwise the
    witness is a pair (cell, target): an exact transition along which
    the value drops by more than the neutrality tolerance.
    """
    lyap = lyap if lyap is not None else result.lyapunov
    graph = result.graph
    outside = sorted(set(range(graph.n)) - result.gr)
    if not outside:
        return False, None
    order, bounds = graph.out_slices()
    for i in outside:
        sl = order[bounds[i]:bounds[i + 1]]
        sl = sl[graph.overlap[sl]]
        if not len(sl):
            continue
        j = int(graph.dst[sl.min()])
        if lyap.values[j] < lyap.values[i] - lyap.tol_neutral:
            return True, (i, j)
    raise InternalInvariantError(
        "no strict descent found although nonrecurrent cells exist")
