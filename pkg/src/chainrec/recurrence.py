"""Recurrence hierarchies on transition graphs.

Four nested cell sets, computed on one weighted graph:

  nonwandering      cells on cycles of exact (zero-weight) transitions
  generalized       fixpoint of iterated re-metrization (see below)
  strong chain      cells on cycles of total weight <= tol
  chain recurrent   cells on cycles using only hops of weight < eps

The defaults tol = 1.2 h and eps = 1.25 h satisfy h < tol < eps, which
makes the chain nonwandering <= generalized <= strong <= chain-recurrent
structural: zero-cycles cost nothing, strong cycles stay within tol, and
every hop of a tol-cycle is below eps.

The generalized set iterates: classes of mutually tol-reachable cells
are collapsed, a layered Lyapunov function is built on the quotient of
exact transitions, and every inexact hop is surcharged by the layer gap
it skips.  Weights accumulate, so the surviving set shrinks monotonely;
cycles that lean on layer-skipping hops die within a few rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import InternalInvariantError, InvalidDiscretization
from .lyapunov import complete_lyapunov
from .transition import epsilon_subgraph, zero_subgraph

DEFAULT_TOL_FACTOR = 1.2
DEFAULT_EPS_FACTOR = 1.25
_EQ_SLOP = 1e-12


@dataclass
class RecurrenceOptions:
    tol: float | None = None
    eps: float | None = None
    max_rounds: int = 25


@dataclass
class GRResult:
    nw: frozenset
    gr: frozenset
    scr: frozenset
    cr: frozenset
    tol: float
    eps: float
    iterations: int
    stable: bool
    lyapunov_trace: list
    classes: list
    lyapunov: object
    graph: object
    weights_final: np.ndarray


class BarrierMatrix:
    """Lazy min-cost path/cycle queries over a transition graph.

    Entry (i, j) is the cheapest total weight of a path from i to j using
    at least one edge; the diagonal is the cheapest cycle through i.
    """

    def __init__(self, graph):
        self.graph = graph

    def rows(self, indices, limit):
        """Bounded shortest-path distances from the given cells."""
        return dijkstra(self.graph.weight_csr(), directed=True,
                        indices=indices, limit=limit)

    def rows_reverse(self, indices, limit):
        return dijkstra(self.graph.weight_csr_t(), directed=True,
                        indices=indices, limit=limit)

    def full(self):
        g = self.graph
        if g.n > 4096:
            raise InvalidDiscretization(
                "dense barrier limited to 4096 cells; use rows/min_cycles")
        D = dijkstra(g.weight_csr(), directed=True)
        L = np.full((g.n, g.n), np.inf)
        order, bounds = g.out_slices()
        for i in range(g.n):
            sl = order[bounds[i]:bounds[i + 1]]
            if len(sl):
                L[i] = np.min(g.w[sl][:, None] + D[g.dst[sl]], axis=0)
        return L

    def min_cycles(self, limit, candidates=None, chunk=256):
        """Cheapest cycle through each candidate cell, inf beyond limit."""
        g = self.graph
        if candidates is None:
            candidates = np.arange(g.n)
        candidates = np.asarray(candidates, dtype=np.int64)
        out = np.full(g.n, np.inf)
        in_order, in_bounds = g.in_slices()
        lim = limit * (1 + 1e-12) + 1e-15
        for k0 in range(0, len(candidates), chunk):
            idx = candidates[k0:k0 + chunk]
            if not len(idx):
                continue
            rows = dijkstra(g.weight_csr(), directed=True, indices=idx,
                            limit=lim)
            for r, i in enumerate(idx):
                sl = in_order[in_bounds[i]:in_bounds[i + 1]]
                if len(sl):
                    out[i] = np.min(rows[r, g.src[sl]] + g.w[sl])
        return out


def barrier(graph):
    return BarrierMatrix(graph)


def _cyclic_mask(adj, n, self_loops):
    """Cells on cycles of a boolean adjacency: nontrivial SCC or self-loop."""
    mask = np.zeros(n, dtype=bool)
    if adj.nnz:
        _, labels = connected_components(adj, directed=True,
                                         connection="strong")
        counts = np.bincount(labels)
        mask = counts[labels] >= 2
    mask[self_loops] = True
    return mask


def nonwandering(graph):
    """Cells on cycles made of exact transitions only."""
    self0 = graph.src[(graph.src == graph.dst) & graph.overlap]
    mask = _cyclic_mask(zero_subgraph(graph), graph.n, self0)
    return frozenset(np.nonzero(mask)[0].tolist())


def chain_recurrent(graph, eps):
    """Cells on cycles whose hops all cost strictly less than eps."""
    sel = (graph.src == graph.dst) & (graph.w < eps)
    mask = _cyclic_mask(epsilon_subgraph(graph, eps), graph.n,
                        graph.src[sel])
    return frozenset(np.nonzero(mask)[0].tolist())


def _zero_cycle_mask(graph):
    self0 = graph.src[(graph.src == graph.dst) & graph.overlap]
    return _cyclic_mask(zero_subgraph(graph), graph.n, self0)


def strong_chain_recurrent(graph, tol):
    """Cells on cycles of total weight at most tol."""
    mask = _zero_cycle_mask(graph)
    rest = np.nonzero(~mask)[0]
    if len(rest):
        cyc = BarrierMatrix(graph).min_cycles(tol, candidates=rest)
        mask = mask | (cyc <= tol + _EQ_SLOP)
    return frozenset(np.nonzero(mask)[0].tolist())


def mather_classes(b, tol, scr=None):
    """Partition of the strong chain recurrent set into classes of cells
    whose round-trip barrier stays within tol (transitively closed)."""
    graph = b.graph
    if scr is None:
        scr = strong_chain_recurrent(graph, tol)
    scr_arr = np.array(sorted(scr), dtype=np.int64)
    if not len(scr_arr):
        return []
    in_scr = np.zeros(graph.n, dtype=bool)
    in_scr[scr_arr] = True

    parent = {int(i): int(i) for i in scr_arr}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b_):
        ra, rb = find(a), find(b_)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    # cells in one strongly connected component of the exact transitions
    # are mutually reachable at zero cost: collapse them first and run
    # the paired sweeps from one representative each
    z = zero_subgraph(graph)
    if z.nnz:
        _, labels = connected_components(z, directed=True,
                                         connection="strong")
    else:
        labels = np.arange(graph.n)
    reps = {}
    for i in scr_arr.tolist():
        lab = int(labels[i])
        if lab in reps:
            union(reps[lab], i)
        else:
            reps[lab] = i
    rep_list = np.array(sorted(reps.values()), dtype=np.int64)

    lim = tol * (1 + 1e-12) + 1e-15
    chunk = 256
    bm = BarrierMatrix(graph)
    for k0 in range(0, len(rep_list), chunk):
        idx = rep_list[k0:k0 + chunk]
        fwd = bm.rows(idx, lim)
        rev = bm.rows_reverse(idx, lim)
        for r, i in enumerate(idx.tolist()):
            total = fwd[r, scr_arr] + rev[r, scr_arr]
            close = scr_arr[total <= tol + _EQ_SLOP]
            for j in close.tolist():
                union(i, j)

    groups = {}
    for i in scr_arr.tolist():
        groups.setdefault(find(i), []).append(i)
    return [tuple(sorted(g)) for _, g in sorted(groups.items())]


def _overlap_groups(graph):
    sel = np.nonzero(graph.overlap)[0]
    order = sel[np.argsort(graph.src[sel], kind="stable")]
    bounds = np.searchsorted(graph.src[order], np.arange(graph.n + 1))
    return order, bounds


def _surcharges(graph, layers, ov_order, ov_bounds):
    """Per-edge surcharge h * min_{m in M_i} |layer(m) - layer(j)| for
    inexact edges (i, j); exact edges are never surcharged."""
    s = np.zeros(len(graph.w))
    lay = layers
    nonov = np.nonzero(~graph.overlap)[0]
    # group inexact edges by source so each source's exact-target layers
    # are sorted once
    order = nonov[np.argsort(graph.src[nonov], kind="stable")]
    pos = 0
    while pos < len(order):
        i = int(graph.src[order[pos]])
        end = pos
        while end < len(order) and graph.src[order[end]] == i:
            end += 1
        edges_i = order[pos:end]
        pos = end
        msl = ov_order[ov_bounds[i]:ov_bounds[i + 1]]
        mlay = np.unique(lay[graph.dst[msl]])
        lj = lay[graph.dst[edges_i]]
        if not len(mlay):
            raise InternalInvariantError("cell %d has no exact transition" % i)
        k = np.searchsorted(mlay, lj)
        k0 = np.clip(k - 1, 0, len(mlay) - 1)
        k1 = np.clip(k, 0, len(mlay) - 1)
        gap = np.minimum(np.abs(mlay[k0] - lj), np.abs(mlay[k1] - lj))
        s[edges_i] = graph.h * gap
    return s


def generalized_recurrent(graph, opts=None):
    """Iterated re-metrization fixpoint, with the other three sets."""
    opts = opts or RecurrenceOptions()
    h = graph.h
    tol = opts.tol if opts.tol is not None else DEFAULT_TOL_FACTOR * h
    eps = opts.eps if opts.eps is not None else DEFAULT_EPS_FACTOR * h
    if not (0 < tol < eps):
        raise InvalidDiscretization("need 0 < tol < eps (got %g, %g)"
                                    % (tol, eps))

    nw = nonwandering(graph)
    cr = chain_recurrent(graph, eps)
    scr = strong_chain_recurrent(graph, tol)
    ov_order, ov_bounds = _overlap_groups(graph)

    w_r = graph.w.copy()
    S = scr
    trace = []
    classes = []
    lyap = None
    stable = False
    iterations = 0
    for _ in range(opts.max_rounds):
        iterations += 1
        g_r = graph.with_weights(w_r)
        classes = mather_classes(BarrierMatrix(g_r), tol, scr=S)
        lyap = complete_lyapunov(graph, classes, S)
        trace.append(lyap.values)
        sur = _surcharges(graph, lyap.layers, ov_order, ov_bounds)
        w_r = w_r + sur
        S_next = strong_chain_recurrent(graph.with_weights(w_r), tol) & S
        if S_next == S:
            # check the limit: cut every edge that is still being
            # surcharged and see whether the set survives unchanged
            w_cut = w_r.copy()
            w_cut[sur > 0] = 2 * tol + 1
            S_lim = strong_chain_recurrent(graph.with_weights(w_cut), tol) & S
            if S_lim == S:
                stable = True
                break
        S = S_next
    gr = S

    # report classes and Lyapunov data for the final accumulated weights
    classes = mather_classes(BarrierMatrix(graph.with_weights(w_r)), tol,
                             scr=gr)
    lyap = complete_lyapunov(graph, classes, gr)

    if not (nw <= gr <= scr <= cr):
        raise InternalInvariantError("recurrence chain inclusion violated")
    return GRResult(nw=nw, gr=gr, scr=scr, cr=cr, tol=tol, eps=eps,
                    iterations=iterations, stable=stable,
                    lyapunov_trace=trace, classes=classes, lyapunov=lyap,
                    graph=graph, weights_final=w_r)
