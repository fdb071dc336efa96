"""Weighted transition graphs over cell discretizations.

One node per cell.  Edge weights price how far an orbit step falls from
landing in the target cell:

  w(i, j) = 0                      if f(interior of cell i) overlaps the
                                   interior of cell j in positive length,
  w(i, j) = d(f(center_i), center_j)   otherwise.

Zero-weight edges are exact dynamical transitions at this resolution;
priced edges are recorded for all targets within w_max of the image
point.  Both image intervals and distances are exact for PL systems, so
the enclosure is one-sided by construction: a real orbit step i -> j
always yields w(i, j) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .errors import InvalidDiscretization


@dataclass
class TransitionGraph:
    n: int
    src: np.ndarray
    dst: np.ndarray
    w: np.ndarray
    overlap: np.ndarray
    img: np.ndarray
    h: float
    slack: float
    w_max: float
    complex: object = None
    system: object = None
    _csr: object = field(default=None, repr=False)
    _csr_t: object = field(default=None, repr=False)

    def weight_csr(self):
        if self._csr is None:
            self._csr = csr_matrix((self.w, (self.src, self.dst)),
                                   shape=(self.n, self.n))
        return self._csr

    def weight_csr_t(self):
        if self._csr_t is None:
            self._csr_t = csr_matrix((self.w, (self.dst, self.src)),
                                     shape=(self.n, self.n))
        return self._csr_t

    def out_slices(self):
        """Edges grouped by source: order array and slice boundaries."""
        order = np.argsort(self.src, kind="stable")
        bounds = np.searchsorted(self.src[order], np.arange(self.n + 1))
        return order, bounds

    def in_slices(self):
        order = np.argsort(self.dst, kind="stable")
        bounds = np.searchsorted(self.dst[order], np.arange(self.n + 1))
        return order, bounds

    def with_weights(self, new_w):
        return TransitionGraph(self.n, self.src, self.dst,
                               np.asarray(new_w, dtype=float),
                               self.overlap, self.img, self.h, self.slack,
                               self.w_max, self.complex, self.system)


def build_transition_graph(system, w_max=None):
    """Exact transition graph of a PL system at its complex's resolution."""
    X = system.complex
    n = X.n_cells
    if n < 1:
        raise InvalidDiscretization("empty discretization")
    h = X.h
    if w_max is None:
        w_max = 8.0 * h
    slack = (system.lipschitz + 1.0) * h

    from .space import Point

    src_list = []
    dst_list = []
    w_list = []
    ov_list = []
    img = np.empty(n, dtype=np.int64)

    for i, cell in enumerate(X.cells):
        targets = {}
        for de, lo, hi in system.map_interval(cell.edge, cell.lo, cell.hi):
            for j in X.cells_overlapping(de, lo, hi):
                targets[j] = True
        fp = system.eval_map(Point(cell.edge, cell.center))
        img[i] = X.cell_of_point(fp)
        near_ids, near_d = X.cells_near(fp, w_max)
        for j, d in zip(near_ids.tolist(), near_d.tolist()):
            if j not in targets:
                targets[j] = d
        for j in sorted(targets):
            v = targets[j]
            if v is True:
                src_list.append(i)
                dst_list.append(j)
                w_list.append(0.0)
                ov_list.append(True)
            else:
                src_list.append(i)
                dst_list.append(j)
                w_list.append(v)
                ov_list.append(False)

    return TransitionGraph(
        n=n,
        src=np.array(src_list, dtype=np.int64),
        dst=np.array(dst_list, dtype=np.int64),
        w=np.array(w_list, dtype=float),
        overlap=np.array(ov_list, dtype=bool),
        img=img,
        h=h,
        slack=slack,
        w_max=float(w_max),
        complex=X,
        system=system,
    )


def epsilon_subgraph(graph, eps):
    """Adjacency of edges with weight strictly below eps, as boolean csr."""
    if eps <= 0.0:
        raise InvalidDiscretization("eps must be positive, got %g" % eps)
    if eps > graph.w_max + graph.h:
        raise InvalidDiscretization(
            "eps %g exceeds the priced horizon w_max=%g; rebuild the "
            "transition graph with a larger w_max" % (eps, graph.w_max))
    sel = graph.w < eps
    data = np.ones(int(sel.sum()), dtype=np.int8)
    return csr_matrix((data, (graph.src[sel], graph.dst[sel])),
                      shape=(graph.n, graph.n))


def zero_subgraph(graph):
    """Adjacency of the exact (overlap) transitions, as boolean csr."""
    sel = graph.overlap
    data = np.ones(int(sel.sum()), dtype=np.int8)
    return csr_matrix((data, (graph.src[sel], graph.dst[sel])),
                      shape=(graph.n, graph.n))
