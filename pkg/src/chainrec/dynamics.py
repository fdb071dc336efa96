"""Piecewise-linear self-homeomorphisms of metric complexes.

A system is a finite list of affine pieces: piece (e, s0, s1, e', t0, t1)
maps the coordinate interval [s0, s1] of edge e affinely onto the target
interval between t0 and t1 on edge e' (t0 > t1 means the piece reverses
orientation).  Pieces must tile every source edge and their images must
tile every target edge, which makes the map a homeomorphism.

All built-in examples and all perturbation kinds produce exact PL data,
so images of intervals and C0 distances are computed exactly rather than
by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, InvalidPerturbation, InvalidSpace,
                     MismatchedComplexes)
from .space import Point, build_circle, build_metric_graph, merge_intervals

_TILE_TOL = 1e-9


@dataclass(frozen=True)
class MapPiece:
    src_edge: int
    s0: float
    s1: float
    dst_edge: int
    t0: float
    t1: float

    @property
    def slope(self):
        return (self.t1 - self.t0) / (self.s1 - self.s0)

    def eval(self, s):
        if s <= self.s0:
            return self.t0
        if s >= self.s1:
            return self.t1
        return self.t0 + (s - self.s0) * self.slope


class SystemSpec:
    """A PL self-homeomorphism of a fixed MetricComplex."""

    def __init__(self, complex_, pieces, label="system", meta=None):
        self.complex = complex_
        self.label = label
        self.meta = meta or {}
        by_edge = {}
        for p in pieces:
            if p.s1 <= p.s0:
                raise InvalidSpace("piece with empty source interval")
            if p.t1 == p.t0:
                raise InvalidSpace("piece with constant image")
            by_edge.setdefault(p.src_edge, []).append(p)

        self.pieces_by_edge = []
        for k, e in enumerate(complex_.edges):
            ps = sorted(by_edge.get(k, []), key=lambda p: p.s0)
            if not ps:
                raise InvalidSpace("edge %d has no map pieces" % k)
            if abs(ps[0].s0) > _TILE_TOL or abs(ps[-1].s1 - e.length) > _TILE_TOL:
                raise InvalidSpace("pieces must span edge %d" % k)
            for a, b in zip(ps, ps[1:]):
                if abs(a.s1 - b.s0) > _TILE_TOL:
                    raise InvalidSpace("pieces must tile edge %d" % k)
            for p in ps:
                Ld = complex_.edges[p.dst_edge].length
                if min(p.t0, p.t1) < -_TILE_TOL or max(p.t0, p.t1) > Ld + _TILE_TOL:
                    raise InvalidSpace("piece image leaves its target edge")
            self.pieces_by_edge.append(ps)

        # group inverse intervals per target edge; the map is a
        # homeomorphism iff they tile every edge without overlap
        inv = [[] for _ in complex_.edges]
        for ps in self.pieces_by_edge:
            for p in ps:
                lo, hi = min(p.t0, p.t1), max(p.t0, p.t1)
                inv[p.dst_edge].append((lo, hi, p))
        self.inverse_by_edge = []
        for k, e in enumerate(complex_.edges):
            ivs = sorted(inv[k], key=lambda r: (r[0], r[1]))
            if not ivs:
                raise InvalidSpace("map misses edge %d entirely" % k)
            if abs(ivs[0][0]) > _TILE_TOL or abs(ivs[-1][1] - e.length) > _TILE_TOL:
                raise InvalidSpace("images do not cover edge %d" % k)
            for (alo, ahi, _), (blo, bhi, _) in zip(ivs, ivs[1:]):
                if abs(ahi - blo) > _TILE_TOL:
                    raise InvalidSpace("images overlap or miss part of edge %d" % k)
            self.inverse_by_edge.append(ivs)

        self._starts = [np.array([p.s0 for p in ps])
                        for ps in self.pieces_by_edge]
        self._inv_starts = [np.array([r[0] for r in rs])
                            for rs in self.inverse_by_edge]
        self.edge_lipschitz = [max(abs(p.slope) for p in ps)
                               for ps in self.pieces_by_edge]
        self.lipschitz = max(self.edge_lipschitz)

    @property
    def pieces(self):
        return [p for ps in self.pieces_by_edge for p in ps]

    def _piece_at(self, edge, s):
        i = int(np.searchsorted(self._starts[edge], s, side="right")) - 1
        i = min(max(i, 0), len(self.pieces_by_edge[edge]) - 1)
        return self.pieces_by_edge[edge][i]

    def eval_map(self, p):
        p = self.complex.validate_point(p)
        piece = self._piece_at(p.edge, p.s)
        return Point(piece.dst_edge, float(piece.eval(p.s)))

    def eval_inverse(self, q):
        q = self.complex.validate_point(q)
        rs = self.inverse_by_edge[q.edge]
        i = int(np.searchsorted(self._inv_starts[q.edge], q.s, side="right")) - 1
        i = min(max(i, 0), len(rs) - 1)
        lo, hi, piece = rs[i]
        t = min(max(q.s, lo), hi)
        if t == piece.t0:
            s = piece.s0
        elif t == piece.t1:
            s = piece.s1
        else:
            s = piece.s0 + (t - piece.t0) / piece.slope
        return Point(piece.src_edge, float(min(max(s, piece.s0), piece.s1)))

    def map_interval(self, edge, a, b):
        """Exact image of [a, b] on an edge, as (edge, lo, hi) triples."""
        if b <= a:
            return []
        out = []
        for p in self.pieces_by_edge[edge]:
            lo, hi = max(a, p.s0), min(b, p.s1)
            if hi <= lo:
                continue
            ta, tb = p.eval(lo), p.eval(hi)
            out.append((p.dst_edge, min(ta, tb), max(ta, tb)))
        return out

    def map_region(self, region):
        """Exact image of {edge: [(lo, hi), ...]} as another region."""
        acc = {}
        for edge, ivs in region.items():
            for lo, hi in ivs:
                for de, tlo, thi in self.map_interval(edge, lo, hi):
                    acc.setdefault(de, []).append((tlo, thi))
        return {e: merge_intervals(ivs) for e, ivs in acc.items()}


def c0_distance(f, g):
    """Exact sup-distance max_x d(f(x), g(x)) for two PL systems."""
    if f.complex is not g.complex and f.complex != g.complex:
        raise MismatchedComplexes("systems live on different complexes")
    X = f.complex
    D = X._vdist
    best = 0.0
    for k, e in enumerate(X.edges):
        breaks = np.union1d(
            np.concatenate([[p.s0 for p in f.pieces_by_edge[k]], [e.length]]),
            np.concatenate([[p.s0 for p in g.pieces_by_edge[k]], [e.length]]))
        for u, v in zip(breaks, breaks[1:]):
            if v - u <= 1e-15:
                continue
            pf = f._piece_at(k, 0.5 * (u + v))
            pg = g._piece_at(k, 0.5 * (u + v))
            ef, eg = X.edges[pf.dst_edge], X.edges[pg.dst_edge]
            bf, bg = pf.slope, pg.slope
            af = pf.t0 - pf.s0 * bf
            ag = pg.t0 - pg.s0 * bg
            # candidate affine costs A + B x on [u, v]: the four
            # vertex-to-vertex routes, plus the signed direct difference
            # when both images lie on one edge.  d(f(x), g(x)) is the
            # minimum of these, so its maximum over the interval occurs
            # at an endpoint or where two candidates cross.
            cands = [
                (af + ag + D[ef.u, eg.u], bf + bg),
                (af + (eg.length - ag) + D[ef.u, eg.v], bf - bg),
                ((ef.length - af) + ag + D[ef.v, eg.u], -bf + bg),
                ((ef.length - af) + (eg.length - ag) + D[ef.v, eg.v],
                 -bf - bg),
            ]
            if pf.dst_edge == pg.dst_edge:
                cands.append((af - ag, bf - bg))
                cands.append((ag - af, bg - bf))
            xs = {u, v}
            for i in range(len(cands)):
                for j in range(i + 1, len(cands)):
                    A1, B1 = cands[i]
                    A2, B2 = cands[j]
                    if B1 != B2:
                        x = (A2 - A1) / (B1 - B2)
                        if u < x < v:
                            xs.add(x)
            for x in xs:
                d = X.geodesic_distance(f.eval_map(Point(k, x)),
                                        g.eval_map(Point(k, x)))
                if d > best:
                    best = d
    return best


# -- perturbations -------------------------------------------------------

@dataclass
class PerturbationSpec:
    kind: str
    magnitude: float
    seed: int | None = None
    support: tuple = ()
    payload: dict = field(default_factory=dict)


def _eval_control(points, x):
    """Evaluate the PL interpolant through control points at x."""
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    i = int(np.searchsorted(xs, x, side="right")) - 1
    i = min(max(i, 0), len(xs) - 2)
    if x <= xs[i]:
        return ys[i]
    if x >= xs[i + 1]:
        return ys[i + 1]
    w = (x - xs[i]) / (xs[i + 1] - xs[i])
    return ys[i] * (1 - w) + ys[i + 1] * w


def _validate_eta(eta, complex_):
    for edge, pts in eta.items():
        e = complex_.edges[edge]
        L = e.length
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        if abs(xs[0]) > _TILE_TOL or abs(xs[-1] - L) > _TILE_TOL:
            raise InvalidPerturbation("eta control points must span the edge")
        if e.u == e.v:
            # a loop edge has no preferred basepoint: eta may slide across
            # the wrap as long as it advances by exactly one turn
            if abs((ys[-1] - ys[0]) - L) > _TILE_TOL or abs(ys[0]) >= L / 2:
                raise InvalidPerturbation(
                    "loop eta must advance by one turn with bounded shift")
        elif abs(ys[0]) > _TILE_TOL or abs(ys[-1] - L) > _TILE_TOL:
            raise InvalidPerturbation("eta must fix edge endpoints")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvalidPerturbation("eta control x's must increase")
        if any(b <= a for a, b in zip(ys, ys[1:])):
            raise InvalidPerturbation("eta is not monotone")


def _emit_wrapped(out, src_edge, a, b, dst_edge, ga, gb, L):
    """Emit pieces for a segment whose raw values may leave [0, L],
    splitting at wrap crossings of a loop target edge."""
    if gb >= ga:
        shift = np.floor(ga / L) * L
        ga, gb = ga - shift, gb - shift
        while gb > L + 1e-15:
            x_cut = a + (L - ga) * (b - a) / (gb - ga)
            if x_cut > a + 1e-15:
                out.append(MapPiece(src_edge, a, x_cut, dst_edge, ga, L))
            a, ga = x_cut, 0.0
            gb -= L
        if b > a:
            out.append(MapPiece(src_edge, a, b, dst_edge, ga, min(gb, L)))
    else:
        shift = np.floor(gb / L) * L
        ga, gb = ga - shift, gb - shift
        while ga > L + 1e-15:
            x_cut = a + (ga - L) * (b - a) / (ga - gb)
            if x_cut > a + 1e-15:
                out.append(MapPiece(src_edge, a, x_cut, dst_edge, ga - L, 0.0))
            a, ga = x_cut, L
        if b > a:
            out.append(MapPiece(src_edge, a, b, dst_edge, min(ga, L),
                                max(gb, 0.0)))


def _compose_eta(system, eta):
    """Exact pieces of eta o f for per-edge monotone PL maps eta."""
    X = system.complex
    out = []
    for ps in system.pieces_by_edge:
        for p in ps:
            pts = eta.get(p.dst_edge)
            if pts is None:
                out.append(p)
                continue
            e = X.edges[p.dst_edge]
            cuts = {p.s0, p.s1}
            lo, hi = min(p.t0, p.t1), max(p.t0, p.t1)
            for x, _ in pts:
                if lo < x < hi:
                    cuts.add(p.s0 + (x - p.t0) / p.slope)
            cs = sorted(cuts)
            for a, b in zip(cs, cs[1:]):
                ta = _eval_control(pts, p.eval(a))
                tb = _eval_control(pts, p.eval(b))
                if e.u == e.v and not (0 <= min(ta, tb) and
                                       max(ta, tb) <= e.length):
                    _emit_wrapped(out, p.src_edge, a, b, p.dst_edge,
                                  ta, tb, e.length)
                else:
                    out.append(MapPiece(p.src_edge, a, b, p.dst_edge, ta, tb))
    return out


def _lift_pieces(system, bumps):
    """Pieces of x -> f(x) + bump(x) on edges mapped into themselves."""
    X = system.complex
    out = []
    for k, e in enumerate(X.edges):
        pts = bumps.get(k)
        if pts is None:
            out.extend(system.pieces_by_edge[k])
            continue
        for p in system.pieces_by_edge[k]:
            if p.dst_edge != k:
                raise InvalidPerturbation(
                    "vector-field lift needs edge %d mapped into itself" % k)
        is_loop = e.u == e.v
        if not is_loop:
            f0 = system.eval_map(Point(k, 0.0))
            fL = system.eval_map(Point(k, e.length))
            if abs(f0.s) > 1e-9 or abs(fL.s - e.length) > 1e-9:
                raise InvalidPerturbation(
                    "lift on a non-loop edge needs fixed endpoints")
            if abs(_eval_control(pts, 0.0)) > 1e-12 or \
               abs(_eval_control(pts, e.length)) > 1e-12:
                raise InvalidPerturbation(
                    "lift bump must vanish at non-loop edge ends")
        elif abs(_eval_control(pts, 0.0) - _eval_control(pts, e.length)) > 1e-12:
            raise InvalidPerturbation("loop bump must match at the wrap point")

        L = e.length
        xs = sorted({p.s0 for p in system.pieces_by_edge[k]}
                    | {p[0] for p in pts} | {0.0, L})
        # displacement of f normalized to (-L/2, L/2] so wrap pieces of f
        # do not break the monotonicity bookkeeping
        gs = []
        for x in xs:
            t = system.eval_map(Point(k, x)).s
            d = (t - x) % L
            if d > L / 2:
                d -= L
            gs.append(x + d + _eval_control(pts, x))
        if any(b <= a for a, b in zip(gs, gs[1:])):
            raise InvalidPerturbation("lift destroys monotonicity")
        if not is_loop and (abs(gs[0]) > 1e-9 or abs(gs[-1] - L) > 1e-9):
            raise InvalidPerturbation("lift moves a vertex of a non-loop edge")
        for (a, b, ga, gb) in zip(xs, xs[1:], gs, gs[1:]):
            if b <= a:
                continue
            shift = np.floor(ga / L) * L
            ga, gb = ga - shift, gb - shift
            while gb > L + 1e-15:
                x_cut = a + (L - ga) * (b - a) / (gb - ga)
                if x_cut > a + 1e-15:
                    out.append(MapPiece(k, a, x_cut, k, ga, L))
                a, ga = x_cut, 0.0
                gb -= L
            if b > a:
                out.append(MapPiece(k, a, b, k, ga, min(gb, L)))
    return out


def apply_perturbation(system, pert):
    """Apply a PerturbationSpec; the result is validated as a
    homeomorphism and must stay within pert.magnitude in C0 distance."""
    if pert.kind in ("bump-composition", "chain-realizing"):
        eta = pert.payload.get("eta")
        if not eta:
            raise InvalidPerturbation("missing eta control points")
        _validate_eta(eta, system.complex)
        pieces = _compose_eta(system, eta)
    elif pert.kind == "vector-field-lift":
        bumps = pert.payload.get("bump")
        if not bumps:
            raise InvalidPerturbation("missing bump control points")
        pieces = _lift_pieces(system, bumps)
    else:
        raise InvalidPerturbation("unknown perturbation kind %r" % pert.kind)

    try:
        g = SystemSpec(system.complex, pieces,
                       label=system.label + "+" + pert.kind,
                       meta=dict(system.meta))
    except InvalidSpace as exc:
        raise InvalidPerturbation(
            "perturbed map is not a homeomorphism: %s" % exc.message)
    dist = c0_distance(system, g)
    if dist > pert.magnitude * (1 + 1e-9) + 1e-12:
        raise InvalidPerturbation(
            "perturbation moved points by %g > magnitude %g"
            % (dist, pert.magnitude))
    return g


def random_perturbation(system, magnitude, seed, kind="bump-composition"):
    """Seeded random perturbation of at most the given magnitude."""
    rng = np.random.default_rng(seed)
    X = system.complex
    n_edges = len(X.edges)
    chosen = [k for k in range(n_edges) if rng.random() < 0.7]
    if not chosen:
        chosen = [int(rng.integers(0, n_edges))]

    if kind == "bump-composition":
        eta = {}
        for k in chosen:
            L = X.edges[k].length
            margin = 0.05 * L
            cap = min(0.9 * magnitude, 0.2 * L)
            for _ in range(50):
                m = int(rng.integers(2, 6))
                xs = np.sort(rng.uniform(margin, L - margin, m))
                if np.any(np.diff(xs) < 1e-3 * L):
                    continue
                ys = xs + rng.uniform(-cap, cap, m)
                ok = True
                prev = 0.0
                for i in range(m):
                    if ys[i] <= prev + 1e-6 * L or ys[i] >= L - 1e-6 * L:
                        ok = False
                        break
                    prev = ys[i]
                if ok:
                    eta[k] = [(0.0, 0.0)] + list(zip(xs.tolist(), ys.tolist())) \
                        + [(L, L)]
                    break
        if not eta:
            k = chosen[0]
            L = X.edges[k].length
            eta = {k: [(0.0, 0.0), (L, L)]}
        return PerturbationSpec(kind=kind, magnitude=magnitude, seed=seed,
                                support=tuple((k, 0.0, X.edges[k].length)
                                              for k in sorted(eta)),
                                payload={"eta": eta})

    if kind == "vector-field-lift":
        bumps = {}
        for k in chosen:
            ps = system.pieces_by_edge[k]
            if any(p.dst_edge != k for p in ps):
                continue
            L = X.edges[k].length
            min_slope = min(abs(p.slope) for p in ps)
            m = int(rng.integers(2, 5))
            xs = np.sort(rng.uniform(0.1 * L, 0.9 * L, m))
            if np.any(np.diff(xs) < 1e-3 * L):
                continue
            ds = rng.uniform(-0.9, 0.9, m) * magnitude
            # keep |bump slope| below the smallest map slope so the lift
            # stays monotone
            gaps = np.diff(np.concatenate([[0.0], xs, [L]]))
            dd = np.abs(np.diff(np.concatenate([[0.0], ds, [0.0]])))
            worst = float(np.max(dd / gaps))
            if worst > 0.8 * min_slope:
                ds = ds * (0.8 * min_slope / worst)
            bumps[k] = [(0.0, 0.0)] + list(zip(xs.tolist(), ds.tolist())) \
                + [(L, 0.0)]
        if not bumps:
            return random_perturbation(system, magnitude, seed,
                                       kind="bump-composition")
        return PerturbationSpec(kind=kind, magnitude=magnitude, seed=seed,
                                support=tuple((k, 0.0, X.edges[k].length)
                                              for k in sorted(bumps)),
                                payload={"bump": bumps})

    raise InvalidPerturbation("unknown perturbation kind %r" % kind)


# -- example gallery ------------------------------------------------------

PEAK = 0.95


def _tent(edge, a, b, direction):
    """Two pieces fixing a and b, displacing the interior toward one end."""
    m = 0.5 * (a + b)
    fm = m + direction * PEAK * 0.5 * (b - a)
    return [MapPiece(edge, a, m, edge, a, fm),
            MapPiece(edge, m, b, edge, fm, b)]


def _id_piece(edge, a, b):
    return [MapPiece(edge, a, b, edge, a, b)]


def _cantor_blocks(lo, hi, depth, gap_fraction):
    blocks = [(lo, hi)]
    for _ in range(depth):
        nxt = []
        for a, b in blocks:
            g = (b - a) * gap_fraction
            m = 0.5 * (a + b)
            nxt.append((a, m - g / 2))
            nxt.append((m + g / 2, b))
        blocks = nxt
    return blocks


def _build_ex2_1(params, cpu):
    L = params["circumference"]
    a, b = params["interval"]
    if a != 0 or not (0 < b < L):
        raise ConfigError("fixed interval must be [0, b] with 0 < b < "
                          "circumference")
    X = build_circle(L, cells_per_unit=cpu)
    pieces = _id_piece(0, 0.0, b) + _tent(0, b, L, +1)
    return SystemSpec(X, pieces, label="ex2_1",
                      meta={"expected": ({0: [(0.0, b)]}, []),
                            "scripted": {"mode": "lift", "edge": 0,
                                         "interval": (0.0, b)}})


def _build_north_south(params, cpu):
    L = params["circumference"]
    N = L / 2
    X = build_circle(L, cells_per_unit=cpu)
    pieces = _tent(0, 0, N, +1) + _tent(0, N, L, -1)
    return SystemSpec(X, pieces, label="north_south",
                      meta={"expected": ({}, [(0, 0.0), (0, N)]),
                            "scripted": {"mode": "push", "edge": 0,
                                         "interval": (N - L / 40, N + L / 40),
                                         "direction": +1}})


def _build_rotation(params, cpu):
    L = params["circumference"]
    alpha = params["angle"] % L
    X = build_circle(L, cells_per_unit=cpu)
    if alpha == 0:
        pieces = _id_piece(0, 0, L)
    else:
        pieces = [MapPiece(0, 0.0, L - alpha, 0, alpha, L),
                  MapPiece(0, L - alpha, L, 0, 0.0, alpha)]
    return SystemSpec(X, pieces, label="rotation",
                      meta={"expected": "all", "scripted": None})


def _build_identity(params, cpu):
    L = params["circumference"]
    X = build_circle(L, cells_per_unit=cpu)
    return SystemSpec(X, _id_piece(0, 0, L), label="identity",
                      meta={"expected": "all", "scripted": None})


def _build_ex3_3(params, cpu):
    n_max = params["n_max"]
    if n_max < 2 or n_max % 2:
        raise ConfigError("n_max must be even and >= 2")
    L = 2.0
    X = build_circle(L, cells_per_unit=cpu)
    tail = 2.0 ** -n_max
    pieces = _id_piece(0, 0.0, tail) + _id_piece(0, L - tail, L)
    points = []
    # the fixed point at 2^-n attracts iff n is even; its mirror at
    # L - 2^-n attracts iff n is odd
    for n in range(1, n_max + 1):
        points.append((0, 2.0 ** -n))
        points.append((0, L - 2.0 ** -n))
    for n in range(1, n_max):
        a, b = 2.0 ** -(n + 1), 2.0 ** -n
        direction = -1 if (n + 1) % 2 == 0 else +1
        pieces += _tent(0, a, b, direction)
        qa, qb = L - b, L - a
        direction_q = +1 if (n + 1) % 2 else -1
        pieces += _tent(0, qa, qb, direction_q)
    pieces += _tent(0, 0.5, 1.5, +1)
    seg = (tail, 2.0 ** -(n_max - 1))
    return SystemSpec(X, pieces, label="ex3_3",
                      meta={"expected": ({0: [(0.0, tail), (L - tail, L)]},
                                         points),
                            "scripted": {"mode": "push", "edge": 0,
                                         "interval": seg, "direction": -1}})


def _cantor_circle_layout(depth, gap_fraction):
    """Gap/block intervals of a Cantor set on the unit circle, with the
    block through the wrap point glued."""
    blocks = _cantor_blocks(0.0, 1.0, depth, gap_fraction)
    gaps = [(blocks[i][1], blocks[i + 1][0]) for i in range(len(blocks) - 1)]
    cuts = sorted({x for g in gaps for x in g})
    return blocks, gaps, cuts


def _build_ex3_1(params, cpu):
    _, gaps, cuts = _cantor_circle_layout(params["depth"],
                                          params["gap_fraction"])
    verts = {x: i for i, x in enumerate(cuts)}
    recs = []
    kinds = []
    for i in range(len(cuts) - 1):
        a, b = cuts[i], cuts[i + 1]
        recs.append({"from": verts[a], "to": verts[b], "length": b - a})
        mid = 0.5 * (a + b)
        kinds.append("gap" if any(g[0] <= mid <= g[1] for g in gaps)
                     else "block")
    wrap_len = (1.0 - cuts[-1]) + cuts[0]
    recs.append({"from": verts[cuts[-1]], "to": verts[cuts[0]],
                 "length": wrap_len})
    kinds.append("block")
    n_circle = len(recs)
    next_v = len(cuts)
    for x in cuts:
        recs.append({"from": verts[x], "to": next_v,
                     "length": params["hair_len"]})
        next_v += 1
    X = build_metric_graph(recs, cpu)

    pieces = []
    region = {}
    block_lens = []
    for k in range(n_circle):
        L = X.edges[k].length
        if kinds[k] == "block":
            pieces += _id_piece(k, 0, L)
            region[k] = [(0.0, L)]
            block_lens.append((L, k))
        else:
            pieces += _tent(k, 0, L, -1)
    for k in range(n_circle, len(recs)):
        pieces += _id_piece(k, 0, X.edges[k].length)
        region[k] = [(0.0, X.edges[k].length)]
    push_edge = max(block_lens)[1]
    return SystemSpec(X, pieces, label="ex3_1",
                      meta={"expected": (region, []),
                            "scripted": {"mode": "push", "edge": push_edge,
                                         "interval": (0.0,
                                                      X.edges[push_edge].length),
                                         "direction": -1}})


def _build_ex3_2(params, cpu):
    depth = params["depth"]
    arc_len = params["arc_len"]
    # Cantor set scaled to [-1, 1]; endpoint pairs +-k of the right half
    # get joined by arcs.  Circle coordinate is p = x + 2 on [0, 4).
    blocks = [(2 * a - 1, 2 * b - 1)
              for a, b in _cantor_blocks(0.0, 1.0, depth, 1.0 / 3.0)]
    kplus = sorted({x for a, b in blocks for x in (a, b)
                    if x >= 1.0 / 3.0 - 1e-12})
    pts = sorted({2 - k for k in kplus} | {2 + k for k in kplus})
    verts = {x: i for i, x in enumerate(pts)}
    recs = []
    kinds = []
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        recs.append({"from": verts[a], "to": verts[b], "length": b - a})
        mid = 0.5 * (a + b) - 2
        inside = any(lo - 1e-12 <= mid <= hi + 1e-12 for lo, hi in blocks)
        kinds.append("block" if inside else "gap")
    big_len = (4.0 - pts[-1]) + pts[0]
    recs.append({"from": verts[pts[-1]], "to": verts[pts[0]],
                 "length": big_len})
    kinds.append("gap")
    n_circle = len(recs)
    for k in kplus:
        recs.append({"from": verts[2 - k], "to": verts[2 + k],
                     "length": arc_len})
    density = {n_circle + i: 2 for i in range(len(kplus))}
    X = build_metric_graph(recs, cpu, edge_density=density)

    pieces = []
    region = {}
    for k in range(n_circle):
        L = X.edges[k].length
        if kinds[k] == "block":
            pieces += _id_piece(k, 0, L)
            region[k] = [(0.0, L)]
        else:
            pieces += _tent(k, 0, L, -1)
    central_arc = None
    for i, k in enumerate(kplus):
        e = n_circle + i
        pieces += _tent(e, 0, X.edges[e].length, +1)
        if i == 0:
            central_arc = e
    # the recurrent set is the blocks, the central gap and the arc
    # joining its endpoints; edge order matches the rec list, so the gap
    # between the two innermost Cantor endpoints sits at the index of the
    # left one in pts
    gap_edge = pts.index(2 - kplus[0])
    region[gap_edge] = [(0.0, X.edges[gap_edge].length)]
    region[central_arc] = [(0.0, X.edges[central_arc].length)]
    return SystemSpec(X, pieces, label="ex3_2",
                      meta={"expected": (region, []), "scripted": None,
                            "central_edges": [gap_edge, central_arc]})


def _build_ex3_4(params, cpu):
    a, b = params["arc_interval"]
    arc_len = params["arc_len"]
    _, gaps, cuts = _cantor_circle_layout(params["depth"],
                                          params["gap_fraction"])
    host = next((g for g in gaps if g[0] < a < b < g[1]), None)
    if host is None:
        raise ConfigError("arc interval must sit inside one Cantor gap")

    coords = []
    kinds = []
    for i in range(len(cuts) - 1):
        x0, x1 = cuts[i], cuts[i + 1]
        mid = 0.5 * (x0 + x1)
        kind = "gap" if any(g[0] <= mid <= g[1] for g in gaps) else "block"
        if (x0, x1) == host:
            coords += [(x0, a), (a, b), (b, x1)]
            kinds += ["gap", "gap", "gap"]
        else:
            coords.append((x0, x1))
            kinds.append(kind)
    coords.append((cuts[-1], cuts[0] + 1.0))
    kinds.append("block")

    vert_ids = {}

    def vid(x):
        key = round(x % 1.0, 12)
        if key not in vert_ids:
            vert_ids[key] = len(vert_ids)
        return vert_ids[key]

    recs = [{"from": vid(x0), "to": vid(x1), "length": x1 - x0}
            for x0, x1 in coords]
    n_circ = len(recs)
    ab_edge = coords.index((a, b))
    hv = 0
    for x in cuts:
        recs.append({"from": vid(x), "to": ("hair", hv),
                     "length": params["hair_len"]})
        hv += 1
    arc_idx = len(recs)
    recs.append({"from": vid(a), "to": vid(b), "length": arc_len})
    X = build_metric_graph(recs, cpu, edge_density={arc_idx: 2})

    pieces = []
    region = {}
    for k in range(n_circ):
        L = X.edges[k].length
        if kinds[k] == "block":
            pieces += _id_piece(k, 0, L)
            region[k] = [(0.0, L)]
        else:
            pieces += _tent(k, 0, L, -1)
    for k in range(n_circ, n_circ + len(cuts)):
        pieces += _id_piece(k, 0, X.edges[k].length)
        region[k] = [(0.0, X.edges[k].length)]
    pieces += _id_piece(arc_idx, 0, arc_len)
    region[arc_idx] = [(0.0, arc_len)]
    return SystemSpec(X, pieces, label="ex3_4",
                      meta={"expected": (region, []),
                            "scripted": {"mode": "push", "edge": arc_idx,
                                         "interval": (0.0, arc_len),
                                         "direction": +1},
                            "ab_edge": ab_edge, "arc_edge": arc_idx})


_DEFAULTS = {
    "ex2_1": {"circumference": 2 * np.pi, "interval": (0.0, 1.0)},
    "north_south": {"circumference": 2.0},
    "rotation": {"circumference": 2 * np.pi,
                 "angle": 2 * np.pi * (np.sqrt(5) - 1) / 2},
    "identity": {"circumference": 1.0},
    "ex3_1": {"depth": 5, "gap_fraction": 1.0 / 3.0, "hair_len": 0.25},
    "ex3_2": {"depth": 5, "arc_len": 0.1},
    "ex3_3": {"n_max": 4},
    "ex3_4": {"depth": 5, "gap_fraction": 1.0 / 3.0, "hair_len": 0.03,
              "arc_interval": (0.4, 0.6), "arc_len": 0.15},
}

_BUILDERS = {
    "ex2_1": _build_ex2_1,
    "north_south": _build_north_south,
    "rotation": _build_rotation,
    "identity": _build_identity,
    "ex3_1": _build_ex3_1,
    "ex3_2": _build_ex3_2,
    "ex3_3": _build_ex3_3,
    "ex3_4": _build_ex3_4,
}

EXAMPLE_IDS = tuple(sorted(_BUILDERS))


def make_example(example_id, params=None, cells_per_unit=256):
    if example_id not in _BUILDERS:
        raise ConfigError("unknown example id %r (have: %s)"
                          % (example_id, ", ".join(EXAMPLE_IDS)))
    merged = dict(_DEFAULTS[example_id])
    merged.update(params or {})
    sys = _BUILDERS[example_id](merged, cells_per_unit)
    sys.meta["params"] = merged
    sys.meta["cells_per_unit"] = cells_per_unit
    return sys


def expected_region(system):
    """Expected recurrent set of a built-in: "all" or (region, points)."""
    return system.meta.get("expected")


def scripted_perturbation(system, delta):
    """The example's adversarial perturbation at size delta, if any."""
    desc = system.meta.get("scripted")
    if not desc:
        return None
    X = system.complex
    edge = desc["edge"]
    L = X.edges[edge].length
    amp = 0.9 * delta
    if desc["mode"] == "lift":
        a, b = desc["interval"]
        w = min(0.25, (L - (b - a)) / 4)
        pts = sorted({(0.0, amp), (b, amp), (min(b + w, L), 0.0),
                      (max(L - w, b + w), 0.0), (L, amp)})
        return PerturbationSpec(kind="vector-field-lift", magnitude=delta,
                                support=((edge, 0.0, L),),
                                payload={"bump": {edge: pts}})
    lo, hi = desc["interval"]
    span = hi - lo
    w = min(max(2 * delta, 0.05 * span), 0.45 * span)
    if amp >= w:
        amp = 0.9 * w
    d = desc.get("direction", +1) * amp
    pts = [(lo, lo), (lo + w, lo + w + d), (hi - w, hi - w + d), (hi, hi)]
    if lo > 0:
        pts = [(0.0, 0.0)] + pts
    if hi < L:
        pts = pts + [(L, L)]
    return PerturbationSpec(kind="bump-composition", magnitude=delta,
                            support=((edge, lo, hi),),
                            payload={"eta": {edge: pts}})
