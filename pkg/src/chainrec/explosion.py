"""Closing chains through near-fixed balls, and stability probes.

Two jobs live here.  The first turns an eps-chain between recurrent
points into an actual orbit: pick balls of radius eps/2 around
near-fixed cells, link them by genuine orbit segments, and realize the
remaining jumps by a piecewise-linear reparametrization eta composed
with the map.  The perturbation budget is 4*pi*eps in the C0 metric and
the realized orbit is verified step by step against the planned one.

The second job measures stability of the recurrent set itself: apply
seeded random (and, where a system ships one, adversarial) perturbations
of a given size, recompute the recurrent set, and report how far it
escapes a fixed neighborhood of the unperturbed one, or whether chain
recurrence blows up to the whole space.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dynamics import PerturbationSpec, apply_perturbation, c0_distance, \
    random_perturbation, scripted_perturbation
from .errors import InvalidDiscretization, InvalidPerturbation, \
    PerturbationDegenerate
from .recurrence import _EQ_SLOP, generalized_recurrent
from .space import Point, cell_set_distances
from .transition import build_transition_graph

_SIM_TOL = 1e-9


@dataclass
class BallChain:
    eps: float
    y: Point
    z: Point
    cells: list
    centers: list
    links: list  # (m, w_point, z_point) per consecutive ball pair

    @property
    def n_orbit(self):
        """Planned number of perturbed-map steps from f^-1(y) to f(z)."""
        if not self.links:
            return 3
        return 2 + len(self.links) + sum(m for m, _, _ in self.links)


def near_fixed_cells(result):
    """Recurrent cells whose image interval overlaps the cell itself."""
    g = result.graph
    self0 = g.src[(g.src == g.dst) & g.overlap]
    return sorted(set(self0.tolist()) & result.gr)


def _edge_dist(a, b, L, loop):
    d = abs(b - a)
    return min(d, L - d) if loop else d


def _wrap_disp(a, b, L, loop):
    if not loop:
        return b - a
    d = (b - a) % L
    if d > L / 2:
        d -= L
    return d


def _intersect(ivs1, ivs2):
    out = []
    for a1, b1 in ivs1:
        for a2, b2 in ivs2:
            lo, hi = max(a1, a2), min(b1, b2)
            if hi > lo:
                out.append((lo, hi))
    return sorted(out)


def find_ball_chain(system, result, y, z, eps, m_cap=64, max_balls=4096):
    """Breadth-first chain of balls around near-fixed recurrent cells,
    with y inside the first ball and z inside the last.  Balls have
    radius 0.4*eps so every jump support stays inside a ball of
    diameter eps.  The endpoints must share an edge with their anchor
    cells (jumps cannot cross branch vertices).  Returns None when no
    chain exists within the caps."""
    X = system.complex
    if eps <= 2 * result.graph.h:
        raise InvalidDiscretization(
            "ball radius %g must exceed twice the cell scale %g"
            % (eps, result.graph.h))
    y = X.validate_point(y)
    z = X.validate_point(z)
    candidates = near_fixed_cells(result)
    if not candidates:
        return None
    r = 0.40 * eps

    centers = {}
    for c in candidates:
        cell = X.cells[c]
        centers[c] = Point(cell.edge, cell.center)
    images = {c: system.eval_map(p) for c, p in centers.items()}
    own_ball = {}
    by_edge = {}
    for c in candidates:
        k = centers[c]
        own_ball[c] = X.ball_intervals(k, r).get(k.edge, [])
        by_edge.setdefault(k.edge, []).append(c)

    def is_loop(edge):
        e = X.edges[edge]
        return e.u == e.v

    starts = []
    for c in candidates:
        k = centers[c]
        if k.edge == y.edge:
            d = _edge_dist(y.s, k.s, X.edges[k.edge].length, is_loop(k.edge))
            if d < r:
                starts.append((d, c))
    starts.sort()
    if not starts:
        return None

    def goal(c):
        k = centers[c]
        return k.edge == z.edge and _edge_dist(
            k.s, z.s, X.edges[z.edge].length, is_loop(z.edge)) < r

    parent = {}
    link_of = {}
    visited = set()
    queue = deque()
    for _, c in starts:
        if c not in visited:
            visited.add(c)
            parent[c] = None
            queue.append(c)

    goal_cell = None
    expansions = 0
    while queue:
        c = queue.popleft()
        if goal(c):
            goal_cell = c
            break
        expansions += 1
        if expansions > max_balls:
            break
        region = X.ball_intervals(centers[c], r)
        prev = None
        fc_edge = images[c].edge
        for m in range(1, m_cap + 1):
            region = system.map_region(region)
            if region == prev:
                break
            prev = region
            for edge in region:
                for j in by_edge.get(edge, ()):
                    if j in visited:
                        continue
                    kj = centers[j]
                    hits = _intersect(region[edge], own_ball[j])
                    for lo, hi in sorted(hits, key=lambda t: t[0] - t[1]):
                        w = Point(kj.edge, 0.5 * (lo + hi))
                        zp = w
                        for _ in range(m):
                            zp = system.eval_inverse(zp)
                        if zp.edge == fc_edge:
                            visited.add(j)
                            parent[j] = c
                            link_of[j] = (m, w, zp)
                            queue.append(j)
                            break
    if goal_cell is None:
        return None

    path = [goal_cell]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()
    links = [link_of[c] for c in path[1:]]
    return BallChain(eps=eps, y=y, z=z, cells=path,
                     centers=[centers[c] for c in path], links=links)


def _couples_and_orbit(system, chain):
    """Jump couples (raw image -> replacement) and the planned orbit.

    The orbit starts at f^-1(y): the first couple sends y itself to the
    first anchor, each anchor's image jumps to the link's pull-back
    point, the link's witness jumps to the next anchor, and the last
    witness jumps straight to z."""
    couples = [(chain.y, chain.centers[0])]
    orbit = [system.eval_inverse(chain.y), chain.centers[0]]
    if not chain.links:
        fk = system.eval_map(chain.centers[0])
        couples.append((fk, chain.z))
        orbit.append(chain.z)
        return couples, orbit
    for i, (m, w, zp) in enumerate(chain.links):
        fk = system.eval_map(chain.centers[i])
        couples.append((fk, zp))
        x = zp
        orbit.append(x)
        for _ in range(m - 1):
            x = system.eval_map(x)
            orbit.append(x)
        last = i == len(chain.links) - 1
        target = chain.z if last else chain.centers[i + 1]
        couples.append((w, target))
        orbit.append(target)
    return couples, orbit


def _assemble_eta(X, couples, pad):
    """Per-edge monotone control points realizing every couple exactly,
    anchored to the identity just outside each cluster of couples."""
    by_edge = {}
    for a, b in couples:
        if a.edge != b.edge:
            raise InvalidPerturbation(
                "jump couple crosses edges %d -> %d" % (a.edge, b.edge))
        L = X.edges[a.edge].length
        e = X.edges[a.edge]
        d = _wrap_disp(a.s, b.s, L, e.u == e.v)
        by_edge.setdefault(a.edge, {})
        prevd = by_edge[a.edge].get(a.s)
        if prevd is not None and abs(prevd - d) > 1e-12:
            raise InvalidPerturbation("conflicting jumps at one point")
        by_edge[a.edge][a.s] = d

    eta = {}
    supports = []
    for edge, disp in sorted(by_edge.items()):
        e = X.edges[edge]
        L = e.length
        loop = e.u == e.v
        pts = sorted(disp.items())
        # cluster couples whose padded supports touch
        clusters = []
        for x, d in pts:
            lo, hi = min(x, x + d), max(x, x + d)
            if clusters and lo - pad <= clusters[-1][1] + pad:
                cl = clusters[-1]
                clusters[-1] = (min(cl[0], lo), max(cl[1], hi),
                                cl[2] + [(x, d)])
            else:
                clusters.append((lo, hi, [(x, d)]))
        if loop and len(clusters) > 1:
            first, last = clusters[0], clusters[-1]
            if (first[0] + L) - last[1] <= 2 * pad:
                clusters[0] = (last[0] - L, max(first[1], last[1] - L),
                               [(x - L, d) for x, d in last[2]] + first[2])
                clusters.pop()

        ctrl = []
        for lo, hi, members in clusters:
            if hi - lo >= L - 2 * pad:
                raise InvalidPerturbation(
                    "jump cluster covers edge %d entirely" % edge)
            ctrl.append((lo - pad, lo - pad))
            for x, d in sorted(members):
                ctrl.append((x, x + d))
            ctrl.append((hi + pad, hi + pad))
            supports.append((edge, lo - pad, hi + pad))

        if loop:
            base = [(x % L, y - x + (x % L)) for x, y in ctrl]
            base.sort()
            xs = [p[0] for p in base]
            ys = [p[1] for p in base]
            if xs[0] > 0 or xs[-1] < L:
                xp, yp = xs[-1] - L, ys[-1] - L
                xn, yn = xs[0], ys[0]
                y0 = yp + (0.0 - xp) * (yn - yp) / (xn - xp)
                base = [(0.0, y0)] + base + [(L, y0 + L)]
            pts_out = base
        else:
            pts_out = ctrl
            if not pts_out or pts_out[0][0] > 0:
                pts_out = [(0.0, 0.0)] + pts_out
            if pts_out[-1][0] < L:
                pts_out = pts_out + [(L, L)]
            if pts_out[0][0] < 0 or pts_out[-1][0] > L:
                raise InvalidPerturbation(
                    "jump cluster spills over a branch vertex")
            pts_out[0] = (0.0, 0.0)
            pts_out[-1] = (L, L)

        dedup = []
        for x, v in pts_out:
            if dedup and abs(x - dedup[-1][0]) < 1e-12:
                if abs(v - dedup[-1][1]) > 1e-12:
                    raise InvalidPerturbation("conflicting jumps at one point")
                continue
            dedup.append((x, v))
        eta[edge] = dedup
    return eta, tuple(supports)


def closing_perturbation(system, chain, pad=None):
    """Realize a ball chain as one orbit of a perturbed system.

    Returns (pert, g, info): the perturbation, the perturbed system, and
    bookkeeping with the verified orbit.  The C0 budget is 4*pi*eps, the
    perturbed orbit from f^-1(y) must pass through every planned point
    to 1e-9 and end on f(z), and the perturbation is supported inside
    the chain's balls (pad must keep 0.4*eps + pad below eps/2).
    """
    X = system.complex
    eps = chain.eps
    magnitude = 4 * math.pi * eps
    pad = pad if pad is not None else 0.08 * eps
    if X.geodesic_distance(chain.y, chain.z) <= _EQ_SLOP:
        # the unperturbed orbit already runs f^-1(y) -> y -> f(y) = f(z)
        x = system.eval_inverse(chain.y)
        pert = PerturbationSpec(kind="chain-realizing", magnitude=magnitude,
                                support=(), payload={"eta": {}})
        info = {"couples": [], "orbit": [x, chain.y, system.eval_map(chain.y)],
                "n_orbit": 2, "c0": 0.0, "repairs": 0}
        return pert, system, info
    chain = BallChain(eps=eps, y=chain.y, z=chain.z,
                      cells=list(chain.cells), centers=list(chain.centers),
                      links=list(chain.links))

    attempts = 0
    repairs = 0
    while attempts < 2:
        ok = None
        for _ in range(60):
            couples, orbit = _couples_and_orbit(system, chain)
            worst = max(_edge_dist(a.s, b.s, X.edges[a.edge].length,
                                   X.edges[a.edge].u == X.edges[a.edge].v)
                        for a, b in couples)
            if worst > 0.45 * magnitude:
                ok = False
                break
            try:
                eta, supports = _assemble_eta(X, couples, pad)
                pert = PerturbationSpec(kind="chain-realizing",
                                        magnitude=magnitude,
                                        support=supports,
                                        payload={"eta": eta})
                g = apply_perturbation(system, pert)
            except InvalidPerturbation:
                ok = False
                break
            bad = None
            x = orbit[0]
            for t in range(1, len(orbit)):
                x = g.eval_map(x)
                if X.geodesic_distance(x, orbit[t]) > _SIM_TOL:
                    bad = t
                    break
            if bad is None:
                ok = True
                break
            # a planned free-flight point was deflected by a jump
            # cluster: shorten that link by one step so it hands off
            # from further out
            li = _link_of_index(chain, bad)
            if li is None or chain.links[li][0] <= 1:
                ok = False
                break
            m, w, zp = chain.links[li]
            chain.links[li] = (m - 1, w, system.eval_map(zp))
            repairs += 1
        if ok:
            fz = system.eval_map(chain.z)
            n_steps = len(orbit) - 1
            if X.geodesic_distance(fz, chain.z) > _SIM_TOL:
                # z is not fixed, so reaching f(z) takes one more step
                # and the final jump region must leave f(z) alone
                if X.geodesic_distance(g.eval_map(chain.z), fz) > _SIM_TOL:
                    raise PerturbationDegenerate(
                        "perturbation does not release the orbit at f(z)")
                n_steps += 1
            c0 = c0_distance(system, g)
            if c0 >= magnitude:
                raise PerturbationDegenerate(
                    "closing perturbation needs C0 size %g >= budget %g"
                    % (c0, magnitude))
            info = {"couples": couples, "orbit": orbit,
                    "n_orbit": n_steps, "c0": c0, "repairs": repairs}
            return pert, g, info
        attempts += 1
        if attempts < 2:
            moved = []
            changed = False
            for (m, w, zp) in chain.links:
                last = len(moved) == len(chain.links) - 1
                k = chain.z if last else chain.centers[len(moved) + 1]
                L = X.edges[w.edge].length
                e = X.edges[w.edge]
                d = _wrap_disp(w.s, k.s, L, e.u == e.v)
                w2 = Point(w.edge, (w.s + 0.31 * d) % L if e.u == e.v
                           else min(max(w.s + 0.31 * d, 0.0), L))
                z2 = w2
                for _ in range(m):
                    z2 = system.eval_inverse(z2)
                if z2.edge == zp.edge:
                    moved.append((m, w2, z2))
                    changed = True
                else:
                    moved.append((m, w, zp))
            chain.links = moved
            if not changed:
                break
    raise PerturbationDegenerate(
        "could not realize the ball chain as an orbit")


def _link_of_index(chain, t):
    """Which link a planned-orbit index belongs to, or None for the
    fixed head/tail jumps."""
    if t <= 1:
        return None
    pos = 2
    for i, (m, _, _) in enumerate(chain.links):
        if t < pos + m + 1:
            return i
        pos += m + 1
    return None


# -- probes ---------------------------------------------------------------


@dataclass
class ProbeSample:
    index: int
    kind: str
    seed: object
    c0: float
    n_recurrent: int
    excess: float
    full: bool
    gr_cells: object = None


@dataclass
class ExplosionReport:
    mode: str
    status: str
    label: str
    delta: float
    u_radius: object
    n_samples: int
    max_excess: object
    any_full: bool
    n_cells: int
    baseline_recurrent: int
    baseline_chain: int
    seed: object = None
    witness_seed: object = None
    scripted_witness_used: bool = False
    samples: list = field(default_factory=list)


def _pipeline(system, w_max=None, opts=None):
    return generalized_recurrent(build_transition_graph(system, w_max), opts)


def _sample_seed(seed, k):
    return (seed * 1_000_003 + k) % (2 ** 63)


def _probe(system, mode, delta, u_radius, n_samples, seed, opts, w_max,
           include_scripted, keep_sets):
    base = _pipeline(system, w_max, opts)
    n = base.graph.n
    report = ExplosionReport(
        mode=mode, status="ok", label=system.label, delta=delta,
        u_radius=u_radius if mode == "neighborhood" else None,
        n_samples=0, max_excess=0.0 if mode == "neighborhood" else None,
        any_full=False, n_cells=n, baseline_recurrent=len(base.gr),
        baseline_chain=len(base.cr), seed=seed)
    if len(base.gr) == n:
        # the recurrent set already fills the space, so there is
        # nothing left for it to explode into
        report.status = "not-applicable"
        return report

    X = system.complex
    dist = cell_set_distances(X, base.gr) \
        if mode == "neighborhood" else None

    jobs = []
    if include_scripted:
        sp = scripted_perturbation(system, delta)
        if sp is not None:
            jobs.append(("scripted", None, sp))
    for k in range(n_samples):
        sk = _sample_seed(seed, k)
        kind = "bump-composition" if k % 2 == 0 else "vector-field-lift"
        jobs.append((kind, sk, None))

    for idx, (kind, sk, pert) in enumerate(jobs):
        if pert is None:
            pert = random_perturbation(system, delta, sk, kind=kind)
        try:
            g = apply_perturbation(system, pert)
        except InvalidPerturbation:
            if sk is None:
                raise
            pert = random_perturbation(system, delta,
                                       sk ^ 0x9E3779B97F4A7C15, kind=kind)
            g = apply_perturbation(system, pert)
        res = _pipeline(g, base.graph.w_max, opts)
        c0 = c0_distance(system, g)
        if mode == "neighborhood":
            cells = sorted(res.gr)
            worst = float(dist[cells].max()) if cells else 0.0
            excess = max(0.0, worst - u_radius)
            full = len(res.gr) == n
        else:
            excess = 0.0
            full = len(res.gr) == n
        report.samples.append(ProbeSample(
            index=idx, kind=kind, seed=sk, c0=c0,
            n_recurrent=len(res.gr), excess=excess, full=full,
            gr_cells=tuple(sorted(res.gr)) if keep_sets else None))
        report.n_samples += 1
        hit = full if mode == "full" else excess > 0.0
        if hit and report.witness_seed is None \
                and not report.scripted_witness_used:
            report.witness_seed = sk
            report.scripted_witness_used = kind == "scripted"
        if mode == "neighborhood":
            report.max_excess = max(report.max_excess, excess)
        report.any_full = report.any_full or full
    return report


def probe_explosion(system, u_radius, delta, n_samples=100, seed=0,
                    opts=None, w_max=None, include_scripted=True,
                    keep_sets=False):
    """How far the recurrent set escapes its u_radius-neighborhood under
    perturbations of C0 size at most delta."""
    return _probe(system, "neighborhood", delta, u_radius, n_samples, seed,
                  opts, w_max, include_scripted, keep_sets)


def probe_full_explosion(system, delta, n_samples=100, seed=0, opts=None,
                         w_max=None, include_scripted=True,
                         keep_sets=False):
    """Whether chain recurrence blows up to the whole space under
    perturbations of C0 size at most delta."""
    return _probe(system, "full", delta, None, n_samples, seed, opts,
                  w_max, include_scripted, keep_sets)
