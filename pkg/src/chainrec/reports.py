"""Serialization: JSON summaries, cell-set bitmaps, CSV tables, DOT.

All set listings are sorted and all JSON keys are emitted in sorted
order, so two runs with the same seed produce byte-identical files
except for the generated_at timestamp.

The bitmap sidecar packs named cell sets: magic "CRBM", a u16 version,
u32 cell count and u16 set count (little endian), then per set a 32-byte
NUL-padded name and ceil(n_cells/8) bytes of LSB-first membership bits.
"""

from __future__ import annotations

import csv
import json
import struct
from datetime import datetime, timezone

import numpy as np

from .dynamics import MapPiece, SystemSpec, expected_region, \
    make_example
from .errors import ConfigError
from .space import complex_from_spec

_BITMAP_MAGIC = b"CRBM"
_BITMAP_VERSION = 1


def _sorted_ids(cells):
    return sorted(int(c) for c in cells)


def recurrence_summary(result, system=None):
    label = system.label if system is not None else "system"
    g = result.graph
    out = {
        "label": label,
        "n_cells": int(g.n),
        "h": float(g.h),
        "w_max": float(g.w_max),
        "slack": float(g.slack),
        "tol": float(result.tol),
        "eps": float(result.eps),
        "iterations": int(result.iterations),
        "stable": bool(result.stable),
        "sets": {
            "nonwandering": _sorted_ids(result.nw),
            "generalized": _sorted_ids(result.gr),
            "strong_chain": _sorted_ids(result.scr),
            "chain": _sorted_ids(result.cr),
        },
        "classes": [list(c) for c in result.classes],
        "lyapunov": {
            "n_layers": int(result.lyapunov.n_layers),
            "tol_neutral": float(result.lyapunov.tol_neutral),
        },
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }
    return out


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_set_bitmap(path, n_cells, named_sets):
    names = sorted(named_sets)
    with open(path, "wb") as fh:
        fh.write(_BITMAP_MAGIC)
        fh.write(struct.pack("<HIH", _BITMAP_VERSION, n_cells, len(names)))
        for name in names:
            raw = name.encode("ascii")
            if len(raw) > 32:
                raise ConfigError("set name %r longer than 32 bytes" % name)
            fh.write(raw.ljust(32, b"\0"))
            mask = np.zeros(n_cells, dtype=bool)
            ids = _sorted_ids(named_sets[name])
            if ids:
                mask[ids] = True
            fh.write(np.packbits(mask, bitorder="little").tobytes())


def read_set_bitmap(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BITMAP_MAGIC:
            raise ConfigError("not a cell-set bitmap file")
        version, n_cells, n_sets = struct.unpack("<HIH", fh.read(8))
        if version != _BITMAP_VERSION:
            raise ConfigError("unsupported bitmap version %d" % version)
        nbytes = (n_cells + 7) // 8
        sets = {}
        for _ in range(n_sets):
            name = fh.read(32).rstrip(b"\0").decode("ascii")
            bits = np.frombuffer(fh.read(nbytes), dtype=np.uint8)
            mask = np.unpackbits(bits, bitorder="little")[:n_cells]
            sets[name] = mask.astype(bool)
    return n_cells, sets


def write_lyapunov_csv(path, result):
    values = result.lyapunov.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell_id", "value"])
        for i, v in enumerate(values):
            w.writerow([i, "%.12g" % v])


def write_graph_csv(path, graph):
    header = json.dumps({"n": int(graph.n), "h": float(graph.h),
                         "slack": float(graph.slack),
                         "w_max": float(graph.w_max)}, sort_keys=True)
    with open(path, "w", newline="") as fh:
        fh.write("# %s\n" % header)
        w = csv.writer(fh)
        w.writerow(["src", "dst", "weight"])
        for i, j, v in zip(graph.src.tolist(), graph.dst.tolist(),
                           graph.w.tolist()):
            w.writerow([i, j, "%.12g" % v])


def write_dot(path, cd):
    lines = ["digraph morse {"]
    for i, comp in enumerate(cd.components):
        shape = "doublecircle" if i in cd.one_cycles else "circle"
        lines.append('  c%d [label="%d (%d cells)" shape=%s];'
                     % (i, i, len(comp), shape))
    for a, b in sorted(cd.arcs):
        lines.append("  c%d -> c%d;" % (a, b))
    for i, witness in sorted(cd.one_cycles.items()):
        lines.append('  c%d -> c%d [style=dashed label="via %d"];'
                     % (i, i, witness))
    lines.append("}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def probe_summary(report):
    out = {
        "mode": report.mode,
        "status": report.status,
        "system": report.label,
        "delta": float(report.delta),
        "n_samples": int(report.n_samples),
        "n_cells": int(report.n_cells),
        "seed": None if report.seed is None else int(report.seed),
        "baseline_recurrent": int(report.baseline_recurrent),
        "baseline_chain": int(report.baseline_chain),
        "full_explosion_found": bool(report.any_full),
        "witness_seed": None if report.witness_seed is None
                        else int(report.witness_seed),
        "scripted_witness_used": bool(report.scripted_witness_used),
        "generated_at": datetime.now(timezone.utc).isoformat(),
    }
    if report.u_radius is not None:
        out["u_radius"] = float(report.u_radius)
    if report.max_excess is not None:
        out["max_excess"] = float(report.max_excess)
    out["samples"] = [{
        "index": s.index,
        "kind": s.kind,
        "seed": None if s.seed is None else int(s.seed),
        "c0": float(s.c0),
        "n_recurrent": int(s.n_recurrent),
        "excess": float(s.excess),
        "full": bool(s.full),
    } for s in report.samples]
    return out


def expected_cells(system):
    """Cell ids of a built-in example's analytic recurrent set, or None."""
    exp = expected_region(system)
    if exp is None:
        return None
    X = system.complex
    if exp == "all":
        return set(range(X.n_cells))
    region, points = exp
    cells = X.cells_in_intervals(region)
    for p in points:
        cells.add(X.cell_of_point(X.validate_point(p)))
    return cells


def write_convergence_csv(path, rows):
    cols = ["resolution", "n_cells", "h", "nonwandering", "generalized",
            "strong_chain", "chain", "iterations", "hausdorff"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([row[c] for c in cols])


def summary_text(result, system=None):
    label = system.label if system is not None else "system"
    g = result.graph
    lines = [
        "system: %s" % label,
        "cells: %d  (h = %.6g)" % (g.n, g.h),
        "tol: %.6g   eps: %.6g   w_max: %.6g" % (result.tol, result.eps,
                                                 g.w_max),
        "nonwandering:   %6d cells" % len(result.nw),
        "generalized:    %6d cells  (%d classes, %d rounds%s)" % (
            len(result.gr), len(result.classes), result.iterations,
            "" if result.stable else ", not settled"),
        "strong chain:   %6d cells" % len(result.scr),
        "chain:          %6d cells" % len(result.cr),
        "lyapunov layers: %d" % result.lyapunov.n_layers,
    ]
    return "\n".join(lines) + "\n"


def load_system(spec, cells_per_unit=None):
    """System from a JSON-style dict: a gallery reference
    {example, params?, cells_per_unit?} or an explicit
    {complex, pieces, label?} description."""
    if "example" in spec:
        return make_example(spec["example"], spec.get("params"),
                            cells_per_unit or spec.get("cells_per_unit", 256))
    if "complex" not in spec or "pieces" not in spec:
        raise ConfigError("system spec needs 'example' or "
                          "'complex' + 'pieces'")
    X = complex_from_spec(spec["complex"], cells_per_unit)
    pieces = []
    for rec in spec["pieces"]:
        if isinstance(rec, dict):
            pieces.append(MapPiece(rec["src_edge"], rec["s0"], rec["s1"],
                                   rec["dst_edge"], rec["t0"], rec["t1"]))
        else:
            pieces.append(MapPiece(*rec))
    return SystemSpec(X, pieces, label=spec.get("label", "system"))


def load_system_file(path, cells_per_unit=None):
    with open(path) as fh:
        return load_system(json.load(fh), cells_per_unit)
