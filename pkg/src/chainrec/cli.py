"""Command line interface.

Subcommands:

  analyze      full recurrence analysis of one system, written to --out
  probe        perturbation stability probe (neighborhood or full mode)
  convergence  recurrent-set sizes across grid refinements, as CSV
  export-dot   connection digraph of the recurrent components, as DOT

Systems come from the built-in gallery (--example) or a JSON file
(--system).  A TOML --config may hold any long flag's value under the
same name; explicit flags win.  Exit status: 0 on success, 1 on runtime
failures, 2 on configuration errors (with an error JSON on stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .dynamics import EXAMPLE_IDS, make_example
from .errors import ChainrecError, ConfigError
from .explosion import probe_explosion, probe_full_explosion
from .morse import connection_digraph
from .recurrence import RecurrenceOptions, generalized_recurrent
from .reports import expected_cells, load_system_file, probe_summary, \
    recurrence_summary, summary_text, write_convergence_csv, write_dot, \
    write_graph_csv, write_json, write_lyapunov_csv, write_set_bitmap
from .space import hausdorff_cells
from .transition import build_transition_graph


def _load_toml(path):
    try:
        import tomllib
    except ImportError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file %s not found" % path)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("bad config file: %s" % exc)


def _build_parser():
    p = argparse.ArgumentParser(prog="chainrec", add_help=True)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--example", choices=EXAMPLE_IDS)
        sp.add_argument("--system", help="JSON system description file")
        sp.add_argument("--resolution", type=int, default=None,
                        help="cells per unit length (default 256)")
        sp.add_argument("--tol", type=float, default=None,
                        help="chain cost budget (default 1.2 * cell size)")
        sp.add_argument("--eps", type=float, default=None,
                        help="hop budget (default 1.25 * cell size)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--config", default=None, help="TOML config file")

    sp = sub.add_parser("analyze", help="full recurrence analysis")
    common(sp)

    sp = sub.add_parser("probe", help="perturbation stability probe")
    common(sp)
    sp.add_argument("--mode", choices=("neighborhood", "full"),
                    default=None)
    sp.add_argument("--delta", type=float, action="append", default=None,
                    help="perturbation size (repeatable)")
    sp.add_argument("--u-radius", type=float, default=None,
                    dest="u_radius")
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("convergence", help="refinement sweep")
    common(sp)
    sp.add_argument("--refine", type=int, action="append", default=None,
                    help="refinement factor (repeatable)")

    sp = sub.add_parser("export-dot", help="write the connection digraph")
    common(sp)
    return p


_DEFAULTS = {
    "resolution": 256,
    "mode": "neighborhood",
    "delta": [0.01],
    "u_radius": 0.1,
    "samples": 20,
    "seed": 0,
    "refine": [2, 4],
    "out": ".",
}


def _merge(args):
    cfg = {}
    if getattr(args, "config", None):
        raw = _load_toml(args.config)
        for key, val in raw.items():
            cfg[key.replace("-", "_")] = val
    for key, val in vars(args).items():
        if key in ("command", "config"):
            continue
        if val is not None:
            cfg[key] = val
    for key, val in _DEFAULTS.items():
        cfg.setdefault(key, val)
    if isinstance(cfg.get("delta"), (int, float)):
        cfg["delta"] = [cfg["delta"]]
    if isinstance(cfg.get("refine"), int):
        cfg["refine"] = [cfg["refine"]]
    return cfg


def _get_system(cfg):
    res = int(cfg["resolution"])
    if res < 1:
        raise ConfigError("resolution must be positive")
    if cfg.get("example"):
        return make_example(cfg["example"], cells_per_unit=res)
    if cfg.get("system"):
        try:
            return load_system_file(cfg["system"], cells_per_unit=res)
        except FileNotFoundError:
            raise ConfigError("system file %s not found" % cfg["system"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError("bad system file: %s" % exc)
    raise ConfigError("pass --example or --system")


def _options(cfg):
    return RecurrenceOptions(tol=cfg.get("tol"), eps=cfg.get("eps"))


def _outdir(cfg):
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


def _run_analyze(cfg):
    system = _get_system(cfg)
    result = generalized_recurrent(build_transition_graph(system),
                                   _options(cfg))
    out = _outdir(cfg)
    write_json(os.path.join(out, "recurrence.json"),
               recurrence_summary(result, system))
    write_set_bitmap(os.path.join(out, "sets.bits"), result.graph.n, {
        "nonwandering": result.nw,
        "generalized": result.gr,
        "strong_chain": result.scr,
        "chain": result.cr,
    })
    write_lyapunov_csv(os.path.join(out, "lyapunov.csv"), result)
    write_graph_csv(os.path.join(out, "graph.csv"), result.graph)
    cd = connection_digraph(result)
    write_dot(os.path.join(out, "morse.dot"), cd)
    text = summary_text(result, system)
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return 0


def _run_probe(cfg):
    system = _get_system(cfg)
    out = _outdir(cfg)
    for k, delta in enumerate(cfg["delta"]):
        if cfg["mode"] == "full":
            rep = probe_full_explosion(system, delta,
                                       n_samples=int(cfg["samples"]),
                                       seed=int(cfg["seed"]),
                                       opts=_options(cfg))
        else:
            rep = probe_explosion(system, cfg["u_radius"], delta,
                                  n_samples=int(cfg["samples"]),
                                  seed=int(cfg["seed"]),
                                  opts=_options(cfg))
        write_json(os.path.join(out, "probe_%d.json" % k),
                   probe_summary(rep))
        if rep.status == "not-applicable":
            line = "delta %g: not applicable (recurrence fills the space)" \
                % delta
        elif cfg["mode"] == "full":
            line = "delta %g: full explosion %s over %d samples" \
                % (delta, "observed" if rep.any_full else "not observed",
                   rep.n_samples)
        else:
            line = "delta %g: max excess %.6g over %d samples" \
                % (delta, rep.max_excess, rep.n_samples)
        sys.stdout.write(line + "\n")
    return 0


def _run_convergence(cfg):
    base = int(cfg["resolution"])
    factors = [1] + [int(f) for f in cfg["refine"]]
    rows = []
    for f in factors:
        res = base * f
        cfg_f = dict(cfg, resolution=res)
        system = _get_system(cfg_f)
        result = generalized_recurrent(build_transition_graph(system),
                                       _options(cfg))
        exp = expected_cells(system)
        rows.append({
            "resolution": res,
            "n_cells": result.graph.n,
            "h": "%.12g" % result.graph.h,
            "nonwandering": len(result.nw),
            "generalized": len(result.gr),
            "strong_chain": len(result.scr),
            "chain": len(result.cr),
            "iterations": result.iterations,
            "hausdorff": "" if exp is None else
                         "%.12g" % hausdorff_cells(system.complex,
                                                   result.gr, exp),
        })
    out = _outdir(cfg)
    path = os.path.join(out, "convergence.csv")
    write_convergence_csv(path, rows)
    sys.stdout.write("wrote %s (%d resolutions)\n" % (path, len(rows)))
    return 0


def _run_export_dot(cfg):
    system = _get_system(cfg)
    result = generalized_recurrent(build_transition_graph(system),
                                   _options(cfg))
    out = _outdir(cfg)
    path = os.path.join(out, "morse.dot")
    write_dot(path, connection_digraph(result))
    sys.stdout.write("wrote %s\n" % path)
    return 0


_RUNNERS = {
    "analyze": _run_analyze,
    "probe": _run_probe,
    "convergence": _run_convergence,
    "export-dot": _run_export_dot,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge(args)
        return _RUNNERS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(json.dumps(exc.to_json(), sort_keys=True) + "\n")
        return 2
    except ChainrecError as exc:
        sys.stderr.write(json.dumps(exc.to_json(), sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
