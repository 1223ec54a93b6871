"""Command line front end: analyze -> reduce -> simulate -> verify, plus report."""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import io
from .chain import assemble_chain, long_time_structure
from .errors import (AssumptionViolated, DescentStall, HeightUnreachable, KramersError, LeftBox,
                     MissingStageOutput, UnknownPotential)
from .heights import analyze
from .landscape import verify_field_conditions
from .potential import CATALOG, load_potential, resolve_potential

EXIT_OK, EXIT_FAIL, EXIT_ASSUMPTION, EXIT_UNKNOWN, EXIT_MISSING = 0, 1, 2, 3, 4

GRAPH_FILE = "landscape_graph.json"
CHAIN_FILE = "reduced_chain.json"
STRUCTURE_FILE = "chain_structure.json"
STATS_FILE = "stats.json"
EVENTS_FILE = "events.csv"
VERIFY_FILE = "verify_report.json"
REPORT_FILE = "report.json"
PLOTS_FILE = "plot_manifest.json"
SAMPLES_FILE = "testfn_samples.csv"

GLOBAL_DEFAULTS = {"potential": None, "ell": None, "out": "run", "seed": 0, "threads": None,
                   "config": None, "dim": None}

EXPERIMENTS = ("exit", "transition", "subscale", "mixing", "gibbs", "saddle_exit", "hitting",
               "feynman_kac")


def _add_globals(p, suppress):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--potential", help="catalog name or potential JSON file", **kw)
    p.add_argument("--ell", help="rotational field: none, rot90:c, or 'rot90_scaled c'", **kw)
    p.add_argument("--dim", type=int, help="dimension for the bowl potential", **kw)
    p.add_argument("--out", help="output directory (default: run)", **kw)
    p.add_argument("--seed", type=int, help="base random seed", **kw)
    p.add_argument("--threads", type=int, help="worker threads (env KRAMERS_THREADS)", **kw)
    p.add_argument("--config", help="JSON file with defaults for any option", **kw)


def build_parser():
    parser = argparse.ArgumentParser(prog="kramers", description=__doc__)
    _add_globals(parser, suppress=False)
    parser.set_defaults(**{k: v for k, v in GLOBAL_DEFAULTS.items()})
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="critical points, descent graph, heights")
    _add_globals(p, True)
    p.add_argument("--resolution", type=int, default=None, help="Newton seeds per axis")

    p = sub.add_parser("reduce", help="weights, generator and long-time structure")
    _add_globals(p, True)

    p = sub.add_parser("simulate", help="Monte Carlo experiments")
    _add_globals(p, True)
    p.add_argument("--experiment", choices=EXPERIMENTS, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t", type=float, default=None, help="probe time in units of theta1")
    p.add_argument("--start", type=int, default=None, help="starting minimum id")
    p.add_argument("--target", type=int, default=None, help="target minimum id")
    p.add_argument("--r0", type=float, default=None, help="well sublevel offset")
    p.add_argument("--backend", choices=("cython", "python"), default=None)

    p = sub.add_parser("verify", help="check stage outputs and acceptance criteria")
    _add_globals(p, True)
    p.add_argument("--all", action="store_true", help="run every acceptance check")
    p.add_argument("--check", action="append", default=None, help="acceptance check id (repeatable)")

    p = sub.add_parser("report", help="collect outputs, plot data and test-function samples")
    _add_globals(p, True)
    p.add_argument("--eps", type=float, default=None)
    return parser


def _apply_config(args):
    if not args.config:
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    flat = dict(cfg.get("config", {}))
    flat.update({k: v for k, v in cfg.items() if k != "config"})
    if "experiment" not in flat and "kind" in flat:
        flat["experiment"] = flat["kind"]
    if "n_paths" in flat and "paths" not in flat:
        flat["paths"] = flat["n_paths"]
    for key, val in flat.items():
        if not hasattr(args, key):
            continue
        cur = getattr(args, key)
        if cur is None or (key in GLOBAL_DEFAULTS and cur == GLOBAL_DEFAULTS[key]):
            setattr(args, key, val)
    return args


def _threads(args):
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("KRAMERS_THREADS")
    return max(1, int(env)) if env else 1


def _path(args, name):
    return os.path.join(args.out, name)


def _spec_from_args(args):
    if args.potential is None:
        raise SystemExit("--potential is required")
    return resolve_potential(args.potential, ell=args.ell, dim=args.dim)


def _graph_from_run(args):
    doc = io.read_json(_path(args, GRAPH_FILE), "analyze")
    spec = load_potential(doc["potential"])
    res = doc.get("resolution", 21)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return analyze(spec, resolution=res), doc


def cmd_analyze(args):
    spec = _spec_from_args(args)
    field = verify_field_conditions(spec)
    if not field.passed:
        raise AssumptionViolated(f"field conditions fail: max|div ell| = {field.max_div:g}, "
                                 f"max|grad U . ell| = {field.max_orth:g}")
    res = args.resolution or 21
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        g = analyze(spec, resolution=res)
    payload = {"potential": g.spec.to_json(), "resolution": res, "field_check": field.to_json(),
               "certified_region": "box only", **g.to_json(),
               "warnings": sorted({f"{w.category.__name__}: {w.message}" for w in caught})}
    io.write_json(_path(args, GRAPH_FILE), "landscape_graph", payload)
    io.write_metadata(args.out, "analyze")
    print(f"{len(g.minima)} minima, {len(g.saddles)} saddles, {len(g.higher)} higher-index; "
          f"d1 = {g.d1:.10g} -> {_path(args, GRAPH_FILE)}")
    return EXIT_OK


def cmd_reduce(args):
    g, _ = _graph_from_run(args)
    ch = assemble_chain(g)
    cs = long_time_structure(ch)
    io.write_json(_path(args, CHAIN_FILE), "reduced_chain", ch.to_json())
    io.write_json(_path(args, STRUCTURE_FILE), "chain_structure",
                  {"states": ch.states, **cs.to_json(ch.states)})
    io.write_metadata(args.out, "reduce")
    print(f"generator on {len(ch.states)} minima -> {_path(args, CHAIN_FILE)}")
    return EXIT_OK


def _sim_defaults(args, g):
    from .sim.experiments import shallowest

    exp = args.experiment or "exit"
    eps = args.eps if args.eps is not None else {"mixing": 0.02, "gibbs": 0.05, "saddle_exit": 0.05,
                                                 "hitting": 0.05, "exit": 0.25}.get(exp, 0.15)
    return exp, eps, shallowest(g)


def cmd_simulate(args):
    from .sim import SimConfig, WellSet
    from .sim import experiments as ex

    g, _ = _graph_from_run(args)
    io.read_json(_path(args, CHAIN_FILE), "reduce")
    exp, eps, start0 = _sim_defaults(args, g)
    th = _threads(args)
    kw = {"seed": args.seed, "dt": args.dt}
    start = args.start if args.start is not None else start0
    res = None
    if exp == "exit":
        ids = g.minima_ids
        target = args.target if args.target is not None else next(m for m in ids if m != start)
        rep, res = ex.exit_time_experiment(g, eps, n_paths=args.paths or 2000, start=start,
                                           target=target, r0=args.r0, threads=th,
                                           backend=args.backend, **kw)
    elif exp == "transition":
        rep, res = ex.transition_law_experiment(g, eps, args.t if args.t is not None else 1.0,
                                                n_paths=args.paths or 1000, start=start, r0=args.r0,
                                                threads=th, backend=args.backend, **kw)
    elif exp == "subscale":
        rep, res = ex.subscale_experiment(g, eps, n_paths=args.paths or 1000, start=start,
                                          r0=args.r0, threads=th, backend=args.backend, **kw)
    elif exp == "mixing":
        rep = ex.mixing_experiment(g.spec, g.point(start), eps, n_paths=args.paths or 2000, **kw)
    elif exp == "gibbs":
        rep = ex.gibbs_checks(g, r0=args.r0)
    elif exp == "saddle_exit":
        rep, res = ex.saddle_exit_experiment(g, eps=eps, n_paths=args.paths or 200, threads=th,
                                             backend=args.backend, **kw)
    elif exp == "hitting":
        rep, res = ex.hitting_wells_experiment(g, eps=eps, n_starts=args.paths or 100, r0=args.r0,
                                               threads=th, backend=args.backend, **kw)
    else:
        ws = WellSet(g, args.r0)
        t = args.t if args.t is not None else 1.0
        cfg = SimConfig(eps=eps, dt=args.dt, n_paths=args.paths or 1000, seed=args.seed,
                        threads=th, backend=args.backend)
        x0 = g.point(start).x
        # u0 = indicator of the start well
        u0 = lambda X: (ws.label(X) == ws.index(start)).astype(float)
        est, half = ex.feynman_kac_u(g.spec, u0, x0, t, cfg, theta1=g.theta1(eps))
        from .chain import semigroup
        ch = assemble_chain(g)
        pred = float(semigroup(ch, t)[ch.index(start), ch.index(start)])
        rep = {"kind": "feynman_kac", "eps": eps, "t_scaled": t, "start": start, "estimate": est,
               "ci95": half, "predicted": pred, "n_paths": cfg.n_paths}
    io.write_json(_path(args, STATS_FILE), "stats", {"experiment": exp, "seed": args.seed,
                                                     "result": rep})
    if res is not None:
        rows = res.events_csv_rows()
        io.write_csv(_path(args, EVENTS_FILE), ["path", "time", "label"], rows)
    io.write_metadata(args.out, "simulate", {"threads": th})
    print(json.dumps(io._clean({k: v for k, v in rep.items() if not isinstance(v, (list, dict))})))
    return EXIT_OK


def cmd_verify(args):
    from .verify import check_run_outputs, run_checks

    results = []
    gpath = _path(args, GRAPH_FILE)
    have_run = os.path.exists(gpath)
    if not (args.all or args.check) or have_run:
        gdoc = io.read_json(gpath, "analyze")
        cdoc = io.read_json(_path(args, CHAIN_FILE), "reduce")
        results.append(check_run_outputs(gdoc, cdoc, load_potential(gdoc["potential"])))
    ids = None if args.all else args.check
    if args.all or args.check:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results.extend(run_checks(ids, seed=args.seed, threads=_threads(args)))
    for r in results:
        print(r.line())
    failed = [r.id for r in results if not r.passed]
    io.write_json(_path(args, VERIFY_FILE), "verify_report",
                  {"checks": [r.to_json() for r in results], "failed": failed,
                   "passed": not failed})
    io.write_metadata(args.out, "verify", {"runtimes_s": {r.id: r.runtime for r in results}})
    return EXIT_FAIL if failed else EXIT_OK


def cmd_report(args):
    from .testfn import dump_samples, q_partition

    g, gdoc = _graph_from_run(args)
    docs = {"landscape_graph": gdoc}
    for key, name in (("reduced_chain", CHAIN_FILE), ("chain_structure", STRUCTURE_FILE),
                      ("stats", STATS_FILE), ("verify_report", VERIFY_FILE)):
        p = _path(args, name)
        if os.path.exists(p):
            docs[key] = io.read_json(p)
    plots = [{"name": "critical_points", "source": GRAPH_FILE, "type": "scatter",
              "x": "critical_points[].x", "color": "critical_points[].kind"}]
    eps = args.eps if args.eps is not None else 0.05
    m = g.minima_ids[int(np.argmin(g.gamma))]
    i = g.min_index(m)
    H = float(g.minima[i].u + g.gamma[i])
    try:
        Q = q_partition(g, m, H, eps)
        axes = [np.linspace(lo, hi, 41 if g.spec.dim > 1 else 401) for lo, hi in g.spec.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([a.ravel() for a in mesh], axis=-1)
        labels, q = Q.classify(X)
        dump_samples(_path(args, SAMPLES_FILE), X, q, labels)
        plots.append({"name": "test_function", "source": SAMPLES_FILE, "type": "heatmap"
                      if g.spec.dim == 2 else "line", "columns": ["x0", "x1", "p", "label"][
                          :g.spec.dim] + ["p", "label"], "eps": eps, "well_minimum": m,
                      "level": H})
    except (ValueError, KramersError) as exc:
        plots.append({"name": "test_function", "skipped": str(exc)})
    if "stats" in docs:
        plots.append({"name": "simulation", "source": STATS_FILE, "type": "table"})
    io.write_json(_path(args, PLOTS_FILE), "plot_manifest", {"plots": plots})
    summary = {"potential": gdoc["potential"]["name"], "d1": gdoc["d1"],
               "minima": gdoc["minima"], "saddles": gdoc["saddles"],
               "files": sorted(docs)}
    if "reduced_chain" in docs:
        summary["L"] = docs["reduced_chain"]["L"]
    if "verify_report" in docs:
        summary["verify_passed"] = docs["verify_report"]["passed"]
    io.write_json(_path(args, REPORT_FILE), "report", summary)
    io.write_metadata(args.out, "report")
    print(io.dumps(summary), end="")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "reduce": cmd_reduce, "simulate": cmd_simulate,
            "verify": cmd_verify, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = _apply_config(parser.parse_args(argv))
    try:
        return COMMANDS[args.command](args)
    except UnknownPotential as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        print("available potentials: " + ", ".join(sorted(CATALOG)), file=sys.stderr)
        return EXIT_UNKNOWN
    except MissingStageOutput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (AssumptionViolated, LeftBox, DescentStall, HeightUnreachable) as exc:
        print(f"assumption violated: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except KramersError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
