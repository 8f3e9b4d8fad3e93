"""Command-line driver: single scenarios, grid searches, Pareto fronts and reports.

    plett run    --config FILE | --kind KIND  [--seeds N] [--out DIR] [--jobs K]
    plett grid   --spec FILE|NAME             [--seeds N] [--out DIR] [--jobs K]
    plett pareto --in ROWS.csv                [--out FILE]
    plett report --in ROWS.csv [ROWS.csv ...] [--out DIR] [--eta ETA]

``--spec`` and ``--config`` also accept the name of a bundled file (see
``plett list``). The default output directory is ``$PLETT_OUT`` or
``./plett_out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from . import __version__
from .experiment import (ExperimentSpec, best_feasible, emit, load_rows, pareto_front,
                         run_grid, summarize)
from .sim import KINDS, CollisionError, ScenarioConfig, run_simulation

log = logging.getLogger("plett")

OUT_ENV = "PLETT_OUT"
DEFAULT_OUT = "plett_out"


def _default_out() -> str:
    return os.environ.get(OUT_ENV, DEFAULT_OUT)


def bundled(kind: str) -> dict[str, Path]:
    """Bundled ``scenarios`` or ``grids`` files by stem."""
    root = resources.files("plett") / "data" / kind
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def _resolve(arg: str, kind: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    found = bundled(kind).get(arg)
    if found is None:
        raise SystemExit(f"no such file or bundled {kind[:-1]}: {arg}")
    return found


def _clean(v):
    # inf rho values (aborted runs) become strings to keep the output valid JSON
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _one_run(args) -> dict:
    cfg_dict, seed, trace_dir = args
    cfg = ScenarioConfig.from_dict(cfg_dict)
    try:
        res = run_simulation(cfg, seed)
    except CollisionError as exc:
        return {"seed": seed, "error": str(exc)}
    if trace_dir is not None:
        res.write_trace(Path(trace_dir) / f"trace_seed{seed}.csv")
    return {"seed": seed, "rho_min_true": res.rho_min_true, "m": res.m,
            **{f"events_{k}": v for k, v in res.events.items()},
            "lane_change_time": res.lane_change_time, "digest": res.digest()}


def cmd_run(args) -> int:
    if args.config:
        cfg = ScenarioConfig.load(_resolve(args.config, "scenarios"))
    else:
        cfg = ScenarioConfig.default(args.kind)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(range(args.first_seed, args.first_seed + args.seeds))
    (out / "config.json").write_text(cfg.to_json() + "\n")
    cfg_dict = cfg.to_dict()
    trace_dir = str(out) if args.traces else None
    tasks = [(cfg_dict, s, trace_dir) for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_one_run, tasks))
    else:
        rows = [_one_run(t) for t in tasks]

    cols = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})

    ok = [r for r in rows if "error" not in r]
    summary = {"kind": cfg.kind, "policy": cfg.policy.kind.value, "seeds": seeds,
               "aborted": [r["seed"] for r in rows if "error" in r],
               "rho_min": min((r["rho_min_true"] for r in ok), default=-math.inf),
               "m_mean": (sum(r["m"] for r in ok) / len(ok)) if ok else None}
    summary["feasible"] = bool(ok) and not summary["aborted"] and summary["rho_min"] > 0
    _write_json(out / "summary.json", summary)

    if not args.no_plots and ok:
        from .plotting import plot_trace
        first = run_simulation(cfg, ok[0]["seed"])
        plot_trace(first, out / f"trace_seed{first.seed}.png")
    print(json.dumps(_clean(summary)))
    return 0


def cmd_grid(args) -> int:
    specs = ExperimentSpec.load(_resolve(args.spec, "grids"))
    out = Path(args.out)
    rows_by = {}
    for spec in specs:
        if args.seeds is not None:
            spec.seeds = list(range(args.seeds))
        log.info("grid %s: %d cells x %d seeds", spec.name, len(spec.cells()), len(spec.seeds))
        rows = run_grid(spec, jobs=args.jobs)
        rows_by[spec.name] = rows
        emit(rows, out / f"{spec.name}.csv")
        emit(rows, out / f"{spec.name}.json")
        b = best_feasible(rows)
        print(f"{spec.name}: {len(rows)} rows, best feasible: "
              + (f"m = {b.m_mean:g}, rho_min = {b.rho_min:.4g}, {b.params}" if b else "none"))
    _write_json(out / "summary.json", summarize(rows_by))
    return 0


def cmd_pareto(args) -> int:
    rows = load_rows(args.input)
    front = pareto_front(rows)
    if args.out:
        emit(front, args.out)
    else:
        w = csv.writer(sys.stdout)
        names = list(front[0].params) if front else []
        w.writerow(names + ["rho_min", "m_mean"])
        for r in front:
            w.writerow([r.params.get(k, "") for k in names] + [repr(r.rho_min), repr(r.m_mean)])
    return 0


def cmd_report(args) -> int:
    from .plotting import plot_feasibility, plot_pareto, plot_sweep
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows_by = {}
    for path in args.input:
        path = Path(path)
        rows = load_rows(path)
        # aborted cells carry rho_min = -inf, so this also keeps them infeasible
        for r in rows:
            r.feasible = r.rho_min > args.eta
        rows_by[path.stem] = rows
        names = list(rows[0].params) if rows else []
        if "policy.eps_rho" in names and len(names) >= 2:
            series = [n for n in names if n != "policy.eps_rho"][0]
            plot_sweep(rows, "policy.eps_rho", series, out / f"{path.stem}_sweep.png", args.eta)
        elif len(names) == 2:
            plot_feasibility(rows, names[0], names[1], out / f"{path.stem}_feasibility.png", args.eta)
    plot_pareto(rows_by, out / "pareto.png")
    summary = summarize(rows_by)
    _write_json(out / "summary.json", summary)
    for name, entry in summary.items():
        if not entry["feasible"]:
            print(f"{name}: no feasible configuration")
            continue
        extra = "".join(f", {k[len('reduction_vs_'):]}: {v:+.1f}%" for k, v in entry.items()
                        if k.startswith("reduction_vs_") and v)
        print(f"{name}: m = {entry['m_mean']:g}, rho_min = {entry['rho_min']:.4g}{extra}")
    return 0


def cmd_list(args) -> int:
    for kind in ("scenarios", "grids"):
        print(f"{kind}: " + ", ".join(sorted(bundled(kind))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plett", description="Robustness-driven event-triggered "
                                "transmission experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario over several seeds")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="scenario JSON file or bundled scenario name")
    src.add_argument("--kind", choices=KINDS, help="use the defaults of a scenario kind")
    r.add_argument("--seeds", type=int, default=20, help="number of seeds (default 20)")
    r.add_argument("--first-seed", type=int, default=0)
    r.add_argument("--out", default=None)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--traces", action="store_true", help="write a per-step CSV for every seed")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("grid", help="grid search from an experiment spec")
    g.add_argument("--spec", required=True, help="spec JSON file or bundled grid name")
    g.add_argument("--seeds", type=int, default=None, help="override the number of seeds")
    g.add_argument("--out", default=None)
    g.add_argument("--jobs", type=int, default=1)
    g.set_defaults(func=cmd_grid)

    f = sub.add_parser("pareto", help="non-dominated rows of a grid result")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--out", default=None, help="CSV/JSON file; stdout if omitted")
    f.set_defaults(func=cmd_pareto)

    rep = sub.add_parser("report", help="figures and summary from grid results")
    rep.add_argument("--in", dest="input", nargs="+", required=True,
                     help="row files; each file stem labels a policy (CETT, TT, ...)")
    rep.add_argument("--out", default=None)
    rep.add_argument("--eta", type=float, default=0.0, help="robustness margin for feasibility")
    rep.set_defaults(func=cmd_report)

    ls = sub.add_parser("list", help="bundled scenario and grid files")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "out", "") is None and args.command in ("run", "grid", "report"):
        args.out = _default_out()
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"plett: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
