"""Grid search over scenario parameters, Pareto extraction and summaries.

Grid keys are dotted paths into the scenario JSON (``policy.eps.v``,
``idm.b``...). A key made of several paths joined by ``|`` is a zipped group:
its values are tuples assigned together, which keeps coupled parameters such
as the two weights of a split consistent.

CSV schema (column order is fixed): one column per parameter path in grid
order, then ``rho_min, m_mean, m_std, feasible``. ``m_std`` is the population
standard deviation over seeds; ``rho_min`` is the minimum over seeds and is
``-inf`` when any run aborted.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .sim import CollisionError, ScenarioConfig, run_simulation, with_params

METRIC_COLUMNS = ("rho_min", "m_mean", "m_std", "feasible")


@dataclass
class ExperimentSpec:
    base: ScenarioConfig
    grid: dict[str, list]
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    eta: float = 0.0
    name: str = "experiment"

    def __post_init__(self):
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise ValueError("grid must have at least one parameter with at least one value")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        for key, values in self.grid.items():
            width = len(key.split("|"))
            if width > 1 and any(len(v) != width for v in values):
                raise ValueError(f"zipped key {key!r} needs {width}-tuples")

    @property
    def param_names(self) -> list[str]:
        return [p for key in self.grid for p in key.split("|")]

    def cells(self) -> list[dict[str, Any]]:
        """Every parameter assignment, in canonical (row-major grid) order."""
        keys = list(self.grid)
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            params = {}
            for key, value in zip(keys, combo):
                paths = key.split("|")
                values = value if len(paths) > 1 else (value,)
                params.update(zip(paths, values))
            out.append(params)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentSpec":
        data = dict(data)
        base = data.pop("base", None)
        kind = data.pop("kind", None)
        if isinstance(base, Mapping):
            base = ScenarioConfig.from_dict(base)
        elif base is None:
            base = ScenarioConfig.default(kind or "single_lane", **data.pop("overrides", {}))
        seeds = data.pop("seeds", 20)
        if isinstance(seeds, int):
            seeds = list(range(seeds))
        grid = {k: [tuple(v) if isinstance(v, list) else v for v in vals]
                for k, vals in data.pop("grid").items()}
        return cls(base=base, grid=grid, seeds=list(seeds), **data)

    def to_dict(self) -> dict:
        return {"name": self.name, "base": self.base.to_dict(),
                "grid": {k: [list(v) if isinstance(v, tuple) else v for v in vals]
                         for k, vals in self.grid.items()},
                "seeds": list(self.seeds), "eta": self.eta}

    @classmethod
    def load(cls, path: str | Path) -> list["ExperimentSpec"]:
        """A spec file holds one spec or ``{"experiments": [...]}``."""
        with open(path) as fh:
            data = json.load(fh)
        items = data["experiments"] if "experiments" in data else [data]
        return [cls.from_dict(d) for d in items]


@dataclass
class ExperimentRow:
    params: dict[str, Any]
    rho_min: float
    m_mean: float
    m_std: float
    feasible: bool
    failures: list[str] = field(default_factory=list)
    label: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentRow":
        return cls(**dict(d))


@dataclass
class RunOutcome:
    seed: int
    rho_min: float
    m: int | None
    error: str | None = None


def _run_one(args) -> RunOutcome:
    cfg_dict, seed = args
    cfg = ScenarioConfig.from_dict(cfg_dict)
    try:
        res = run_simulation(cfg, seed)
    except CollisionError as exc:
        return RunOutcome(seed, -math.inf, None, f"seed {seed}: {exc}")
    return RunOutcome(seed, res.rho_min_true, res.m)


def aggregate(params: Mapping[str, Any], outcomes: Sequence[RunOutcome], eta: float,
              label: str = "") -> ExperimentRow:
    """Fold per-seed outcomes into a row; feasible iff every seed stays above ``eta``."""
    ms = [o.m for o in outcomes if o.m is not None]
    rho_min = min(o.rho_min for o in outcomes)
    m_mean = float(np.mean(ms)) if ms else math.nan
    m_std = float(np.std(ms)) if ms else math.nan
    failures = [o.error for o in outcomes if o.error]
    return ExperimentRow(dict(params), float(rho_min), m_mean, m_std,
                         bool(rho_min > eta and not failures), failures, label)


def run_grid(spec: ExperimentSpec, jobs: int = 1) -> list[ExperimentRow]:
    """Run every cell of the grid for every seed.

    Runs are independent, so ``jobs > 1`` fans them out to worker processes;
    results are folded in canonical order, so the rows do not depend on ``jobs``.
    Aborted runs (collisions) make their cell infeasible but do not stop the grid.
    """
    cells = spec.cells()
    cfg_dicts = [with_params(spec.base, p).to_dict() for p in cells]
    tasks = [(c, s) for c in cfg_dicts for s in spec.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, tasks, chunksize=max(1, len(spec.seeds) // 2)))
    else:
        outcomes = [_run_one(t) for t in tasks]
    n = len(spec.seeds)
    return [aggregate(p, outcomes[i * n:(i + 1) * n], spec.eta, spec.name)
            for i, p in enumerate(cells)]


def _dominates(a: ExperimentRow, b: ExperimentRow) -> bool:
    return (a.rho_min >= b.rho_min and a.m_mean <= b.m_mean
            and (a.rho_min > b.rho_min or a.m_mean < b.m_mean))


def pareto_front(rows: Sequence[ExperimentRow]) -> list[ExperimentRow]:
    """Rows not dominated under (maximize ``rho_min``, minimize ``m_mean``).

    Input order is kept. Of several rows with identical objectives only the
    first is kept. Rows without a mean event count are skipped.
    """
    if not rows:
        raise ValueError("pareto_front needs at least one row")
    usable = [r for r in rows if not math.isnan(r.m_mean)]
    front, seen = [], set()
    for r in usable:
        key = (r.rho_min, r.m_mean)
        if key in seen:
            continue
        if not any(_dominates(o, r) for o in usable):
            front.append(r)
            seen.add(key)
    return front


def reduction(m: float, m_ref: float) -> float:
    """Percentage of events saved relative to ``m_ref``."""
    if m_ref == 0:
        return 0.0
    return 100.0 * (1.0 - m / m_ref)


def best_feasible(rows: Iterable[ExperimentRow]) -> ExperimentRow | None:
    feasible = [r for r in rows if r.feasible]
    return min(feasible, key=lambda r: r.m_mean) if feasible else None


def summarize(rows_by_policy: Mapping[str, Sequence[ExperimentRow]]) -> dict:
    """Best feasible row per policy with reductions against CETT and TT."""
    best = {k: best_feasible(v) for k, v in rows_by_policy.items()}
    ref = {k: (best[k].m_mean if best.get(k) else None) for k in ("CETT", "TT")}
    report = {}
    for name, row in best.items():
        if row is None:
            report[name] = {"feasible": False}
            continue
        entry = {"feasible": True, "params": row.params, "rho_min": row.rho_min,
                 "m_mean": row.m_mean, "m_std": row.m_std}
        for k, m_ref in ref.items():
            if m_ref is not None:
                entry[f"reduction_vs_{k}"] = reduction(row.m_mean, m_ref)
        report[name] = entry
    return report


def _columns(rows: Sequence[ExperimentRow]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r.params:
            if k not in cols:
                cols.append(k)
    return cols


def emit(rows: Sequence[ExperimentRow], path: str | Path, fmt: str | None = None) -> Path:
    """Write rows as CSV (fixed column order) or JSON (lossless)."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".")
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path.write_text(json.dumps([r.to_dict() for r in rows], indent=2))
        else:
            cols = _columns(rows)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(cols + list(METRIC_COLUMNS))
                for r in rows:
                    w.writerow([_fmt(r.params.get(c, "")) for c in cols] +
                               [_fmt(r.rho_min), _fmt(r.m_mean), _fmt(r.m_std), int(r.feasible)])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _parse_cell(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def load_rows(path: str | Path) -> list[ExperimentRow]:
    path = Path(path)
    if path.suffix == ".json":
        return [ExperimentRow.from_dict(d) for d in json.loads(path.read_text())]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        params = header[:-len(METRIC_COLUMNS)]
        if tuple(header[-len(METRIC_COLUMNS):]) != METRIC_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        rows = []
        for rec in reader:
            p = {k: _parse_cell(v) for k, v in zip(params, rec) if v != ""}
            rho, mm, ms, feas = rec[-4:]
            rows.append(ExperimentRow(p, float(rho), float(mm), float(ms), feas == "1"))
    return rows
