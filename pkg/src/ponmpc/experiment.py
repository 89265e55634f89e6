"""Experiment sweeps: configuration, parallel execution and result files."""

from __future__ import annotations

import csv
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from ponmpc.sim import ClassRequirement, Scenario, run
from ponmpc.traffic import TrafficConfig

SCHEMA_VERSION = 1
OUTPUT_ENV = "PONMPC_OUTPUT_DIR"

COORD_COLUMNS = ["point", "allocator", "class_load", "best_effort_load", "horizon",
                 "noise_variance", "seed", "duration_slots", "scenario_hash"]
METRIC_COLUMNS = ["group", "offered", "served", "deadline_drops", "buffer_drops", "residual",
                  "violation_pct", "drop_pct", "mean_delay_s", "delay_variance_s2",
                  "max_delay_s", "late_served", "throughput_pct", "max_poll_gap_s", "conserved"]
CSV_COLUMNS = ["schema_version", *COORD_COLUMNS, *METRIC_COLUMNS]
NUMERIC_METRICS = [c for c in METRIC_COLUMNS if c not in ("group", "conserved")]


class ConfigError(ValueError):
    pass


class UnknownMetricError(ValueError):
    pass


# --- configuration --------------------------------------------------------

FULL_SCALE = {
    # the 16-ONU setup: 100 Mbps per class SLA and per ONU user link
    "n_onus": 16,
    "classes": (ClassRequirement(1e-3, 100e6), ClassRequirement(4e-3, 100e6)),
    "onu_link_bps": 100e6,
}


@dataclass
class ExperimentSpec:
    base: Scenario = field(default_factory=Scenario)
    class_loads: list[float] | None = None      # total over classes
    class_split: list[float] | None = None                      # per-class share
    best_effort_loads: list[float] | None = None
    allocators: list[str] | None = None
    horizons: list[int] | None = None
    noise_variances: list[float | None] | None = None
    seeds: list[int] | None = None
    repetitions: int = 1
    output_dir: str = "results"
    max_points: int = 10_000
    workers: int = 1

    def axes(self) -> dict[str, list]:
        """Sweep axes; an axis left unset takes the base scenario's value,
        an explicitly empty axis makes the sweep empty."""
        b = self.base

        def axis(values, default):
            return list(values) if values is not None else [default]

        seeds = axis(self.seeds, b.seed)
        return {
            "allocator": axis(self.allocators, b.allocator),
            "class_load": axis(self.class_loads, sum(tc.load for tc in b.class_traffic)),
            "best_effort_load": axis(self.best_effort_loads, b.best_effort.load),
            "horizon": axis(self.horizons, b.horizon),
            "noise_variance": axis(self.noise_variances, b.noise_variance),
            # repetition r of seed s runs with seed s + 10007 r
            "seed": [s + 10_007 * r for s in seeds for r in range(self.repetitions)],
        }

    def n_points(self) -> int:
        return int(np.prod([len(v) for v in self.axes().values()]))

    def points(self) -> list[tuple[dict, Scenario]]:
        """Every sweep point as ``(coordinates, scenario)`` in a fixed order."""
        n = self.n_points()
        if n > self.max_points:
            raise ConfigError(f"sweep has {n} points, cap is {self.max_points}")
        axes = self.axes()
        n_cls = len(self.base.classes)
        split = self.class_split or [1.0] * n_cls
        if len(split) != n_cls or sum(split) <= 0:
            raise ConfigError("class_split needs one positive weight per class")
        out = []
        for combo in itertools.product(*axes.values()):
            coord = dict(zip(axes, combo))
            b = self.base
            traffic = tuple(replace(tc, load=coord["class_load"] * w / sum(split))
                            for tc, w in zip(b.class_traffic, split))
            sc = replace(b, allocator=coord["allocator"], class_traffic=traffic,
                         best_effort=replace(b.best_effort, load=coord["best_effort_load"]),
                         horizon=int(coord["horizon"]), noise_variance=coord["noise_variance"],
                         seed=int(coord["seed"]))
            out.append(({"point": len(out), **coord}, sc))
        return out


def _coerce(value, like):
    # YAML 1.1 reads "1e-3" as a string, so numbers are cast by field type
    if value is None or like is None:
        return None if value is None else (float(value) if isinstance(value, str) else value)
    if isinstance(like, bool):
        return bool(value)
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def _traffic(d: dict | None, default: TrafficConfig) -> TrafficConfig:
    if not d:
        return default
    unknown = set(d) - {f.name for f in fields(TrafficConfig)} - {"deadline_s", "bandwidth_bps"}
    if unknown:
        raise ConfigError(f"unknown traffic keys {sorted(unknown)}")
    kw = {f.name: _coerce(d[f.name], getattr(default, f.name))
          for f in fields(TrafficConfig) if f.name in d}
    if kw.get("onu_weights") is not None:
        kw["onu_weights"] = tuple(float(w) for w in kw["onu_weights"])
    return replace(default, **kw)


def scenario_from_dict(d: dict | None, full_scale: bool = False) -> Scenario:
    d = dict(d or {})
    base = Scenario()
    if full_scale:
        base = replace(base, **FULL_SCALE)
    kw = {}
    if "classes" in d:
        classes = d.pop("classes")
        kw["classes"] = tuple(ClassRequirement(float(c["deadline_s"]), float(c["bandwidth_bps"]))
                              for c in classes)
        kw["class_traffic"] = tuple(_traffic(c, TrafficConfig()) for c in classes)
    if "best_effort" in d:
        kw["best_effort"] = _traffic(d.pop("best_effort"), base.best_effort)
    if "distances_km" in d:
        dist = d.pop("distances_km")
        kw["distances_km"] = None if dist is None else tuple(float(x) for x in dist)
    if "allocator_params" in d:
        kw["allocator_params"] = dict(d.pop("allocator_params") or {})
    names = {f.name for f in fields(Scenario)}
    for key, value in d.items():
        if key not in names:
            raise ConfigError(f"unknown scenario key {key!r}")
        kw[key] = _coerce(value, getattr(base, key))
    return replace(base, **kw)


def spec_from_dict(d: dict | None) -> ExperimentSpec:
    d = dict(d or {})
    unknown = set(d) - {"scenario", "sweep", "output_dir", "workers", "full_scale"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    base = scenario_from_dict(d.get("scenario"), bool(d.get("full_scale", False)))
    sweep = dict(d.get("sweep") or {})
    spec = ExperimentSpec(base=base)
    for key, cast in (("class_loads", float), ("best_effort_loads", float), ("allocators", str),
                      ("horizons", int), ("seeds", int)):
        if key in sweep:
            setattr(spec, key, [cast(v) for v in sweep.pop(key)])
    if "noise_variances" in sweep:
        spec.noise_variances = [None if v is None else float(v) for v in sweep.pop("noise_variances")]
    if "class_split" in sweep:
        spec.class_split = [float(v) for v in sweep.pop("class_split")]
    for key in ("repetitions", "max_points"):
        if key in sweep:
            setattr(spec, key, int(sweep.pop(key)))
    if sweep:
        raise ConfigError(f"unknown sweep keys {sorted(sweep)}")
    spec.output_dir = os.environ.get(OUTPUT_ENV) or str(d.get("output_dir", spec.output_dir))
    spec.workers = int(d.get("workers", spec.workers))
    return spec


def load_spec(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(yaml.safe_load(fh))


def validate_spec(spec: ExperimentSpec) -> list[str]:
    """Problems found while expanding and checking every sweep point."""
    problems = []
    try:
        points = spec.points()
    except ConfigError as exc:
        return [str(exc)]
    for coord, sc in points:
        try:
            sc.validate()
            sc.specs()
            for tc in sc.class_traffic:
                if tc.load > 1.0:
                    problems.append(f"point {coord['point']}: class load {tc.load} exceeds the link")
        except ValueError as exc:
            problems.append(f"point {coord['point']}: {exc}")
    return problems


# --- execution ------------------------------------------------------------

def _run_point(args):
    coord, sc = args
    try:
        rep = run(sc)
    except Exception as exc:     # reported per point; the sweep continues
        return coord, sc, None, f"{type(exc).__name__}: {exc}"
    return coord, sc, rep, None


def _csv_rows(coord: dict, sc: Scenario, report) -> list[list]:
    rows = []
    for g in report.rows():
        g["group"] = g.pop("name")
        row = {"schema_version": SCHEMA_VERSION, **coord, "duration_slots": sc.duration_slots,
               "scenario_hash": sc.digest(), **g,
               "conserved": report.conserved()}
        rows.append(["" if row[c] is None else row[c] for c in CSV_COLUMNS])
    return rows


@dataclass
class ExperimentResult:
    csv_path: Path
    summary_path: Path
    failed: list[dict]
    rows: list[dict]

    @property
    def exit_code(self) -> int:
        return 1 if self.failed else 0


def run_experiment(spec: ExperimentSpec, output_dir=None) -> ExperimentResult:
    out = Path(output_dir or os.environ.get(OUTPUT_ENV) or spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = spec.points()
    if spec.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_run_point, points))
    else:
        results = [_run_point(p) for p in points]

    csv_path = out / "results.csv"
    rows, failed = [], []
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for coord, sc, rep, err in results:
            if err is not None:
                failed.append({**coord, "error": err})
                continue
            for r in _csv_rows(coord, sc, rep):
                w.writerow(r)
                rows.append(dict(zip(CSV_COLUMNS, r)))

    summary = {
        "schema_version": SCHEMA_VERSION,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": _echo(spec),
        "points": len(points),
        "failed_points": failed,
        "aggregates": _aggregates(rows, spec),
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, default=str) + "\n", encoding="utf-8")
    return ExperimentResult(csv_path, summary_path, failed, rows)


def _echo(spec: ExperimentSpec) -> dict:
    d = {f.name: getattr(spec, f.name) for f in fields(spec) if f.name != "base"}
    d["base"] = spec.base.to_dict()
    return d


def _aggregates(rows: list[dict], spec: ExperimentSpec) -> dict:
    """Mean violation, throughput and delay per axis value and group."""
    agg: dict = {}
    for axis in spec.axes():
        per: dict = {}
        for r in rows:
            bucket = per.setdefault(str(r[axis]), {}).setdefault(r["group"], [])
            bucket.append(r)
        agg[axis] = {
            value: {g: {m: float(np.mean([float(r[m]) for r in rs]))
                        for m in ("violation_pct", "throughput_pct", "mean_delay_s")}
                    for g, rs in groups.items()}
            for value, groups in per.items()
        }
    return agg


# --- plot data ------------------------------------------------------------

def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_plot_data(csv_path, metric: str, group_by: str, out_dir=None,
                   x: str = "class_load", group: str | None = "class1") -> list[Path]:
    """Write one whitespace-delimited ``x y`` file per curve.

    ``group_by`` is a CSV coordinate column (``allocator``, ``horizon`` ...)
    or ``class``, which makes one curve per delay class.  Otherwise rows are
    restricted to ``group`` (``None`` keeps all).  Points sharing an x value
    (several seeds, say) are averaged.
    """
    if metric not in NUMERIC_METRICS:
        raise UnknownMetricError(f"unknown metric {metric!r}; expected one of {', '.join(NUMERIC_METRICS)}")
    rows = read_csv(csv_path)
    if not rows:
        raise ValueError(f"{csv_path} has no data rows")
    by_class = group_by == "class"
    key = "group" if by_class else group_by
    if key not in rows[0]:
        raise ValueError(f"unknown group_by column {group_by!r}")
    if by_class:
        rows = [r for r in rows if r["group"].startswith("class")]
    elif group is not None:
        rows = [r for r in rows if r["group"] == group]
    out = Path(out_dir or Path(csv_path).parent / "plots")
    out.mkdir(parents=True, exist_ok=True)
    curves: dict[str, dict[float, list[float]]] = {}
    for r in rows:
        curves.setdefault(r[key], {}).setdefault(float(r[x]), []).append(float(r[metric]))
    paths = []
    for name in sorted(curves):
        path = out / f"{metric}__{group_by}-{name}.dat"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {x} {metric}\n")
            for xv in sorted(curves[name]):
                fh.write(f"{xv!r} {float(np.mean(curves[name][xv]))!r}\n")
        paths.append(path)
    return paths
