"""Command line: ``ponmpc run|plot|validate|oracle``."""

from __future__ import annotations

import argparse
import logging
import sys

from ponmpc.experiment import ConfigError, emit_plot_data, load_spec, run_experiment, validate_spec

log = logging.getLogger("ponmpc")


def _cmd_run(args) -> int:
    spec = load_spec(args.config)
    if args.workers:
        spec.workers = args.workers
    problems = validate_spec(spec)
    if problems:
        for p in problems:
            log.error(p)
        return 2
    result = run_experiment(spec, args.output)
    for f in result.failed:
        log.error("point %s failed: %s", f["point"], f["error"])
    print(f"wrote {result.csv_path} and {result.summary_path}")
    return result.exit_code


def _cmd_plot(args) -> int:
    group = None if args.group == "all" else args.group
    paths = emit_plot_data(args.csv, args.metric, args.group_by, args.output, args.x, group)
    for p in paths:
        print(p)
    return 0


def _cmd_validate(args) -> int:
    spec = load_spec(args.config)
    problems = validate_spec(spec)
    for p in problems:
        print(f"invalid: {p}")
    if not problems:
        points = spec.points()
        print(f"ok: {len(points)} sweep points")
        for coord, sc in points[:1]:
            print(f"capacity {sc.capacity()} packets/slot, "
                  f"K = {[s.k_slots for s in sc.specs()]}, "
                  f"SLA budgets = {[s.lambda_c_packets for s in sc.specs()]}")
    return 1 if problems else 0


def _cmd_oracle(args) -> int:
    from ponmpc.oracles import lp_ilp_batch, maxflow_batch, tu_batch

    results = [lp_ilp_batch(args.instances, args.seed),
               maxflow_batch(args.instances, args.seed + 1)]
    if not args.skip_tu:
        results.append(tu_batch())
    for r in results:
        print(r.line())
        for f in r.failures[:10]:
            print(f"  {f}")
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ponmpc", description="Fog-PON bandwidth allocation experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment sweep")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides config and environment)")
    r.add_argument("-j", "--workers", type=int, default=0)
    r.set_defaults(func=_cmd_run)

    pl = sub.add_parser("plot", help="emit per-curve data files from a results CSV")
    pl.add_argument("csv")
    pl.add_argument("--metric", required=True)
    pl.add_argument("--group-by", default="allocator")
    pl.add_argument("--x", default="class_load")
    pl.add_argument("--group", default="class1", help="traffic group to plot, or 'all'")
    pl.add_argument("-o", "--output")
    pl.set_defaults(func=_cmd_plot)

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)

    o = sub.add_parser("oracle", help="cross-check the solvers on random programs")
    o.add_argument("-n", "--instances", type=int, default=1000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--skip-tu", action="store_true")
    o.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
