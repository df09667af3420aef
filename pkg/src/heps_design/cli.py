"""
Command-line front end: ``heps-design <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 failed validation,
3 runtime or domain error.
"""
import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from typing import Callable, Dict, List, Optional

import pandas as pd
import yaml

from heps_design.config import RunConfig, config_to_dict, load_config, save_config
from heps_design.converter import (
    average_power,
    backflow_power,
    design_leakage_inductance,
    peak_current,
    rms_current,
    sample_waveform,
    solve_outer_shift,
)
from heps_design.domain import ModulationPoint, Strategy
from heps_design.errors import ConfigError, HepsError
from heps_design.io import write_csv, write_parquet
from heps_design.losses import analyze_point
from heps_design.pipeline import (
    StrategyMap,
    SurrogateBundle,
    compare_strategies,
    direct_map,
    generate_dataset,
    load_dataset,
    optimize_map,
    save_dataset,
    select_modulation,
    surrogate_deviation,
    train_surrogates,
)
from heps_design.report import write_report
from heps_design.s3 import publish_artifacts
from heps_design.schema import SCHEMAS
from heps_design.utils import format_seconds
from heps_design.validate import run_suites

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ValidationFailed(HepsError):
    """At least one validation suite failed."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0", field="run.seed")
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1", field="run.n_jobs")
        overrides["n_jobs"] = args.jobs
    if args.s3_bucket is not None:
        overrides["s3_bucket"] = args.s3_bucket
    return replace(cfg, **overrides)


def _progress(args) -> bool:
    return not args.no_progress


def _out(cfg: RunConfig, *parts: str) -> str:
    path = os.path.join(cfg.out_dir, *parts)
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands; each returns the artifact paths it wrote


def cmd_design_lr(cfg: RunConfig, args) -> List[str]:
    spec = cfg.converter
    bound = design_leakage_inductance(spec.n, spec.V1, cfg.sweep.V2_min, spec.fs, cfg.sweep.P_max)
    verdict = "satisfies" if spec.Lr <= bound else "exceeds"
    print(f"Lr bound: {bound * 1e6:.1f} uH")
    print(f"configured Lr = {spec.Lr * 1e6:.1f} uH {verdict} the bound")
    return []


def cmd_waveform(cfg: RunConfig, args) -> List[str]:
    spec = cfg.converter
    S = Strategy.parse(args.strategy)
    if args.do is not None:
        Do = args.do
    else:
        Do = solve_outer_shift(spec, S, args.din, args.v2, args.power)
    mod = ModulationPoint(S=S, Do=Do, Din=args.din)
    wf, events, zvs, breakdown = analyze_point(spec, mod, args.v2)
    frame = pd.DataFrame(sample_waveform(wf, args.points))
    out_dir = _out(cfg)
    paths = [os.path.join(out_dir, "waveform.csv"), os.path.join(out_dir, "waveform.parquet")]
    write_csv(frame, paths[0])
    write_parquet(frame, paths[1], SCHEMAS["waveform"])

    print(f"{S.name} Do={Do:.6f} Din={args.din:.6f} V2={args.v2:g} V")
    print(f"P={average_power(wf):.3f} W  I_rms={rms_current(wf):.4f} A  I_pk={peak_current(wf):.4f} A  "
          f"backflow={backflow_power(wf):.3f} W")
    print(f"n_ZVS={zvs.n_zvs}/8  I_th={zvs.i_th:.4f} A  P_loss={breakdown.total:.3f} W")
    for event in events:
        flag = "ZVS" if zvs.flags[event.device] else "hard"
        print(f"  {event.device} leg {event.leg} {event.direction:<7} t={event.time * 1e6:9.4f} us  "
              f"i={event.current:+9.4f} A  {flag}")
    return paths


def cmd_gen_data(cfg: RunConfig, args) -> List[str]:
    logger.info("sweeping %d operating points", cfg.sweep.n_rows)
    frame = generate_dataset(cfg.converter, cfg.sweep, cfg.n_jobs, _progress(args))
    paths = save_dataset(frame, _out(cfg))
    print(f"{len(frame)} rows, {int(frame['feasible'].sum())} feasible -> {paths[0]}")
    return paths


def cmd_train(cfg: RunConfig, args) -> List[str]:
    rows = load_dataset(args.dataset or os.path.join(cfg.out_dir, "dataset.csv"))
    bundle = train_surrogates(rows, cfg.train_loss, cfg.train_zvs, cfg.seed, min_rows=args.min_rows,
                              progress=_progress(args))
    paths = bundle.save(_out(cfg))
    for name in ("loss", "zvs"):
        metrics = bundle.metrics[name]
        extra = f" accuracy={metrics['accuracy']:.4f}" if "accuracy" in metrics else ""
        print(f"{name}: trees={metrics['n_trees']} rmse={metrics['rmse']:.5g} mae={metrics['mae']:.5g} "
              f"r2={metrics['r2']:.5f}{extra}")
    return paths


def cmd_optimize(cfg: RunConfig, args) -> List[str]:
    bundle = SurrogateBundle.load(args.model_dir or cfg.out_dir)
    smap = optimize_map(bundle, cfg.grid.P_grid(), cfg.grid.V2_grid(), cfg.swarm, cfg.seed, cfg.n_jobs,
                        _progress(args))
    paths = smap.save(_out(cfg))
    print(f"{smap.chosen.size} cells -> {paths[0]}")
    if args.deviation:
        for key, value in surrogate_deviation(cfg.converter, smap, cfg.n_jobs, _progress(args)).items():
            print(f"{key}: {value}")
    return paths


def cmd_direct_map(cfg: RunConfig, args) -> List[str]:
    smap = direct_map(cfg.converter, cfg.grid.P_grid(), cfg.grid.V2_grid(), cfg.swarm, cfg.seed, cfg.n_jobs,
                      _progress(args))
    paths = smap.save(_out(cfg, "direct"))
    print(f"{smap.chosen.size} cells -> {paths[0]}")
    return paths


def cmd_select(cfg: RunConfig, args) -> List[str]:
    smap = StrategyMap.load(args.map_dir or cfg.out_dir)
    choice = select_modulation(smap, args.vref, args.power, cfg.converter)
    label = "SPS" if choice.mode == "unit-gain" else choice.S.name
    print(f"mode={choice.mode} S={label} Din1={choice.Din1:.6f} Din2={choice.Din2:.6f} M={choice.M:.6f}")
    return []


def cmd_validate(cfg: RunConfig, args) -> List[str]:
    results = run_suites(cfg, full=args.full, n_jobs=cfg.n_jobs, progress=_progress(args))
    for result in results:
        print(result.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise ValidationFailed(f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}")
    print(f"all {len(results)} checks passed")
    return []


def cmd_report(cfg: RunConfig, args) -> List[str]:
    smap = StrategyMap.load(args.map_dir or cfg.out_dir)
    return write_report(cfg.converter, smap, cfg.out_dir, cfg.n_jobs, _progress(args))


def cmd_compare(cfg: RunConfig, args) -> List[str]:
    smap = StrategyMap.load(args.map_dir or cfg.out_dir)
    frame = compare_strategies(cfg.converter, smap, args.v2, smap.P_grid, cfg.swarm, cfg.seed, cfg.n_jobs,
                               _progress(args))
    path = os.path.join(_out(cfg), f"comparison_V2_{args.v2:g}.csv")
    write_csv(frame, path)
    print(f"{len(frame)} rows -> {path}")
    return [path]


def cmd_init_config(cfg: RunConfig, args) -> List[str]:
    if args.path is None:
        sys.stdout.write(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
        return []
    save_config(cfg, args.path)
    print(f"wrote {args.path}")
    return [args.path]


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], List[str]]] = {
    "design-lr": cmd_design_lr,
    "waveform": cmd_waveform,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "optimize": cmd_optimize,
    "direct-map": cmd_direct_map,
    "select": cmd_select,
    "validate": cmd_validate,
    "report": cmd_report,
    "compare": cmd_compare,
    "init-config": cmd_init_config,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    common.add_argument("--out", help="output directory (overrides run.out_dir)")
    common.add_argument("--jobs", type=int, help="worker processes (overrides run.n_jobs)")
    common.add_argument("--s3-bucket", help="upload the artifacts of the command to this bucket")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--no-progress", action="store_true", help="disable progress bars")

    parser = _Parser(prog="heps-design", description="Hybrid EPS design toolkit for DAB converters.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    sub.add_parser("design-lr", parents=[common], help="leakage inductance bound")

    p = sub.add_parser("waveform", parents=[common], help="steady-state waveform and commutation report")
    p.add_argument("--strategy", default="eps1")
    p.add_argument("--din", type=float, default=1.0)
    p.add_argument("--v2", type=float, required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--power", type=float, help="commanded power (W); Do is solved for")
    group.add_argument("--do", type=float, help="outer phase shift in [0, 0.5]")
    p.add_argument("--points", type=int, default=1000)

    sub.add_parser("gen-data", parents=[common], help="Stage I sweep")

    p = sub.add_parser("train", parents=[common], help="fit the loss and ZVS surrogates")
    p.add_argument("--dataset", help="dataset CSV (default <out>/dataset.csv)")
    p.add_argument("--min-rows", type=int, default=1000)

    p = sub.add_parser("optimize", parents=[common], help="Stage II on the surrogates")
    p.add_argument("--model-dir", help="directory holding the trained surrogates (default <out>)")
    p.add_argument("--deviation", action="store_true", help="report efficiency error against the analytic model")

    sub.add_parser("direct-map", parents=[common], help="Stage II on the analytic evaluator")

    p = sub.add_parser("select", parents=[common], help="query the runtime selector")
    p.add_argument("--vref", type=float, required=True)
    p.add_argument("--power", type=float, required=True)
    p.add_argument("--map-dir")

    p = sub.add_parser("validate", parents=[common], help="run the oracle cross-checks")
    p.add_argument("--full", action="store_true", help="include the map-level suites")

    p = sub.add_parser("report", parents=[common], help="plot-ready CSV tables")
    p.add_argument("--map-dir")

    p = sub.add_parser("compare", parents=[common], help="SPS, EPS1, EPS2 and hybrid along a V2 slice")
    p.add_argument("--v2", type=float, required=True)
    p.add_argument("--map-dir")

    p = sub.add_parser("init-config", parents=[common], help="write the resolved configuration")
    p.add_argument("path", nargs="?")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)

    try:
        cfg = _resolve(args)
        start = time.perf_counter()
        paths = COMMANDS[args.command](cfg, args)
        logger.info("%s finished in %s", args.command, format_seconds(time.perf_counter() - start))
        if cfg.s3_bucket and paths:
            publish_artifacts(paths, cfg.s3_bucket, args.command)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_USAGE
    except ValidationFailed as e:
        logger.error("%s", e)
        return EXIT_VALIDATION
    except (HepsError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
