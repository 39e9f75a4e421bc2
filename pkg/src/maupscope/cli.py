"""Command-line front end: stage commands, full runs, serving, exports.

Exit codes: 0 success, 2 bad configuration, 3 stage failure. The output
directory resolves flag > MAUP_OUT env var > config field.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import (
    CANONICAL_SCALES,
    PREDICTORS,
    SHAPES,
    ConfigError,
    RunConfig,
    load_config,
    override,
    quick_config,
)
from .pipeline import (
    StageError,
    global_table,
    open_store,
    run_pipeline,
    stage_aggregate,
    stage_assoc,
    stage_evaluate,
    stage_layout,
    stage_predict,
    stage_seal,
    stage_source,
)
from .store import RunStore, StoreError, combo_key, list_runs, project_hierarchy

ENV_OUT = "MAUP_OUT"

METRICS = ("prmse", "u", "corr")

_STAGE_FUNCS = {
    "aggregate": stage_aggregate,
    "predict": stage_predict,
    "evaluate": stage_evaluate,
    "assoc": stage_assoc,
    "layout": stage_layout,
}


def _resolve_out(args) -> str | None:
    return getattr(args, "out", None) or os.environ.get(ENV_OUT)


def _split_list(text: str | None) -> tuple[str, ...] | None:
    if text is None:
        return None
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _flag_base(out: str | None, args) -> RunConfig:
    """Config assembled from flags alone, no JSON file.

    Defaults mirror the quick profile's span: 14 days. When only --days
    is given the split keeps up to one training week and tests the rest.
    """
    if out is None:
        raise ConfigError("out_dir missing (--out flag or MAUP_OUT)")
    seed = 42 if args.seed is None else args.seed
    days = 14 if args.days is None else args.days
    train, test = args.train_days, args.test_days
    if train is None and test is None:
        train = min(7, days - 1)
        test = days - train
    elif train is None:
        train = days - test
    elif test is None:
        test = days - train
    return RunConfig(days=days, train_days=train, test_days=test, seed=seed, out_dir=out)


def _build_config(args) -> RunConfig:
    out = _resolve_out(args)
    if getattr(args, "quick", False):
        if args.config:
            raise ConfigError("--quick and --config are mutually exclusive")
        if out is None:
            raise ConfigError("out_dir missing (--out flag or MAUP_OUT)")
        cfg = quick_config(out, seed=42 if args.seed is None else args.seed)
    elif args.config:
        cfg = load_config(args.config, out_dir=out)
        cfg = override(
            cfg,
            seed=args.seed,
            days=args.days,
            train_days=args.train_days,
            test_days=args.test_days,
        )
    else:
        cfg = _flag_base(out, args)
    forced_source = getattr(args, "forced_source", None)
    return override(
        cfg,
        shapes=_split_list(args.shapes),
        scales=_split_list(args.scales),
        source=forced_source,
        movements_csv=args.movements,
        taz_file=args.taz,
        predictor=args.predictor,
        noise_sigma=args.noise_sigma,
        permutations=args.permutations,
    )


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run config JSON file")
    p.add_argument("--out", help=f"output directory (overrides {ENV_OUT} and config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--train-days", type=int, dest="train_days")
    p.add_argument("--test-days", type=int, dest="test_days")
    p.add_argument("--shapes", help="comma list from grid,taz")
    p.add_argument("--scales", help="comma list, contiguous prefix of the scale ladder")
    p.add_argument("--predictor", choices=PREDICTORS)
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--permutations", type=int)
    p.add_argument("--movements", help="movement CSV (csv source)")
    p.add_argument("--taz", help="zone GeoJSON (taz shape)")


def cmd_source(args) -> int:
    cfg = _build_config(args)
    store = open_store(cfg, create=True)
    report = stage_source(cfg, store)
    print(f"source: {report.rows_read} rows read, {report.retained} retained -> {store.run_id}")
    return 0


def cmd_stage(args) -> int:
    cfg = _build_config(args)
    store = open_store(cfg)
    _STAGE_FUNCS[args.stage](cfg, store)
    print(f"{args.stage}: ok ({store.run_id})")
    return 0


def cmd_seal(args) -> int:
    cfg = _build_config(args)
    store = open_store(cfg)
    seal = stage_seal(cfg, store)
    print(f"seal: {store.run_id} ({len(seal['files'])} files)")
    return 0


def cmd_run(args) -> int:
    cfg = _build_config(args)
    store = run_pipeline(cfg)
    print(global_table(store))
    print(f"sealed {store.run_id} at {store.root}")
    return 0


def _open_export_store(args) -> RunStore:
    out = _resolve_out(args)
    if args.config:
        cfg = load_config(args.config, out_dir=out)
        return open_store(cfg)
    if out is None:
        raise ConfigError("out_dir missing (--out flag or MAUP_OUT)")
    if args.run:
        root = Path(out) / args.run
        return RunStore.open(root)
    runs = list_runs(out)
    if len(runs) == 1:
        return runs[0]
    raise ConfigError(f"pass --run: found {len(runs)} runs in {out}")


def cmd_export(args) -> int:
    store = _open_export_store(args)
    combo = combo_key(args.shape, args.scale)
    if args.what == "diagnostics":
        sys.stdout.write(store.read_text(f"{combo}/diagnostics.csv"))
    elif args.what == "scatter":
        sys.stdout.write(store.read_text(f"{combo}/scatter.csv"))
    else:
        stored = store.read_json(f"hierarchy_{args.shape}.json")
        try:
            projected = project_hierarchy(stored, args.metric, up_to_scale=args.scale)
        except ValueError as e:
            raise StageError("export", str(e)) from e
        sys.stdout.write(json.dumps(projected, sort_keys=True, separators=(",", ":")) + "\n")
    return 0


def cmd_serve(args) -> int:
    out = _resolve_out(args)
    if out is None and args.config:
        cfg = load_config(args.config)
        out = cfg.out_dir
    if out is None:
        raise ConfigError("out_dir missing (--out flag, MAUP_OUT, or --config)")
    from .service import serve

    serve(out, port=args.port, host=args.host, run_id=args.run, static_dir=args.static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maupscope",
        description="Build and explore scale/shape diagnostics for flow predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic movements into a new run")
    _add_config_flags(p)
    p.set_defaults(func=cmd_source, forced_source="synth")

    p = sub.add_parser("ingest", help="clean a movement CSV into a new run")
    _add_config_flags(p)
    p.set_defaults(func=cmd_source, forced_source="csv")

    for stage, help_text in (
        ("aggregate", "rasterize movements into per-combination tensors"),
        ("predict", "write predicted tensors for every combination"),
        ("evaluate", "per-region metrics, VSUP ranges, global table"),
        ("assoc", "spatial association diagnostics per combination"),
        ("layout", "attribution dot-plot hierarchies per shape"),
    ):
        p = sub.add_parser(stage, help=help_text)
        _add_config_flags(p)
        p.set_defaults(func=cmd_stage, stage=stage)

    p = sub.add_parser("seal", help="freeze the run directory with a checksum seal")
    _add_config_flags(p)
    p.set_defaults(func=cmd_seal)

    p = sub.add_parser("run", help="full pipeline: source through seal")
    _add_config_flags(p)
    p.add_argument("--quick", action="store_true", help="14-day synthetic CI profile")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export", help="print a stored artifact to stdout")
    p.add_argument("--what", required=True, choices=("diagnostics", "scatter", "layout"))
    p.add_argument("--shape", required=True, choices=SHAPES)
    p.add_argument("--scale", required=True, choices=CANONICAL_SCALES)
    p.add_argument("--metric", default="prmse", choices=METRICS, help="layout color metric")
    p.add_argument("--config", help="run config JSON file")
    p.add_argument("--out", help=f"output directory (overrides {ENV_OUT})")
    p.add_argument("--run", help="run id (defaults to the only run present)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="read-only HTTP API over sealed runs")
    p.add_argument("--config", help="run config JSON file (for its out_dir)")
    p.add_argument("--out", help=f"output directory (overrides {ENV_OUT})")
    p.add_argument("--run", help="default run id")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="directory of UI files to mount at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream pager/head closed stdout; not a failure of ours
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except StoreError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
