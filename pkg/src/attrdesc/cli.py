"""Command-line front end.

Subcommands: optimize, fid, make-oracle-target, plot. Exit codes are a
stable contract: 0 success, 1 computation/domain error, 2 usage/config
error. ATTRDESC_SEED in the environment overrides any configured seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .attributes import default_params
from .configfile import METHODS, RunConfig, load_oracle_file, load_run_file
from .errors import AttrDescError, FormatError, SchemaError
from .optimize import (
    EvalConfig,
    attribute_descent,
    descent_budget,
    random_search,
    read_trace,
    reinforce_search,
    uniform_baseline,
    write_result,
    write_trace,
)
from .oracle import OracleRenderer, oracle_target_stats
from .plotsvg import traces_to_svg
from .protocol import ExternalRenderer, open_external
from .rng import derive_seed
from .stats import frechet_distance, read_stats, stats_from_file, write_stats

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

ENV_SEED = "ATTRDESC_SEED"


def _fail(code: int, message: str) -> int:
    print(f"attrdesc: error: {message}", file=sys.stderr)
    return code


def _effective_seed(config_seed: int | None, flag_seed: int | None) -> tuple[int, str]:
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env), "env"
        except ValueError:
            raise SchemaError(f"{ENV_SEED} must be an integer, got {env!r}")
    if flag_seed is not None:
        return flag_seed, "flag"
    if config_seed is not None:
        return config_seed, "config"
    return 0, "default"


def _build_run_config(args) -> RunConfig:
    schema, oracle, run, text = load_run_file(args.config)
    method = args.method or run.get("method")
    if method is None:
        raise SchemaError("no method given (config [run] or --method)")
    if method not in METHODS:
        raise SchemaError(f"unknown method {method!r}")
    renderer_spec = args.renderer or run.get("renderer", "oracle")
    seed, _ = _effective_seed(run.get("seed"), args.seed)
    eval_cfg = EvalConfig(
        samples_per_eval=args.samples_per_eval or run.get("samples_per_eval", 500),
        base_seed=seed,
        common_random_numbers=run.get("common_random_numbers", True),
        epochs=args.epochs or run.get("epochs", 2),
    )
    targets = tuple(args.target) if args.target else run.get("targets", ())
    output = args.output or run.get("output")
    if not output:
        raise SchemaError("no output directory given (config [run] or --output)")
    return RunConfig(
        schema=schema,
        renderer_spec=renderer_spec,
        oracle=oracle,
        method=method,
        eval_cfg=eval_cfg,
        budget=args.budget if args.budget is not None else run.get("budget"),
        targets=targets,
        output_dir=output,
        parallel=args.parallel or run.get("parallel", 1),
        seed=seed,
        schema_ref=str(args.config),
        config_text=text,
    )


def _make_renderer(cfg: RunConfig, target_index: int):
    spec = cfg.renderer_spec
    if spec == "oracle":
        if cfg.oracle is None:
            raise SchemaError("renderer 'oracle' needs an [oracle] section in the config")
        return OracleRenderer(cfg.oracle, seed=derive_seed(cfg.seed, 7, target_index)), None
    if spec.startswith("external "):
        session = open_external(spec[len("external ") :].strip())
        return ExternalRenderer(session), session
    raise SchemaError(f"unknown renderer spec {spec!r}")


def _run_method(cfg: RunConfig, renderer, target_stats, per_target_cfg: EvalConfig):
    if cfg.method == "descent":
        result = attribute_descent(
            cfg.schema, default_params(cfg.schema), renderer, target_stats, per_target_cfg
        )
        budget = descent_budget(cfg.schema, per_target_cfg)
    elif cfg.method == "random_search":
        if cfg.budget is None:
            raise SchemaError("method random_search needs a budget")
        result = random_search(cfg.schema, renderer, target_stats, per_target_cfg, cfg.budget)
        budget = cfg.budget
    elif cfg.method == "reinforce":
        if cfg.budget is None:
            raise SchemaError("method reinforce needs a budget")
        result = reinforce_search(cfg.schema, renderer, target_stats, per_target_cfg, cfg.budget)
        budget = cfg.budget
    else:
        result = uniform_baseline(cfg.schema, renderer, target_stats, per_target_cfg)
        budget = 1
    return result, budget


def _optimize_one(cfg: RunConfig, index: int, target_path: str, out_dir: Path) -> None:
    target_stats = read_stats(target_path)
    per_target_cfg = EvalConfig(
        samples_per_eval=cfg.eval_cfg.samples_per_eval,
        base_seed=derive_seed(cfg.seed, 11, index),
        common_random_numbers=cfg.eval_cfg.common_random_numbers,
        epochs=cfg.eval_cfg.epochs,
    )
    stem = Path(target_path).stem
    renderer, session = _make_renderer(cfg, index)
    try:
        result, budget = _run_method(cfg, renderer, target_stats, per_target_cfg)
    except Exception as exc:
        partial = getattr(exc, "partial_trace", None)
        if partial is not None and partial.records:
            write_trace(partial, out_dir / f"{stem}.trace.csv")
        raise
    finally:
        if session is not None:
            session.close()
    write_trace(result.trace, out_dir / f"{stem}.trace.csv")
    params = result.final_params if result.final_params is not None else result.best_params
    write_result(
        out_dir / f"{stem}.result.txt",
        schema=cfg.schema,
        schema_ref=cfg.schema_ref,
        method=cfg.method,
        budget=budget,
        fid=result.best_fid,
        params=params,
    )


def cmd_optimize(args) -> int:
    try:
        cfg = _build_run_config(args)
    except (AttrDescError, OSError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    if not cfg.targets:
        return _fail(EXIT_USAGE, "no target statistics files given")
    if cfg.method in ("random_search", "reinforce") and cfg.budget is None:
        return _fail(EXIT_USAGE, f"method {cfg.method} needs a budget")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "attrdesc",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "method": cfg.method,
        "renderer": cfg.renderer_spec,
        "seed": cfg.seed,
        "budget": cfg.budget,
        "eval": {
            "samples_per_eval": cfg.eval_cfg.samples_per_eval,
            "common_random_numbers": cfg.eval_cfg.common_random_numbers,
            "epochs": cfg.eval_cfg.epochs,
        },
        "targets": [
            {"path": str(t), "stem": Path(t).stem, "base_seed": derive_seed(cfg.seed, 11, i)}
            for i, t in enumerate(cfg.targets)
        ],
        "config_path": str(args.config),
        "config_sha256": hashlib.sha256(cfg.config_text.encode()).hexdigest(),
        "config_text": cfg.config_text,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    failures: list[tuple[str, str]] = []

    def run_one(pair):
        index, target = pair
        try:
            _optimize_one(cfg, index, target, out_dir)
        except (AttrDescError, OSError) as exc:
            failures.append((target, str(exc)))

    jobs = list(enumerate(cfg.targets))
    if cfg.parallel > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
            list(pool.map(run_one, jobs))
    else:
        for job in jobs:
            run_one(job)
    for target, message in failures:
        print(f"attrdesc: error: {target}: {message}", file=sys.stderr)
    return EXIT_DOMAIN if failures else EXIT_OK


def cmd_fid(args) -> int:
    stats = []
    for path in (args.file_a, args.file_b):
        try:
            stats.append(stats_from_file(path))
        except OSError as exc:
            return _fail(EXIT_USAGE, f"unreadable file: {exc}")
        except FormatError as exc:
            return _fail(EXIT_USAGE, str(exc))
        except AttrDescError as exc:
            return _fail(EXIT_DOMAIN, str(exc))
    try:
        value = frechet_distance(stats[0], stats[1])
    except AttrDescError as exc:
        return _fail(EXIT_DOMAIN, str(exc))
    print(f"{value:.6f}")
    return EXIT_OK


def cmd_make_oracle_target(args) -> int:
    try:
        config = load_oracle_file(args.config)
    except (AttrDescError, OSError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    seed, _ = _effective_seed(None, args.seed)
    try:
        stats = oracle_target_stats(config, args.count, seed)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_stats(stats, out)
        planted = out.with_name(out.stem + ".planted.txt")
        write_result(
            planted,
            schema=config.schema,
            schema_ref=str(args.config),
            method="planted",
            budget=0,
            fid=0.0,
            params=config.planted_means,
        )
    except (AttrDescError, OSError) as exc:
        return _fail(EXIT_DOMAIN, str(exc))
    return EXIT_OK


def cmd_plot(args) -> int:
    traces = []
    for path in args.trace:
        try:
            trace = read_trace(path)
        except OSError as exc:
            return _fail(EXIT_USAGE, f"unreadable file: {exc}")
        except FormatError as exc:
            return _fail(EXIT_DOMAIN, str(exc))
        if not trace.records:
            return _fail(EXIT_DOMAIN, f"{path}: no records")
        stem = Path(path).stem
        if stem.endswith(".trace"):
            stem = stem[: -len(".trace")]
        traces.append((stem, trace))
    try:
        svg = traces_to_svg(traces)
        Path(args.out).write_text(svg)
    except (ValueError, OSError) as exc:
        return _fail(EXIT_DOMAIN, str(exc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrdesc",
        description="attribute-distribution optimization against target feature statistics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run an optimization per target stats file")
    p_opt.add_argument("--config", required=True, help="config file (schema [+oracle] [+run])")
    p_opt.add_argument("--target", action="append", default=[], help="target stats file (repeatable)")
    p_opt.add_argument("--method", choices=METHODS)
    p_opt.add_argument("--renderer", help="oracle | external <command or tcp:host:port>")
    p_opt.add_argument("--output", help="output directory")
    p_opt.add_argument("--seed", type=int)
    p_opt.add_argument("--budget", type=int)
    p_opt.add_argument("--samples-per-eval", type=int, dest="samples_per_eval")
    p_opt.add_argument("--epochs", type=int)
    p_opt.add_argument("--parallel", type=int, help="run up to N targets concurrently")
    p_opt.set_defaults(func=cmd_optimize)

    p_fid = sub.add_parser("fid", help="distance between two stats or feature files")
    p_fid.add_argument("file_a")
    p_fid.add_argument("file_b")
    p_fid.set_defaults(func=cmd_fid)

    p_mk = sub.add_parser("make-oracle-target", help="render target statistics from the oracle")
    p_mk.add_argument("--config", required=True, help="config file with schema + [oracle]")
    p_mk.add_argument("--count", type=int, required=True)
    p_mk.add_argument("--seed", type=int, default=0)
    p_mk.add_argument("--out", required=True)
    p_mk.set_defaults(func=cmd_make_oracle_target)

    p_plot = sub.add_parser("plot", help="SVG chart of best-FID-so-far curves")
    p_plot.add_argument("trace", nargs="+")
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        return _fail(EXIT_USAGE, str(exc))
    except AttrDescError as exc:
        return _fail(EXIT_DOMAIN, str(exc))


if __name__ == "__main__":
    sys.exit(main())
