"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import logging.handlers
import os
import sys
from pathlib import Path

import tomli_w

from powerspec import __version__
from powerspec.config import (
    DISTRIBUTIONS,
    ENGINES,
    FORMATS,
    GENERATORS,
    GRID_KINDS,
    PRECISIONS,
    SCALES,
    ExperimentConfig,
    apply_overrides,
    config_to_dict,
    get_home_dir,
    load_config,
    resolve_workers,
    save_config,
)
from powerspec.errors import PowerSpecError, UsageError
from powerspec.experiments import (
    cmd_compare,
    cmd_figures,
    cmd_simulate,
    cmd_theory,
    cmd_universal,
    cmd_verify,
)
from powerspec.verify import SUITES

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------


def _setup_logging(verbose: bool = False) -> None:
    """Configure logging with console and file handlers.

    Log files are stored in ~/.powerspec/logs/ (or under ``$POWERSPEC_HOME``)
    with rotation to keep size manageable.
    """
    log_format = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"
    date_format = "%Y-%m-%d %H:%M:%S"

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(logging.Formatter(log_format, datefmt=date_format))
    root_logger.addHandler(console_handler)

    log_dir = get_home_dir() / "logs"
    try:
        os.makedirs(log_dir, exist_ok=True)
        log_file = log_dir / "powerspec.log"
        # 3 backups of 500KB each
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=500 * 1024,
            backupCount=3,
            encoding="utf-8",
        )
    except OSError as e:
        logger.warning("File logging disabled: %s", e)
        return
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(log_format, datefmt=date_format))
    root_logger.addHandler(file_handler)
    logger.debug("Log file: %s", log_file)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    """Flags that override the run config for the computing commands."""
    group = parser.add_argument_group("ensemble")
    group.add_argument("-n", type=int, help="Number of levels N")
    group.add_argument("-r", "--realizations", type=int, help="Monte Carlo realizations R")
    group.add_argument("--generator", choices=GENERATORS)
    group.add_argument("--distribution", choices=DISTRIBUTIONS)
    group.add_argument("--seed", type=int, help="Master seed")
    group.add_argument("--chunk-size", type=int, help="Realizations per work item")
    group.add_argument("--levels", help="Level sequences CSV (one per row) instead of a generator")

    group = parser.add_argument_group("grid")
    group.add_argument("--grid", choices=GRID_KINDS, help="Grid kind")
    group.add_argument("--count", type=int, help="Grid points (non-discrete grids)")
    group.add_argument("--start", type=float, help="First grid point")
    group.add_argument("--stop", type=float, help="Last grid point")

    group = parser.add_argument_group("theory")
    group.add_argument("--engine", choices=ENGINES)
    group.add_argument("--precision", choices=PRECISIONS)
    group.add_argument("--gl-order", type=int, help="Gauss-Legendre nodes per panel")
    group.add_argument("--endpoint-margin", type=float, help="delta_end = margin / N")
    group.add_argument("--proxy-n", type=int, help="Proxy N for S_inf")

    group = parser.add_argument_group("output")
    group.add_argument("-o", "--out", help="Output directory")
    group.add_argument("--stem", help="Output file stem")
    group.add_argument("--format", choices=FORMATS)
    group.add_argument(
        "--save-ensemble", action="store_true", help="Also write the generated levels as CSV"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="powerspec",
        description="Power spectrum of eigenlevel sequences",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  powerspec simulate -n 1024 -r 20000                 # uncorrelated exp spacings
  powerspec theory --generator tcue -n 64 --grid linear --count 32
  powerspec universal --proxy-n 2000 --grid linear --count 16
  powerspec compare mc.json theory.json --tolerance 0.02
  powerspec verify all --quick
  powerspec figures 3
        """,
    )
    parser.add_argument("--version", action="version", version=f"powerspec {__version__}")
    parser.add_argument("--config", help="Run config (TOML)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--workers", type=int, help="Worker threads (or $POWERSPEC_WORKERS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo S_N or K_N")
    _add_run_options(p)

    p = sub.add_parser("theory", help="Exact baseline or TCUE theory curve")
    _add_run_options(p)
    p.add_argument("--diagnostics", action="store_true", help="Dump dPV recurrence diagnostics")

    p = sub.add_parser("universal", help="Large-N proxy of S_inf")
    _add_run_options(p)

    p = sub.add_parser("compare", help="Compare two curve files (second is the reference)")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--metric", choices=("rms", "max"), default="rms")
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--report", help="Write the comparison report to this JSON file")

    p = sub.add_parser("verify", help="Cross-oracle verification suites")
    p.add_argument("suite", nargs="?", default="all", choices=SUITES)
    p.add_argument("--quick", action="store_true", help="Smaller sizes")
    p.add_argument("--report", help="Write the suite report to this JSON file")

    p = sub.add_parser("figures", help="Data for one figure")
    p.add_argument("figure", type=int, choices=range(1, 6))
    p.add_argument("--scale", choices=SCALES)
    p.add_argument("--allow-long-run", action="store_true", help="Permit full-scale runs")
    _add_run_options(p)

    p = sub.add_parser("config", help="Write or show the run config")
    p.add_argument("action", choices=("init", "show"))
    p.add_argument("path", nargs="?", help="Target file for init")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    def get(name: str):
        return getattr(args, name, None)

    return {
        "ensemble.n": get("n"),
        "ensemble.realizations": get("realizations"),
        "ensemble.generator": get("generator"),
        "ensemble.distribution": get("distribution"),
        "ensemble.seed": get("seed"),
        "ensemble.chunk_size": get("chunk_size"),
        "ensemble.levels_file": get("levels"),
        "grid.kind": get("grid"),
        "grid.count": get("count"),
        "grid.start": get("start"),
        "grid.stop": get("stop"),
        "theory.engine": get("engine"),
        "theory.precision": get("precision"),
        "theory.gl_order": get("gl_order"),
        "theory.endpoint_margin": get("endpoint_margin"),
        "universal.proxy_n": get("proxy_n"),
        "output.directory": get("out"),
        "output.stem": get("stem"),
        "output.format": get("format"),
        "output.save_ensemble": True if get("save_ensemble") else None,
        "scale": get("scale"),
        "allow_long_run": True if get("allow_long_run") else None,
    }


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (if any), then command-line overrides."""
    config = load_config(args.config)
    overrides = _overrides(args)
    if args.command in ("simulate", "theory", "universal", "figures"):
        overrides["command"] = args.command
    return apply_overrides(config, overrides)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def _workers(args: argparse.Namespace, config: ExperimentConfig) -> int:
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError(f"--workers must be >= 1, got {args.workers}")
        return args.workers
    return resolve_workers(config)


def _print_paths(paths: list[Path]) -> None:
    for path in paths:
        print(path)


def run(args: argparse.Namespace) -> int:
    if args.command == "compare":
        report = cmd_compare(
            args.a, args.b, args.tolerance, args.metric, args.x_min, args.x_max, args.report
        )
        print(json.dumps(report.to_dict(), indent=2))
        return 0

    if args.command == "verify":
        reports = cmd_verify(args.suite, args.quick, args.report)
        for report in reports:
            print(f"{report.suite}: {'passed' if report.passed else 'FAILED'}")
        return 0

    config = resolve_config(args)

    if args.command == "config":
        if args.action == "show":
            print(tomli_w.dumps(config_to_dict(config)), end="")
            return 0
        path = Path(args.path) if args.path else get_home_dir() / "config.toml"
        save_config(config, path)
        print(path)
        return 0

    workers = _workers(args, config)
    if args.command == "simulate":
        _print_paths(cmd_simulate(config, workers))
    elif args.command == "theory":
        _print_paths(cmd_theory(config, workers, args.diagnostics))
    elif args.command == "universal":
        _print_paths(cmd_universal(config, workers))
    elif args.command == "figures":
        _print_paths(cmd_figures(args.figure, config, workers))
    return 0


def main(argv: list[str] | None = None) -> int:
    """Entry point for the powerspec command line."""
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return run(args)
    except PowerSpecError as e:
        logger.error("%s", e)
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130
    except Exception:
        logger.exception("Unexpected error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
