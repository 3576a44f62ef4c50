# EXAMPLE COMMAND: python run.py run --config configs/paperlike.json --out output/paperlike --workers 4
import argparse
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

from scripts import __version__, datagen
from scripts.config import ExperimentConfig, load_config
from scripts.dataset import write_assays
from scripts.errors import BenchError, serialize_error
from scripts.experiment import run_experiment
from scripts.report import FORMATS, emit_report, load_results

logger = logging.getLogger("run")


def _optional_int(value):
    return int(value) if value not in (None, "") else None


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="Log-ratio transform x classifier benchmark for geozone assays.")
    parser.add_argument("--log-level", type=str, default=os.getenv("BENCH_LOG_LEVEL", "INFO"))
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Write a synthetic assay CSV")
    gen.add_argument("--preset", type=str, default="paperlike", choices=sorted(datagen.PRESETS))
    gen.add_argument("--seed", type=_optional_int, default=_optional_int(os.getenv("BENCH_SEED")))
    gen.add_argument("--samples-per-zone", type=int, default=datagen.PAPERLIKE_SAMPLES_PER_ZONE)
    gen.add_argument("--imbalance", type=float, default=0.0)
    gen.add_argument("--out", type=str, default=os.getenv("BENCH_OUTPUT_DIR", "output"))

    run = sub.add_parser("run", help="Run a transform x classifier grid")
    run.add_argument("--config", type=str, default=None)
    run.add_argument("--seed", type=_optional_int, default=_optional_int(os.getenv("BENCH_SEED")))
    run.add_argument("--out", type=str, default=os.getenv("BENCH_OUTPUT_DIR"))
    run.add_argument("--workers", type=_optional_int, default=_optional_int(os.getenv("BENCH_WORKERS")))
    run.add_argument("--format", type=str, default="markdown", choices=FORMATS)
    run.add_argument("--no-progress", action="store_true")

    report = sub.add_parser("report", help="Re-emit tables and plot data from a results file")
    report.add_argument("results", type=str, help="results.csv or the directory holding it")
    report.add_argument("--out", type=str, default=None)
    report.add_argument("--format", type=str, default="markdown", choices=FORMATS)
    return parser.parse_args(argv)


def cmd_gen(args) -> int:
    params = {"samples_per_zone": args.samples_per_zone, "imbalance": args.imbalance}
    if args.seed is not None:
        params["seed"] = args.seed
    dataset = datagen.generate(datagen.PRESETS[args.preset](**params))
    path = write_assays(dataset, Path(args.out) / f"synthetic_{args.preset}.csv")
    print(f"Synthetic assays exported to file: {path.resolve()}")
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config) if args.config else ExperimentConfig()
    config = config.replace(seed=args.seed, output_dir=args.out, n_workers=args.workers)
    logger.info("running %d transforms x %d classifiers on %s", len(config.transforms), len(config.classifiers), config.data_source)
    reports = run_experiment(config, progress=not args.no_progress)
    emit_report(reports, config.output_dir, args.format)
    n_cells = len(reports.transform_order) * len(reports.classifier_order)
    print(f"{len(reports.cells)} of {n_cells} cells completed; results in {Path(config.output_dir).resolve()}")
    return 0 if reports.cells else 1


def cmd_report(args) -> int:
    reports = load_results(args.results)
    results = Path(args.results)
    out = args.out or (results if results.is_dir() else results.parent)
    emit_report(reports, out, args.format)
    return 0


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    load_dotenv(override=True)
    args = parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="[%(levelname)s] %(name)s: %(message)s", force=True)
    logger.debug("CLI arguments parsed: %s", args)
    try:
        return COMMANDS[args.command](args)
    except BenchError as e:
        info = serialize_error(e)
        logger.error("%s: %s", info["error_type"], info["message"])
        return 2


if __name__ == "__main__":
    sys.exit(main())
