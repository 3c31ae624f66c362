import argparse
import json
import os
import sys

from dotenv import load_dotenv

from src.exceptions import ConfigError, MomentumError
from src.logger_utils import ColoredLogger as log
from src.pipeline import STAGES, Pipeline
from src.report import build_report
from src.run_config import RunConfig
from src.synthetic import SyntheticSpec, generate_synthetic, write_synthetic

# Load environment variables
load_dotenv()

VERBS = STAGES + ("report", "synthetic", "pipeline")


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors raise ConfigError"""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser():
    parser = CliParser(prog="main.py", description="Regime-switching momentum toolkit")
    parser.add_argument("verb", choices=VERBS, help="Stage to run, 'pipeline' for all of them")
    parser.add_argument("--config", help="Run config JSON (defaults from config.py when omitted)")
    parser.add_argument("--out", help="Artifact directory (overrides MOMENTUM_OUT_DIR and the config)")
    parser.add_argument("--seed", type=int, help="Root seed (overrides MOMENTUM_SEED and the config)")
    parser.add_argument("--workers", type=int, help="Thread pool size for independent cells/blocks")
    parser.add_argument("--log-file", help="Also log to this file (or MOMENTUM_LOG_FILE)")
    parser.add_argument("--quiet", action="store_true", help="No console log output")
    return parser


def load_run_config(args):
    run_config = RunConfig.load(args.config) if args.config else RunConfig.defaults()
    return run_config.apply_overrides(out=args.out, seed=args.seed, workers=args.workers)


def cmd_synthetic(run_config):
    """Write prices.csv, returns.csv and regimes.csv to the output directory"""
    syn, dp = run_config["synthetic"], run_config["dp"]
    spec = SyntheticSpec.from_bundled(syn["leg"], int(syn["assets"]), int(syn["horizon"]),
                                      leverage=float(dp["leverage"]), factor_share=float(syn["factor_share"]),
                                      start=syn["start"], span=float(dp["grid_span"]))
    paths = write_synthetic(generate_synthetic(spec, run_config.seed), run_config.output_dir)
    for name, path in paths.items():
        log.log("synthetic", f"{name}: {path}", 'SUCCESS')


def run(args):
    run_config = load_run_config(args)
    if args.verb == "synthetic":
        cmd_synthetic(run_config)
        return
    if args.verb == "report":
        build_report(run_config.output_dir)
        return

    pipeline = Pipeline(run_config)
    if args.verb == "pipeline":
        pipeline.run(STAGES)
        build_report(run_config.output_dir)
        pipeline.monitor.print_status()
    else:
        pipeline.run_stage(args.verb)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return e.exit_code
    log.set_quiet(args.quiet)
    log_file = args.log_file or os.getenv("MOMENTUM_LOG_FILE")
    if log_file:
        log.enable_file_logging(log_file)

    if not args.quiet:
        print("=" * 60)
        print(f"   REGIME MOMENTUM - {args.verb.upper()}")
        print("=" * 60)

    try:
        run(args)
    except MomentumError as e:
        log.log_status(f"{type(e).__name__}: {e.message}", 'ERROR')
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        log.log_status(f"Unexpected error: {e}", 'ERROR')
        payload = {"error": type(e).__name__, "stage": None, "message": str(e), "exit_code": 1}
        print(json.dumps(payload), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
