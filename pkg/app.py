import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from config import PRESETS, load_config
from errors import CampaignFailureError, ConfigError, TrainingFailureError
from harness import report, rq3_sweep, run_experiment, train_policy

# Configure logging
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_CAMPAIGN_FAILURE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qd-policy-testing",
        description="Test RL policies with Quality Diversity search, random testing and fuzzing.",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings and errors only")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config layered over the preset")
    common.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    common.add_argument("--out", help="output directory for run directories")
    common.add_argument("--env", help="environment (taxi, lander, walker)")
    common.add_argument("--methods", nargs="+", help="methods to run")
    common.add_argument("--seeds", nargs="+", type=int, help="seed indices")
    common.add_argument("--policy-path", help="Taxi Q-table file")
    common.add_argument("--workers", type=int, help="parallel campaigns")
    common.add_argument("--force", action="store_true", help="overwrite an existing run directory")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train-policy", parents=[common], help="train and store the Taxi Q-table")
    sub.add_parser("run", parents=[common], help="run an experiment")
    sub.add_parser("rq3-sweep", parents=[common], help="compare the four walker behaviour spaces")
    report_parser = sub.add_parser("report", parents=[common], help="recompute metrics from existing logs")
    report_parser.add_argument("run_dir", nargs="?", help="run directory (default: latest under --out)")
    sub.add_parser("validate-config", parents=[common], help="print the resolved config without running")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Command-line values in config-file layout; unset flags are left out."""
    overrides = {
        "environment": args.env,
        "methods": args.methods,
        "seeds": args.seeds,
        "policy_path": args.policy_path,
        "output_dir": args.out,
        "workers": args.workers,
    }
    if args.command == "rq3-sweep" and args.env is None:
        overrides["environment"] = "walker"
    return {key: value for key, value in overrides.items() if value is not None}


def main(argv: Optional[List[str]] = None) -> int:
    """Command-line entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        if args.command == "report":
            out = args.out or load_config(args.config, args.preset).output_dir
            run_dir = report(args.run_dir, out)
            print(f"✅ Metrics regenerated in {run_dir}")
            return EXIT_OK

        spec = load_config(args.config, args.preset, overrides_from_args(args))

        if args.command == "validate-config":
            print(json.dumps(spec.to_dict(), indent=2))
            print(f"✅ Config valid: {spec.campaign_count} campaigns")
            return EXIT_OK

        if args.command == "train-policy":
            path = train_policy(spec.environment, spec.training, spec.policy_path, spec.taxi_map)
            if path is None:
                print(f"ℹ️ {spec.environment}: heuristic policy built-in, nothing to train")
            else:
                print(f"✅ Policy saved to {path}")
            return EXIT_OK

        if args.command == "rq3-sweep":
            run_dir = rq3_sweep(spec, force=args.force)
        else:
            run_dir = run_experiment(spec, force=args.force)
        print(f"✅ Run complete: {run_dir}")
        return EXIT_OK

    except ConfigError as e:
        logger.error(f"Configuration error: {str(e)}")
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (CampaignFailureError, TrainingFailureError) as e:
        logger.error(f"Run failed: {str(e)}")
        run_dir = getattr(e, "run_dir", None)
        suffix = f" (partial results in {run_dir})" if run_dir else ""
        print(f"❌ {e}{suffix}", file=sys.stderr)
        return EXIT_CAMPAIGN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
