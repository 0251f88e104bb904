"""
Command-line entry point.

    spdc-sim simulate      [--config PATH] [--set key=value ...] [--out DIR] [--strict]
    spdc-sim preset NAME   [...]
    spdc-sim validate      [...]
    spdc-sim focus-scan    [...]
    spdc-sim phase-flatten [...]

Exit codes: 0 success, 2 configuration error or violations, 1 runtime error.
"""

import argparse
import json
from typing import List, Optional

from config.presets import PRESETS
from src.cli.experiments import run_experiment, run_preset
from src.cli.run_config import build_run_config, validate_config
from src.core.errors import ConfigError
from src.utils.logging_config import logger

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

# subcommand -> experiment runner
_COMMAND_RUNNERS = {
    "simulate": "simulate",
    "focus-scan": "focus_scan",
    "phase-flatten": "fork_readout",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="Flat key=value config file or a run manifest (JSON).")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override one config key (repeatable), e.g. --set pump.waist_um=500",
    )
    parser.add_argument("--out", default=None, help="Output directory (overrides output.dir).")
    parser.add_argument("--strict", action="store_true", help="Treat sampling misses as errors.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdc-sim",
        description="Wave-optics simulation of pump-structure transfer to SPDC photons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("simulate", "Marginal image for the configured pump and train."),
        ("validate", "Check the resolved config and list violations."),
        ("focus-scan", "Best image plane versus aperture diameter."),
        ("phase-flatten", "First-order fork readout for holography.fork_order."),
    ):
        _add_common(sub.add_parser(name, help=help_text))

    preset = sub.add_parser("preset", help="Run a named experiment preset.")
    preset.add_argument("name", choices=sorted(PRESETS), help="Preset name.")
    _add_common(preset)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    preset = args.name if args.command == "preset" else None

    try:
        cfg = build_run_config(preset, args.config, args.overrides, args.out, args.strict)
        violations = validate_config(cfg)
        if violations:
            for v in violations:
                logger.error(str(v))
            print(json.dumps([vars(v) for v in violations], indent=2, sort_keys=True))
            return EXIT_CONFIG
        if args.command == "validate":
            print(json.dumps({"valid": True, "config": cfg.to_flat()}, indent=2, sort_keys=True))
            return EXIT_OK

        if preset is not None:
            summary = run_preset(preset, cfg)
        else:
            summary = run_experiment(_COMMAND_RUNNERS[args.command], cfg, args.command)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"Run failed: {e}")
        return EXIT_RUNTIME

    logger.info(f"Done: {cfg.output.dir}/manifest.json")
    logger.debug(f"Summary: {summary}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
