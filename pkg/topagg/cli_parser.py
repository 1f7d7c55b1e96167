"""
Command-line argument parser for the topagg CLI.
"""

import argparse
from typing import Any, Dict, List, Optional

from topagg import __version__
from topagg.core.config import DEFAULT_PRESET, PRESETS, default_output_dir

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

HARNESSES = {
    "pate": "Train synthetic records with a PATE teacher ensemble under a privacy budget",
    "dpsgd": "Run the DP-SGD compression/noise control experiment",
    "convergence": "Run the update rule and check the convergence bound",
    "compress-bench": "Compare the private aggregators on synthetic teacher gradients",
}


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return number


def _positive_float(value: str) -> float:
    number = float(value)
    if not number > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return number


def _probability(value: str) -> float:
    number = float(value)
    if not 0.0 < number < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return number


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="YAML or JSON config file")
    parser.add_argument("--preset", choices=sorted(PRESETS), help=f"Preset the config overrides (default: {DEFAULT_PRESET})")
    parser.add_argument("--seed", type=int, help="Master seed (overrides the config)")
    parser.add_argument("-o", "--output", default=default_output_dir(), help="Output directory (env: TOPAGG_OUTPUT_DIR)")
    parser.add_argument("--format", choices=("text", "json"), default="text", help="Format of the stdout summary")
    parser.add_argument("--workers", type=_positive_int, default=1, help="Worker threads; results do not depend on it")


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the command-line argument parser."""
    parser = argparse.ArgumentParser(
        prog="topagg",
        description="topagg - differentially private gradient compression and aggregation toolkit",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )

    parser.add_argument("--version", action="version", version=f"topagg {__version__}")
    parser.add_argument("--log-level", choices=LOG_LEVELS, default="WARNING", help="Logging level")

    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    accountant = commands.add_parser(
        "accountant",
        help="Privacy cost of repeated DPTopkAgg rounds",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    accountant.add_argument("--k", type=_positive_int, required=True, help="Votes per teacher")
    accountant.add_argument("--sigma", type=_positive_float, required=True, help="Noise standard deviation")
    accountant.add_argument("--delta", type=_probability, required=True, help="Target delta")
    budget = accountant.add_mutually_exclusive_group(required=True)
    budget.add_argument("--rounds", type=_positive_int, help="Print epsilon after each of this many rounds")
    budget.add_argument("--epsilon-target", type=_positive_float, help="Print the largest round count within this epsilon")
    accountant.add_argument("--q-tilde", type=float, help="Per-round q~ for the data-dependent track")
    accountant.add_argument("--format", choices=("text", "json"), default="text", help="Output format")

    for name, description in HARNESSES.items():
        sub = commands.add_parser(name, help=description, description=description, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        _add_common(sub)
        if name == "pate":
            sub.add_argument("--epsilon-target", type=_positive_float, help="Privacy budget (overrides the config)")

    return parser


def parse_args(argv: Optional[List[str]] = None) -> Dict[str, Any]:
    """
    Parses command line arguments.

    Args:
        argv: Arguments without the program name; defaults to ``sys.argv[1:]``

    Returns:
        A dictionary containing the parsed arguments.
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command == "accountant" and args.q_tilde is not None and not 0.0 <= args.q_tilde <= 1.0:
        parser.error("--q-tilde must be in [0, 1]")

    return vars(args)
