import argparse
import os
import sys
import time

from dotenv import load_dotenv
from pydantic import ValidationError

from .relaycap.commands import (
    cmd_ah,
    cmd_bsc_state,
    cmd_capacity,
    cmd_cf_rate,
    cmd_gaussian,
    cmd_simulate,
    cmd_validate,
)
from .relaycap.constants import DEFAULT_EPS
from .relaycap.errors import RelayCapError

load_dotenv()


def _add_optimizer_flags(
    parser: argparse.ArgumentParser,
):
    parser.add_argument("--tol", type=float, help="Optimizer tolerance (RELAYCAP_TOLERANCE).")
    parser.add_argument("--max-iterations", type=int, help="Iteration cap per start (RELAYCAP_MAX_ITERATIONS).")
    parser.add_argument("--restarts", type=int, help="Random restarts (RELAYCAP_RESTARTS).")
    parser.add_argument("--seed", type=int, help="Seed for random restarts (RELAYCAP_SEED).")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="relaycap",
        description="Capacity, achievable rates and hash-and-forward simulation for deterministic relay channels",
    )
    parser.add_argument("--quiet", action="store_true", help="Silence progress lines on stderr.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    validate_parser = subparsers.add_parser("validate", help="Check that the relay output is a function of (x, y).")
    validate_parser.add_argument("channel", help="Channel JSON file.")
    validate_parser.set_defaults(handler=cmd_validate)

    capacity_parser = subparsers.add_parser("capacity", help="Capacity curve C(R0) as CSV.")
    capacity_parser.add_argument("channel", help="Channel JSON file.")
    capacity_parser.add_argument("--r0", required=True, help="Grid: start:step:stop or a comma list.")
    _add_optimizer_flags(capacity_parser)
    capacity_parser.set_defaults(handler=cmd_capacity)

    gaussian_parser = subparsers.add_parser("gaussian", help="Gaussian relay closed forms as CSV.")
    gaussian_parser.add_argument("--spec", help='Parameter JSON file {"P": ..., "N": ..., "rho": ...}.')
    gaussian_parser.add_argument("--P", type=float, help="Input power.")
    gaussian_parser.add_argument("--N", type=float, help="Noise variance.")
    gaussian_parser.add_argument("--rho", type=float, help="Noise correlation, -1 or +1.")
    grid = gaussian_parser.add_mutually_exclusive_group(required=True)
    grid.add_argument("--r0", help="Link-rate grid.")
    grid.add_argument("--sigma2", help="Compression-noise grid for the parametric curve.")
    gaussian_parser.set_defaults(handler=cmd_gaussian)

    simulate_parser = subparsers.add_parser("simulate", help="Monte Carlo run of hash-and-forward.")
    simulate_parser.add_argument("channel", help="Channel JSON file.")
    simulate_parser.add_argument("--n", type=int, required=True, help="Block length.")
    simulate_parser.add_argument("--rate", type=float, required=True, help="Code rate in bits per use.")
    simulate_parser.add_argument("--r0", type=float, required=True, help="Relay link rate.")
    simulate_parser.add_argument("--eps", type=float, default=DEFAULT_EPS, help="Typicality slack.")
    simulate_parser.add_argument("--trials", type=int, required=True, help="Number of trials.")
    simulate_parser.add_argument("--seed", type=int, required=True, help="Master seed.")
    simulate_parser.add_argument("--px", help="Input pmf as a comma list (default uniform).")
    simulate_parser.add_argument(
        "--fixed-codebook",
        action="store_true",
        help="Draw one codebook and hash for all trials.",
    )
    simulate_parser.set_defaults(handler=cmd_simulate)

    cf_parser = subparsers.add_parser("cf-rate", help="Best compress-and-forward rate as JSON.")
    cf_parser.add_argument("channel", help="Channel JSON file.")
    cf_parser.add_argument("--r0", type=float, required=True, help="Relay link rate.")
    _add_optimizer_flags(cf_parser)
    cf_parser.set_defaults(handler=cmd_cf_rate)

    ah_parser = subparsers.add_parser("ah", help="Rate-limited state expression as JSON.")
    ah_parser.add_argument("state_channel", help="State-channel JSON file with ps and channel.")
    ah_parser.add_argument("--r0", type=float, required=True, help="Relay link rate.")
    _add_optimizer_flags(ah_parser)
    ah_parser.set_defaults(handler=cmd_ah)

    bsc_parser = subparsers.add_parser("bsc-state", help="Write the binary channel with additive state.")
    bsc_parser.add_argument("--p", type=float, required=True, help="State crossover probability.")
    bsc_parser.add_argument("--form", choices=["relay", "state"], default="relay")
    bsc_parser.set_defaults(handler=cmd_bsc_state)

    return parser


def main(
    argv: list[str] | None = None,
):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.quiet:
        os.environ["RELAYCAP_QUIET"] = "1"

    execution_start = time.time()
    try:
        return args.handler(args, execution_start)
    except RelayCapError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValidationError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
