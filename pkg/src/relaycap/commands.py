"""Subcommand handlers. Each takes the parsed arguments and returns an exit code."""

import argparse
import csv
import json
import math
import sys
import time

from .capacity import audit_curve, capacity_curve, cf_optimal, ah_optimal, with_theorem1_gap
from .channel import (
    GaussianRelaySpec,
    bsc_state_as_state_channel,
    bsc_state_channel,
    check_state_recoverable,
    dump_channel,
    dump_state_channel,
    gaussian_capacity,
    gaussian_cf_r0,
    gaussian_cf_rate,
    gaussian_cf_rstar,
    load_channel,
    load_gaussian,
    load_state_channel,
    validate,
)
from .codec import simulate_haf
from .config import get_optimizer_config, get_worker_count
from .constants import (
    CAPACITY_CSV_HEADER,
    FLOAT_FORMAT,
    GAUSSIAN_CAPACITY_CSV_HEADER,
    GAUSSIAN_PARAMETRIC_CSV_HEADER,
    SCHEMA_CAPACITY,
    SCHEMA_CHANNEL,
    SCHEMA_GAUSSIAN_CAPACITY,
    SCHEMA_GAUSSIAN_PARAMETRIC,
    SCHEMA_MANIFEST,
    SCHEMA_RATE_POINT,
    SCHEMA_STATE_CHANNEL,
    SCHEMA_VALIDATE,
    TOOL_VERSION,
)
from .errors import StateNotRecoverable
from .schemas import Pmf, RatePoint, RunManifest
from .trace import log_event

_NAMED_RELAY_FUNCTIONS = {
    "x XOR y": lambda x, y: x ^ y,
    "x": lambda x, y: x,
    "y": lambda x, y: y,
}


def parse_grid(
    text: str,
):
    """`start:step:stop` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} is not start:step:stop")
        start, step, stop = (float(part) for part in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"grid {text!r} needs step > 0 and stop >= start")
        count = math.floor((stop - start) / step + 1e-9)
        return [round(start + k * step, 12) for k in range(count + 1)]
    values = [float(part) for part in text.split(",") if part.strip()]
    if not values:
        raise ValueError("empty grid")
    return values


def _parse_pmf(
    text: str,
):
    return Pmf(probs=[float(part) for part in text.split(",")])


def _fmt(
    value: float | None,
):
    return "" if value is None else format(value, FLOAT_FORMAT)


def _rounded(
    value,
):
    if isinstance(value, float):
        return float(format(value, FLOAT_FORMAT))
    if isinstance(value, dict):
        return {key: _rounded(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(item) for item in value]
    return value


def _print_json(
    payload: dict,
):
    print(json.dumps(_rounded(payload), indent=2))


def _emit_manifest(
    command: str,
    args: argparse.Namespace,
    execution_start: float,
    input_files: list[str] | None = None,
    seeds: list[int] | None = None,
    output_schema: str | None = None,
):
    parameters = {
        key: value
        for key, value in vars(args).items()
        if key not in ("handler", "command", "quiet", "channel", "state_channel", "spec")
    }
    if output_schema:
        parameters["output_schema"] = output_schema
    manifest = RunManifest(
        schema_version=SCHEMA_MANIFEST,
        command=command,
        input_files=input_files or [],
        parameters=parameters,
        seeds=seeds or [],
        tool_version=TOOL_VERSION,
        started_at=execution_start,
        duration_s=time.time() - execution_start,
    )
    print(manifest.model_dump_json(), file=sys.stderr)


def _closed_form(
    table: dict[tuple[int, int], int],
):
    for name, fn in _NAMED_RELAY_FUNCTIONS.items():
        if all(fn(x, y) == y1 for (x, y), y1 in table.items()):
            return f"f(x,y)={name}"
    return None


def cmd_validate(
    args: argparse.Namespace,
    execution_start: float,
):
    ch = load_channel(args.channel)
    f = validate(ch)
    table = f.as_dict()
    print(f"schema: {SCHEMA_VALIDATE}")
    print(f"deterministic: {_closed_form(table) or f.describe()}")
    print("x,y,y1")
    for (x, y), y1 in sorted(table.items()):
        print(f"{x},{y},{y1}")
    _emit_manifest("validate", args, execution_start, input_files=[args.channel])
    return 0


def _capacity_status(
    point: RatePoint,
):
    if point.error:
        return point.error
    return "ok" if point.converged else "nonconverged"


def cmd_capacity(
    args: argparse.Namespace,
    execution_start: float,
):
    ch = load_channel(args.channel)
    grid = parse_grid(args.r0)
    cfg = get_optimizer_config(
        tolerance=args.tol,
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        seed=args.seed,
    )
    log_event(execution_start, "📈", "CLI", f"Capacity curve over {len(grid)} grid points")
    curve = capacity_curve(ch, grid, cfg, workers=get_worker_count(), execution_start=execution_start)
    for violation in audit_curve(curve):
        log_event(execution_start, "⚠️", "CLI", f"curve audit: {violation}")

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(list(CAPACITY_CSV_HEADER) + [f"px{x}" for x in range(ch.size_x)])
    for point in curve.points:
        px = [_fmt(p) for p in point.argmax_input] or [""] * ch.size_x
        writer.writerow(
            [
                SCHEMA_CAPACITY,
                _fmt(point.r0),
                _fmt(point.rate),
                point.active_branch or "",
                _fmt(point.link_term),
                _fmt(point.broadcast_term),
                str(point.converged).lower(),
                _capacity_status(point),
            ]
            + px
        )
    _emit_manifest("capacity", args, execution_start, input_files=[args.channel], seeds=[cfg.seed])
    return 0


def cmd_gaussian(
    args: argparse.Namespace,
    execution_start: float,
):
    flags = (args.P, args.N, args.rho)
    if args.spec is not None:
        if any(flag is not None for flag in flags):
            raise ValueError("--spec cannot be combined with --P, --N or --rho")
        spec = load_gaussian(args.spec)
    elif any(flag is None for flag in flags):
        raise ValueError("gaussian needs --spec FILE or all of --P, --N and --rho")
    else:
        spec = GaussianRelaySpec(P=args.P, N=args.N, rho=args.rho)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if args.sigma2 is not None:
        writer.writerow(GAUSSIAN_PARAMETRIC_CSV_HEADER)
        for sigma2 in parse_grid(args.sigma2):
            r0 = gaussian_cf_r0(spec, sigma2)
            rstar = gaussian_cf_rstar(spec, sigma2)
            writer.writerow(
                [SCHEMA_GAUSSIAN_PARAMETRIC, _fmt(sigma2), _fmt(r0), _fmt(rstar), _fmt(rstar - r0)]
            )
    else:
        writer.writerow(GAUSSIAN_CAPACITY_CSV_HEADER)
        for r0 in parse_grid(args.r0):
            cf = gaussian_cf_rate(spec, r0) if spec.rho == -1.0 else None
            writer.writerow([SCHEMA_GAUSSIAN_CAPACITY, _fmt(r0), _fmt(gaussian_capacity(spec, r0)), _fmt(cf)])
    _emit_manifest("gaussian", args, execution_start, input_files=[args.spec] if args.spec else None)
    return 0


def cmd_simulate(
    args: argparse.Namespace,
    execution_start: float,
):
    ch = load_channel(args.channel)
    px = _parse_pmf(args.px) if args.px else Pmf.uniform(ch.size_x)
    report = simulate_haf(
        ch,
        px,
        n=args.n,
        rate=args.rate,
        r0=args.r0,
        eps=args.eps,
        trials=args.trials,
        master_seed=args.seed,
        fixed_codebook=args.fixed_codebook,
        workers=get_worker_count(),
        execution_start=execution_start,
    )
    _print_json(report.model_dump(mode="json"))
    _emit_manifest("simulate", args, execution_start, input_files=[args.channel], seeds=[args.seed])
    return 0


def _print_rate_point(
    command: str,
    point: RatePoint,
):
    payload = {"schema_version": SCHEMA_RATE_POINT, "command": command}
    payload.update(point.model_dump(mode="json"))
    _print_json(payload)


def cmd_cf_rate(
    args: argparse.Namespace,
    execution_start: float,
):
    ch = load_channel(args.channel)
    cfg = get_optimizer_config(
        tolerance=args.tol,
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        seed=args.seed,
    )
    point = cf_optimal(ch, args.r0, cfg, execution_start)
    point = with_theorem1_gap(point, ch, cfg, execution_start)
    log_event(execution_start, "📐", "CLI", f"cf rate {point.rate:.6f}, gap {point.gap:.2e}")
    _print_rate_point("cf-rate", point)
    _emit_manifest("cf-rate", args, execution_start, input_files=[args.channel], seeds=[cfg.seed])
    return 0


def cmd_ah(
    args: argparse.Namespace,
    execution_start: float,
):
    state_ch = load_state_channel(args.state_channel)
    cfg = get_optimizer_config(
        tolerance=args.tol,
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        seed=args.seed,
    )
    try:
        check_state_recoverable(state_ch)
        recoverable = True
    except StateNotRecoverable as e:
        log_event(execution_start, "⚠️", "CLI", f"no capacity reference: {e}")
        recoverable = False
    point = ah_optimal(state_ch, args.r0, cfg, compare_theorem1=recoverable, execution_start=execution_start)
    _print_rate_point("ah", point)
    _emit_manifest("ah", args, execution_start, input_files=[args.state_channel], seeds=[cfg.seed])
    return 0


def cmd_bsc_state(
    args: argparse.Namespace,
    execution_start: float,
):
    if args.form == "state":
        print(dump_state_channel(bsc_state_as_state_channel(args.p)))
        schema = SCHEMA_STATE_CHANNEL
    else:
        print(dump_channel(bsc_state_channel(args.p)))
        schema = SCHEMA_CHANNEL
    _emit_manifest("bsc-state", args, execution_start, output_schema=schema)
    return 0
