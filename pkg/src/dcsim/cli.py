"""Command-line front end.

    dcc-sim run --scenario exp.toml [--out-dir results --csv --trace]
    dcc-sim run --cca dc --owqd-th-frac 0.8 --buffer-bdp 2
    dcc-sim preset table1-dc10 [overrides]
    dcc-sim preset --list
    dcc-sim sweep --dim owqd_th_frac --values 0.1,0.2,0.5,0.8 --cca dc --owqd-th-frac 0.8

Exit status: 0 on success, 2 on any configuration problem.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .presets import PRESETS, get_preset, preset_description, preset_names
from .runner import (
    apply_dimension,
    emit_report,
    emit_sweep,
    format_report,
    normalize_dimension,
    run_scenario,
    sweep,
)
from .scenario import ConfigError, Scenario, load_scenario

K_DEFAULT_OUT_DIR = "dcc-sim-out"


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario overrides")
    g.add_argument("--capacity-mbps", type=float)
    g.add_argument("--rtt-min-ms", type=float)
    g.add_argument("--buffer-bdp", type=float, dest="buffer_bdp_multiple",
                   help="buffer as a multiple of the bandwidth-delay product")
    g.add_argument("--buffer-bytes", type=int)
    g.add_argument("--cca", help="controller name, or comma list with one name per flow")
    g.add_argument("--owqd-th-frac", type=float, dest="owqd_th_frac",
                   help="delay threshold as a fraction of buffer drain time (dc only)")
    g.add_argument("--owqd-th-us", type=int, dest="owqd_th_us")
    g.add_argument("--flows", type=int, dest="n_flows")
    g.add_argument("--packet-size-bytes", type=int)
    g.add_argument("--start-offsets-ms", dest="flow_start_offsets_ms",
                   help="comma list of per-flow start offsets")
    g.add_argument("--transfer-mb", type=float, help="per-flow transfer size, decimal MB")
    g.add_argument("--duration-s", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--reps", type=int, dest="repetitions")
    g.add_argument("--ack-ratio", type=int)
    g.add_argument("--pacing-interval-us", type=int)
    g.add_argument("--pacing-jitter-us", type=int,
                   help="max extra pacing delay per release; 0 disables")
    g.add_argument("--ack-jitter-us", type=int,
                   help="max extra reverse-path delay per ack; 0 disables")
    g.add_argument("--clock-offset-us", type=int)
    g.add_argument("--clock-skew-ppm", type=float)
    g.add_argument("--warmup-s", type=float)
    g.add_argument("--rtt-weighting", choices=("sample", "time"))
    g.add_argument("--label")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("output")
    g.add_argument("--out-dir", help="directory for CSV files and figures")
    g.add_argument("--csv", action="store_true",
                   help=f"write report files (defaults --out-dir to ./{K_DEFAULT_OUT_DIR})")
    g.add_argument("--trace", action="store_true",
                   help="collect per-ack series and write time-series files")
    g.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcc-sim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--scenario", help="TOML scenario file")
    _add_scenario_flags(p_run)
    _add_output_flags(p_run)

    p_pre = sub.add_parser("preset", help="run a built-in scenario")
    p_pre.add_argument("name", nargs="?", help="preset name; omit to list")
    p_pre.add_argument("--list", action="store_true", dest="list_presets")
    _add_scenario_flags(p_pre)
    _add_output_flags(p_pre)

    p_sweep = sub.add_parser("sweep", help="run a scenario across one dimension")
    p_sweep.add_argument("--dim", required=True,
                         help="buffer_bdp_multiple | owqd_th_frac | cca")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--scenario", help="TOML base scenario")
    p_sweep.add_argument("--preset", help="built-in base scenario", dest="base_preset")
    _add_scenario_flags(p_sweep)
    _add_output_flags(p_sweep)
    return parser


_FLAG_FIELDS = (
    "capacity_mbps",
    "rtt_min_ms",
    "buffer_bdp_multiple",
    "buffer_bytes",
    "cca",
    "owqd_th_frac",
    "owqd_th_us",
    "n_flows",
    "packet_size_bytes",
    "flow_start_offsets_ms",
    "duration_s",
    "seed",
    "repetitions",
    "ack_ratio",
    "pacing_interval_us",
    "pacing_jitter_us",
    "ack_jitter_us",
    "clock_offset_us",
    "clock_skew_ppm",
    "warmup_s",
    "rtt_weighting",
    "label",
)

# setting the left field retires the right one unless it was set too
_EXCLUSIVE = (
    ("buffer_bdp_multiple", "buffer_bytes"),
    ("buffer_bytes", "buffer_bdp_multiple"),
    ("owqd_th_frac", "owqd_th_us"),
    ("owqd_th_us", "owqd_th_frac"),
    ("transfer_bytes", "duration_s"),
    ("duration_s", "transfer_bytes"),
)


def _apply_overrides(base: Scenario, args) -> Scenario:
    data = dataclasses.asdict(base)
    changed = {}
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            changed[name] = value
    if getattr(args, "transfer_mb", None) is not None:
        changed["transfer_bytes"] = int(round(args.transfer_mb * 1e6))
    if "cca" in changed:
        changed["cca"] = tuple(v.strip() for v in changed["cca"].split(","))
        if "dc" not in changed["cca"] and "owqd_th_frac" not in changed and "owqd_th_us" not in changed:
            changed["owqd_th_frac"] = None
            changed["owqd_th_us"] = None
    if "flow_start_offsets_ms" in changed and isinstance(changed["flow_start_offsets_ms"], str):
        changed["flow_start_offsets_ms"] = tuple(
            float(v) for v in changed["flow_start_offsets_ms"].split(",")
        )
    if "n_flows" in changed and "flow_start_offsets_ms" not in changed:
        data["flow_start_offsets_ms"] = None  # re-derive the default spacing
    for set_field, retired in _EXCLUSIVE:
        if set_field in changed and retired not in changed:
            data[retired] = None
    data.update(changed)
    try:
        return Scenario(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _base_scenario(args) -> Scenario:
    if getattr(args, "scenario", None):
        try:
            base = load_scenario(args.scenario)
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file: {exc}") from exc
    elif getattr(args, "base_preset", None):
        base = get_preset(args.base_preset)
    elif getattr(args, "name", None):
        base = get_preset(args.name)
    else:
        base = None
    if base is None:
        return _apply_overrides_from_scratch(args)
    return _apply_overrides(base, args)


def _apply_overrides_from_scratch(args) -> Scenario:
    data = {}
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if getattr(args, "transfer_mb", None) is not None:
        data["transfer_bytes"] = int(round(args.transfer_mb * 1e6))
    if "cca" in data:
        data["cca"] = tuple(v.strip() for v in data["cca"].split(","))
    if "flow_start_offsets_ms" in data:
        data["flow_start_offsets_ms"] = tuple(
            float(v) for v in data["flow_start_offsets_ms"].split(",")
        )
    return Scenario(**data)


def _emit_destination(args) -> str | None:
    if args.out_dir:
        return args.out_dir
    if args.csv or args.trace:
        return K_DEFAULT_OUT_DIR
    return None


def _run_one(args) -> int:
    scenario = _base_scenario(args)
    report = run_scenario(scenario, collect_series=args.trace)
    print(format_report(report))
    dest = _emit_destination(args)
    if dest is not None:
        written = emit_report(report, dest, write_trace=args.trace,
                              make_plots=not args.no_plots)
        print(f"wrote {len(written)} file(s) to {dest}")
    return 0


def _run_preset(args) -> int:
    if args.list_presets or not args.name:
        width = max(len(n) for n in preset_names())
        for name in preset_names():
            print(f"{name:<{width}}  {preset_description(name)}")
        return 0
    return _run_one(args)


def _run_sweep(args) -> int:
    base = _base_scenario(args)
    dim = normalize_dimension(args.dim)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    swept = sweep(base, dim, values, collect_series=args.trace)
    for value, report in swept:
        print(f"-- {dim} = {value}")
        print(format_report(report))
    dest = _emit_destination(args)
    if dest is not None:
        written = emit_sweep(swept, dim, dest, make_plots=not args.no_plots)
        print(f"wrote {len(written)} file(s) to {dest}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run_one(args)
        if args.command == "preset":
            return _run_preset(args)
        return _run_sweep(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
