"""Command-line experiment harness.

Subcommands:
  plan           worst-case durations (timed and untimed) per sweep point
  simulate       one simulated run with flows, inconsistency CSV, message log
  sweep          simulated durations across seeds vs. the planned worst case
  analyze-trace  percentile / tail-ratio analysis of a delay trace file

Every CSV starts with a metadata comment line recording the effective
config hash and seed list, then a header row. Outputs are byte-identical
across repeated invocations with the same config and seeds.

Exit codes: 0 success (recorded simulation faults are data, not failure),
2 configuration error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import stats
from .config import ConfigError, Experiment, config_hash, parse_duration
from .consistency import classify_packet

EXIT_CONFIG = 2
EXIT_INTERNAL = 3


def _meta_line(cfg_hash: str, seeds) -> str:
    return f"# config={cfg_hash} seeds={','.join(str(s) for s in seeds)}"


def _write_text(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _axis_cell(value) -> str:
    if isinstance(value, str):
        return str(parse_duration(value, "sweep.grid"))
    return str(value)


def cmd_plan(exp: Experiment, out: Path) -> int:
    lines = [_meta_line(exp.hash, exp.seeds),
             "axis_value,untimed_worst_ns,timed_worst_ns,timed_wins"]
    for axis_value, point in exp.points():
        untimed, timed, wins = point.plan()
        cell = _axis_cell(axis_value) if axis_value is not None else "-"
        lines.append(f"{cell},{untimed},{timed},{'true' if wins else 'false'}")
    _write_text(out / "plan.csv", lines)
    print(f"wrote {out / 'plan.csv'}")
    return 0


def _run_to_dict(run, exp_hash: str, reports) -> dict:
    flows = {}
    for rep in reports:
        traces = run.flow_traces[rep.flow_id]
        flows[rep.flow_id] = {
            "n_inconsistent": rep.n_inconsistent,
            "rate_pps": rep.rate_pps,
            "inconsistency_ns": rep.inconsistency_ns,
            "packets": [
                {"t_in": t.t_in,
                 "result": classify_packet(t, run.old_config, run.new_config),
                 "hops": len(t.hops),
                 "delivered": t.delivered}
                for t in traces],
        }
    p = run.params
    return {
        "meta": {"config": exp_hash, "seed": run.seed, "mode": run.mode,
                 "params_ns": {"dc": p.d_c, "dn": p.d_n, "delta_msg": p.delta_msg,
                               "delta_sched": p.delta_sched, "tsu": p.t_su}},
        "first_send_ns": run.first_send_ns,
        "first_exec_ns": run.first_exec_ns,
        "last_exec_ns": run.last_exec_ns,
        "update_duration_ns": run.update_duration_ns,
        "faults": [{"time_ns": f.time_ns, "kind": f.kind, "where": f.where,
                    "detail": f.detail} for f in run.faults],
        "flows": flows,
    }


def cmd_simulate(exp: Experiment, out: Path) -> int:
    seed = exp.seeds[0]
    if exp.axis is not None:
        # a simulate on a sweep config runs its first grid point
        axis_value = exp.grid[0]
        print(f"simulating single point {exp.axis}={axis_value}")
        point = exp.materialize(axis_value)
    else:
        point = exp.materialize()
    run, reports = point.run(seed)

    run_doc = _run_to_dict(run, exp.hash, reports)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run.json", "w", newline="\n") as fh:
        json.dump(run_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

    lines = [_meta_line(exp.hash, [seed]),
             "flow_id,n_inconsistent,rate_pps,inconsistency_ns"]
    lines += [rep.csv_row() for rep in reports]
    _write_text(out / "inconsistency.csv", lines)
    _write_text(out / "messages.log", [m.format() for m in run.messages])
    print(f"wrote {out / 'run.json'} ({len(run.faults)} faults, "
          f"{len(reports)} flows)")
    return 0


def cmd_sweep(exp: Experiment, out: Path) -> int:
    dur_lines = [_meta_line(exp.hash, exp.seeds),
                 "axis_value,mode,seed_count,sim_mean_ns,sim_min_ns,sim_max_ns,plan_worst_ns"]
    inc_lines = [_meta_line(exp.hash, exp.seeds),
                 "axis_value,flow_id,seed_count,i_mean_ns,i_min_ns,i_max_ns"]
    have_flows = False
    for axis_value, point in exp.points():
        cell = _axis_cell(axis_value) if axis_value is not None else "-"
        untimed_worst, timed_worst, _ = point.plan()
        plan_worst = untimed_worst if point.mode == "untimed-greedy" else timed_worst
        durations = []
        inconsistency = {}
        for seed in exp.seeds:
            run, reports = point.run(seed)
            durations.append(run.update_duration_ns)
            for rep in reports:
                inconsistency.setdefault(rep.flow_id, []).append(rep.inconsistency_ns)
        mean = round(sum(durations) / len(durations))
        dur_lines.append(f"{cell},{point.mode},{len(durations)},{mean},"
                         f"{min(durations)},{max(durations)},{plan_worst}")
        for flow_id in sorted(inconsistency):
            vals = inconsistency[flow_id]
            have_flows = True
            inc_lines.append(f"{cell},{flow_id},{len(vals)},"
                             f"{round(sum(vals) / len(vals))},{min(vals)},{max(vals)}")
    _write_text(out / "sweep.csv", dur_lines)
    if have_flows:
        _write_text(out / "inconsistency_sweep.csv", inc_lines)
    print(f"wrote {out / 'sweep.csv'}")
    return 0


def cmd_analyze_trace(trace_path: str, percentiles, out: Path) -> int:
    try:
        trace = stats.read_trace(trace_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"trace: {exc}") from None
    mean = stats.mean(trace)
    meta = {"trace": str(trace_path), "percentiles": list(percentiles)}
    lines = [_meta_line(config_hash(meta), []),
             "label,p,percentile_ns,mean_ns,ratio"]
    for p in percentiles:
        value = stats.percentile(trace, p)
        lines.append(f"{trace.label},{p:g},{value},{mean:.3f},{value / mean:.6f}")
    _write_text(out / "trace_stats.csv", lines)
    print(f"wrote {out / 'trace_stats.csv'}")
    return 0


def _parse_seeds(text: str):
    try:
        return [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"--seeds: cannot parse {text!r}") from None


def _parse_grid(text: str):
    values = []
    for tok in text.replace(",", " ").split():
        try:
            values.append(int(tok))
        except ValueError:
            values.append(tok)  # duration string; validated at materialization
    if not values:
        raise ConfigError("--grid: at least one value required")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netupdate",
        description="Plan and simulate consistent network updates.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seeds", help="override seed list, e.g. '0,1,2'")
        p.add_argument("--axis", help="override sweep axis")
        p.add_argument("--grid", help="override sweep grid, e.g. '6,12,24'")

    add_common(sub.add_parser("plan", help="closed-form worst cases per sweep point"))
    add_common(sub.add_parser("simulate", help="one seeded run with flows"))
    add_common(sub.add_parser("sweep", help="simulated durations across seeds"))

    pa = sub.add_parser("analyze-trace", help="percentile analysis of a delay trace")
    pa.add_argument("trace", help="trace file: one milliseconds value per line")
    pa.add_argument("--percentiles", default="0.999,0.9999,0.99999",
                    help="comma-separated fractions in (0, 1]")
    pa.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "analyze-trace":
            percentiles = [float(p) for p in args.percentiles.split(",") if p]
            if not percentiles or any(not 0 < p <= 1 for p in percentiles):
                raise ConfigError("--percentiles: fractions must be in (0, 1]")
            return cmd_analyze_trace(args.trace, percentiles, out)
        exp = Experiment.load(args.config)
        exp.override(seeds=_parse_seeds(args.seeds) if args.seeds else None,
                     axis=args.axis,
                     grid=_parse_grid(args.grid) if args.grid else None)
        if args.command == "plan":
            return cmd_plan(exp, out)
        if args.command == "simulate":
            return cmd_simulate(exp, out)
        if args.command == "sweep":
            return cmd_sweep(exp, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
