"""Experiment configuration: one JSON document describing topology,
procedure, parameters, schedule mode, flows, seeds, and an optional sweep
axis. The CLI materializes a config into concrete runs; durations in
configs accept ns/us/ms/s suffixed strings and are normalized to integer
nanoseconds on parse.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

from . import consistency, planner, topology
from .delays import DelayModel
from .model import (
    DELIVER,
    ForwardingState,
    Schedule,
    SingletonUpdate,
    SystemParameters,
    TimedUpdateProcedure,
    UpdateProcedure,
)
from .simulator import RunDelays, run_flows, run_timed, run_untimed

MODES = ("untimed-greedy", "timed-worst-case", "timed-knob", "simultaneous")
AXES = ("N", "dc", "dn", "delta_sched", "d")

_DURATION_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(ns|us|ms|s)\s*$")
_UNIT_NS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


def parse_duration(value, field: str = "duration") -> int:
    """'5.24ms' / '200us' / plain number (nanoseconds) -> integer nanoseconds."""
    if isinstance(value, bool):
        raise ConfigError(f"{field}: expected a duration, got {value!r}")
    if isinstance(value, (int, float)):
        if value < 0:
            raise ConfigError(f"{field}: duration must be >= 0")
        return int(round(value))
    if isinstance(value, str):
        m = _DURATION_RE.match(value)
        if m:
            return int(round(float(m.group(1)) * _UNIT_NS[m.group(2)]))
        if value.strip().isdigit():
            return int(value.strip())
    raise ConfigError(f"{field}: cannot parse duration {value!r}")


def config_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _parse_delay_model(spec, field: str) -> DelayModel:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{field}: expected an object with a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "constant":
            return DelayModel.constant(parse_duration(spec["value"], f"{field}.value"))
        if kind == "uniform":
            return DelayModel.uniform(parse_duration(spec["hi"], f"{field}.hi"))
        if kind == "exponential":
            mean = parse_duration(spec["mean"], f"{field}.mean")
            cap = parse_duration(spec["cap"], f"{field}.cap") if "cap" in spec else None
            return DelayModel.exponential(mean, cap)
        if kind == "empirical":
            return DelayModel.empirical(
                [parse_duration(s, f"{field}.samples") for s in spec["samples"]])
    except KeyError as exc:
        raise ConfigError(f"{field}: missing {exc.args[0]!r}") from None
    raise ConfigError(f"{field}.kind: unknown delay model {kind!r}")


@dataclass
class Point:
    """One fully materialized experiment point (a single sweep position)."""

    net: object
    params: SystemParameters
    proc: UpdateProcedure
    initial_state: ForwardingState
    flows: list
    flow_paths: dict
    mode: str
    knob_d: int | None
    start_time: int
    delays: RunDelays | None

    def schedule(self) -> Schedule:
        if self.mode == "timed-worst-case":
            return planner.worst_case_schedule(self.proc, self.start_time, self.params)
        if self.mode == "timed-knob":
            if self.proc.num_phases != 3 or self.proc.gc_phases() != frozenset({3}):
                raise ConfigError(
                    "mode: timed-knob requires a two-phase + garbage-collection procedure")
            return consistency.knob_schedule(self.start_time, self.knob_d, self.params)
        if self.mode == "simultaneous":
            gc = self.proc.gc_phases()
            phases = {j: self.start_time
                      for j in range(1, self.proc.num_phases + 1) if j not in gc}
            return Schedule.build(phases, {j: self.start_time for j in gc})
        raise ConfigError(f"mode: {self.mode!r} has no schedule")

    def plan(self):
        """(untimed_worst_ns, timed_worst_ns, timed_wins) for this point."""
        gc = self.proc.gc_phases()
        untimed = planner.longest_path(
            planner.build_pert_untimed(self.proc, self.params, gc)).worst_case
        if self.mode in ("timed-worst-case", "timed-knob", "simultaneous"):
            sched = self.schedule()
        else:
            sched = planner.worst_case_schedule(self.proc, self.start_time, self.params)
        timed = sched.last_time() + self.params.delta_sched - sched.first_time()
        return untimed, timed, timed < untimed

    def run(self, seed: int):
        """Simulate this point under one seed; returns (RunResult, reports)."""
        if self.mode == "untimed-greedy":
            run = run_untimed(self.net, self.proc, self.params, self.delays,
                              seed=seed, initial_state=self.initial_state,
                              start_time=self.start_time)
        else:
            tproc = TimedUpdateProcedure(self.proc, self.schedule())
            run = run_timed(self.net, tproc, self.params, self.delays,
                            seed=seed, initial_state=self.initial_state)
        reports = []
        if self.flows:
            run_flows(self.net, run, self.flows)
            reports = [consistency.measure_inconsistency(run, f)
                       for f in sorted(self.flows, key=lambda f: f.flow_id)]
        return run, reports


def _kphase_items(net, phase_sets, gc_phases):
    items = []
    state_rules = {}
    for j, switches in enumerate(phase_sets, start=1):
        if not switches:
            raise ConfigError(f"procedure.phases[{j - 1}]: phase must not be empty")
        for sw in switches:
            if sw not in set(net.switches):
                raise ConfigError(f"procedure.phases[{j - 1}]: unknown switch {sw!r}")
            port = min(net.ports[sw]) if net.ports[sw] else 0
            key = ("policy", f"v{j}", port)
            if j in gc_phases:
                items.append((SingletonUpdate.remove(sw, [key]), j))
                state_rules.setdefault(sw, {})[key] = DELIVER
            else:
                items.append((SingletonUpdate.install(sw, {key: DELIVER}), j))
    initial = ForwardingState.from_dict(net, state_rules)
    return UpdateProcedure(tuple(items)), initial


class Experiment:
    """Parsed experiment configuration plus sweep materialization."""

    def __init__(self, doc: dict, base_dir: Path | None = None):
        if not isinstance(doc, dict):
            raise ConfigError("config: expected a JSON object")
        self.doc = doc
        self.base_dir = base_dir or Path(".")
        self.mode = doc.get("mode", "untimed-greedy")
        if self.mode not in MODES:
            raise ConfigError(f"mode: unknown mode {self.mode!r}; expected one of {MODES}")
        self.seeds = list(doc.get("seeds", [0]))
        if not self.seeds:
            raise ConfigError("seeds: at least one seed required")
        sweep = doc.get("sweep")
        if sweep is not None:
            self.axis = sweep.get("axis")
            if self.axis not in AXES:
                raise ConfigError(f"sweep.axis: unknown axis {self.axis!r}; expected one of {AXES}")
            self.grid = list(sweep.get("grid", []))
            if not self.grid:
                raise ConfigError("sweep.grid: at least one value required")
        else:
            self.axis, self.grid = None, []
        self.hash = config_hash(doc)

    @classmethod
    def load(cls, path) -> "Experiment":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config: file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}") from None
        return cls(doc, base_dir=path.parent)

    def override(self, seeds=None, axis=None, grid=None) -> None:
        if seeds is not None:
            self.seeds = seeds
            self.doc["seeds"] = seeds
        if axis is not None or grid is not None:
            sweep = dict(self.doc.get("sweep", {}))
            if axis is not None:
                sweep["axis"] = axis
            if grid is not None:
                sweep["grid"] = grid
            self.doc["sweep"] = sweep
            self.axis = sweep.get("axis")
            if self.axis not in AXES:
                raise ConfigError(f"sweep.axis: unknown axis {self.axis!r}")
            self.grid = list(sweep.get("grid", []))
        self.hash = config_hash(self.doc)

    # -- materialization ---------------------------------------------------

    def _axis_params(self, base: dict, axis_value) -> dict:
        out = dict(base)
        if self.axis in ("dc", "dn", "delta_sched"):
            out[self.axis] = parse_duration(axis_value, f"sweep.grid({self.axis})")
        return out

    def _build_network(self, axis_value):
        spec = self.doc.get("topology")
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError("topology: expected an object with a 'kind'")
        kind = spec["kind"]
        if kind == "leaf_spine":
            n = spec.get("n")
            if self.axis == "N":
                n = axis_value
            if not isinstance(n, int):
                raise ConfigError("topology.n: integer switch count required")
            try:
                return topology.leaf_spine(n)
            except ValueError as exc:
                raise ConfigError(f"topology.n: {exc}") from None
        if kind == "file":
            if self.axis == "N":
                raise ConfigError("sweep.axis: N sweeps require a leaf_spine topology")
            if "path" not in spec:
                raise ConfigError("topology.path: required for file topologies")
            path = Path(spec["path"])
            if not path.is_absolute():
                path = self.base_dir / path
            if not path.exists():
                raise ConfigError(f"topology.path: file not found: {path}")
            return topology.load_topology(
                path,
                propagation_us_per_km=spec.get("propagation_us_per_km", 5.0),
                delay_mode=spec.get("delay_mode", "constant"),
                cap_factor=spec.get("cap_factor", 10.0))
        raise ConfigError(f"topology.kind: unknown kind {kind!r}")

    def _build_flows(self, net):
        flows, paths = [], {}
        for i, spec in enumerate(self.doc.get("flows", [])):
            field = f"flows[{i}]"
            for req in ("flow_id", "ingress", "path"):
                if req not in spec:
                    raise ConfigError(f"{field}.{req}: required")
            if "rate_pps" in spec:
                rate = float(spec["rate_pps"])
            elif "mbps" in spec:
                rate = float(spec["mbps"]) * 1e6 / (spec.get("packet_bytes", 1000) * 8)
            else:
                raise ConfigError(f"{field}.rate_pps: required (or mbps)")
            flow = consistency.TestFlow(spec["flow_id"], spec["ingress"],
                                        topology.INGRESS_PORT, rate)
            if flow.flow_id in paths:
                raise ConfigError(f"{field}.flow_id: duplicate id {flow.flow_id!r}")
            if (flow.ingress_switch, flow.ingress_port) not in net.ingress_ports:
                raise ConfigError(f"{field}.ingress: {spec['ingress']!r} is not an ingress node")
            path = list(spec["path"])
            if path[0] != flow.ingress_switch:
                raise ConfigError(f"{field}.path: must start at the ingress switch")
            flows.append(flow)
            paths[flow.flow_id] = path
        return flows, paths

    def _build_procedure(self, net, flows, paths, old_tag, new_tag):
        spec = self.doc.get("procedure", {"kind": "two-phase+gc"})
        kind = spec.get("kind")
        if kind in ("two-phase", "two-phase+gc"):
            with_gc = kind.endswith("+gc")
            if flows:
                pairs = [(f, paths[f.flow_id]) for f in flows]
                initial, proc = topology.label_change_update(net, pairs, old_tag, new_tag)
                if not with_gc:
                    proc = UpdateProcedure(tuple(
                        (u, p) for u, p in proc.items if p <= 2))
                return proc, initial
            phase2 = spec.get("phase2_switches")
            try:
                proc = topology.policy_update(net, phase2, with_gc=with_gc)
            except ValueError as exc:
                raise ConfigError(f"procedure: {exc}") from None
            return proc, topology.policy_initial_state(net)
        if kind in ("ordered", "k-phase"):
            phase_sets = spec.get("phases")
            if not phase_sets:
                raise ConfigError("procedure.phases: required for k-phase procedures")
            gc = frozenset(spec.get("gc_phases", []))
            return _kphase_items(net, phase_sets, gc)
        raise ConfigError(f"procedure.kind: unknown kind {kind!r}")

    def materialize(self, axis_value=None) -> Point:
        net = self._build_network(axis_value)
        flows, paths = self._build_flows(net)
        pspec = self.doc.get("params")
        if not isinstance(pspec, dict):
            raise ConfigError("params: required object")
        raw = {}
        for key in ("dc", "dn", "delta_msg", "delta_sched"):
            if key not in pspec:
                raise ConfigError(f"params.{key}: required")
            raw[key] = pspec[key]
        raw = self._axis_params(raw, axis_value)
        if raw["dn"] == "auto":
            if not flows:
                raise ConfigError("params.dn: 'auto' requires flows with paths")
            raw["dn"] = max(topology.path_link_bound_ns(net, paths[f.flow_id])
                            for f in flows)
        params = SystemParameters(
            d_c=parse_duration(raw["dc"], "params.dc"),
            d_n=parse_duration(raw["dn"], "params.dn"),
            delta_msg=parse_duration(raw["delta_msg"], "params.delta_msg"),
            delta_sched=parse_duration(raw["delta_sched"], "params.delta_sched"),
            t_su=(parse_duration(pspec["tsu"], "params.tsu")
                  if "tsu" in pspec else None))

        proc_spec = self.doc.get("procedure", {})
        proc, initial = self._build_procedure(
            net, flows, paths,
            proc_spec.get("old_tag", "A"), proc_spec.get("new_tag", "B"))

        knob_d = None
        if self.mode == "timed-knob":
            raw_d = axis_value if self.axis == "d" else self.doc.get("knob_d")
            if raw_d is None:
                raise ConfigError("knob_d: required for timed-knob mode")
            knob_d = parse_duration(raw_d, "knob_d")
        elif self.axis == "d":
            raise ConfigError("sweep.axis: 'd' sweeps require timed-knob mode")

        delays = None
        dspec = self.doc.get("delays")
        if dspec is not None:
            delays = RunDelays(
                ctrl=_parse_delay_model(dspec.get("ctrl", {"kind": "uniform", "hi": raw["dc"]}),
                                        "delays.ctrl"),
                gap=_parse_delay_model(dspec.get("gap", {"kind": "uniform", "hi": raw["delta_msg"]}),
                                       "delays.gap"))

        start_time = parse_duration(self.doc.get("start_time", "1s"), "start_time")
        return Point(net=net, params=params, proc=proc, initial_state=initial,
                     flows=flows, flow_paths=paths, mode=self.mode, knob_d=knob_d,
                     start_time=start_time, delays=delays)

    def points(self):
        """(axis_value_or_None, Point) for every sweep position."""
        if self.axis is None:
            yield None, self.materialize()
        else:
            for value in self.grid:
                yield value, self.materialize(value)
