"""Deterministic discrete-event execution of update procedures.

A run is two stages. The control-plane stage executes the controller and
switch behaviors (greedy untimed, or scheduled timed) through an event
queue and produces a state timeline: every switch's rule table as a
function of real time. The data-plane stage walks injected test-flow
packets through that timeline hop by hop, sampling link delays. Packets
never influence switch state, so the split loses nothing and keeps both
stages reproducible from a single seed.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .delays import DelayModel
from .model import (
    DROP,
    GEN_NEW,
    ForwardingState,
    Network,
    PacketInstance,
    SystemParameters,
    TimedUpdateProcedure,
    UpdateProcedure,
)


@dataclass(frozen=True)
class ClockModel:
    """Scheduling-accuracy decomposition: fixed per-switch clock offset in
    [0, sync_err] plus per-command execution jitter in [0, exec_err].

    sync_err + exec_err must equal the declared scheduling error bound, so a
    command scheduled for clock time T runs at real time within [T, T + bound].
    """

    sync_err: int
    exec_err: int

    def __post_init__(self):
        if self.sync_err < 0 or self.exec_err < 0:
            raise ValueError("clock error terms must be >= 0")

    @classmethod
    def default(cls, params: SystemParameters) -> "ClockModel":
        # perfect sync, all of the error budget in execution jitter
        return cls(0, params.delta_sched)


@dataclass(frozen=True)
class RunDelays:
    """Delay models for the controller channel and the inter-message gap."""

    ctrl: DelayModel
    gap: DelayModel

    @classmethod
    def default(cls, params: SystemParameters) -> "RunDelays":
        return cls(DelayModel.uniform(params.d_c), DelayModel.uniform(params.delta_msg))


class EventQueue:
    """Min-priority queue on (time, insertion sequence).

    Events with equal timestamps dequeue in insertion order, which pins down
    the one source of nondeterminism a heap would otherwise introduce.
    """

    def __init__(self):
        self._heap = []
        self._seq = 0

    def push(self, time_ns: int, payload) -> None:
        heapq.heappush(self._heap, (time_ns, self._seq, payload))
        self._seq += 1

    def pop(self):
        time_ns, seq, payload = heapq.heappop(self._heap)
        return time_ns, seq, payload

    def __len__(self):
        return len(self._heap)


@dataclass(frozen=True)
class ExecRecord:
    """One singleton update taking effect on a switch."""

    time_ns: int
    switch: str
    phase: int
    mode: str
    msg_index: int


@dataclass(frozen=True)
class LogLine:
    time_ns: int
    kind: str
    src: str
    dst: str
    phase: int
    detail: str

    def format(self) -> str:
        return f"{self.time_ns} {self.kind} {self.src} {self.dst} {self.phase} {self.detail}"


@dataclass(frozen=True)
class Fault:
    time_ns: int
    kind: str   # "missed_schedule" | "bound_violation"
    where: str
    detail: str


def _lookup_table(table: dict, flow_id: str, tag, port: int):
    if tag is not None:
        hit = table.get((flow_id, tag, port))
        if hit is not None:
            return hit
    hit = table.get((flow_id, None, port))
    if hit is not None:
        return hit
    return (DROP, None)


class StateTimeline:
    """Per-switch rule tables as a step function of real time."""

    def __init__(self, net: Network, initial: ForwardingState, execs):
        self._base = {s: initial.switch_table(s) for s in net.switches}
        self._times = {s: [] for s in net.switches}
        self._tables = {s: [] for s in net.switches}
        current = {s: dict(t) for s, t in self._base.items()}
        for time_ns, update in execs:
            table = dict(current[update.target])
            if update.mode == "install":
                for key, action in update.entries:
                    table[key] = (action, GEN_NEW)
            else:
                for key, _ in update.entries:
                    table.pop(key, None)
            current[update.target] = table
            self._times[update.target].append(time_ns)
            self._tables[update.target].append(table)

    def table_at(self, switch: str, time_ns: int) -> dict:
        if switch not in self._base:
            raise ValueError(f"unknown switch {switch!r}")
        idx = bisect_right(self._times[switch], time_ns)
        return self._base[switch] if idx == 0 else self._tables[switch][idx - 1]

    def lookup(self, switch: str, time_ns: int, flow_id: str, tag, port: int):
        """Action and rule generation seen by a packet at this switch and instant.

        A rule change at time t is visible to a packet arriving exactly at t.
        """
        return _lookup_table(self.table_at(switch, time_ns), flow_id, tag, port)


@dataclass
class RunResult:
    """Everything observable about one simulated update."""

    mode: str
    seed: int
    params: SystemParameters
    first_send_ns: int
    exec_log: list
    messages: list
    faults: list
    old_config: ForwardingState
    new_config: ForwardingState
    timeline: StateTimeline
    sched_first_ns: int | None = None
    sched_last_ns: int | None = None
    flow_traces: dict = field(default_factory=dict)
    flow_windows: dict = field(default_factory=dict)

    @property
    def first_exec_ns(self) -> int:
        return min(e.time_ns for e in self.exec_log)

    @property
    def last_exec_ns(self) -> int:
        return max(e.time_ns for e in self.exec_log)

    @property
    def update_duration_ns(self) -> int:
        """Time from the first rule taking effect to the last one."""
        return self.last_exec_ns - self.first_exec_ns


def _finish_run(mode, seed, params, first_send, queue, messages, faults,
                net, initial, proc, sched_first=None, sched_last=None) -> RunResult:
    exec_log = []
    execs = []
    while len(queue):
        time_ns, _, (update, phase, msg_index) = queue.pop()
        exec_log.append(ExecRecord(time_ns, update.target, phase, update.mode, msg_index))
        execs.append((time_ns, update))
        messages.append(LogLine(time_ns, "exec", update.target, "-", phase,
                                f"msg={msg_index} mode={update.mode}"))
    new_config = initial
    for j in range(1, proc.num_phases + 1):
        for u in proc.updates_in_phase(j):
            new_config = new_config.apply(u)
    messages.sort(key=lambda m: (m.time_ns, 0 if m.kind == "send" else 1))
    return RunResult(
        mode=mode, seed=seed, params=params, first_send_ns=first_send,
        exec_log=exec_log, messages=messages, faults=faults,
        old_config=initial, new_config=new_config,
        timeline=StateTimeline(net, initial, execs),
        sched_first_ns=sched_first, sched_last_ns=sched_last)


def _ordered_messages(proc: UpdateProcedure):
    out = []
    idx = 0
    for j in range(1, proc.num_phases + 1):
        for u in proc.updates_in_phase(j):
            out.append((idx, j, u))
            idx += 1
    return out


def run_untimed(net: Network, proc: UpdateProcedure, params: SystemParameters,
                delays: RunDelays | None = None, seed: int = 0,
                initial_state: ForwardingState | None = None,
                start_time: int = 0, gc_phases=None,
                pin_worst_case: bool = False) -> RunResult:
    """Greedy untimed execution: each message goes out at the earliest time
    that still guarantees phase ordering under the declared bounds.

    Consecutive sends are separated by a sampled gap; at a phase boundary the
    controller additionally waits until d_c (or d_c + d_n when the next phase
    is garbage collection) has elapsed since the last send of the finished
    phase. A switch completes its update when the message arrives; the
    controller-to-switch delay bound already includes install time.

    pin_worst_case realizes the worst-case corner exactly: every gap at its
    bound, every controller delay at its bound except the very first message,
    which takes the zero lower bound so the duration measurement starts at
    the earliest possible instant.
    """
    delays = delays or RunDelays.default(params)
    initial = initial_state or ForwardingState.empty(net)
    if gc_phases is None:
        gc_phases = proc.gc_phases()
    rng = np.random.default_rng(seed)
    queue = EventQueue()
    messages, faults = [], []

    t = start_time
    prev_send, prev_phase = None, None
    switches = set(net.switches)
    for idx, phase, update in _ordered_messages(proc):
        if update.target not in switches:
            raise ValueError(f"procedure targets unknown switch {update.target!r}")
        if prev_send is not None:
            gap = params.delta_msg if pin_worst_case else delays.gap.sample(rng)
            if gap > params.delta_msg:
                faults.append(Fault(prev_send, "bound_violation", "ctrl",
                                    f"gap {gap} > delta_msg {params.delta_msg}"))
            if phase != prev_phase:
                guard = params.d_c + (params.d_n if phase in gc_phases else 0)
                t = prev_send + max(gap, guard)
            else:
                t = prev_send + gap
        if pin_worst_case:
            ctrl = 0 if idx == 0 else params.d_c
        else:
            ctrl = delays.ctrl.sample(rng)
        if ctrl > params.d_c:
            faults.append(Fault(t, "bound_violation", update.target,
                                f"ctrl delay {ctrl} > d_c {params.d_c}"))
        messages.append(LogLine(t, "send", "ctrl", update.target, phase,
                                f"msg={idx} mode={update.mode}"))
        queue.push(t + ctrl, (update, phase, idx))
        prev_send, prev_phase = t, phase

    return _finish_run("untimed", seed, params, start_time, queue, messages,
                       faults, net, initial, proc)


def run_timed(net: Network, tproc: TimedUpdateProcedure, params: SystemParameters,
              delays: RunDelays | None = None, seed: int = 0,
              initial_state: ForwardingState | None = None,
              send_time: int | None = None, clock: ClockModel | None = None,
              pin_worst_case: bool = False) -> RunResult:
    """Timed execution: the controller ships every message up front; each
    switch runs its update when its local clock reaches the scheduled time.

    Real execution time is scheduled time + clock offset + execution jitter,
    always within [T, T + delta_sched]. A message that arrives after its
    planned execution instant is executed immediately on arrival and recorded
    as a missed_schedule fault.

    pin_worst_case stretches every jitter to the bound except the
    earliest-scheduled update, which executes exactly on time.
    """
    proc, schedule = tproc.procedure, tproc.schedule
    delays = delays or RunDelays.default(params)
    initial = initial_state or ForwardingState.empty(net)
    clock = clock or ClockModel.default(params)
    if clock.sync_err + clock.exec_err != params.delta_sched:
        raise ValueError("clock error budget must sum to delta_sched")
    rng = np.random.default_rng(seed)
    queue = EventQueue()
    messages, faults = [], []

    msgs = _ordered_messages(proc)
    count = len(msgs)
    t_su = params.t_su if params.t_su is not None else (
        params.d_c + params.delta_msg * count)
    sched_first = schedule.first_time()
    if send_time is None:
        send_time = sched_first - t_su
    if sched_first < send_time:
        raise ValueError("schedule starts before messages are sent")

    if pin_worst_case:
        offsets = {s: 0 for s in net.switches}
        pin_first = min(msgs, key=lambda m: (schedule.time_for_phase(m[1]), m[0]))[0]
    else:
        offsets = {s: int(rng.integers(0, clock.sync_err, endpoint=True))
                   for s in net.switches}
        pin_first = None

    t = send_time
    for idx, phase, update in msgs:
        if update.target not in offsets:
            raise ValueError(f"procedure targets unknown switch {update.target!r}")
        if idx > 0:
            gap = params.delta_msg if pin_worst_case else delays.gap.sample(rng)
            if gap > params.delta_msg:
                faults.append(Fault(t, "bound_violation", "ctrl",
                                    f"gap {gap} > delta_msg {params.delta_msg}"))
            t += gap
        ctrl = params.d_c if pin_worst_case else delays.ctrl.sample(rng)
        if ctrl > params.d_c:
            faults.append(Fault(t, "bound_violation", update.target,
                                f"ctrl delay {ctrl} > d_c {params.d_c}"))
        arrival = t + ctrl
        sched_t = schedule.time_for_phase(phase)
        if pin_worst_case:
            jitter = 0 if idx == pin_first else params.delta_sched
        else:
            jitter = int(rng.integers(0, clock.exec_err, endpoint=True))
        planned = sched_t + offsets[update.target] + jitter
        if arrival > planned:
            faults.append(Fault(arrival, "missed_schedule", update.target,
                                f"arrival {arrival} > planned exec {planned}"))
            exec_time = arrival
        else:
            exec_time = planned
        messages.append(LogLine(t, "send", "ctrl", update.target, phase,
                                f"msg={idx} mode={update.mode} sched={sched_t}"))
        queue.push(exec_time, (update, phase, idx))

    return _finish_run("timed", seed, params, send_time, queue, messages, faults,
                       net, initial, proc,
                       sched_first=sched_first, sched_last=schedule.last_time())


# ---------------------------------------------------------------------------
# data plane


@dataclass(frozen=True)
class Hop:
    time_ns: int
    switch: str
    in_port: int
    tag: str | None   # packet tag on arrival at this hop
    action: object
    generation: str | None


@dataclass(frozen=True)
class PacketTrace:
    flow_id: str
    t_in: int
    hops: tuple
    delivered: bool
    truncated: bool = False
    stranded: bool = False


def inject_flow(net: Network, flow, window) -> list:
    """Packet instances of a test flow over [t0, t1): identical packets at
    exact 1/R spacing from the flow's ingress port."""
    t0, t1 = window
    if (flow.ingress_switch, flow.ingress_port) not in net.ingress_ports:
        raise ValueError(f"flow {flow.flow_id}: ingress is not an ingress port")
    spacing = flow.spacing_ns
    out = []
    t = t0
    while t < t1:
        out.append(PacketInstance(flow.packet, flow.ingress_switch,
                                  flow.ingress_port, t))
        t += spacing
    if not out:
        out.append(PacketInstance(flow.packet, flow.ingress_switch,
                                  flow.ingress_port, t0))
    return out


def forward_packet(net: Network, timeline: StateTimeline, pi: PacketInstance,
                   rng: np.random.Generator) -> PacketTrace:
    """Walk one packet through the network, resolving each hop against the
    switch state as of the packet's arrival there.

    Hops beyond the switch count indicate a forwarding loop (possible in
    mixed-generation states); the trace is truncated and flagged.
    """
    sw, port = pi.ingress_switch, pi.ingress_port
    t = pi.arrival_time
    tag = pi.packet.version_tag
    flow_id = pi.packet.flow_id
    hops = []
    delivered = truncated = stranded = False
    for _ in range(len(net.switches)):
        action, gen = timeline.lookup(sw, t, flow_id, tag, port)
        hops.append(Hop(t, sw, port, tag, action, gen))
        if action.kind == "deliver":
            delivered = True
            break
        if action.kind == "drop":
            break
        if action.kind == "forward_tagged":
            tag = action.new_tag
        peer = net.peer(sw, action.out_port)
        if peer is None:
            stranded = True
            break
        t += peer[2].sample(rng)
        sw, port = peer[0], peer[1]
    else:
        truncated = True
    return PacketTrace(flow_id, pi.arrival_time, tuple(hops), delivered,
                       truncated, stranded)


def default_flow_window(run: RunResult, spacing_ns: int):
    """Injection window covering the whole update plus drain margins."""
    start_anchor = run.first_exec_ns
    if run.sched_first_ns is not None:
        start_anchor = min(start_anchor, run.sched_first_ns)
    margin = 2 * spacing_ns
    return (start_anchor - run.params.d_n - margin,
            run.last_exec_ns + run.params.d_n + margin)


def run_flows(net: Network, run: RunResult, flows, window=None) -> None:
    """Inject and forward every test flow, attaching traces to the run.

    Each flow gets an independent generator derived from the run seed and
    the flow's position in flow-id order, so adding a flow never perturbs
    the packets of another.
    """
    for idx, flow in enumerate(sorted(flows, key=lambda f: f.flow_id)):
        w = window or default_flow_window(run, flow.spacing_ns)
        rng = np.random.default_rng([run.seed, 7919 + idx])
        traces = [forward_packet(net, run.timeline, pi, rng)
                  for pi in inject_flow(net, flow, w)]
        run.flow_traces[flow.flow_id] = traces
        run.flow_windows[flow.flow_id] = w
