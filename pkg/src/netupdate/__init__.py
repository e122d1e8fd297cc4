"""Planning, simulation, and consistency measurement of SDN network updates.

The package analyzes and executes phased forwarding-rule updates: greedy
untimed procedures driven by delay bounds, and timed procedures where every
phase runs at a scheduled clock time. It computes worst-case update
durations (closed forms cross-checked against PERT longest paths),
generates worst-case and knob-tuned schedules, simulates runs
deterministically, and measures the per-packet inconsistency of test flows.
"""

from .consistency import (
    CONSISTENT_NEW,
    CONSISTENT_OLD,
    INCONSISTENT,
    InconsistencyReport,
    TestFlow,
    classify_packet,
    knob_schedule,
    measure_inconsistency,
    simultaneous_schedule,
)
from .delays import DelayModel
from .model import (
    DELIVER,
    DROP,
    Action,
    ForwardingState,
    Link,
    Network,
    Packet,
    PacketInstance,
    Schedule,
    SingletonUpdate,
    SystemParameters,
    TimedUpdateProcedure,
    UpdateProcedure,
    apply_singleton,
    similar,
)
from .planner import (
    DurationReport,
    PertGraph,
    build_pert_counts,
    build_pert_timed,
    build_pert_timed_counts,
    build_pert_untimed,
    compare_timed_untimed,
    gc_tail_duration,
    kphase_worst_duration,
    longest_path,
    phase_worst_duration,
    timed_kphase_worst_duration,
    timed_twophase_gc_worst_duration,
    twophase_gc_worst_duration,
    worst_case_schedule,
)
from .simulator import (
    ClockModel,
    EventQueue,
    RunDelays,
    RunResult,
    StateTimeline,
    forward_packet,
    inject_flow,
    run_flows,
    run_timed,
    run_untimed,
)
from .stats import DelayTrace, percentile, read_trace, sample, tail_ratio
from .topology import (
    haversine_km,
    label_change_update,
    leaf_spine,
    load_topology,
    path_link_bound_ns,
    policy_initial_state,
    policy_update,
    update_for_path_change,
)

__version__ = "0.1.0"
