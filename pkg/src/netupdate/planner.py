"""Worst-case analysis of update procedures.

Two routes to every worst-case duration: an explicit PERT graph whose
longest path is the answer, and closed-form formulas. The graph is the
oracle; the formulas must agree with it exactly (integer arithmetic), and
the test suite holds them to that.

Untimed graphs model a greedy controller: within a phase consecutive
message sends are at most delta_msg apart; after the last message of a
phase the controller waits max(delta_msg, d_c) before the next phase, or
max(delta_msg, d_c + d_n) when the next phase is garbage collection (the
en-route packets must drain first). Timed graphs chain scheduled phase
instants delta_sched apart (plus d_n in front of a garbage-collection
phase) with a delta_sched execution window per switch.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Schedule, SystemParameters, UpdateProcedure

C_START = "C_start"
C_FIN = "C_fin"


@dataclass(frozen=True)
class PertGraph:
    """Weighted DAG of controller/switch events; edges are activities."""

    nodes: tuple
    edges: tuple  # (from, to, weight)

    def __post_init__(self):
        known = set(self.nodes)
        for u, v, w in self.edges:
            if u not in known or v not in known:
                raise ValueError(f"edge ({u!r}, {v!r}) references unknown node")
            if w < 0:
                raise ValueError("edge weights must be >= 0")

    def successors(self) -> dict:
        out = {n: [] for n in self.nodes}
        for u, v, w in self.edges:
            out[u].append((v, w))
        return out


@dataclass(frozen=True)
class DurationReport:
    worst_case: int
    critical_path: tuple


def longest_path(graph: PertGraph, source: str = C_START, sink: str = C_FIN) -> DurationReport:
    """Maximum-weight source-to-sink path by dynamic programming in topological order."""
    succ = graph.successors()
    indeg = {n: 0 for n in graph.nodes}
    for u, v, _ in graph.edges:
        indeg[v] += 1

    order = []
    ready = [n for n in graph.nodes if indeg[n] == 0]
    while ready:
        n = ready.pop()
        order.append(n)
        for v, _ in succ[n]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    if len(order) != len(graph.nodes):
        raise ValueError("cycle detected in PERT graph")

    dist = {n: None for n in graph.nodes}
    prev = {}
    dist[source] = 0
    for u in order:
        if dist[u] is None:
            continue
        for v, w in succ[u]:
            cand = dist[u] + w
            if dist[v] is None or cand > dist[v]:
                dist[v] = cand
                prev[v] = u
    if dist[sink] is None:
        raise ValueError(f"{sink} not reachable from {source}")

    path = [sink]
    while path[-1] != source:
        path.append(prev[path[-1]])
    path.reverse()
    return DurationReport(dist[sink], tuple(path))


def build_pert_counts(phase_counts, params: SystemParameters,
                      gc_phases=frozenset()) -> PertGraph:
    """Untimed greedy PERT graph from per-phase message counts.

    Nodes C[j,i] are message-send events, S[j,i] switch-completion events.
    The boundary into a garbage-collection phase waits for the network to
    drain, hence the d_n term in its weight.
    """
    counts = list(phase_counts)
    if not counts:
        raise ValueError("procedure must have at least one phase")
    if any(n < 1 for n in counts):
        raise ValueError("every phase must contain at least one update")
    gc_phases = frozenset(gc_phases)

    nodes = [C_START, C_FIN]
    edges = []
    for j, n_j in enumerate(counts, start=1):
        for i in range(1, n_j + 1):
            c, s = f"C[{j},{i}]", f"S[{j},{i}]"
            nodes += [c, s]
            edges.append((c, s, params.d_c))
            edges.append((s, C_FIN, 0))
            if i > 1:
                edges.append((f"C[{j},{i - 1}]", c, params.delta_msg))
        if j == 1:
            edges.append((C_START, "C[1,1]", 0))
        else:
            wait = max(params.delta_msg, params.d_c + params.d_n) if j in gc_phases \
                else max(params.delta_msg, params.d_c)
            edges.append((f"C[{j - 1},{counts[j - 2]}]", f"C[{j},1]", wait))
    return PertGraph(tuple(nodes), tuple(edges))


def build_pert_untimed(proc: UpdateProcedure, params: SystemParameters,
                       gc_phases=None) -> PertGraph:
    """Untimed greedy PERT graph for a concrete procedure.

    gc_phases defaults to the procedure's remove-only phases.
    """
    if gc_phases is None:
        gc_phases = proc.gc_phases()
    return build_pert_counts(proc.phase_counts(), params, gc_phases)


def build_pert_timed_counts(phase_counts, params: SystemParameters,
                            gc_phases=frozenset()) -> PertGraph:
    """Timed PERT graph: scheduled phase instants X[j] plus execution windows."""
    counts = list(phase_counts)
    if not counts:
        raise ValueError("procedure must have at least one phase")
    if any(n < 1 for n in counts):
        raise ValueError("every phase must contain at least one update")
    gc_phases = frozenset(gc_phases)

    nodes = [C_START, C_FIN]
    edges = []
    for j, n_j in enumerate(counts, start=1):
        x = f"X[{j}]"
        nodes.append(x)
        if j == 1:
            edges.append((C_START, x, 0))
        else:
            gap = params.delta_sched + (params.d_n if j in gc_phases else 0)
            edges.append((f"X[{j - 1}]", x, gap))
        for i in range(1, n_j + 1):
            s = f"S[{j},{i}]"
            nodes.append(s)
            edges.append((x, s, params.delta_sched))
            edges.append((s, C_FIN, 0))
    return PertGraph(tuple(nodes), tuple(edges))


def build_pert_timed(proc: UpdateProcedure, params: SystemParameters,
                     gc_phases=None) -> PertGraph:
    if gc_phases is None:
        gc_phases = proc.gc_phases()
    return build_pert_timed_counts(proc.phase_counts(), params, gc_phases)


# ---------------------------------------------------------------------------
# closed forms


def phase_worst_duration(n_j: int, params: SystemParameters) -> int:
    """Worst case for one phase of n_j updates: (n_j - 1) * delta_msg + d_c."""
    if n_j < 1:
        raise ValueError("phase must contain at least one update")
    return (n_j - 1) * params.delta_msg + params.d_c


def kphase_worst_duration(phase_counts, params: SystemParameters) -> int:
    """Worst case for an untimed greedy k-phase procedure without garbage collection."""
    counts = list(phase_counts)
    if not counts:
        raise ValueError("procedure must have at least one phase")
    if any(n < 1 for n in counts):
        raise ValueError("every phase must contain at least one update")
    k = len(counts)
    return (sum(n - 1 for n in counts) * params.delta_msg
            + (k - 1) * max(params.delta_msg, params.d_c)
            + params.d_c)


def gc_tail_duration(ng_j: int, params: SystemParameters) -> int:
    """Worst case from the last pre-GC message until garbage collection finishes."""
    if ng_j < 1:
        raise ValueError("garbage collection phase must contain at least one update")
    return (max(params.delta_msg, params.d_c + params.d_n)
            + (ng_j - 1) * params.delta_msg
            + params.d_c)


def twophase_gc_worst_duration(n1: int, n2: int, ng1: int,
                               params: SystemParameters) -> int:
    """Worst case for an untimed two-phase procedure with a garbage-collection phase."""
    if min(n1, n2, ng1) < 1:
        raise ValueError("all phase counts must be >= 1")
    return ((n1 + n2 + ng1 - 3) * params.delta_msg
            + max(params.delta_msg, params.d_c)
            + max(params.delta_msg, params.d_c + params.d_n)
            + params.d_c)


def timed_kphase_worst_duration(k: int, params: SystemParameters) -> int:
    """Worst case for a timed k-phase procedure under a worst-case schedule: k * delta_sched."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return k * params.delta_sched


def timed_twophase_gc_worst_duration(params: SystemParameters) -> int:
    """Worst case for a timed two-phase + garbage collection procedure: d_n + 3 * delta_sched."""
    return params.d_n + 3 * params.delta_sched


# ---------------------------------------------------------------------------
# schedules and comparison


def worst_case_schedule(proc: UpdateProcedure, t1: int, params: SystemParameters,
                        gc_phases=None) -> Schedule:
    """Tightest schedule that still guarantees consistency under the bounds.

    Consecutive phases are delta_sched apart; a garbage-collection phase
    additionally waits d_n after its predecessor so en-route packets carrying
    the superseded tag drain before their rules disappear. gc times are keyed
    by the garbage-collection phase's own number in the procedure.
    """
    if gc_phases is None:
        gc_phases = proc.gc_phases()
    phase_times, gc_times = {}, {}
    t_prev = None
    for j in range(1, proc.num_phases + 1):
        if j == 1:
            t = t1
        elif j in gc_phases:
            t = t_prev + params.delta_sched + params.d_n
        else:
            t = t_prev + params.delta_sched
        (gc_times if j in gc_phases else phase_times)[j] = t
        t_prev = t
    return Schedule.build(phase_times, gc_times)


@dataclass(frozen=True)
class TimedUntimedComparison:
    timed: int
    untimed: int
    timed_wins: bool


def compare_timed_untimed(proc: UpdateProcedure, params: SystemParameters,
                          gc_phases=None) -> TimedUntimedComparison:
    """Worst-case durations of similar timed and untimed procedures.

    timed_wins is strict: equal durations do not count as a win. Whenever
    delta_sched < d_c the timed variant wins for every procedure shape.
    """
    if gc_phases is None:
        gc_phases = proc.gc_phases()
    untimed = longest_path(build_pert_untimed(proc, params, gc_phases)).worst_case
    timed = longest_path(build_pert_timed(proc, params, gc_phases)).worst_case
    return TimedUntimedComparison(timed, untimed, timed < untimed)
