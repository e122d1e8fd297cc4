"""Core domain types: networks, packets, forwarding rules, and update procedures.

Conventions used throughout the package:

* time and durations are integer nanoseconds;
* rule tables are keyed by (flow_id, tag, in_port) where ``tag=None`` is a
  wildcard that matches any packet tag (including untagged packets), and an
  exact-tag rule always wins over the wildcard;
* all types are values: mutation happens only through pure functions that
  return new objects.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

from .delays import DelayModel

logger = logging.getLogger(__name__)

GEN_OLD = "old"
GEN_NEW = "new"

# (flow_id, tag-or-None, in_port)
RuleKey = tuple


@dataclass(frozen=True)
class SystemParameters:
    """Delay and accuracy bounds that drive planning and simulation.

    d_c        upper bound on controller-to-switch delay, install included
    d_n        upper bound on end-to-end network delay
    delta_msg  upper bound on the gap between consecutive controller sends
    delta_sched upper bound on scheduling error: a command scheduled for
               clock time T runs at real time within [T, T + delta_sched]
    t_su       lead time for delivering scheduled commands; None lets the
               simulator pick d_c + delta_msg * message_count
    """

    d_c: int
    d_n: int
    delta_msg: int
    delta_sched: int
    t_su: int | None = None

    def __post_init__(self):
        for name in ("d_c", "d_n", "delta_msg", "delta_sched"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.t_su is not None and self.t_su < 0:
            raise ValueError("t_su must be >= 0 or None")


@dataclass(frozen=True)
class Action:
    """What a switch does with a matched packet.

    kind is "forward", "forward_tagged", "drop", or "deliver".
    forward_tagged rewrites the packet tag before forwarding; it is how an
    ingress switch stamps a configuration version onto incoming packets.
    """

    kind: str
    out_port: int | None = None
    new_tag: str | None = None

    @classmethod
    def forward(cls, out_port: int) -> "Action":
        return cls("forward", out_port=out_port)

    @classmethod
    def forward_tagged(cls, out_port: int, new_tag: str) -> "Action":
        return cls("forward_tagged", out_port=out_port, new_tag=new_tag)


DROP = Action("drop")
DELIVER = Action("deliver")


@dataclass(frozen=True)
class Packet:
    """Forwarding-relevant packet content: a flow match key plus a version tag."""

    flow_id: str
    version_tag: str | None = None

    def with_tag(self, tag: str) -> "Packet":
        return Packet(self.flow_id, tag)


@dataclass(frozen=True)
class PacketInstance:
    """A packet arriving from the outside world at an ingress port."""

    packet: Packet
    ingress_switch: str
    ingress_port: int
    arrival_time: int


@dataclass(frozen=True)
class Link:
    """Bidirectional link between two (switch, port) endpoints."""

    a: tuple
    b: tuple
    delay: DelayModel


@dataclass
class Network:
    """Switches, ports, links, and the ingress ports facing the outside world.

    Treated as immutable after construction. Ports are collected from links
    and ingress declarations; a port belongs to at most one of those roles.
    """

    switches: tuple
    links: tuple
    ingress_ports: frozenset

    def __post_init__(self):
        self.switches = tuple(self.switches)
        self.links = tuple(self.links)
        self.ingress_ports = frozenset(self.ingress_ports)
        known = set(self.switches)
        if len(known) != len(self.switches):
            raise ValueError("duplicate switch ids")
        self._peer = {}
        self.ports = {s: set() for s in self.switches}
        for link in self.links:
            for (sw, port), (psw, pport) in ((link.a, link.b), (link.b, link.a)):
                if sw not in known:
                    raise ValueError(f"link endpoint references unknown switch {sw!r}")
                if (sw, port) in self._peer:
                    raise ValueError(f"port ({sw!r}, {port}) used by more than one link")
                self._peer[(sw, port)] = (psw, pport, link.delay)
                self.ports[sw].add(port)
        for sw, port in self.ingress_ports:
            if sw not in known:
                raise ValueError(f"ingress port references unknown switch {sw!r}")
            if (sw, port) in self._peer:
                raise ValueError(f"ingress port ({sw!r}, {port}) is also a link endpoint")
            self.ports[sw].add(port)

    def peer(self, switch: str, port: int):
        """(peer_switch, peer_port, delay_model) reachable out of ``port``, or None."""
        return self._peer.get((switch, port))

    def link_between(self, a: str, b: str) -> Link | None:
        for link in self.links:
            if {link.a[0], link.b[0]} == {a, b}:
                return link
        return None


@dataclass(frozen=True)
class SingletonUpdate:
    """A rule-table change for exactly one switch.

    install mode writes the listed entries (generation "new"); remove mode
    deletes the listed keys and models garbage collection.
    """

    target: str
    entries: tuple   # sorted tuple of (RuleKey, Action-or-None)
    mode: str        # "install" | "remove"

    @staticmethod
    def _normalize(entries) -> tuple:
        def sort_key(item):
            (flow, tag, port), _ = item
            return (flow, tag is not None, tag or "", port)

        return tuple(sorted(entries, key=sort_key))

    @classmethod
    def install(cls, target: str, entries: dict) -> "SingletonUpdate":
        return cls(target, cls._normalize(entries.items()), "install")

    @classmethod
    def remove(cls, target: str, keys) -> "SingletonUpdate":
        return cls(target, cls._normalize((k, None) for k in keys), "remove")

    def __post_init__(self):
        if self.mode not in ("install", "remove"):
            raise ValueError(f"unknown update mode {self.mode!r}")
        if not self.entries:
            logger.debug("empty singleton update for %s", self.target)


@dataclass(frozen=True)
class ForwardingState:
    """Per-switch rule tables; every rule carries a generation label.

    Lookup is deterministic: the exact-tag rule for the packet's tag wins,
    then the wildcard-tag rule, otherwise the packet is dropped.
    """

    tables: tuple  # tuple of (switch, tuple of (RuleKey, (Action, generation)))

    @classmethod
    def empty(cls, net: Network) -> "ForwardingState":
        return cls(tuple((s, ()) for s in net.switches))

    @classmethod
    def from_dict(cls, net: Network, rules: dict, generation: str = GEN_OLD) -> "ForwardingState":
        """Build from {switch: {key: action}}; unlisted switches get empty tables."""
        tables = []
        for s in net.switches:
            entries = rules.get(s, {})
            tables.append((s, tuple(sorted(
                ((k, (a, generation)) for k, a in entries.items()),
                key=lambda item: repr(item[0])))))
        return cls(tuple(tables))

    @property
    def _table_map(self) -> dict:
        # lazy dict view, cached on the frozen instance; treat as read-only
        cached = self.__dict__.get("_map")
        if cached is None:
            cached = {s: dict(entries) for s, entries in self.tables}
            object.__setattr__(self, "_map", cached)
        return cached

    def _as_dicts(self) -> dict:
        return {s: dict(entries) for s, entries in self.tables}

    def switch_table(self, switch: str) -> dict:
        try:
            return self._table_map[switch]
        except KeyError:
            raise KeyError(switch) from None

    def has_switch(self, switch: str) -> bool:
        return switch in self._table_map

    def lookup(self, switch: str, flow_id: str, tag: str | None, port: int):
        """Resolve one (packet, port) pair to (Action, generation-or-None)."""
        table = self.switch_table(switch)
        if tag is not None:
            hit = table.get((flow_id, tag, port))
            if hit is not None:
                return hit
        hit = table.get((flow_id, None, port))
        if hit is not None:
            return hit
        return (DROP, None)

    def apply(self, update: SingletonUpdate) -> "ForwardingState":
        """Pure application of a singleton update; see apply_singleton."""
        tables = self._as_dicts()
        if update.target not in tables:
            raise ValueError(f"update targets unknown switch {update.target!r}")
        table = tables[update.target]
        if update.mode == "install":
            for key, action in update.entries:
                table[key] = (action, GEN_NEW)
        else:
            for key, _ in update.entries:
                if key not in table:
                    logger.warning("garbage collection: rule %r already absent on %s",
                                   key, update.target)
                else:
                    del table[key]
        return ForwardingState(tuple(
            (s, tuple(sorted(t.items(), key=lambda item: repr(item[0]))))
            for s, t in tables.items()))


def apply_singleton(state: ForwardingState, update: SingletonUpdate) -> ForwardingState:
    """Replace the target switch's behavior on the update's domain.

    Install: the new state behaves like the update's entries on its domain
    and like ``state`` elsewhere; installed entries carry generation "new".
    Remove: the listed keys are deleted; deleting an absent key is a warned
    no-op so garbage collection stays idempotent.
    """
    return state.apply(update)


@dataclass(frozen=True)
class UpdateProcedure:
    """Singleton updates grouped into phases 1..k.

    Every update of phase j must take effect before any update of phase
    j+1 does; how that is enforced (controller waits or scheduled times)
    belongs to the execution strategy, not to this container.
    """

    items: tuple  # tuple of (SingletonUpdate, phase)

    def __post_init__(self):
        if not self.items:
            raise ValueError("update procedure must contain at least one singleton update")
        phases = sorted({phase for _, phase in self.items})
        if phases[0] != 1 or phases != list(range(1, len(phases) + 1)):
            raise ValueError(f"phases must form a contiguous range 1..k, got {phases}")

    @property
    def num_phases(self) -> int:
        return max(phase for _, phase in self.items)

    def updates_in_phase(self, phase: int) -> list:
        return [u for u, p in self.items if p == phase]

    def phase_counts(self) -> list:
        """N_j for j = 1..k."""
        counts = Counter(p for _, p in self.items)
        return [counts[j] for j in range(1, self.num_phases + 1)]

    def gc_phases(self) -> frozenset:
        """Phases consisting solely of remove-mode updates."""
        out = set()
        for j in range(1, self.num_phases + 1):
            ups = self.updates_in_phase(j)
            if ups and all(u.mode == "remove" for u in ups):
                out.add(j)
        return frozenset(out)


@dataclass(frozen=True)
class Schedule:
    """Clock times for each phase of a timed procedure.

    Regular phases live in phase_times, garbage-collection phases in
    gc_times; both map phase number to a clock time. Times must be
    non-decreasing in phase order (equal times model a simultaneous
    update, which a zero scheduling error makes exact).
    """

    phase_times: tuple  # sorted tuple of (phase, time)
    gc_times: tuple = ()
    knob_d: int | None = None

    @classmethod
    def build(cls, phase_times: dict, gc_times: dict | None = None,
              knob_d: int | None = None) -> "Schedule":
        gc_times = gc_times or {}
        overlap = set(phase_times) & set(gc_times)
        if overlap:
            raise ValueError(f"phases {sorted(overlap)} appear in both time maps")
        sched = cls(tuple(sorted(phase_times.items())),
                    tuple(sorted(gc_times.items())), knob_d)
        merged = sched.times_by_phase()
        ordered = [merged[p] for p in sorted(merged)]
        if any(b < a for a, b in zip(ordered, ordered[1:])):
            raise ValueError("schedule times must be non-decreasing in phase order")
        return sched

    def times_by_phase(self) -> dict:
        return dict(self.phase_times) | dict(self.gc_times)

    def time_for_phase(self, phase: int) -> int:
        merged = self.times_by_phase()
        if phase not in merged:
            raise KeyError(f"no scheduled time for phase {phase}")
        return merged[phase]

    def first_time(self) -> int:
        return min(self.times_by_phase().values())

    def last_time(self) -> int:
        return max(self.times_by_phase().values())


@dataclass(frozen=True)
class TimedUpdateProcedure:
    """An update procedure plus the clock times at which its phases run."""

    procedure: UpdateProcedure
    schedule: Schedule

    def __post_init__(self):
        have = set(self.schedule.times_by_phase())
        need = set(range(1, self.procedure.num_phases + 1))
        missing = need - have
        if missing:
            raise ValueError(f"schedule lacks times for phases {sorted(missing)}")


def similar(timed: TimedUpdateProcedure, untimed: UpdateProcedure) -> bool:
    """True iff both carry the same multiset of (singleton update, phase) pairs."""
    return Counter(timed.procedure.items) == Counter(untimed.items)
