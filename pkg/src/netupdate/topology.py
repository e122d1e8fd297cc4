"""Network construction: leaf-spine generator, JSON topology files with
geo-derived link delays, and the rule/update builders for tag-based
(two-phase) path reconfiguration.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .delays import DEFAULT_EXP_CAP_FACTOR, DelayModel
from .model import (
    DELIVER,
    Action,
    ForwardingState,
    Link,
    Network,
    SingletonUpdate,
    UpdateProcedure,
)

EARTH_RADIUS_KM = 6371.0
INGRESS_PORT = 0  # ingress ports are numbered separately from link ports


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometres over the mean Earth radius."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(a))


def leaf_spine(n: int, link_delay: DelayModel | None = None) -> Network:
    """Leaf-spine fabric of n switches: 2n/3 leaves, n/3 spines, full bipartite links.

    Each leaf carries one ingress port (port 0). n must be divisible by 3.
    """
    if n < 3 or n % 3 != 0:
        raise ValueError(f"switch count must be a positive multiple of 3, got {n}")
    delay = link_delay or DelayModel.constant(0)
    n_leaf, n_spine = 2 * n // 3, n // 3
    leaves = [f"leaf{i}" for i in range(1, n_leaf + 1)]
    spines = [f"spine{j}" for j in range(1, n_spine + 1)]
    links = []
    for i, leaf in enumerate(leaves):
        for j, spine in enumerate(spines):
            # leaf port j+1 faces spine j; spine port i+1 faces leaf i
            links.append(Link((leaf, j + 1), (spine, i + 1), delay))
    ingress = [(leaf, INGRESS_PORT) for leaf in leaves]
    return Network(tuple(leaves + spines), tuple(links), frozenset(ingress))


def leaf_switches(net: Network) -> list:
    return [s for s in net.switches if s.startswith("leaf")]


def load_topology(source, propagation_us_per_km: float = 5.0,
                  delay_mode: str = "constant",
                  cap_factor: float = DEFAULT_EXP_CAP_FACTOR) -> Network:
    """Build a Network from a topology file (path or already-parsed dict).

    Schema: nodes[].id with optional lat/lon, links[].a / links[].b with
    optional delay_ns override, ingress[].node (+ label). A link without an
    explicit delay needs coordinates on both endpoints; its delay is the
    great-circle distance times the propagation constant.

    delay_mode "constant" uses the derived value as-is; "exponential" uses
    it as the mean of a truncated exponential with cap = cap_factor * mean.
    """
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = source
    if delay_mode not in ("constant", "exponential"):
        raise ValueError(f"unknown delay_mode {delay_mode!r}")

    coords = {}
    node_ids = []
    for node in doc.get("nodes", []):
        nid = node["id"]
        node_ids.append(nid)
        if "lat" in node and "lon" in node:
            coords[nid] = (float(node["lat"]), float(node["lon"]))

    next_port = {nid: 1 for nid in node_ids}
    links = []
    for entry in doc.get("links", []):
        a, b = entry["a"], entry["b"]
        if "delay_ns" in entry:
            delay_ns = int(entry["delay_ns"])
        else:
            if a not in coords or b not in coords:
                raise ValueError(
                    f"link {a}-{b}: no delay_ns and missing coordinates on an endpoint")
            km = haversine_km(*coords[a], *coords[b])
            delay_ns = int(round(km * propagation_us_per_km * 1000))
        if delay_mode == "exponential" and delay_ns > 0:
            model = DelayModel.exponential(delay_ns, int(round(delay_ns * cap_factor)))
        else:
            model = DelayModel.constant(delay_ns)
        pa, pb = next_port[a], next_port[b]
        next_port[a] += 1
        next_port[b] += 1
        links.append(Link((a, pa), (b, pb), model))

    ingress = []
    for entry in doc.get("ingress", []):
        node = entry["node"] if isinstance(entry, dict) else entry
        ingress.append((node, INGRESS_PORT))
    return Network(tuple(node_ids), tuple(links), frozenset(ingress))


def path_link_bound_ns(net: Network, path) -> int:
    """Sum of link delay upper bounds along a switch path (the per-flow d_n)."""
    total = 0
    for a, b in zip(path, path[1:]):
        link = net.link_between(a, b)
        if link is None:
            raise ValueError(f"no link between {a!r} and {b!r}")
        total += link.delay.bound()
    return total


def _hop_plan(net: Network, ingress_port: int, path):
    """Per-switch (in_port, out_port-or-None) pairs along a path."""
    if not path:
        raise ValueError("path must contain at least one switch")
    plan = []
    in_port = ingress_port
    for pos, sw in enumerate(path):
        if pos == len(path) - 1:
            plan.append((sw, in_port, None))
            break
        nxt = path[pos + 1]
        out_port = None
        for port in sorted(net.ports[sw]):
            peer = net.peer(sw, port)
            if peer and peer[0] == nxt:
                out_port = port
                next_in = peer[1]
                break
        if out_port is None:
            raise ValueError(f"no link between {sw!r} and {nxt!r}")
        plan.append((sw, in_port, out_port))
        in_port = next_in
    return plan


def path_rules(net: Network, flow_id: str, ingress_port: int, path, tag: str) -> dict:
    """{switch: {key: action}} implementing one tagged path.

    The first switch stamps the tag onto untagged arrivals (wildcard rule)
    and also carries the tag-keyed rule so that installation and garbage
    collection treat every path switch alike; the last switch delivers.
    """
    plan = _hop_plan(net, ingress_port, path)
    rules = {}
    for pos, (sw, in_port, out_port) in enumerate(plan):
        table = rules.setdefault(sw, {})
        action = DELIVER if out_port is None else Action.forward(out_port)
        table[(flow_id, tag, in_port)] = action
        if pos == 0:
            stamp = DELIVER if out_port is None else Action.forward_tagged(out_port, tag)
            table[(flow_id, None, in_port)] = stamp
    return rules


def update_for_path_change(net: Network, flow, old_path, new_path,
                           old_tag: str = "A", new_tag: str = "B") -> UpdateProcedure:
    """Two-phase + garbage-collection procedure moving one flow between paths.

    Phase 1 installs new-tag rules on every switch of the new path, phase 2
    re-stamps the version tag at the ingress, and the final phase removes
    the old-tag rules along the old path. Old and new paths may be equal
    (a pure label change).
    """
    if not old_path or not new_path:
        raise ValueError("paths must be non-empty")
    if old_path[0] != new_path[0]:
        raise ValueError("old and new paths must share the ingress switch")
    if old_path[-1] != new_path[-1]:
        raise ValueError("old and new paths must share the egress switch")
    if (flow.ingress_switch, flow.ingress_port) not in net.ingress_ports:
        raise ValueError("flow ingress is not an ingress port of the network")
    if flow.ingress_switch != old_path[0]:
        raise ValueError("paths must start at the flow ingress switch")

    fid, iport = flow.flow_id, flow.ingress_port
    new_rules = path_rules(net, fid, iport, new_path, new_tag)
    old_rules = path_rules(net, fid, iport, old_path, old_tag)

    items = []
    for sw in new_path:
        tagged = {k: a for k, a in new_rules[sw].items() if k[1] == new_tag}
        items.append((SingletonUpdate.install(sw, tagged), 1))
    stamp_key = (fid, None, iport)
    items.append((SingletonUpdate.install(
        new_path[0], {stamp_key: new_rules[new_path[0]][stamp_key]}), 2))
    for sw in old_path:
        keys = [k for k in old_rules[sw] if k[1] == old_tag]
        items.append((SingletonUpdate.remove(sw, keys), 3))
    return UpdateProcedure(tuple(items))


def label_change_update(net: Network, flows_with_paths, old_tag: str = "A",
                        new_tag: str = "B"):
    """Initial state and procedure for re-tagging several flows at once.

    flows_with_paths is a list of (flow, path); paths stay fixed and only
    the version tag changes, one singleton update per switch per phase
    (entries for all flows crossing that switch are bundled).

    Returns (initial ForwardingState, UpdateProcedure).
    """
    old_by_switch, new_by_switch, stamps = {}, {}, {}
    for flow, path in flows_with_paths:
        if (flow.ingress_switch, flow.ingress_port) not in net.ingress_ports:
            raise ValueError(f"flow {flow.flow_id}: ingress is not an ingress port")
        if path[0] != flow.ingress_switch:
            raise ValueError(f"flow {flow.flow_id}: path must start at its ingress switch")
        old = path_rules(net, flow.flow_id, flow.ingress_port, path, old_tag)
        new = path_rules(net, flow.flow_id, flow.ingress_port, path, new_tag)
        for sw, table in old.items():
            old_by_switch.setdefault(sw, {}).update(table)
        for sw, table in new.items():
            tagged = {k: a for k, a in table.items() if k[1] == new_tag}
            new_by_switch.setdefault(sw, {}).update(tagged)
            stamp_key = (flow.flow_id, None, flow.ingress_port)
            if stamp_key in table:
                stamps.setdefault(sw, {})[stamp_key] = table[stamp_key]

    initial = ForwardingState.from_dict(net, old_by_switch)
    items = []
    for sw in sorted(new_by_switch):
        items.append((SingletonUpdate.install(sw, new_by_switch[sw]), 1))
    for sw in sorted(stamps):
        items.append((SingletonUpdate.install(sw, stamps[sw]), 2))
    for sw in sorted(old_by_switch):
        keys = [k for k in old_by_switch[sw] if k[1] == old_tag]
        items.append((SingletonUpdate.remove(sw, keys), 3))
    return initial, UpdateProcedure(tuple(items))


def policy_update(net: Network, phase2_switches=None, with_gc: bool = True,
                  flow_id: str = "policy") -> UpdateProcedure:
    """Generic fabric-wide policy update in the two-phase + GC shape.

    Phase 1 touches every switch, phase 2 the given subset (defaults to the
    leaf switches for a leaf-spine fabric), and the garbage-collection phase
    again touches every switch. Used for duration experiments where only
    message counts matter, so the installed entries are a minimal stub.
    """
    if phase2_switches is None:
        phase2_switches = leaf_switches(net)
        if not phase2_switches:
            raise ValueError("phase2_switches required for non-leaf-spine networks")
    def port_of(sw):
        ports = net.ports[sw]
        return min(ports) if ports else 0

    items = []
    for sw in net.switches:
        items.append((SingletonUpdate.install(
            sw, {(flow_id, "B", port_of(sw)): DELIVER}), 1))
    for sw in phase2_switches:
        items.append((SingletonUpdate.install(
            sw, {(flow_id, None, port_of(sw)): DELIVER}), 2))
    if with_gc:
        for sw in net.switches:
            items.append((SingletonUpdate.remove(
                sw, [(flow_id, "A", port_of(sw))]), 3))
    return UpdateProcedure(tuple(items))


def policy_initial_state(net: Network, flow_id: str = "policy") -> ForwardingState:
    """Pre-update state matching policy_update, so garbage collection has rules to remove."""
    rules = {}
    for sw in net.switches:
        port = min(net.ports[sw]) if net.ports[sw] else 0
        rules[sw] = {(flow_id, "A", port): DELIVER, (flow_id, None, port): DELIVER}
    return ForwardingState.from_dict(net, rules)
