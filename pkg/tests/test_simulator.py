import pytest

from netupdate import (
    DELIVER,
    Action,
    DelayModel,
    EventQueue,
    ForwardingState,
    RunDelays,
    SingletonUpdate,
    SystemParameters,
    TestFlow,
    TimedUpdateProcedure,
    UpdateProcedure,
    forward_packet,
    inject_flow,
    leaf_spine,
    run_flows,
    run_timed,
    run_untimed,
    twophase_gc_worst_duration,
    worst_case_schedule,
)
from netupdate.model import PacketInstance
from netupdate.simulator import StateTimeline
from netupdate.topology import policy_initial_state, policy_update

from conftest import DC_NS, line_network, line_flow_setup, testbed_params

import numpy as np


def single_switch_setup():
    net = line_network([])  # just S1 with ingress port 0
    u = SingletonUpdate.install("S1", {("f", None, 0): DELIVER})
    return net, UpdateProcedure(((u, 1),))


class TestEventQueue:
    def test_orders_by_time(self):
        q = EventQueue()
        q.push(5, "b")
        q.push(3, "a")
        assert q.pop()[0] == 3
        assert q.pop()[0] == 5

    def test_equal_times_dequeue_in_insertion_order(self):
        q = EventQueue()
        for name in "abc":
            q.push(7, name)
        assert [q.pop()[2] for _ in range(3)] == ["a", "b", "c"]


class TestRunUntimed:
    def test_single_switch_duration_zero_latency_c(self, testbed_params):
        net, proc = single_switch_setup()
        c = 123_000
        delays = RunDelays(DelayModel.constant(c), DelayModel.constant(0))
        run = run_untimed(net, proc, testbed_params, delays, seed=0, start_time=10)
        assert run.update_duration_ns == 0
        send = next(m for m in run.messages if m.kind == "send")
        assert run.first_exec_ns - send.time_ns == c

    def test_pinned_equals_closed_form(self, testbed_params):
        net = leaf_spine(6)
        proc = policy_update(net)
        init = policy_initial_state(net)
        run = run_untimed(net, proc, testbed_params, seed=9, initial_state=init,
                          pin_worst_case=True)
        assert run.update_duration_ns == twophase_gc_worst_duration(6, 4, 6, testbed_params)

    def test_random_seeds_stay_below_closed_form(self, testbed_params):
        net = leaf_spine(6)
        proc = policy_update(net)
        init = policy_initial_state(net)
        bound = twophase_gc_worst_duration(6, 4, 6, testbed_params)
        for seed in range(50):
            run = run_untimed(net, proc, testbed_params, seed=seed, initial_state=init)
            assert run.update_duration_ns <= bound
            assert not run.faults

    def test_phase_ordering(self, testbed_params):
        net = leaf_spine(6)
        proc = policy_update(net)
        for seed in range(20):
            run = run_untimed(net, proc, testbed_params, seed=seed,
                              initial_state=policy_initial_state(net))
            by_phase = {}
            for e in run.exec_log:
                by_phase.setdefault(e.phase, []).append(e.time_ns)
            for j in sorted(by_phase)[:-1]:
                assert max(by_phase[j]) <= min(by_phase[j + 1])

    def test_bound_violation_reported(self, testbed_params):
        net, proc = single_switch_setup()
        delays = RunDelays(DelayModel.constant(2 * DC_NS), DelayModel.constant(0))
        run = run_untimed(net, proc, testbed_params, delays, seed=0)
        assert any(f.kind == "bound_violation" for f in run.faults)

    def test_determinism(self, testbed_params):
        net = leaf_spine(6)
        proc = policy_update(net)
        init = policy_initial_state(net)
        a = run_untimed(net, proc, testbed_params, seed=5, initial_state=init)
        b = run_untimed(net, proc, testbed_params, seed=5, initial_state=init)
        assert a.exec_log == b.exec_log
        assert a.messages == b.messages
        c = run_untimed(net, proc, testbed_params, seed=6, initial_state=init)
        assert c.exec_log != a.exec_log


class TestRunTimed:
    def test_zero_sched_error_gc_duration_is_dn(self):
        params = SystemParameters(d_c=1_000_000, d_n=262_000, delta_msg=1_000_000,
                                  delta_sched=0)
        net = leaf_spine(6)
        proc = policy_update(net)
        sched = worst_case_schedule(proc, 1_000_000_000, params)
        run = run_timed(net, TimedUpdateProcedure(proc, sched), params, seed=4,
                        initial_state=policy_initial_state(net))
        assert run.update_duration_ns == params.d_n
        assert not run.faults

    def test_execs_within_sched_window_and_phase_ordered(self, testbed_params):
        net = leaf_spine(6)
        proc = policy_update(net)
        sched = worst_case_schedule(proc, 1_000_000_000, testbed_params)
        times = sched.times_by_phase()
        for seed in range(30):
            run = run_timed(net, TimedUpdateProcedure(proc, sched), testbed_params,
                            seed=seed, initial_state=policy_initial_state(net))
            assert not run.faults
            by_phase = {}
            for e in run.exec_log:
                assert times[e.phase] <= e.time_ns <= times[e.phase] + testbed_params.delta_sched
                by_phase.setdefault(e.phase, []).append(e.time_ns)
            for j in sorted(by_phase)[:-1]:
                assert max(by_phase[j]) <= min(by_phase[j + 1])

    def test_missed_schedule_fault_when_tsu_too_small(self, testbed_params):
        net, proc = single_switch_setup()
        sched = worst_case_schedule(proc, 1_000_000, testbed_params)
        delays = RunDelays(DelayModel.constant(DC_NS), DelayModel.constant(0))
        run = run_timed(net, TimedUpdateProcedure(proc, sched), testbed_params,
                        delays, seed=0, send_time=1_000_000 - 10)  # far below d_c lead
        assert any(f.kind == "missed_schedule" for f in run.faults)
        # executed on arrival instead
        assert run.first_exec_ns == 1_000_000 - 10 + DC_NS

    def test_schedule_before_send_rejected(self, testbed_params):
        net, proc = single_switch_setup()
        sched = worst_case_schedule(proc, 100, testbed_params)
        with pytest.raises(ValueError, match="before"):
            run_timed(net, TimedUpdateProcedure(proc, sched), testbed_params,
                      seed=0, send_time=200)


class TestInjectFlow:
    def test_rate_and_window_arithmetic(self):
        net = line_network([1000])
        flow = TestFlow("f", "S1", 0, 1000.0)  # 1 ms spacing
        pis = inject_flow(net, flow, (0, 10_000_000))
        assert len(pis) == 10
        assert [p.arrival_time for p in pis[:3]] == [0, 1_000_000, 2_000_000]

    def test_window_shorter_than_spacing_yields_one(self):
        net = line_network([1000])
        flow = TestFlow("f", "S1", 0, 1000.0)
        assert len(inject_flow(net, flow, (0, 500))) == 1

    def test_bitrate_conversion(self):
        flow = TestFlow.from_bitrate("f", "S1", 0, mbps=40, packet_bytes=1000)
        assert flow.rate_pps == pytest.approx(5000.0)
        assert flow.spacing_ns == 200_000

    def test_rejects_non_ingress(self):
        net = line_network([1000])
        bad = TestFlow("f", "S2", 1, 100.0)
        with pytest.raises(ValueError, match="ingress"):
            inject_flow(net, bad, (0, 1000))

    def test_zero_rate_rejected(self):
        with pytest.raises(ValueError, match="rate"):
            TestFlow("f", "S1", 0, 0.0)


class TestForwardPacket:
    def make_timeline(self, net, rules):
        return StateTimeline(net, ForwardingState.from_dict(net, rules), [])

    def test_static_path_prefix_sum_arrivals(self):
        net = line_network([2_000, 3_000])
        rules = {
            "S1": {("f", None, 0): Action.forward_tagged(2, "A")},
            "S2": {("f", "A", 1): Action.forward(2)},
            "S3": {("f", "A", 1): DELIVER},
        }
        tl = self.make_timeline(net, rules)
        pi = PacketInstance(TestFlow("f", "S1", 0, 100.0).packet, "S1", 0, 100)
        trace = forward_packet(net, tl, pi, np.random.default_rng(0))
        assert [h.switch for h in trace.hops] == ["S1", "S2", "S3"]
        assert [h.time_ns for h in trace.hops] == [100, 2_100, 5_100]  # prefix sums
        assert [h.tag for h in trace.hops] == [None, "A", "A"]
        assert trace.delivered and not trace.truncated

    def test_mixed_generation_trace_mid_update(self):
        net = line_network([1_000])
        initial = ForwardingState.from_dict(net, {
            "S1": {("f", None, 0): Action.forward(2)},
            "S2": {("f", None, 1): DELIVER},
        })
        # S1 re-installed at t=500; packet passes S1 after, S2 before any change
        u = SingletonUpdate.install("S1", {("f", None, 0): Action.forward(2)})
        tl = StateTimeline(net, initial, [(500, u)])
        pi = PacketInstance(TestFlow("f", "S1", 0, 100.0).packet, "S1", 0, 600)
        trace = forward_packet(net, tl, pi, np.random.default_rng(0))
        assert [h.generation for h in trace.hops] == ["new", "old"]

    def test_forwarding_loop_truncated_and_flagged(self):
        net = line_network([1_000])
        rules = {
            "S1": {("f", None, 0): Action.forward(2), ("f", None, 2): Action.forward(2)},
            "S2": {("f", None, 1): Action.forward(1)},
        }
        tl = self.make_timeline(net, rules)
        pi = PacketInstance(TestFlow("f", "S1", 0, 100.0).packet, "S1", 0, 0)
        trace = forward_packet(net, tl, pi, np.random.default_rng(0))
        assert trace.truncated
        assert len(trace.hops) == len(net.switches)

    def test_table_miss_drops(self):
        net = line_network([1_000])
        tl = self.make_timeline(net, {})
        pi = PacketInstance(TestFlow("f", "S1", 0, 100.0).packet, "S1", 0, 0)
        trace = forward_packet(net, tl, pi, np.random.default_rng(0))
        assert not trace.delivered
        assert trace.hops[0].action.kind == "drop"

    def test_rule_change_visible_at_same_instant(self):
        net = line_network([1_000])
        u = SingletonUpdate.install("S1", {("f", None, 0): DELIVER})
        tl = StateTimeline(net, ForwardingState.empty(net), [(500, u)])
        assert tl.lookup("S1", 499, "f", None, 0)[0].kind == "drop"
        assert tl.lookup("S1", 500, "f", None, 0)[0].kind == "deliver"


class TestRunFlows:
    def test_traces_attached_and_deterministic(self, testbed_params):
        net, flow, path, init, proc = line_flow_setup(10_000_000)
        sched = worst_case_schedule(proc, 1_000_000_000, testbed_params)
        runs = []
        for _ in range(2):
            run = run_timed(net, TimedUpdateProcedure(proc, sched), testbed_params,
                            seed=11, initial_state=init)
            run_flows(net, run, [flow])
            runs.append(run)
        assert runs[0].flow_traces == runs[1].flow_traces
        assert flow.flow_id in runs[0].flow_traces
        assert len(runs[0].flow_traces[flow.flow_id]) > 10
