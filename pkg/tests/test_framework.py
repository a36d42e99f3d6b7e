import itertools
import math
import random
from decimal import Decimal

import pytest

from cases import random_trace
from spotsim.config import BidConfig, JobSpec
from spotsim.engine import simulate
from spotsim.errors import ConfigError, DoesNotTerminate, NoFeasibleOfferError, StateMachineError
from spotsim.framework import (
    AppState,
    ServiceOffer,
    SlaPolicy,
    SpotApplication,
    Workflow,
    application_from_dict,
    application_to_dict,
    can_transition,
    decision_points,
    dump_application,
    generate_events,
    load_application,
    replay_run,
    run_workflow,
    select_bid_and_type,
    spot_application,
    transition,
)
from spotsim.money import to_micros
from spotsim.trace import from_segments

S = AppState
ALLOWED = {
    (S.NEW, S.INACTIVE),
    (S.INACTIVE, S.ACTIVE),
    (S.ACTIVE, S.INACTIVE),
    (S.ACTIVE, S.UNBALANCED),
    (S.UNBALANCED, S.ACTIVE),
    (S.ACTIVE, S.UNREACHABLE),
    (S.UNREACHABLE, S.ACTIVE),
    (S.INACTIVE, S.TERMINATED),
    (S.ACTIVE, S.TERMINATED),
}


@pytest.mark.parametrize("src,dst", list(itertools.product(AppState, repeat=2)))
def test_transition_relation(src, dst):
    assert can_transition(src, dst) == ((src, dst) in ALLOWED)
    if (src, dst) in ALLOWED:
        assert transition(src, dst) is dst
    else:
        with pytest.raises(StateMachineError):
            transition(src, dst)


def test_workflow_action_lists():
    app = SpotApplication(S.INACTIVE)
    run_workflow(Workflow.START, app)
    assert app.provider.actions == ("launch_spot", "mount_volume", "copy_job", "start_job")
    assert app.state is S.ACTIVE
    run_workflow("W_ckpt", app)
    assert app.provider.actions[4:] == ("save_results",) and app.state is S.ACTIVE
    with pytest.raises(StateMachineError):
        run_workflow(Workflow.LAUNCH, app)
    run_workflow(Workflow.TERMINATE, app)
    assert app.provider.actions[5:] == ("terminate_spot",) and app.state is S.UNREACHABLE
    run_workflow(Workflow.LAUNCH, app)
    assert app.provider.actions[6:] == ("launch_spot", "mount_volume", "resume_tasks")
    assert app.state is S.ACTIVE


def test_start_needs_inactive():
    with pytest.raises(StateMachineError):
        run_workflow(Workflow.START, SpotApplication())


def test_decision_points():
    assert decision_points(3600, 60, 5) == (3535, 3595)
    with pytest.raises(ConfigError):
        decision_points(7200, 0, 0)
    with pytest.raises(ConfigError):
        decision_points(3600, 3599, 5)


JOB = JobSpec(w=10**6, t_c=60, r=300, t_w=5, relaunch_poll=60)
# three hours: cheap; expensive only at t_cd; expensive at both points
FIG6 = from_segments(
    [(0, "0.30"), (7100, "0.50"), (7150, "0.30"), (10700, "0.50"), (11000, "0.30")],
    12 * 3600,
)


def test_three_hour_cases():
    events = generate_events(FIG6, Decimal("0.40"), JOB, 0)
    assert events[:4] == [
        (7135, "E_ckpt"),
        (10735, "E_ckpt"),
        (10795, "E_terminate"),
        (11035, "E_launch"),
    ]
    assert not [e for e in events if e[0] <= 3600]


def test_fig6_trace_matches_engine():
    res = simulate(FIG6, JOB, BidConfig.make("0.40", "acc"))
    kinds = {"checkpoint_begin": "E_ckpt", "user_terminate": "E_terminate", "relaunch": "E_launch"}
    got = [(e.time, kinds[e.kind]) for e in res.events if e.kind in kinds]
    assert got == generate_events(FIG6, Decimal("0.40"), JOB, 0)


def test_event_stream_matches_engine_on_random_traces():
    rng = random.Random(6)
    kinds = {"checkpoint_begin": "E_ckpt", "user_terminate": "E_terminate", "relaunch": "E_launch"}
    for _ in range(100):
        trace, bid = random_trace(rng)
        job = JobSpec(
            w=rng.randint(600, 40000),
            t_c=rng.choice([1, 30, 60, 120]),
            r=rng.choice([0, 60, 300]),
            t_w=rng.choice([0, 5, 30]),
            relaunch_poll=rng.choice([30, 60, 300]),
        )
        res = simulate(trace, job, BidConfig.make(bid, "acc"))
        launches = [e.time for e in res.events if e.kind == "launch"]
        if not launches:
            continue
        end = res.completion_time + trace.start
        expected = [e for e in generate_events(trace, bid, job, launches[0]) if e[0] < end]
        got = [(e.time, kinds[e.kind]) for e in res.events if e.kind in kinds]
        assert got == expected


def test_replay_drives_lifecycle():
    res = simulate(FIG6, JobSpec(w=15000), BidConfig.make("0.40", "acc"))
    app = replay_run(res)
    assert app.state is S.TERMINATED
    assert app.provider.actions[:4] == ("launch_spot", "mount_volume", "copy_job", "start_job")
    assert "resume_tasks" in app.provider.actions


def offer(name, rate, history, vcpu=4, ram=15):
    return ServiceOffer("ec2", name, "z", to_micros(rate), {"vcpu": vcpu, "ram_gb": ram}, history)


CHEAP = from_segments([(0, "0.05")], 86400)


def test_bid_is_min_on_demand_rate():
    sel = select_bid_and_type([offer("a", "0.085", CHEAP), offer("b", "0.68", CHEAP)], SlaPolicy({"vcpu": 4}), 3600, 300)
    assert sel.a_bid == 85_000
    assert sel.eet_table == {"a": 3600, "b": 3600}
    assert sel.instance_type == "a"  # equal EET, lower rate


def test_sla_filter_and_infeasible():
    offers = [offer("small", "0.01", CHEAP, vcpu=1), offer("big", "0.68", CHEAP)]
    sel = select_bid_and_type(offers, SlaPolicy.parse("vcpu=4,ram_gb=15"), 3600, 300)
    assert (sel.a_bid, sel.instance_type) == (680_000, "big")
    with pytest.raises(NoFeasibleOfferError):
        select_bid_and_type(offers, SlaPolicy({"vcpu": 64}), 3600, 300)
    pricey = from_segments([(0, "5.00")], 86400)
    with pytest.raises(DoesNotTerminate, match="x"):
        select_bid_and_type([offer("x", "0.5", pricey)], SlaPolicy({}), 3600, 300)


def test_lower_eet_wins():
    flaky = from_segments([(t, "0.05" if (t // 600) % 2 == 0 else "0.90") for t in range(0, 86400, 600)], 86400)
    sel = select_bid_and_type([offer("a", "0.10", flaky), offer("b", "0.20", CHEAP)], SlaPolicy({}), 3600, 300)
    assert sel.instance_type == "b"
    assert math.isinf(sel.eet_table["a"])


def test_application_round_trip(tmp_path):
    app = spot_application("m1.xlarge", "0.42", s_bid="1.00", zone="eu-west-1a", users=["alice"])
    assert app.a_bid == 420_000 and app.s_bid == 1_000_000
    assert application_from_dict(application_to_dict(app)) == app
    path = tmp_path / "app.yaml"
    path.write_text(dump_application(app))
    loaded = load_application(path)
    assert loaded == app and loaded.spot_resource.size == "m1.xlarge"


def test_application_validation():
    doc = application_to_dict(spot_application("m1.small", "0.1"))
    doc["resource_map"] = {"r1": "t1"}
    with pytest.raises(ConfigError):
        application_from_dict(doc)
    doc = application_to_dict(spot_application("m1.small", "0.1"))
    del doc["monitoring"]["workflow_map"]["W_launch"]
    with pytest.raises(ConfigError):
        application_from_dict(doc)
