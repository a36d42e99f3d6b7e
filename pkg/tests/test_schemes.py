import pytest

from spotsim.config import JobSpec
from spotsim.failure import FailurePdf
from spotsim.schemes import (
    InfeasibleCheckpoint,
    PolicyAction,
    PolicyView,
    acc_decision_offsets,
    adapt_should_checkpoint,
    decide_acc,
    decide_adapt,
    decide_edge,
    decide_hour,
    decide_none,
    decide_opt,
    opt_checkpoint_instant,
)

TAKE = PolicyAction.TAKE_CHECKPOINT
GO = PolicyAction.CONTINUE
JOB = JobSpec(w=100_000, t_c=60, r=300, t_w=5)
BID = 400_000


def view(now, launch=0, price=300_000, work=None, saved=0, **kw):
    return PolicyView(now, now - launch if work is None else work, saved, launch, price, BID, JOB, **kw)


@pytest.mark.parametrize("now,price", [(100, 300_000), (3600, 300_000), (50, 900_000)])
def test_none_always_continues(now, price):
    assert decide_none(view(now, price=price)) is GO


def test_opt_fires_just_before_revocation():
    assert decide_opt(view(4940), 5000) is TAKE
    assert decide_opt(view(4939), 5000) is GO
    assert decide_opt(view(100), None) is GO
    assert opt_checkpoint_instant(5000, 60, 0) == 4940
    with pytest.raises(InfeasibleCheckpoint):
        opt_checkpoint_instant(30, 60, 0)


def test_opt_skips_useless_checkpoints():
    assert decide_opt(view(4940, work=10, saved=10), 5000) is GO
    near_done = PolicyView(4940, JOB.w - 60, 0, 0, 300_000, BID, JOB)
    assert decide_opt(near_done, 5000) is GO


@pytest.mark.parametrize("launch", [0, 500])
def test_hour_checkpoints_anchor_at_launch(launch):
    fired = [t for t in range(launch, launch + 3 * 3600) if decide_hour(view(t, launch)) is TAKE]
    assert fired == [launch + 3540, launch + 7140, launch + 10740]


def test_edge():
    assert decide_edge(view(10, price=350_000), True, True) is TAKE
    assert decide_edge(view(10, price=300_000), True, False) is GO
    assert decide_edge(view(10, price=450_000), True, True) is GO
    assert decide_edge(view(10, price=400_000), True, True) is GO


def test_adapt_rule():
    assert adapt_should_checkpoint(1.0, 1000, 300, 60)
    assert not adapt_should_checkpoint(0.01, 1000, 300, 60)  # 13 < 60
    assert not adapt_should_checkpoint(0.0, 10**6, 300, 60)


def test_adapt_only_on_its_grid():
    sure = FailurePdf(600, [0.0, 1.0])  # fails in [600, 1200)
    safe = FailurePdf(600, (), 1.0)
    assert decide_adapt(view(600, pdf=sure)) is TAKE
    assert decide_adapt(view(601, pdf=sure)) is GO
    assert decide_adapt(view(600, pdf=safe)) is GO
    assert decide_adapt(view(0, pdf=sure)) is GO


def test_acc_offsets():
    assert acc_decision_offsets(JOB) == (3535, 3595)


def test_acc_hours():
    # hour 1: cheap -> nothing
    assert decide_acc(view(3535)) is GO
    assert decide_acc(view(3595)) is GO
    # expensive at the checkpoint point only
    assert decide_acc(view(7135, price=500_000)) is TAKE
    assert decide_acc(view(7195, price=300_000, last_ckpt_event=7135)) is GO
    # expensive at both points
    assert decide_acc(view(10735, price=500_000)) is TAKE
    assert decide_acc(view(10795, price=500_000, last_ckpt_event=10735)) is PolicyAction.USER_TERMINATE
    # terminate point without a checkpoint in the same hour
    assert decide_acc(view(10795, price=500_000, last_ckpt_event=7135)) is GO
    # equality never fires
    assert decide_acc(view(3535, price=BID)) is GO


def test_acc_relaunch_polling():
    idle = dict(launch=None, work=0, terminated_at=1000)
    assert decide_acc(view(1060, price=300_000, **idle)) is PolicyAction.RELAUNCH
    assert decide_acc(view(1061, price=300_000, **idle)) is GO
    assert decide_acc(view(1120, price=BID, **idle)) is GO
    assert decide_acc(view(0, price=300_000, launch=None, work=0, started=False)) is PolicyAction.RELAUNCH


def test_policies_are_pure():
    v = view(7135, price=500_000)
    assert [decide_acc(v) for _ in range(3)] == [TAKE] * 3
