"""Checkpointing policies as pure decision functions.

The simulators own all state; a policy sees a :class:`PolicyView` snapshot
and answers with a :class:`PolicyAction`.  Policies are consulted at any
instant and must answer ``CONTINUE`` whenever the instant is not one of
their decision points, so a per-second driver and an event-driven driver
get the same answers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from spotsim.config import HOUR, JobSpec, SchemeId
from spotsim.errors import SpotSimError
from spotsim.failure import FailurePdf


class PolicyAction(enum.Enum):
    CONTINUE = "continue"
    TAKE_CHECKPOINT = "take_checkpoint"
    USER_TERMINATE = "user_terminate"
    RELAUNCH = "relaunch"


class InfeasibleCheckpoint(SpotSimError):
    """The availability interval ends before a checkpoint could finish."""


@dataclass(slots=True)
class PolicyView:
    now: int
    work_done: int
    last_checkpoint_work: int
    instance_launch_time: Optional[int]
    current_price: int  # micro-dollars
    a_bid: int  # micro-dollars
    job: JobSpec
    pdf: Optional[FailurePdf] = None
    # ACC bookkeeping, maintained by the simulator
    started: bool = True
    terminated_at: Optional[int] = None
    last_ckpt_event: Optional[int] = None

    @property
    def running(self) -> bool:
        return self.instance_launch_time is not None

    @property
    def unsaved(self) -> int:
        return self.work_done - self.last_checkpoint_work


CONTINUE = PolicyAction.CONTINUE
TAKE = PolicyAction.TAKE_CHECKPOINT


def decide_none(view: PolicyView) -> PolicyAction:
    return CONTINUE


def opt_checkpoint_instant(next_out_of_bid: int, t_c: int, now: int) -> int:
    start = next_out_of_bid - t_c
    if start < now:
        raise InfeasibleCheckpoint(
            f"checkpoint would have to start at {start}, before {now}"
        )
    return start


def decide_opt(view: PolicyView, next_out_of_bid: Optional[int]) -> PolicyAction:
    """Checkpoint so that the write ends exactly at the revocation instant.

    Skipped when nothing new would be saved or when the job finishes before
    the revocation anyway.
    """
    if next_out_of_bid is None or not view.running:
        return CONTINUE
    job = view.job
    if view.now != next_out_of_bid - job.t_c:
        return CONTINUE
    if view.unsaved <= 0 or job.w - view.work_done <= job.t_c:
        return CONTINUE
    return TAKE


def decide_hour(view: PolicyView) -> PolicyAction:
    if not view.running:
        return CONTINUE
    uptime = view.now - view.instance_launch_time
    if uptime > 0 and (uptime + view.job.t_c) % HOUR == 0:
        return TAKE
    return CONTINUE


def decide_edge(view: PolicyView, price_changed: bool, rose: bool) -> PolicyAction:
    # a rise to or above the bid kills the instance first; nothing to do then
    if view.running and price_changed and rose and view.current_price < view.a_bid:
        return TAKE
    return CONTINUE


def decide_adapt(view: PolicyView) -> PolicyAction:
    """Every ``adapt_delta`` seconds of uptime, weigh the expected loss of
    skipping a checkpoint against its cost.

    expected loss = hazard(uptime, delta) * (unsaved work + r); checkpoint
    when that exceeds ``t_c``.
    """
    if not view.running:
        return CONTINUE
    job = view.job
    uptime = view.now - view.instance_launch_time
    if uptime <= 0 or uptime % job.adapt_delta:
        return CONTINUE
    h = 1.0 if view.pdf is None else view.pdf.hazard(uptime, job.adapt_delta)
    return TAKE if adapt_should_checkpoint(h, view.unsaved, job.r, job.t_c) else CONTINUE


def adapt_should_checkpoint(hazard: float, unsaved: int, r: int, t_c: int) -> bool:
    return hazard * (unsaved + r) > t_c


def acc_decision_offsets(job: JobSpec):
    """Offsets inside an instance-hour of the checkpoint and terminate
    decision points: ``hour - t_c - t_w`` and ``hour - t_w``."""
    return HOUR - job.t_c - job.t_w, (HOUR - job.t_w) % HOUR


def decide_acc(view: PolicyView) -> PolicyAction:
    job = view.job
    price_high = view.current_price > view.a_bid
    if not view.running:
        if view.current_price >= view.a_bid:
            return CONTINUE
        if not view.started:
            return PolicyAction.RELAUNCH
        since = view.now - view.terminated_at
        if since > 0 and since % job.relaunch_poll == 0:
            return PolicyAction.RELAUNCH
        return CONTINUE
    if not price_high:
        return CONTINUE
    uptime = view.now - view.instance_launch_time
    if uptime <= 0:
        return CONTINUE
    cd, td = acc_decision_offsets(job)
    pos = uptime % HOUR
    # terminate only if the price was already high at this hour's checkpoint point
    if pos == td and view.last_ckpt_event == view.now - job.t_c:
        return PolicyAction.USER_TERMINATE
    if pos == cd and view.last_ckpt_event != view.now:
        return TAKE
    return CONTINUE


def needs_pdf(scheme: SchemeId) -> bool:
    return scheme is SchemeId.ADAPT
