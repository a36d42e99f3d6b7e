"""Discrete-event simulation of one job under one checkpointing scheme.

Time is integer seconds.  At every instant that matters the simulator
applies, in order:

1. a checkpoint write or restart that ends now completes (a checkpoint
   ending exactly at a revocation instant still commits);
2. the job completes if all work is done;
3. the scheme's policy is consulted (checkpoint / user termination);
4. for non-ACC schemes the provider revokes the instance if the price is
   at or above the bid;
5. an idle job launches if the instance is obtainable.

Between two such instants nothing changes, so the simulator jumps from one
to the next.  :mod:`spotsim.oracle` steps through every second instead.
"""

from __future__ import annotations

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from decimal import Decimal

from spotsim.billing import EndCause, InstanceLifetime, bill
from spotsim.config import HOUR, BidConfig, JobSpec, SchemeId
from spotsim.errors import ConfigError, NeverAvailableError, SpotSimError
from spotsim.failure import estimate_pdf
from spotsim.money import MICROS_PER_USD, to_usd
from spotsim.schemes import (
    PolicyAction,
    PolicyView,
    acc_decision_offsets,
    decide_acc,
    decide_adapt,
    decide_edge,
    decide_hour,
    decide_none,
    decide_opt,
)
from spotsim.trace import PriceTrace, availability

logger = logging.getLogger(__name__)

PDF_BUCKET = 60

EVENT_KINDS = (
    "launch",
    "relaunch",
    "checkpoint_begin",
    "checkpoint_end",
    "provider_kill",
    "user_terminate",
    "hour_charge",
    "job_complete",
)


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: str
    detail: str = ""


@dataclass
class SimResult:
    completion_time: int
    total_cost: int  # micro-dollars
    work_lost: int
    checkpoints_taken: int
    completed: bool
    events: list = field(default_factory=list)
    lifetimes: list = field(default_factory=list)
    charges: list = field(default_factory=list)
    useful_work: int = 0
    checkpoint_time: int = 0
    query_wait_time: int = 0
    restart_time: int = 0
    waiting_time: int = 0

    @property
    def total_cost_usd(self) -> Decimal:
        return to_usd(self.total_cost)

    @property
    def product_exact(self) -> Decimal:
        """Cost (USD) times completion time (hours), exact."""
        return Decimal(self.total_cost * self.completion_time) / (MICROS_PER_USD * HOUR)

    @property
    def cost_time_product(self) -> float:
        return float(self.product_exact)

    def key(self):
        """Fields that two faithful simulators must agree on."""
        return (
            self.completion_time,
            self.total_cost,
            self.work_lost,
            self.checkpoints_taken,
            self.completed,
            self.useful_work,
            self.checkpoint_time,
            self.query_wait_time,
            self.restart_time,
            self.waiting_time,
            tuple((e.time, e.kind) for e in self.events),
        )


@dataclass(frozen=True)
class Metrics:
    time_h: float
    cost_usd: Decimal
    product: float


def metrics(result: SimResult) -> Metrics:
    if not result.completed:
        raise SpotSimError("metrics are undefined for an incomplete run")
    return Metrics(result.completion_time / HOUR, result.total_cost_usd, result.cost_time_product)


def prepare(trace: PriceTrace, job: JobSpec, cfg: BidConfig, pdf_bucket: int = PDF_BUCKET):
    """Validate a run and return ``(kill_bid, pdf)``; shared by both simulators."""
    if not isinstance(job, JobSpec) or not isinstance(cfg, BidConfig):
        raise ConfigError("simulate needs a JobSpec and a BidConfig")
    if cfg.scheme is SchemeId.ACC:
        if job.t_c + job.t_w == 0:
            raise ConfigError("ACC needs t_c + t_w > 0 so decision points precede the hour")
        s_bid = cfg.s_bid if cfg.s_bid is not None else default_s_bid(trace)
        if s_bid <= trace.max_micros:
            raise ConfigError(
                f"s_bid {to_usd(s_bid)} must exceed the trace maximum {to_usd(trace.max_micros)}"
            )
        kill_bid = s_bid
    else:
        kill_bid = cfg.a_bid
    pdf = None
    if cfg.scheme is SchemeId.ADAPT:
        try:
            pdf = estimate_pdf(trace, cfg.a_bid, pdf_bucket)
        except NeverAvailableError:
            pdf = None
    return kill_bid, pdf


def default_s_bid(trace: PriceTrace) -> int:
    top = trace.max_micros
    return max(2 * top, top + 1)


def finish(trace, events, lifetimes, *, t0, end, completed, counters) -> SimResult:
    """Bill lifetimes, merge charge events and assemble a result."""
    total = 0
    charges = []
    charge_events = []
    for life in lifetimes:
        cost, lines = bill(life, trace)
        total += cost
        charges.append(lines)
        for line in lines:
            if line.charged:
                charge_events.append(SimEvent(line.hour_start, "hour_charge", f"rate={to_usd(line.rate)}"))
    merged = sorted(events + charge_events, key=lambda e: e.time)
    return SimResult(
        completion_time=end - t0,
        total_cost=total,
        completed=completed,
        events=merged,
        lifetimes=list(lifetimes),
        charges=charges,
        **counters,
    )


class _Sim:
    def __init__(self, trace: PriceTrace, job: JobSpec, cfg: BidConfig, pdf_bucket: int):
        self.trace = trace
        self.job = job
        self.cfg = cfg
        self.scheme = cfg.scheme
        self.acc = cfg.scheme is SchemeId.ACC
        self.kill_bid, self.pdf = prepare(trace, job, cfg, pdf_bucket)
        self.avail = availability(trace, cfg.a_bid)
        self.avail_starts = [iv.start for iv in self.avail]
        self.cd_off, self.td_off = acc_decision_offsets(job)

        self.launch_time = None
        self.phase = None  # "restart" | "work" | "ckpt"
        self.phase_end = None
        self.ckpt_value = 0
        self.work_done = 0
        self.stored = 0
        self.started = False
        self.terminated_at = None
        self.last_ckpt_event = None

        self.events = []
        self.lifetimes = []
        self.lost = 0
        self.checkpoints = 0
        self.c = dict(checkpoint_time=0, query_wait_time=0, restart_time=0, waiting_time=0)

    # --- helpers -----------------------------------------------------------

    def price(self, t):
        return self.trace.micros_at(t)

    def next_out_of_bid(self, t):
        """First instant >= t priced at or above the bid, None if never."""
        i = bisect_right(self.avail_starts, t) - 1
        if i < 0 or self.avail[i].end <= t:
            return t
        end = self.avail[i].end
        return end if end < self.trace.horizon_end else None

    def next_obtainable(self, t, bid):
        """First instant > t where the price is below ``bid``."""
        tr = self.trace
        nxt = tr.next_change(t)
        while nxt is not None:
            if tr.micros_at(nxt) < bid:
                return nxt
            nxt = tr.next_change(nxt)
        return None

    def view(self, t):
        return PolicyView(
            now=t,
            work_done=self.work_done,
            last_checkpoint_work=self.stored,
            instance_launch_time=self.launch_time,
            current_price=self.price(t),
            a_bid=self.cfg.a_bid,
            job=self.job,
            pdf=self.pdf,
            started=self.started,
            terminated_at=self.terminated_at,
            last_ckpt_event=self.last_ckpt_event,
        )

    def ask(self, t):
        v = self.view(t)
        s = self.scheme
        if s is SchemeId.NONE:
            return decide_none(v)
        if s is SchemeId.OPT:
            return decide_opt(v, self.next_out_of_bid(t))
        if s is SchemeId.HOUR:
            return decide_hour(v)
        if s is SchemeId.EDGE:
            if t > self.trace.start:
                before, now = self.price(t - 1), v.current_price
                return decide_edge(v, now != before, now > before)
            return decide_edge(v, False, False)
        if s is SchemeId.ADAPT:
            return decide_adapt(v)
        return decide_acc(v)

    def end_lifetime(self, t, cause, kind):
        self.lost += self.work_done - self.stored
        self.work_done = self.stored
        self.lifetimes.append(InstanceLifetime(self.launch_time, t, cause))
        self.events.append(SimEvent(t, kind))
        self.launch_time = None
        self.phase = None

    def commit(self, t):
        self.stored = self.ckpt_value
        self.checkpoints += 1
        self.events.append(SimEvent(t, "checkpoint_end", f"saved={self.stored}"))
        self.phase = "work"

    # --- one instant ---------------------------------------------------------

    def step(self, t):
        """Apply the per-instant rules.  Returns True when the run is over."""
        job = self.job
        if self.launch_time is not None:
            if self.phase == "ckpt" and self.phase_end == t:
                self.commit(t)
            elif self.phase == "restart" and self.phase_end == t:
                self.phase = "work"
            if self.work_done >= job.w:
                self.events.append(SimEvent(t, "job_complete"))
                self.lifetimes.append(
                    InstanceLifetime(self.launch_time, t, EndCause.STILL_RUNNING_AT_JOB_END)
                )
                self.launch_time = None
                return True
        if t >= self.trace.horizon_end:
            return True

        if self.launch_time is not None:
            checkpointed_now = False
            while True:
                action = self.ask(t)
                if action is PolicyAction.TAKE_CHECKPOINT:
                    if checkpointed_now:
                        break
                    checkpointed_now = True
                    if self.acc:
                        self.last_ckpt_event = t
                    if self.phase != "work":
                        if self.acc and job.t_c == 0:
                            continue
                        break
                    self.events.append(SimEvent(t, "checkpoint_begin"))
                    self.ckpt_value = self.work_done
                    if job.t_c == 0:
                        self.commit(t)
                        continue
                    self.phase = "ckpt"
                    self.phase_end = t + job.t_c
                    break
                if action is PolicyAction.USER_TERMINATE:
                    self.end_lifetime(t, EndCause.USER_TERMINATED, "user_terminate")
                    self.terminated_at = t
                break
            if (
                self.launch_time is not None
                and not self.acc
                and self.price(t) >= self.kill_bid
            ):
                self.end_lifetime(t, EndCause.PROVIDER_OUT_OF_BID, "provider_kill")

        if self.launch_time is None:
            if self.acc:
                go = decide_acc(self.view(t)) is PolicyAction.RELAUNCH
            else:
                go = self.price(t) < self.kill_bid
            if go:
                self.launch_time = t
                if self.started:
                    self.events.append(SimEvent(t, "relaunch"))
                    if job.r > 0:
                        self.phase, self.phase_end = "restart", t + job.r
                    else:
                        self.phase = "work"
                else:
                    self.events.append(SimEvent(t, "launch"))
                    self.phase = "work"
                    self.started = True
        return False

    # --- between instants ---------------------------------------------------

    def next_instant(self, t):
        job = self.job
        cands = [self.trace.horizon_end]
        L = self.launch_time
        if L is not None:
            if self.phase in ("restart", "ckpt"):
                cands.append(self.phase_end)
            uptime = t - L
            if self.acc:
                pos = uptime % HOUR
                for off in {self.cd_off, self.cd_off + job.t_w, self.td_off, (self.td_off + job.t_w) % HOUR}:
                    d = (off - pos) % HOUR or HOUR
                    cands.append(t + d)
            else:
                nxt = self.trace.next_change(t)
                if nxt is not None:
                    cands.append(nxt)
            if self.phase == "work" and not self.in_query_window(t):
                cands.append(t + job.w - self.work_done)
            s = self.scheme
            if s is SchemeId.HOUR:
                d = (HOUR - job.t_c - uptime) % HOUR or HOUR
                cands.append(t + d)
            elif s is SchemeId.ADAPT:
                cands.append(t + job.adapt_delta - uptime % job.adapt_delta)
            elif s is SchemeId.OPT:
                oob = self.next_out_of_bid(t)
                if oob is not None and oob - job.t_c > t:
                    cands.append(oob - job.t_c)
        else:
            if self.acc and self.started:
                poll = job.relaunch_poll
                tau = t + 1 if self.price(t) < self.cfg.a_bid else self.next_obtainable(t, self.cfg.a_bid)
                if tau is not None:
                    k = -(-(tau - self.terminated_at) // poll)
                    cands.append(self.terminated_at + k * poll)
            else:
                bid = self.cfg.a_bid if self.acc else self.kill_bid
                nxt = self.next_obtainable(t, bid)
                if nxt is not None:
                    cands.append(nxt)
        return min(c for c in cands if c > t)

    def in_query_window(self, t):
        if not self.acc or self.job.t_w == 0 or self.launch_time is None:
            return False
        pos = (t - self.launch_time) % HOUR
        tw = self.job.t_w
        return self.cd_off <= pos < self.cd_off + tw or self.td_off <= pos < self.td_off + tw

    def advance(self, t, t_next):
        span = t_next - t
        c = self.c
        if self.launch_time is None:
            c["waiting_time"] += span
        elif self.phase == "restart":
            c["restart_time"] += span
        elif self.phase == "ckpt":
            c["checkpoint_time"] += span
        elif self.in_query_window(t):
            c["query_wait_time"] += span
        else:
            self.work_done += span

    def run(self) -> SimResult:
        t = self.trace.start
        while True:
            if self.step(t):
                break
            t_next = self.next_instant(t)
            self.advance(t, t_next)
            t = t_next
        completed = bool(self.events) and self.events[-1].kind == "job_complete"
        if not completed and self.launch_time is not None:
            self.lifetimes.append(
                InstanceLifetime(self.launch_time, t, EndCause.STILL_RUNNING_AT_JOB_END)
            )
        counters = dict(self.c, work_lost=self.lost, checkpoints_taken=self.checkpoints,
                        useful_work=self.work_done)
        logger.debug("%s run done at %d completed=%s", self.scheme.value, t, completed)
        return finish(self.trace, self.events, self.lifetimes, t0=self.trace.start, end=t,
                      completed=completed, counters=counters)


def simulate(trace: PriceTrace, job: JobSpec, cfg: BidConfig, pdf_bucket: int = PDF_BUCKET) -> SimResult:
    """Run one job under one scheme over one trace."""
    return _Sim(trace, job, cfg, pdf_bucket).run()
