"""Brute-force reference simulator.

Steps through the trace one second at a time and asks the policy at every
second.  There is no event queue and no look-ahead beyond a precomputed
per-second price table, which makes it slow but easy to audit.  It must
agree with :func:`spotsim.engine.simulate` field for field.
"""

from __future__ import annotations

from spotsim.billing import EndCause, InstanceLifetime
from spotsim.config import HOUR, BidConfig, JobSpec, SchemeId
from spotsim.engine import PDF_BUCKET, SimEvent, SimResult, finish, prepare
from spotsim.schemes import (
    PolicyAction,
    PolicyView,
    decide_acc,
    decide_adapt,
    decide_edge,
    decide_hour,
    decide_none,
    decide_opt,
)
from spotsim.trace import PriceTrace


def _per_second_prices(trace: PriceTrace) -> list:
    prices = []
    for start, end, p in trace.segments():
        prices.extend([p] * (end - start))
    return prices


def _next_out_of_bid(prices: list, bid: int) -> list:
    """For each second, the first later-or-equal second priced at or above
    ``bid`` (None if the price stays below it to the horizon)."""
    out = [None] * len(prices)
    nxt = None
    for i in range(len(prices) - 1, -1, -1):
        if prices[i] >= bid:
            nxt = i
        out[i] = nxt
    return out


def simulate_oracle(trace: PriceTrace, job: JobSpec, cfg: BidConfig, pdf_bucket: int = PDF_BUCKET) -> SimResult:
    kill_bid, pdf = prepare(trace, job, cfg, pdf_bucket)
    scheme = cfg.scheme
    acc = scheme is SchemeId.ACC
    t0, horizon = trace.start, trace.horizon_end
    prices = _per_second_prices(trace)
    oob = _next_out_of_bid(prices, cfg.a_bid) if scheme is SchemeId.OPT else None
    cd = HOUR - job.t_c - job.t_w
    td = HOUR - job.t_w

    launch = None
    phase = None
    phase_end = 0
    ckpt_value = 0
    work = 0
    stored = 0
    started = False
    terminated_at = None
    last_ckpt_event = None
    events = []
    lifetimes = []
    lost = ckpts = 0
    n_wait = n_restart = n_ckpt = n_query = 0
    completed = False

    def view(t):
        return PolicyView(t, work, stored, launch, prices[t - t0], cfg.a_bid, job, pdf,
                          started, terminated_at, last_ckpt_event)

    def policy(t):
        v = view(t)
        if scheme is SchemeId.NONE:
            return decide_none(v)
        if scheme is SchemeId.OPT:
            k = oob[t - t0]
            return decide_opt(v, None if k is None else t0 + k)
        if scheme is SchemeId.HOUR:
            return decide_hour(v)
        if scheme is SchemeId.EDGE:
            if t == t0:
                return decide_edge(v, False, False)
            prev = prices[t - t0 - 1]
            return decide_edge(v, v.current_price != prev, v.current_price > prev)
        if scheme is SchemeId.ADAPT:
            return decide_adapt(v)
        return decide_acc(v)

    t = t0
    while True:
        # 1. phase completions
        if launch is not None:
            if phase == "ckpt" and phase_end == t:
                stored = ckpt_value
                ckpts += 1
                events.append(SimEvent(t, "checkpoint_end"))
                phase = "work"
            if phase == "restart" and phase_end == t:
                phase = "work"
            # 2. completion
            if work >= job.w:
                events.append(SimEvent(t, "job_complete"))
                lifetimes.append(InstanceLifetime(launch, t, EndCause.STILL_RUNNING_AT_JOB_END))
                launch = None
                completed = True
                break
        if t == horizon:
            break

        # 3. policy, 4. provider kill
        if launch is not None:
            did_ckpt = False
            for _ in range(2):
                action = policy(t)
                if action is PolicyAction.TAKE_CHECKPOINT and not did_ckpt:
                    did_ckpt = True
                    if acc:
                        last_ckpt_event = t
                    if phase == "work":
                        events.append(SimEvent(t, "checkpoint_begin"))
                        ckpt_value = work
                        if job.t_c > 0:
                            phase, phase_end = "ckpt", t + job.t_c
                            break
                        stored = ckpt_value
                        ckpts += 1
                        events.append(SimEvent(t, "checkpoint_end"))
                    elif job.t_c > 0 or not acc:
                        break
                    continue  # zero-length write: ask once more at this instant
                if action is PolicyAction.USER_TERMINATE:
                    lost += work - stored
                    work = stored
                    lifetimes.append(InstanceLifetime(launch, t, EndCause.USER_TERMINATED))
                    events.append(SimEvent(t, "user_terminate"))
                    launch, phase, terminated_at = None, None, t
                break
            if launch is not None and not acc and prices[t - t0] >= kill_bid:
                lost += work - stored
                work = stored
                lifetimes.append(InstanceLifetime(launch, t, EndCause.PROVIDER_OUT_OF_BID))
                events.append(SimEvent(t, "provider_kill"))
                launch, phase = None, None

        # 5. launch
        if launch is None:
            if acc:
                go = decide_acc(view(t)) is PolicyAction.RELAUNCH
            else:
                go = prices[t - t0] < kill_bid
            if go:
                launch = t
                if started:
                    events.append(SimEvent(t, "relaunch"))
                    phase, phase_end = ("restart", t + job.r) if job.r else ("work", 0)
                else:
                    events.append(SimEvent(t, "launch"))
                    phase = "work"
                    started = True

        # the second [t, t+1)
        if launch is None:
            n_wait += 1
        elif phase == "restart":
            n_restart += 1
        elif phase == "ckpt":
            n_ckpt += 1
        elif acc and job.t_w and (cd <= (t - launch) % HOUR < cd + job.t_w or (t - launch) % HOUR >= td):
            n_query += 1
        else:
            work += 1
        t += 1

    if not completed and launch is not None:
        lifetimes.append(InstanceLifetime(launch, t, EndCause.STILL_RUNNING_AT_JOB_END))
    counters = dict(
        work_lost=lost,
        checkpoints_taken=ckpts,
        useful_work=work,
        checkpoint_time=n_ckpt,
        query_wait_time=n_query,
        restart_time=n_restart,
        waiting_time=n_wait,
    )
    return finish(trace, events, lifetimes, t0=t0, end=t, completed=completed, counters=counters)
