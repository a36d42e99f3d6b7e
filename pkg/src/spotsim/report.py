"""Report rows, bid sweeps and per-scheme summaries."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Optional

from spotsim.config import BidConfig, JobSpec, SchemeId
from spotsim.engine import SimResult, simulate
from spotsim.errors import ConfigError
from spotsim.money import MICROS_PER_USD, format_usd, to_micros

COLUMNS = (
    "trace",
    "scheme",
    "bid",
    "completion_time_s",
    "total_cost_usd",
    "product_usd_h",
    "completed",
    "checkpoints",
    "work_lost_s",
)
SUMMARY_COLUMNS = (
    "summary",
    "scheme",
    "n_completed",
    "mean_completion_time_s",
    "mean_total_cost_usd",
    "mean_product_usd_h",
    "delta_time_pct_vs_opt",
    "delta_cost_pct_vs_opt",
    "delta_product_pct_vs_opt",
)
_SIX = Decimal("0.000001")
_TWO = Decimal("0.01")


@dataclass(frozen=True)
class ReportRow:
    trace: str
    scheme: SchemeId
    bid: int  # micro-dollars
    completion_time_s: int
    total_cost: int  # micro-dollars
    product: Decimal
    completed: bool
    checkpoints: int
    work_lost_s: int

    @classmethod
    def from_result(cls, trace_id: str, cfg: BidConfig, result: SimResult) -> "ReportRow":
        return cls(
            trace_id,
            cfg.scheme,
            cfg.a_bid,
            result.completion_time,
            result.total_cost,
            result.product_exact,
            result.completed,
            result.checkpoints_taken,
            result.work_lost,
        )

    def cells(self):
        return [
            self.trace,
            self.scheme.value,
            format_usd(self.bid),
            str(self.completion_time_s),
            format_usd(self.total_cost),
            f"{self.product.quantize(_SIX, rounding=ROUND_HALF_EVEN):f}",
            "true" if self.completed else "false",
            str(self.checkpoints),
            str(self.work_lost_s),
        ]


@dataclass(frozen=True)
class SweepSpec:
    bid_min: int
    bid_max: int
    bid_step: int
    schemes: tuple
    traces: tuple  # (trace_id, PriceTrace) pairs

    def __post_init__(self):
        if self.bid_min > self.bid_max:
            raise ConfigError("bid_min must not exceed bid_max")
        if self.bid_step <= 0:
            raise ConfigError("bid_step must be positive")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        object.__setattr__(
            self, "schemes", tuple(sorted(set(self.schemes), key=list(SchemeId).index))
        )

    @classmethod
    def make(cls, bid_min, bid_max, bid_step, schemes, traces) -> "SweepSpec":
        return cls(
            to_micros(bid_min),
            to_micros(bid_max),
            to_micros(bid_step),
            tuple(SchemeId.parse(s) for s in schemes),
            tuple(traces),
        )

    def bids(self) -> list:
        n = (self.bid_max - self.bid_min) // self.bid_step
        return [self.bid_min + k * self.bid_step for k in range(n + 1)]

    def points(self):
        for trace_id, trace in self.traces:
            for scheme in self.schemes:
                for bid in self.bids():
                    yield trace_id, trace, BidConfig(bid, scheme)


def _run_point(args) -> ReportRow:
    trace_id, trace, job, cfg, s_bid = args
    if cfg.scheme is SchemeId.ACC and s_bid is not None:
        cfg = BidConfig(cfg.a_bid, cfg.scheme, s_bid)
    return ReportRow.from_result(trace_id, cfg, simulate(trace, job, cfg))


def default_parallel() -> int:
    env = os.environ.get("SPOTSIM_PARALLEL")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SPOTSIM_PARALLEL must be an integer, got {env!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec, job: JobSpec, parallel: Optional[int] = None, s_bid: Optional[int] = None) -> list:
    """One row per (trace, scheme, bid), in that nesting order."""
    work = [(tid, tr, job, cfg, s_bid) for tid, tr, cfg in spec.points()]
    n = default_parallel() if parallel is None else parallel
    if n <= 1 or len(work) < 2:
        return [_run_point(w) for w in work]
    with ProcessPoolExecutor(max_workers=min(n, len(work))) as pool:
        return list(pool.map(_run_point, work, chunksize=max(1, len(work) // (4 * n))))


@dataclass(frozen=True)
class SchemeSummary:
    scheme: SchemeId
    n_completed: int
    mean_time: Optional[Decimal]
    mean_cost: Optional[Decimal]
    mean_product: Optional[Decimal]
    delta_time: Optional[Decimal] = None
    delta_cost: Optional[Decimal] = None
    delta_product: Optional[Decimal] = None

    def cells(self):
        def fmt(x, q):
            return "" if x is None else f"{x.quantize(q, rounding=ROUND_HALF_EVEN):f}"

        return [
            "summary",
            self.scheme.value,
            str(self.n_completed),
            fmt(self.mean_time, _TWO),
            fmt(self.mean_cost, _SIX),
            fmt(self.mean_product, _SIX),
            fmt(self.delta_time, _TWO),
            fmt(self.delta_cost, _TWO),
            fmt(self.delta_product, _TWO),
        ]


def _pct(value, base):
    if value is None or base is None or base == 0:
        return None
    return (value - base) / base * 100


def summarize(rows) -> list:
    """Means over completed rows per scheme and percentage deltas vs OPT."""
    by_scheme = {}
    for row in rows:
        by_scheme.setdefault(row.scheme, []).append(row)
    out = {}
    for scheme in SchemeId:
        if scheme not in by_scheme:
            continue
        done = [r for r in by_scheme[scheme] if r.completed]
        n = len(done)
        if n:
            mt = Decimal(sum(r.completion_time_s for r in done)) / n
            mc = Decimal(sum(r.total_cost for r in done)) / (n * MICROS_PER_USD)
            mp = sum((r.product for r in done), Decimal(0)) / n
        else:
            mt = mc = mp = None
        out[scheme] = SchemeSummary(scheme, n, mt, mc, mp)
    base = out.get(SchemeId.OPT)
    if base is not None:
        for scheme, s in list(out.items()):
            out[scheme] = SchemeSummary(
                scheme, s.n_completed, s.mean_time, s.mean_cost, s.mean_product,
                _pct(s.mean_time, base.mean_time),
                _pct(s.mean_cost, base.mean_cost),
                _pct(s.mean_product, base.mean_product),
            )
    return list(out.values())


def format_report(rows, summary=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    if summary:
        buf.write("\n")
        writer.writerow(SUMMARY_COLUMNS)
        for s in summary:
            writer.writerow(s.cells())
    return buf.getvalue()
