"""Spot-price histories: parsing, lookup, availability and synthesis."""

from __future__ import annotations

import csv
import io
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from typing import Iterable, Optional, TextIO, Union

from spotsim.errors import (
    ConfigError,
    OutOfRangeError,
    TraceParseError,
    TraceValidationError,
)
from spotsim.money import format_usd, to_micros, to_usd

DEFAULT_TAIL = 3600
HORIZON_TAG = "horizon_end"


@dataclass(frozen=True)
class PricePoint:
    timestamp: int
    price: Decimal

    def __post_init__(self):
        micros = to_micros(self.price)
        if micros < 0:
            raise TraceValidationError(f"negative price {self.price} at {self.timestamp}")
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "price", to_usd(micros))

    @property
    def micros(self) -> int:
        return to_micros(self.price)


@dataclass(frozen=True)
class AvailabilityInterval:
    start: int
    end: int

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"empty interval [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class PriceTrace:
    """Piecewise-constant price series for one (instance type, zone).

    The price at ``t`` is the price of the latest point with timestamp <= t,
    defined on ``[start, horizon_end)``.
    """

    instance_type: str
    zone: str
    points: tuple
    horizon_end: Optional[int] = None
    times: tuple = field(init=False, repr=False, compare=False)
    micros: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise TraceValidationError("trace has no points")
        times = tuple(p.timestamp for p in points)
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise TraceValidationError(f"timestamps not strictly increasing at {b}")
        horizon = self.horizon_end
        if horizon is None:
            horizon = times[-1] + DEFAULT_TAIL
        if horizon <= times[-1]:
            raise TraceValidationError(
                f"horizon_end {horizon} must be after last point {times[-1]}"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "horizon_end", int(horizon))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "micros", tuple(p.micros for p in points))

    @property
    def start(self) -> int:
        return self.times[0]

    @property
    def max_micros(self) -> int:
        return max(self.micros)

    def segments(self):
        """Yield ``(start, end, price_micros)`` for each constant-price piece."""
        ends = self.times[1:] + (self.horizon_end,)
        yield from zip(self.times, ends, self.micros)

    def micros_at(self, t: int) -> int:
        if not self.start <= t < self.horizon_end:
            raise OutOfRangeError(
                f"t={t} outside trace span [{self.start}, {self.horizon_end})"
            )
        return self.micros[bisect_right(self.times, t) - 1]

    def next_change(self, t: int) -> Optional[int]:
        """First price-point timestamp strictly after ``t``, if any."""
        i = bisect_right(self.times, t)
        return self.times[i] if i < len(self.times) else None


def price_at(trace: PriceTrace, t: int) -> Decimal:
    return to_usd(trace.micros_at(t))


def availability(trace: PriceTrace, bid) -> list:
    """Maximal intervals where the price is strictly below ``bid``."""
    bid_micros = bid if isinstance(bid, int) else to_micros(bid)
    if bid_micros < 0:
        raise ValueError("bid must be non-negative")
    out = []
    cur_start = None
    for seg_start, seg_end, p in trace.segments():
        if p < bid_micros:
            if cur_start is None:
                cur_start = seg_start
        elif cur_start is not None:
            out.append(AvailabilityInterval(cur_start, seg_start))
            cur_start = None
    if cur_start is not None:
        out.append(AvailabilityInterval(cur_start, trace.horizon_end))
    return out


# --- CSV wire format -------------------------------------------------------


def _parse_time(text: str) -> int:
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    try:
        dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ")
    except ValueError:
        raise ValueError(f"unparsable timestamp {text!r}") from None
    return int(dt.replace(tzinfo=timezone.utc).timestamp())


def format_time(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_trace(
    source: Union[str, TextIO],
    zone: Optional[str] = None,
    instance_type: Optional[str] = None,
) -> PriceTrace:
    """Parse ``timestamp,zone,instance_type,price`` rows into a trace.

    Rows for several (zone, type) series may be interleaved; ``zone`` and
    ``instance_type`` select one.  When no selector is given the input must
    hold exactly one series.  A ``# horizon_end: <timestamp>`` comment line
    sets the horizon; otherwise it is the last timestamp plus one hour.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    horizon = None
    rows = []
    first_row = True
    for lineno, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, _, value = stripped.lstrip("#").partition(":")
            if key.strip() == HORIZON_TAG:
                try:
                    horizon = _parse_time(value)
                except ValueError as exc:
                    raise TraceParseError(str(exc), lineno) from None
            continue
        fields = next(csv.reader([stripped]))
        if first_row:
            first_row = False
            if fields and not fields[0].strip()[:1].isdigit():
                continue  # header
        if len(fields) != 4:
            raise TraceParseError(f"expected 4 columns, got {len(fields)}", lineno)
        ts_text, row_zone, row_type, price_text = (f.strip() for f in fields)
        try:
            ts = _parse_time(ts_text)
        except ValueError as exc:
            raise TraceParseError(str(exc), lineno) from None
        try:
            micros = to_micros(price_text)
        except ValueError:
            raise TraceParseError(f"unparsable price {price_text!r}", lineno) from None
        if micros < 0:
            raise TraceValidationError(f"line {lineno}: negative price {price_text}")
        rows.append((ts, row_zone, row_type, micros, lineno))

    if not rows:
        raise TraceParseError("no data rows")
    if zone is not None:
        rows = [r for r in rows if r[1] == zone]
    if instance_type is not None:
        rows = [r for r in rows if r[2] == instance_type]
    if not rows:
        raise TraceValidationError(
            f"no rows for zone={zone!r} instance_type={instance_type!r}"
        )
    series = {(r[1], r[2]) for r in rows}
    if len(series) > 1:
        raise TraceValidationError(
            f"input holds {len(series)} series; select one with zone/instance_type"
        )
    rows.sort(key=lambda r: r[0])
    for a, b in zip(rows, rows[1:]):
        if a[0] == b[0]:
            raise TraceValidationError(
                f"duplicate timestamp {format_time(b[0])} (lines {a[4]} and {b[4]})"
            )
    (row_zone, row_type), = series
    points = tuple(PricePoint(r[0], to_usd(r[3])) for r in rows)
    return PriceTrace(row_type, row_zone, points, horizon)


def serialize_trace(trace: PriceTrace, header: bool = True) -> str:
    buf = io.StringIO()
    buf.write(f"# {HORIZON_TAG}: {format_time(trace.horizon_end)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(["timestamp", "zone", "instance_type", "price"])
    for p in trace.points:
        writer.writerow([format_time(p.timestamp), trace.zone, trace.instance_type, format_usd(p.micros)])
    return buf.getvalue()


def load_trace(path, zone=None, instance_type=None) -> PriceTrace:
    with open(path, encoding="utf-8") as f:
        return parse_trace(f, zone=zone, instance_type=instance_type)


# --- synthetic traces ------------------------------------------------------


@dataclass(frozen=True)
class SquareWave:
    low: Decimal
    high: Decimal
    low_dur: int
    high_dur: int
    phase: int = 0
    duration: int = 7 * 86400
    start: int = 0


@dataclass(frozen=True)
class RandomWalk:
    start_price: Decimal
    step: Decimal
    period: int
    floor: Decimal = Decimal(0)
    duration: int = 7 * 86400
    start: int = 0


@dataclass(frozen=True)
class ReplayJitter:
    base: PriceTrace
    jitter: Decimal


def gen_trace(model, seed: int = 0, zone: str = "sim-zone", instance_type: str = "sim.type") -> PriceTrace:
    """Build a synthetic trace; identical ``(model, seed)`` give identical output."""
    rng = random.Random(seed)
    if isinstance(model, SquareWave):
        return _square_wave(model, zone, instance_type)
    if isinstance(model, RandomWalk):
        return _random_walk(model, rng, zone, instance_type)
    if isinstance(model, ReplayJitter):
        return _replay_jitter(model, rng)
    raise ConfigError(f"unknown trace model {type(model).__name__}")


def _square_wave(m: SquareWave, zone, itype) -> PriceTrace:
    if m.low_dur <= 0 or m.high_dur <= 0:
        raise ConfigError("square-wave durations must be positive")
    if m.duration <= 0:
        raise ConfigError("duration must be positive")
    low, high = to_micros(m.low), to_micros(m.high)
    if low < 0 or high < 0:
        raise ConfigError("prices must be non-negative")
    period = m.low_dur + m.high_dur
    offset = m.phase % period
    points = []
    t = m.start
    end = m.start + m.duration
    # position inside the cycle at t
    in_low = offset < m.low_dur
    remaining = (m.low_dur - offset) if in_low else (period - offset)
    while t < end:
        points.append(PricePoint(t, to_usd(low if in_low else high)))
        t += remaining
        in_low = not in_low
        remaining = m.low_dur if in_low else m.high_dur
    return PriceTrace(itype, zone, tuple(points), end)


def _random_walk(m: RandomWalk, rng: random.Random, zone, itype) -> PriceTrace:
    if m.period <= 0:
        raise ConfigError("step period must be positive")
    if m.duration <= 0:
        raise ConfigError("duration must be positive")
    price, step, floor = to_micros(m.start_price), to_micros(m.step), to_micros(m.floor)
    if step < 0 or floor < 0 or price < 0:
        raise ConfigError("random-walk prices must be non-negative")
    price = max(price, floor)
    points = []
    for k in range(m.duration // m.period + 1):
        points.append(PricePoint(m.start + k * m.period, to_usd(price)))
        price = max(floor, price + rng.choice((-step, step)))
    horizon = points[-1].timestamp + m.period
    return PriceTrace(itype, zone, tuple(points), horizon)


def _replay_jitter(m: ReplayJitter, rng: random.Random) -> PriceTrace:
    jitter = to_micros(m.jitter)
    if jitter < 0:
        raise ConfigError("jitter must be non-negative")
    points = tuple(
        PricePoint(p.timestamp, to_usd(max(0, p.micros + rng.randint(-jitter, jitter))))
        for p in m.base.points
    )
    return PriceTrace(m.base.instance_type, m.base.zone, points, m.base.horizon_end)


def from_segments(segments: Iterable, horizon_end: int, zone="sim-zone", instance_type="sim.type") -> PriceTrace:
    """Convenience constructor from ``(timestamp, price)`` pairs."""
    points = tuple(PricePoint(t, Decimal(str(p))) for t, p in segments)
    return PriceTrace(instance_type, zone, points, horizon_end)
