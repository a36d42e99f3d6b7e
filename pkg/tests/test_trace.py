from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spotsim.errors import ConfigError, OutOfRangeError, TraceParseError, TraceValidationError
from spotsim.trace import (
    AvailabilityInterval,
    PricePoint,
    PriceTrace,
    RandomWalk,
    ReplayJitter,
    SquareWave,
    availability,
    from_segments,
    gen_trace,
    parse_trace,
    price_at,
    serialize_trace,
)

TWO_ROWS = (
    "2011-10-01T00:00:00Z,eu-west-1a,m1.xlarge,0.380\n"
    "2011-10-01T01:00:00Z,eu-west-1a,m1.xlarge,0.410"
)


def test_parse_two_rows():
    tr = parse_trace(TWO_ROWS)
    assert [p.price for p in tr.points] == [Decimal("0.380"), Decimal("0.410")]
    assert tr.zone == "eu-west-1a" and tr.instance_type == "m1.xlarge"
    assert tr.points[1].timestamp - tr.points[0].timestamp == 3600
    assert tr.horizon_end == tr.points[-1].timestamp + 3600


def test_parse_header_and_unsorted_rows():
    text = "timestamp,zone,instance_type,price\n" + "\n".join(reversed(TWO_ROWS.splitlines()))
    tr = parse_trace(text)
    assert [p.price for p in tr.points] == [Decimal("0.38"), Decimal("0.41")]


@pytest.mark.parametrize("text", ["", "timestamp,zone,instance_type,price\n", "\n\n"])
def test_empty_stream(text):
    with pytest.raises(TraceParseError, match="no data rows"):
        parse_trace(text)


def test_negative_price_rejected():
    with pytest.raises(TraceValidationError):
        parse_trace("2011-10-01T00:00:00Z,z,t,-0.1")


def test_malformed_rows_report_line():
    with pytest.raises(TraceParseError) as exc:
        parse_trace(TWO_ROWS + "\n2011-10-01T02:00:00Z,z,t")
    assert exc.value.line == 3
    with pytest.raises(TraceParseError, match="line 1"):
        parse_trace("2011-13-45T00:00:00Z,z,t,0.3")
    with pytest.raises(TraceParseError, match="price"):
        parse_trace("2011-10-01T00:00:00Z,z,t,abc")


def test_duplicate_timestamp():
    with pytest.raises(TraceValidationError, match="duplicate"):
        parse_trace(TWO_ROWS + "\n2011-10-01T01:00:00Z,eu-west-1a,m1.xlarge,0.5")


def test_selector_filters_interleaved_series():
    text = TWO_ROWS + "\n2011-10-01T00:30:00Z,us-east-1a,m1.small,0.030"
    with pytest.raises(TraceValidationError, match="select"):
        parse_trace(text)
    tr = parse_trace(text, zone="us-east-1a", instance_type="m1.small")
    assert len(tr.points) == 1 and tr.points[0].price == Decimal("0.03")


def test_horizon_comment():
    tr = parse_trace("# horizon_end: 2011-10-01T05:00:00Z\n" + TWO_ROWS)
    assert tr.horizon_end - tr.start == 5 * 3600


def test_trace_invariants():
    with pytest.raises(TraceValidationError):
        PriceTrace("t", "z", ())
    with pytest.raises(TraceValidationError):
        PriceTrace("t", "z", (PricePoint(10, Decimal(1)), PricePoint(10, Decimal(2))))
    with pytest.raises(TraceValidationError):
        PriceTrace("t", "z", (PricePoint(10, Decimal(1)),), horizon_end=10)


STEP = from_segments([(0, "0.38"), (3600, "0.41")], 7200)


@pytest.mark.parametrize("t,price", [(1800, "0.38"), (3600, "0.41"), (5000, "0.41"), (0, "0.38")])
def test_price_at(t, price):
    assert price_at(STEP, t) == Decimal(price)


@pytest.mark.parametrize("t", [-1, 7200, 10**9])
def test_price_at_out_of_range(t):
    with pytest.raises(OutOfRangeError):
        price_at(STEP, t)


THREE = from_segments([(0, "0.39"), (3600, "0.41"), (7200, "0.38")], 10800)


def test_availability_threshold():
    assert availability(THREE, Decimal("0.40")) == [
        AvailabilityInterval(0, 3600),
        AvailabilityInterval(7200, 10800),
    ]


def test_availability_tie_is_unavailable():
    assert availability(THREE, Decimal("0.39")) == [AvailabilityInterval(7200, 10800)]


def test_availability_always():
    assert availability(THREE, Decimal("2.00")) == [AvailabilityInterval(0, 10800)]
    assert availability(THREE, Decimal("0")) == []


def test_square_wave_shape():
    tr = gen_trace(SquareWave(Decimal("0.30"), Decimal("0.50"), 3000, 1200, 0, duration=12000), seed=3)
    assert [(p.timestamp, str(p.price)) for p in tr.points] == [
        (0, "0.300000"),
        (3000, "0.500000"),
        (4200, "0.300000"),
        (7200, "0.500000"),
        (8400, "0.300000"),
        (11400, "0.500000"),
    ]
    assert tr.horizon_end == 12000


def test_square_wave_phase():
    tr = gen_trace(SquareWave(Decimal("0.30"), Decimal("0.50"), 3000, 1200, 3500, duration=5000))
    assert [(p.timestamp, str(p.price)) for p in tr.points] == [
        (0, "0.500000"),
        (700, "0.300000"),
        (3700, "0.500000"),
        (4900, "0.300000"),
    ]


def test_generators_deterministic():
    m = RandomWalk(Decimal("0.4"), Decimal("0.01"), 300, Decimal("0.1"), duration=86400)
    assert gen_trace(m, 7) == gen_trace(m, 7)
    assert gen_trace(m, 7) != gen_trace(m, 8)
    j = ReplayJitter(gen_trace(m, 1), Decimal("0.002"))
    assert gen_trace(j, 5) == gen_trace(j, 5)


def test_random_walk_floor():
    tr = gen_trace(RandomWalk(Decimal("0.01"), Decimal("0.01"), 1, Decimal("0.0"), duration=10000), 11)
    assert len(tr.points) == 10001
    assert all(p.price >= 0 for p in tr.points)
    assert min(tr.micros) == 0  # the floor is actually reached


@pytest.mark.parametrize(
    "model",
    [
        SquareWave(Decimal("0.3"), Decimal("0.5"), 0, 10),
        SquareWave(Decimal("0.3"), Decimal("0.5"), 10, -1),
        RandomWalk(Decimal("0.3"), Decimal("0.01"), 0),
    ],
)
def test_generator_config_errors(model):
    with pytest.raises(ConfigError):
        gen_trace(model, 0)


prices = st.integers(0, 2_000_000)
steps = st.lists(st.tuples(st.integers(1, 5000), prices), min_size=1, max_size=25)


def _trace_from(step_list, tail):
    t, segs = 0, []
    for gap, p in step_list:
        segs.append((t, Decimal(p) / 10**6))
        t += gap
    return from_segments(segs, t - step_list[-1][0] + tail)


@settings(max_examples=200, deadline=None)
@given(steps, st.integers(1, 5000), prices)
def test_availability_matches_pointwise_definition(step_list, tail, bid):
    tr = _trace_from(step_list, tail)
    ivs = availability(tr, bid)
    for a, b in zip(ivs, ivs[1:]):
        assert a.end < b.start
    covered = set()
    for iv in ivs:
        covered.update(range(iv.start, iv.end))
    expected = {t for t in range(tr.start, tr.horizon_end) if tr.micros_at(t) < bid}
    assert covered == expected


@settings(max_examples=150, deadline=None)
@given(steps, st.integers(1, 5000), prices, prices)
def test_availability_monotone_in_bid(step_list, tail, b1, b2):
    lo, hi = sorted((b1, b2))
    tr = _trace_from(step_list, tail)
    inner = availability(tr, lo)
    outer = availability(tr, hi)
    for iv in inner:
        assert any(o.start <= iv.start and iv.end <= o.end for o in outer)


@settings(max_examples=150, deadline=None)
@given(steps, st.integers(1, 5000), st.booleans())
def test_csv_round_trip(step_list, tail, header):
    tr = _trace_from(step_list, tail)
    text = serialize_trace(tr, header=header)
    assert parse_trace(text) == tr
