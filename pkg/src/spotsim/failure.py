"""Out-of-bid failure distribution and expected execution time."""

from __future__ import annotations

import math
from dataclasses import dataclass

from spotsim.errors import ConfigError, DoesNotTerminate, NeverAvailableError
from spotsim.trace import PriceTrace, availability


@dataclass(frozen=True)
class FailurePdf:
    """Histogram of time-to-revocation.

    Bucket ``k`` covers ``[k * bucket_width, (k + 1) * bucket_width)``.
    ``tail_mass`` is the probability of never failing within the observed
    horizon.
    """

    bucket_width: int
    mass: tuple
    tail_mass: float = 0.0

    def __post_init__(self):
        if self.bucket_width <= 0:
            raise ConfigError("bucket_width must be positive")
        mass = tuple(float(m) for m in self.mass)
        if any(m < 0 for m in mass) or self.tail_mass < 0:
            raise ValueError("probability masses must be non-negative")
        if abs(math.fsum(mass) + self.tail_mass - 1.0) > 1e-9:
            raise ValueError("masses and tail_mass must sum to 1")
        object.__setattr__(self, "mass", mass)

    def survival(self, a: float) -> float:
        """P(failure time >= a), mass spread uniformly inside each bucket."""
        if a <= 0:
            return 1.0
        width = self.bucket_width
        k, rem = divmod(a, width)
        k = int(k)
        if k >= len(self.mass):
            return self.tail_mass
        above = math.fsum(self.mass[k + 1:]) + self.tail_mass
        return above + self.mass[k] * (1.0 - rem / width)

    def hazard(self, a: float, delta: float) -> float:
        """P(fail in [a, a + delta) | survived to a); 1 when nothing survives."""
        s = self.survival(a)
        if s <= 0.0:
            return 1.0
        return max(0.0, (s - self.survival(a + delta)) / s)


@dataclass(frozen=True)
class EetInputs:
    w: int
    r: int = 0

    def __post_init__(self):
        if self.w <= 0:
            raise ConfigError("work length w must be positive")
        if self.r < 0:
            raise ConfigError("restart overhead r must be non-negative")


def estimate_pdf(trace: PriceTrace, bid, bucket_width: int) -> FailurePdf:
    """Histogram availability-interval lengths at ``bid``.

    An interval cut off by the trace horizon has unknown length and is
    counted as surviving (tail mass).
    """
    if bucket_width <= 0:
        raise ConfigError("bucket_width must be positive")
    intervals = availability(trace, bid)
    if not intervals:
        raise NeverAvailableError("never available at this bid")
    counts = {}
    censored = 0
    for iv in intervals:
        if iv.end >= trace.horizon_end:
            censored += 1
            continue
        k = iv.length // bucket_width
        counts[k] = counts.get(k, 0) + 1
    n = len(intervals)
    size = max(counts) + 1 if counts else 0
    mass = tuple(counts.get(k, 0) / n for k in range(size))
    return FailurePdf(bucket_width, mass, censored / n)


def eet(pdf: FailurePdf, inputs: EetInputs) -> float:
    """Expected wall time to finish ``w`` seconds of work with restarts.

    Each failed attempt costs the midpoint of its failure bucket plus the
    restart overhead ``r``.  ``w`` is rounded up to whole buckets when
    splitting the mass into fail-before / survive-past.  Raises
    :class:`DoesNotTerminate` when failure before completion is certain.
    """
    width = pdf.bucket_width
    n_buckets = -(-inputs.w // width)
    before = pdf.mass[:n_buckets]
    p_fail = math.fsum(before)
    p_survive = math.fsum(pdf.mass[n_buckets:]) + pdf.tail_mass
    if p_survive <= 0.0:
        raise DoesNotTerminate(
            f"failure before {inputs.w}s is certain (mass below {n_buckets} buckets = {p_fail})"
        )
    wasted = math.fsum(((k + 0.5) * width + inputs.r) * m for k, m in enumerate(before))
    return (inputs.w * p_survive + wasted) / p_survive
