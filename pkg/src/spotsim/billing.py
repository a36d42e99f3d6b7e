"""Instance-hour charging.

Hours are anchored at launch.  Each begun hour is billed at the spot price
in force when it opens; price moves inside an hour do not matter.  A final
partial hour is free when the provider revoked the instance and charged in
full when the user ended it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from spotsim.errors import OutOfRangeError
from spotsim.trace import PriceTrace

HOUR = 3600


class EndCause(enum.Enum):
    PROVIDER_OUT_OF_BID = "provider_out_of_bid"
    USER_TERMINATED = "user_terminated"
    STILL_RUNNING_AT_JOB_END = "still_running_at_job_end"


@dataclass(frozen=True)
class InstanceLifetime:
    launch_time: int
    end_time: int
    end_cause: EndCause

    def __post_init__(self):
        if self.launch_time >= self.end_time:
            raise ValueError(
                f"lifetime must have launch < end, got [{self.launch_time}, {self.end_time})"
            )


@dataclass(frozen=True)
class ChargeLine:
    hour_index: int
    hour_start: int
    rate: int  # micro-dollars per hour
    charged: bool


def hour_boundaries(lifetime: InstanceLifetime) -> list:
    out = []
    b = lifetime.launch_time + HOUR
    while b <= lifetime.end_time:
        out.append(b)
        b += HOUR
    return out


def bill(lifetime: InstanceLifetime, trace: PriceTrace):
    """Return ``(total_micros, lines)`` for one instance lifetime."""
    if lifetime.launch_time < trace.start or lifetime.end_time > trace.horizon_end:
        raise OutOfRangeError(
            f"lifetime [{lifetime.launch_time}, {lifetime.end_time}) outside trace "
            f"[{trace.start}, {trace.horizon_end})"
        )
    lines = []
    k = 0
    while True:
        start = lifetime.launch_time + k * HOUR
        if start >= lifetime.end_time:
            break
        full = start + HOUR <= lifetime.end_time
        charged = full or lifetime.end_cause is not EndCause.PROVIDER_OUT_OF_BID
        lines.append(ChargeLine(k, start, trace.micros_at(start), charged))
        k += 1
    total = sum(line.rate for line in lines if line.charged)
    return total, lines
