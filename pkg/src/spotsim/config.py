from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from spotsim.errors import ConfigError
from spotsim.money import to_micros

HOUR = 3600


class SchemeId(enum.Enum):
    NONE = "none"
    OPT = "opt"
    HOUR = "hour"
    EDGE = "edge"
    ADAPT = "adapt"
    ACC = "acc"

    @classmethod
    def parse(cls, text) -> "SchemeId":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ConfigError(f"unknown scheme {text!r}") from None


@dataclass(frozen=True)
class JobSpec:
    """A divisible job.  All durations are integer seconds.

    ``t_c`` checkpoint write time, ``r`` restart overhead after a relaunch,
    ``t_w`` price-query wait used by ACC decision points.
    """

    w: int
    t_c: int = 60
    r: int = 300
    t_w: int = 5
    adapt_delta: int = 600
    relaunch_poll: int = 60

    def __post_init__(self):
        for name in ("w", "t_c", "r", "t_w", "adapt_delta", "relaunch_poll"):
            value = getattr(self, name)
            if int(value) != value:
                raise ConfigError(f"{name} must be an integer number of seconds")
            object.__setattr__(self, name, int(value))
        if self.w <= 0:
            raise ConfigError("w must be positive")
        if self.t_c < 0 or self.r < 0 or self.t_w < 0:
            raise ConfigError("t_c, r and t_w must be non-negative")
        if self.t_c + self.t_w >= HOUR:
            raise ConfigError("t_c + t_w must be below one hour")
        if self.adapt_delta <= 0 or self.relaunch_poll <= 0:
            raise ConfigError("adapt_delta and relaunch_poll must be positive")


@dataclass(frozen=True)
class BidConfig:
    """Application bid, optional safety bid, and the scheme to run.

    Bids are held in micro-dollars; pass strings or Decimals to
    :meth:`make` for USD values.
    """

    a_bid: int
    scheme: SchemeId
    s_bid: Optional[int] = None

    def __post_init__(self):
        if self.a_bid < 0:
            raise ConfigError("a_bid must be non-negative")
        if self.s_bid is not None and self.s_bid < 0:
            raise ConfigError("s_bid must be non-negative")

    @classmethod
    def make(cls, a_bid, scheme, s_bid=None) -> "BidConfig":
        return cls(
            to_micros(a_bid),
            SchemeId.parse(scheme),
            None if s_bid is None else to_micros(s_bid),
        )
