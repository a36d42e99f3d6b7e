"""Integer micro-dollar arithmetic.

Every price, bid and cost inside the package is an ``int`` number of
micro-dollars so that sums and comparisons are exact.
"""

from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation

MICROS_PER_USD = 1_000_000
_QUANTUM = Decimal("0.000001")


def to_micros(value) -> int:
    """Convert a USD amount (str, Decimal, int or float) to micro-dollars.

    Floats go through ``repr`` so ``0.38`` means 380000, not the nearest
    binary fraction.
    """
    if isinstance(value, bool):
        raise TypeError("bool is not a price")
    if isinstance(value, float):
        value = repr(value)
    try:
        d = Decimal(value)
    except (InvalidOperation, TypeError) as exc:
        raise ValueError(f"not a decimal amount: {value!r}") from exc
    if not d.is_finite():
        raise ValueError(f"not a finite amount: {value!r}")
    return int((d * MICROS_PER_USD).quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def to_usd(micros: int) -> Decimal:
    return (Decimal(micros) / MICROS_PER_USD).quantize(_QUANTUM)


def format_usd(micros: int) -> str:
    return f"{to_usd(micros):.6f}"
