from fractions import Fraction
from numbers import Rational


def to_fraction(value: float | int | str | Fraction) -> Fraction:
    """Converts a parameter to an exact rational

    Floats are read through their shortest decimal representation, so that
    ``1.5`` becomes ``3/2`` and not the binary expansion of 1.5.

    >>> to_fraction(1.5)
    Fraction(3, 2)
    >>> to_fraction("7/3")
    Fraction(7, 3)
    >>> to_fraction(2)
    Fraction(2, 1)
    """
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def format_rational(value: Fraction | float, digits: int = 7) -> str:
    """Renders an exact value as "p/q (decimal)", floats as plain decimals

    >>> format_rational(Fraction(2, 3))
    '2/3 (0.6666667)'
    >>> format_rational(Fraction(4))
    '4 (4.0000000)'
    >>> format_rational(0.25)
    '0.2500000'
    """
    if isinstance(value, Fraction):
        return f"{value} ({float(value):.{digits}f})"
    return f"{float(value):.{digits}f}"
