"""Exact scalars (integers, rationals, Gaussian rationals) and precision-controlled floats.

Exact integers are plain Python ``int`` (arbitrary precision, canonical zero) and
exact rationals are ``fractions.Fraction`` (always reduced, positive denominator),
so both spec types come with their invariants enforced by the standard library.
High-precision reals/complexes are mpmath ``mpf``/``mpc`` values; every operation
in this package that produces them takes an explicit ``precision`` in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import mpmath as mp

from .errors import DomainError, RangeError

ExactInt = int
ExactRational = Fraction

#: Default working precision in bits.  Exponentials of magnitude up to ~e^70
#: with ~30 decimal digits of cancellation still leave ample headroom here.
DEFAULT_PRECISION = 256

MIN_PRECISION = 64


def resolve_precision(precision=None) -> int:
    """Validate a precision argument, substituting the package default."""
    if precision is None:
        return DEFAULT_PRECISION
    precision = int(precision)
    if precision < MIN_PRECISION:
        raise DomainError(f"working precision must be >= {MIN_PRECISION} bits, got {precision}")
    return precision


def workprec(precision=None):
    """mpmath context manager at ``precision`` bits (plus nothing: callers add guards)."""
    return mp.workprec(resolve_precision(precision))


def as_fraction(x) -> Fraction:
    """Coerce ints, Fractions and rational strings ("p/q" or "p") to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x)
    raise DomainError(f"not an exact rational: {x!r}")


def format_rational(q) -> str:
    """Encode a rational as "p/q", or "p" when the denominator is 1."""
    q = as_fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def to_mpf(x, precision=None):
    """Convert an exact or float scalar to mpf at the requested precision."""
    with workprec(precision):
        if isinstance(x, Fraction):
            return mp.mpf(x.numerator) / x.denominator
        return mp.mpf(x)


@dataclass(frozen=True)
class GaussianRational:
    """A complex number with exact rational real and imaginary parts.

    Arithmetic is closed and exact; conjugation is involutive.  Values are
    immutable and hashable, so they are safe to share across threads.
    """

    re: Fraction
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", as_fraction(self.re))
        object.__setattr__(self, "im", as_fraction(self.im))

    @staticmethod
    def of(value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            raise DomainError("binary floats are not exact; build GaussianRational from rationals")
        return GaussianRational(as_fraction(value))

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __add__(self, other):
        other = GaussianRational.of(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-GaussianRational.of(other))

    def __rsub__(self, other):
        return GaussianRational.of(other) + (-self)

    def __mul__(self, other):
        other = GaussianRational.of(other)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = GaussianRational.of(other)
        n2 = other.re * other.re + other.im * other.im
        if n2 == 0:
            raise ZeroDivisionError("division by zero GaussianRational")
        conj = other.conjugate()
        num = self * conj
        return GaussianRational(num.re / n2, num.im / n2)

    def __rtruediv__(self, other):
        return GaussianRational.of(other) / self

    def __eq__(self, other):
        try:
            other = GaussianRational.of(other)
        except (DomainError, ValueError, TypeError):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def norm2(self) -> Fraction:
        """Squared modulus |z|^2, exact."""
        return self.re * self.re + self.im * self.im

    def to_mpc(self, precision=None):
        with workprec(precision):
            return mp.mpc(to_mpf(self.re, precision), to_mpf(self.im, precision))

    def to_json(self):
        return {"re": format_rational(self.re), "im": format_rational(self.im)}

    @staticmethod
    def from_json(obj) -> "GaussianRational":
        return GaussianRational(as_fraction(obj["re"]), as_fraction(obj.get("im", 0)))

    def __repr__(self):
        if self.im == 0:
            return f"GaussianRational({format_rational(self.re)})"
        return f"GaussianRational({format_rational(self.re)}, {format_rational(self.im)})"


@dataclass(frozen=True)
class Log2Multiple:
    """An exact multiple of ln 2: the value is ``coefficient * ln 2``.

    exp() of such a value is 2**coefficient, which is an exact rational whenever
    the coefficient is an integer.  This is the scalar type that lets exponential
    sums with power-of-two structure be evaluated without any floating point.
    """

    coefficient: Fraction

    def __post_init__(self):
        object.__setattr__(self, "coefficient", as_fraction(self.coefficient))

    @staticmethod
    def of(value) -> "Log2Multiple":
        if isinstance(value, Log2Multiple):
            return value
        return Log2Multiple(as_fraction(value))

    def exp(self, precision=None):
        """exp of the represented value: exact 2**q for integer q, mpf otherwise."""
        return exp_pow2(self.coefficient, precision)

    def value(self, precision=None):
        """The represented real number q*ln2 as mpf."""
        with workprec(precision):
            return to_mpf(self.coefficient, precision) * mp.ln(2)

    def __add__(self, other):
        other = Log2Multiple.of(other)
        return Log2Multiple(self.coefficient + other.coefficient)

    def __rmul__(self, scalar):
        return Log2Multiple(as_fraction(scalar) * self.coefficient)

    __mul__ = __rmul__

    def __neg__(self):
        return Log2Multiple(-self.coefficient)

    def to_json(self):
        return {"log2_coeff": format_rational(self.coefficient)}

    @staticmethod
    def from_json(obj) -> "Log2Multiple":
        return Log2Multiple(as_fraction(obj["log2_coeff"]))


def exp_pow2(e, precision=None):
    """2**e: exact Fraction when e is an integer, mpf at ``precision`` otherwise."""
    e = as_fraction(e)
    if e.denominator == 1:
        n = e.numerator
        if n >= 0:
            return Fraction(1 << n)
        return Fraction(1, 1 << (-n))
    prec = resolve_precision(precision)
    with mp.workprec(prec + 8):
        return mp.power(2, to_mpf(e, prec + 8))


def hp_exp(x, precision=None):
    """exp(x) for mpf/mpc (or exact) input, at the requested precision.

    Raises RangeError when the result overflows the exponent range.
    """
    prec = resolve_precision(precision)
    with mp.workprec(prec + 8):
        if isinstance(x, GaussianRational):
            x = x.to_mpc(prec + 8)
        elif isinstance(x, (int, Fraction)):
            x = to_mpf(x, prec + 8)
        if not mp.isfinite(x):
            raise DomainError(f"hp_exp requires finite input, got {x}")
        y = mp.exp(x)
        if not mp.isfinite(y):
            raise RangeError(f"exp({x}) overflows")
        return y
