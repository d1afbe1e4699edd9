"""Exact model parameters and certified interval arithmetic.

The drift of the walk is an exact rational p = a/b. Everything derived from it
(the first-step rootward probability ``p_star``, the continuing rootward
probability ``p_hat``, the exponent of the no-visit factor ``phi_exponent``,
the decay rate ``lambda_rate`` and the change-of-variables scale ``c``) is
computed with exact rational arithmetic so the rigorous pipeline is
exact-in, certified-out.

Certified numerics ride on intervals whose endpoints are arbitrary-precision
binary floats (gmpy2/MPFR) with outward rounding: every operation rounds the
lower endpoint down and the upper endpoint up, so the true real result is
always contained. :func:`exp_enclosure` provides the only transcendental
ingredient needed anywhere: a certified enclosure of e^q for rational q.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import gmpy2
from gmpy2 import mpfr, mpz

from .errors import OutOfRange

#: The universal exact scalar. Stored in lowest terms with a positive
#: denominator, exact +,-,*,/; division by zero raises ZeroDivisionError.
Rational = Fraction


@dataclass(frozen=True)
class DriftParams:
    """Exact derived parameters for arity ``d`` and drift ``p`` = a/b.

    Immutable after construction; safe to share between threads.
    """

    d: int
    p: Fraction
    p_star: Fraction       # p(d-1) / (d - (d+1)p), first-step rootward prob
    p_hat: Fraction        # p / (1-p), continuing rootward prob
    phi_exponent: Fraction  # (2a-b) / (bd-ad-a); e^{phi_exponent} = Phi
    lambda_rate: Fraction  # (1-p_hat) / (d-1); Lambda = e^{-lambda_rate*lam}
    c: Fraction            # (b-a)(d-1), change-of-variables scale


def derive_params(d: int, p) -> DriftParams:
    """Exactly derive all drift parameters, rejecting out-of-range drifts.

    ``p`` must lie strictly inside (1/(d+1), 1/2); both boundaries are
    rejected because they degenerate the exponent structure of the
    generating polynomial.
    """
    if not isinstance(d, int) or d < 2:
        raise OutOfRange(f"arity d must be an integer >= 2, got {d!r}")
    p = Fraction(p)
    if not Fraction(1, d + 1) < p < Fraction(1, 2):
        raise OutOfRange(
            f"drift p={p} outside the open interval (1/{d + 1}, 1/2) for d={d}"
        )
    a, b = p.numerator, p.denominator
    p_star = p * (d - 1) / (d - (d + 1) * p)
    p_hat = p / (1 - p)
    phi_exponent = Fraction(2 * a - b, b * d - a * d - a)
    lambda_rate = (1 - p_hat) / (d - 1)
    c = Fraction((b - a) * (d - 1))
    params = DriftParams(d, p, p_star, p_hat, phi_exponent, lambda_rate, c)
    # Identity linking the two formulas for the no-visit exponent.
    assert phi_exponent == -(1 - p_star) / d
    assert 0 < p_star < 1 and 0 < p_hat < 1 and lambda_rate > 0
    return params


class Interval(NamedTuple):
    """A pair of arbitrary-precision binary floats with lo <= hi.

    All arithmetic goes through :class:`IntervalContext`, which rounds the
    lower endpoint down and the upper endpoint up, preserving containment:
    if x in X and y in Y then x op y in X op Y.
    """

    lo: mpfr
    hi: mpfr


class IntervalContext:
    """Outward-rounded interval arithmetic at a fixed working precision.

    Holds one rounding-down and one rounding-up gmpy2 context; a fresh
    instance per computation keeps everything thread-safe.
    """

    __slots__ = ("precision", "down", "up")

    def __init__(self, precision: int):
        if precision < 16:
            raise ValueError(f"precision_bits must be >= 16, got {precision}")
        self.precision = precision
        self.down = gmpy2.context(precision=precision, round=gmpy2.RoundDown)
        self.up = gmpy2.context(precision=precision, round=gmpy2.RoundUp)

    # -- constructors -------------------------------------------------------

    def from_fraction(self, q) -> Interval:
        q = Fraction(q)
        num, den = mpz(q.numerator), mpz(q.denominator)
        return Interval(self.down.div(num, den), self.up.div(num, den))

    def from_int(self, n: int) -> Interval:
        v = mpfr(n, self.precision)
        return Interval(v, v)

    def point(self, x: mpfr) -> Interval:
        return Interval(x, x)

    # -- arithmetic ---------------------------------------------------------

    def add(self, x: Interval, y: Interval) -> Interval:
        return Interval(self.down.add(x.lo, y.lo), self.up.add(x.hi, y.hi))

    def sub(self, x: Interval, y: Interval) -> Interval:
        return Interval(self.down.sub(x.lo, y.hi), self.up.sub(x.hi, y.lo))

    def neg(self, x: Interval) -> Interval:
        return Interval(-x.hi, -x.lo)

    def mul(self, x: Interval, y: Interval) -> Interval:
        a, b = x
        c, d = y
        down, up = self.down, self.up
        # Sign-split cases; the fully mixed case needs all four products.
        if a >= 0:
            if c >= 0:
                return Interval(down.mul(a, c), up.mul(b, d))
            if d <= 0:
                return Interval(down.mul(b, c), up.mul(a, d))
            return Interval(down.mul(b, c), up.mul(b, d))
        if b <= 0:
            if c >= 0:
                return Interval(down.mul(a, d), up.mul(b, c))
            if d <= 0:
                return Interval(down.mul(b, d), up.mul(a, c))
            return Interval(down.mul(a, d), up.mul(a, c))
        if c >= 0:
            return Interval(down.mul(a, d), up.mul(b, d))
        if d <= 0:
            return Interval(down.mul(b, c), up.mul(a, c))
        lo = min(down.mul(a, d), down.mul(b, c))
        hi = max(up.mul(a, c), up.mul(b, d))
        return Interval(lo, hi)

    def mul_int(self, x: Interval, n: int) -> Interval:
        if n >= 0:
            return Interval(self.down.mul(x.lo, n), self.up.mul(x.hi, n))
        return Interval(self.down.mul(x.hi, n), self.up.mul(x.lo, n))

    def div_int(self, x: Interval, n: int) -> Interval:
        if n > 0:
            return Interval(self.down.div(x.lo, n), self.up.div(x.hi, n))
        if n < 0:
            return Interval(self.down.div(x.hi, n), self.up.div(x.lo, n))
        raise ZeroDivisionError("interval division by zero")

    def sqr(self, x: Interval) -> Interval:
        a, b = x
        if a >= 0:
            return Interval(self.down.mul(a, a), self.up.mul(b, b))
        if b <= 0:
            return Interval(self.down.mul(b, b), self.up.mul(a, a))
        return Interval(mpfr(0, self.precision), max(self.up.mul(a, a), self.up.mul(b, b)))

    def pow_nonneg(self, x: Interval, e: int) -> Interval:
        """x^e for x with x.lo >= 0 and integer e >= 0 (monotone case)."""
        if e == 0:
            one = mpfr(1, self.precision)
            return Interval(one, one)
        return Interval(self.down.pow(x.lo, e), self.up.pow(x.hi, e))

    # -- set operations and queries -----------------------------------------

    def hull(self, x: Interval, y: Interval) -> Interval:
        return Interval(min(x.lo, y.lo), max(x.hi, y.hi))

    def intersect(self, x: Interval, y: Interval) -> Interval:
        lo, hi = max(x.lo, y.lo), min(x.hi, y.hi)
        if lo > hi:
            # Both operands must enclose the same true range; an empty
            # intersection would mean one of them is unsound.
            raise AssertionError("disjoint enclosures of the same quantity")
        return Interval(lo, hi)

    def mid(self, x: Interval) -> mpfr:
        # (lo+hi) rounded down then halved exactly; always lies inside x.
        s = self.down.add(x.lo, x.hi)
        return self.down.div(s, 2)

    def width(self, x: Interval) -> mpfr:
        return self.up.sub(x.hi, x.lo)

    def exp_fraction(self, q) -> Interval:
        return exp_enclosure(q, self.precision)

    # -- conversions --------------------------------------------------------

    def to_float_down(self, x: mpfr) -> float:
        return float(_CTX53_DOWN.add(x, 0))

    def to_float_up(self, x: mpfr) -> float:
        return float(_CTX53_UP.add(x, 0))


_CTX53_DOWN = gmpy2.context(precision=53, round=gmpy2.RoundDown)
_CTX53_UP = gmpy2.context(precision=53, round=gmpy2.RoundUp)

#: Certified computations start here and double on demand up to the cap.
INITIAL_PRECISION_BITS = 128
MAX_PRECISION_BITS = 4096

_EXP_MEMO: dict[tuple[Fraction, int], Interval] = {}
_EXP_LOCK = threading.Lock()
_TAYLOR_TERMS_MEMO: dict[int, int] = {}


def _taylor_terms(work_bits: int) -> int:
    """Smallest N with 2 * (1/2)^(N+1) / (N+1)! <= 2^-(work_bits+8)."""
    n = _TAYLOR_TERMS_MEMO.get(work_bits)
    if n is not None:
        return n
    target = 1 << (work_bits + 9)  # need (N+1)! * 2^(N+1) >= 2^(work_bits+9)
    n, factorial = 0, 1
    while factorial * (1 << (n + 1)) < target:
        n += 1
        factorial *= n + 1
    _TAYLOR_TERMS_MEMO[work_bits] = n
    return n


def exp_enclosure(q, precision_bits: int) -> Interval:
    """Certified enclosure of e^q for rational q.

    The returned interval contains e^q and has width at most
    2^-(precision_bits-4) * e^q. Method: halve the argument k times until
    |r| <= 1/2, sum the Taylor series of e^r with an explicit remainder
    bound, square k times — all in outward-rounded arithmetic at
    precision_bits + 32 working bits — then round the endpoints outward to
    the requested precision. Results are memoized per (q, precision_bits).
    """
    if precision_bits < 16:
        raise ValueError(f"precision_bits must be >= 16, got {precision_bits}")
    q = Fraction(q)
    key = (q, precision_bits)
    with _EXP_LOCK:
        cached = _EXP_MEMO.get(key)
    if cached is not None:
        return cached

    out_ctx = IntervalContext(precision_bits)
    if q == 0:
        one = mpfr(1, precision_bits)
        result = Interval(one, one)
    else:
        work = IntervalContext(precision_bits + 32)
        half = Fraction(1, 2)
        k = 0
        r = q if q > 0 else -q
        while r > half:
            r /= 2
            k += 1
        r_iv = work.from_fraction(q / (1 << k))
        n_terms = _taylor_terms(work.precision)
        # Horner over 1 + r(1 + r/2(1 + r/3(...))).
        acc = work.from_int(1)
        for n in range(n_terms, 0, -1):
            acc = work.add(work.from_int(1), work.div_int(work.mul(acc, r_iv), n))
        rem = mpfr(1, work.precision)
        rem = work.up.div(rem, mpz(1) << (work.precision + 8))
        acc = Interval(work.down.sub(acc.lo, rem), work.up.add(acc.hi, rem))
        for _ in range(k):
            acc = work.sqr(acc)
        lo = gmpy2.context(precision=precision_bits, round=gmpy2.RoundDown).add(acc.lo, 0)
        hi = gmpy2.context(precision=precision_bits, round=gmpy2.RoundUp).add(acc.hi, 0)
        result = Interval(lo, hi)

    with _EXP_LOCK:
        _EXP_MEMO[key] = result
    return result
