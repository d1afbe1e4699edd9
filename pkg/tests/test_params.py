"""Tests for exact drift parameters and the certified interval layer."""

import random
from fractions import Fraction

import gmpy2
import pytest

from frogbound import (
    Interval,
    IntervalContext,
    OutOfRange,
    derive_params,
    exp_enclosure,
)


def test_derive_params_arity_two():
    params = derive_params(2, Fraction(2, 5))
    assert params.p_star == Fraction(1, 2)
    assert params.p_hat == Fraction(2, 3)
    assert params.phi_exponent == Fraction(-1, 4)
    assert params.lambda_rate == Fraction(1, 3)
    assert params.c == 3


def test_derive_params_arity_thirteen():
    params = derive_params(13, Fraction(11, 54))
    assert params.p_star == Fraction(132, 548) == Fraction(33, 137)
    assert params.c == (54 - 11) * 12


def test_derive_params_rejects_boundaries():
    with pytest.raises(OutOfRange):
        derive_params(2, Fraction(1, 3))
    with pytest.raises(OutOfRange):
        derive_params(2, Fraction(1, 2))
    with pytest.raises(OutOfRange):
        derive_params(2, Fraction(3, 10))  # below 1/(d+1)
    with pytest.raises(OutOfRange):
        derive_params(1, Fraction(2, 5))


def test_derive_params_identities_random():
    rng = random.Random(20240819)
    checked = 0
    while checked < 500:
        d = rng.randint(2, 30)
        b = rng.randint(3, 10_000)
        a = rng.randint(1, b - 1)
        p = Fraction(a, b)
        if not Fraction(1, d + 1) < p < Fraction(1, 2):
            continue
        params = derive_params(d, p)
        assert params.p_hat * (1 - p) == p
        assert params.p_star * (d - (d + 1) * p) == p * (d - 1)
        assert params.phi_exponent == -(1 - params.p_star) / d
        assert params.phi_exponent < 0 and params.lambda_rate > 0
        checked += 1


def test_exp_enclosure_identity():
    for bits in (16, 64, 128, 1024):
        iv = exp_enclosure(0, bits)
        assert iv.lo == 1 == iv.hi


def test_exp_enclosure_reference_values():
    # Reference: a 256-bit run of the enclosure itself must nest inside, and
    # the endpoints must agree with the decimal expansion to double accuracy.
    ref = exp_enclosure(Fraction(-1, 3), 256)
    iv = exp_enclosure(Fraction(-1, 3), 64)
    assert iv.lo <= ref.lo <= ref.hi <= iv.hi
    assert float(iv.lo) == pytest.approx(0.71653131057378925, abs=1e-15)
    assert float(iv.hi - iv.lo) < 1e-17

    iv = exp_enclosure(1, 64)
    assert float(iv.lo) == pytest.approx(2.71828182845904523, abs=1e-14)
    ref = exp_enclosure(1, 256)
    assert iv.lo <= ref.lo <= ref.hi <= iv.hi


def test_exp_enclosure_width_bound():
    rng = random.Random(7)
    for _ in range(200):
        q = Fraction(rng.randint(-10_000, 10_000), rng.randint(1, 1000))
        for bits in (64, 128):
            iv = exp_enclosure(q, bits)
            width = float(iv.hi - iv.lo)
            assert width <= 2.0 ** (-(bits - 4)) * float(iv.hi)


def test_exp_enclosure_rejects_low_precision():
    with pytest.raises(ValueError):
        exp_enclosure(Fraction(1, 2), 8)


def test_exp_enclosure_nesting_and_inverse_product():
    """Higher precision nests inside lower; e^q * e^-q contains 1."""
    rng = random.Random(123456)
    ctx = IntervalContext(128)
    for _ in range(10_000):
        q = Fraction(rng.randint(-10_000, 10_000), rng.randint(1, 1000))
        tight = exp_enclosure(q, 128)
        loose = exp_enclosure(q, 64)
        assert loose.lo <= tight.lo <= tight.hi <= loose.hi
        prod = ctx.mul(tight, exp_enclosure(-q, 128))
        assert prod.lo <= 1 <= prod.hi


def test_interval_mul_contains_exact_product():
    rng = random.Random(99)
    ctx = IntervalContext(64)
    for _ in range(2000):
        x = Fraction(rng.randint(-500, 500), rng.randint(1, 100))
        y = Fraction(rng.randint(-500, 500), rng.randint(1, 100))
        ix, iy = ctx.from_fraction(x), ctx.from_fraction(y)
        # Widen asymmetrically to exercise all sign cases.
        ix = Interval(ix.lo - rng.randint(0, 2), ix.hi + rng.randint(0, 2))
        iy = Interval(iy.lo - rng.randint(0, 2), iy.hi + rng.randint(0, 2))
        prod = ctx.mul(ix, iy)
        exact_ctx = gmpy2.context(precision=400)  # 64-bit x 64-bit is exact here
        for xe in (ix.lo, ix.hi):
            for ye in (iy.lo, iy.hi):
                exact = exact_ctx.mul(xe, ye)
                assert prod.lo <= exact <= prod.hi


def test_interval_helpers():
    ctx = IntervalContext(64)
    x = ctx.from_fraction(Fraction(1, 3))
    assert x.lo < x.hi
    assert x.lo <= ctx.mid(x) <= x.hi
    sq = ctx.sqr(Interval(gmpy2.mpfr(-2), gmpy2.mpfr(1)))
    assert sq.lo == 0 and sq.hi == 4
    p = ctx.pow_nonneg(ctx.from_fraction(Fraction(1, 2)), 3)
    assert p.lo <= 0.125 <= p.hi
    assert ctx.to_float_down(x.lo) <= float(x.lo)
    assert ctx.to_float_up(x.hi) >= float(x.hi)
