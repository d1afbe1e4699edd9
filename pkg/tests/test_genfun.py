"""Tests for the exact polynomial form of the recurrence functional."""

import math
import random
from fractions import Fraction

import pytest

from frogbound.errors import NegativeExponent
from frogbound.genfun import ExpPoly, ExpRational, build_g, f_value, g_derivative, g_value
from frogbound.params import IntervalContext, derive_params

F = Fraction


class TestExpRational:
    def test_algebra_exact(self):
        x = ExpRational({F(1, 2): F(1), F(0): F(2)})  # e^{1/2} + 2
        y = ExpRational({F(-1, 2): F(1), F(0): F(-1)})  # e^{-1/2} - 1
        prod = x * y
        assert prod.terms == {
            F(0): F(-1),
            F(1, 2): F(-1),
            F(-1, 2): F(2),
            # constant 1 from e^{1/2} * e^{-1/2} merged into the -2 from 2*(-1)
        } or prod.terms == {F(0): F(-1), F(1, 2): F(-1), F(-1, 2): F(2)}
        assert prod.to_float() == pytest.approx(x.to_float() * y.to_float(), rel=1e-14)
        assert (x - x).is_zero()
        assert (x + y).to_float() == pytest.approx(x.to_float() + y.to_float())

    def test_cancellation_drops_terms(self):
        x = ExpRational({F(1, 3): F(5)})
        y = ExpRational({F(1, 3): F(-5), F(0): F(1)})
        assert (x + y).terms == {F(0): F(1)}

    def test_zero_coefficients_purged(self):
        assert ExpRational({F(1): F(0)}).is_zero()
        assert ExpRational.term(0).is_zero()

    def test_enclosure_contains_value(self):
        ctx = IntervalContext(96)
        rng = random.Random(7)
        for _ in range(50):
            terms = {
                F(rng.randint(-8, 8), rng.randint(1, 9)): F(rng.randint(-20, 20))
                for _ in range(4)
            }
            x = ExpRational(terms)
            iv = x.enclosure(ctx)
            ref = sum(float(c) * math.exp(q) for q, c in x.terms.items())
            assert float(iv.lo) - 1e-9 <= ref <= float(iv.hi) + 1e-9
            assert float(iv.hi) - float(iv.lo) < 1e-12 * (1 + abs(ref))


class TestExpPoly:
    def test_negative_exponent_rejected(self):
        with pytest.raises(NegativeExponent):
            ExpPoly({-1: ExpRational.term(1)}, d=2, a=2, b=5, c=3)

    def test_non_integer_exponent_rejected(self):
        with pytest.raises(NegativeExponent):
            ExpPoly({1.5: ExpRational.term(1)}, d=2, a=2, b=5, c=3)

    def test_derivative_and_shift(self):
        poly = ExpPoly(
            {0: ExpRational.term(3), 2: ExpRational.term(1, F(1, 2))},
            d=2, a=2, b=5, c=3,
        )
        deriv = poly.derivative()
        assert deriv.coeffs == {1: ExpRational.term(2, F(1, 2))}
        shifted = deriv.shift_down(1)
        assert shifted.coeffs == {0: ExpRational.term(2, F(1, 2))}


class TestBuildG:
    def test_hand_case_d2(self):
        # For arity 2 at drift 2/5 the polynomial is
        #   e^{-1/2} * (e^{-1/4} + y - e^{-1/4} y^2), exactly.
        g = build_g(derive_params(2, F(2, 5)))
        assert g.coeffs == {
            0: ExpRational({F(-3, 4): F(1)}),
            1: ExpRational({F(-1, 2): F(1)}),
            2: ExpRational({F(-3, 4): F(-1)}),
        }
        assert (g.d, g.a, g.b, g.c) == (2, 2, 5, 3)
        assert g.degree() == 2

    def test_hand_case_derivative(self):
        g = build_g(derive_params(2, F(2, 5)))
        dg = g_derivative(g)
        assert dg.coeffs == {
            0: ExpRational({F(-1, 2): F(1)}),
            1: ExpRational({F(-3, 4): F(-2)}),
        }

    def test_value_at_one_is_exp_minus_pstar(self):
        # The count polynomials sum to one identically, so the coefficient
        # sum collapses, exactly, to the single term e^{-p_star}.
        for d, p in [(2, F(2, 5)), (3, F(3, 10)), (5, F(23, 94)), (9, F(20, 93))]:
            params = derive_params(d, p)
            g = build_g(params)
            total = ExpRational.zero()
            for coeff in g.coeffs.values():
                total = total + coeff
            assert total == ExpRational({-params.p_star: F(1)})

    def test_value_at_zero_limit(self):
        for d, p in [(2, F(2, 5)), (4, F(1, 4)), (7, F(23, 102))]:
            params = derive_params(d, p)
            g = build_g(params)
            expected = math.exp(-float(params.p_star) / d - (d - 1) / d)
            assert g.coeffs[0].to_float() == pytest.approx(expected, rel=1e-12)
            assert g_value(params, g, 0.0) == pytest.approx(expected, rel=1e-12)

    def test_change_of_variables_matches_f(self):
        # g(e^{-lam/c}) must equal f(lam): the polynomial is a pure
        # reparametrization of the functional.
        rng = random.Random(11)
        for d, p in [(2, F(2, 5)), (3, F(3, 10)), (4, F(40, 153)), (6, F(46, 197))]:
            params = derive_params(d, p)
            g = build_g(params)
            for _ in range(25):
                y = rng.uniform(0.05, 1.0)
                lam = -float(params.c) * math.log(y)
                assert g.eval_float(y) == pytest.approx(
                    f_value(params, lam), rel=1e-9
                ), (d, p, y)

    def test_f_at_zero(self):
        for d, p in [(2, F(2, 5)), (5, F(23, 94))]:
            params = derive_params(d, p)
            assert f_value(params, 0.0) == pytest.approx(
                math.exp(-float(params.p_star)), rel=1e-12
            )

    def test_f_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            f_value(derive_params(2, F(2, 5)), -0.5)

    def test_large_lambda_no_overflow(self):
        # Far out the functional decays to the y=0 limit; log-space
        # evaluation must not overflow on the way there.
        params = derive_params(2, F(2, 5))
        val = f_value(params, 500.0)
        assert 0 < val < 1
        assert val == pytest.approx(math.exp(-3 / 4), rel=1e-3)

    def test_shape_at_high_arity(self):
        # Frozen structural counts for the hardest certified instance.
        g = build_g(derive_params(13, F(11, 54)))
        assert g.degree() == 3696
        assert len(g.coeffs) == 225
        assert sum(len(c.terms) for c in g.coeffs.values()) <= 681

    def test_pointwise_decreasing_in_arity(self):
        p = F(1, 4)
        for d in (4, 5):
            pa, pb = derive_params(d, p), derive_params(d + 1, p)
            ga, gb = build_g(pa), build_g(pb)
            for y in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0]:
                assert gb.eval_float(y) < ga.eval_float(y)
