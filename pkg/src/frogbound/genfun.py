"""The recurrence functional and its exact polynomial form.

The recurrence criterion evaluates

    f(lam) = e^{-p_star} * sum_u e^{(1 - p_hat(1+u)) lam} * P(U = u)

and asks whether its supremum over lam >= 0 stays below one. Substituting
y = e^{-lam/c} with the scale c = (b-a)(d-1) for drift p = a/b turns f into a
polynomial g(y) on (0, 1] whose exponents are nonnegative integers and whose
coefficients are exact rationals times e^{rational}. That polynomial — built
here term by term from the activation-count family — is what the certifier
bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2

from .errors import NegativeExponent
from .params import DriftParams, Interval, IntervalContext
from .u_dist import s_poly, u_pmf


class ExpRational:
    """Finite exact sum of c * e^q terms with rational c and q.

    Stored sparsely as a map from exponent q to coefficient c; no zero
    coefficients are kept. Closed under +, -, *; immutable by convention.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict[Fraction, Fraction]):
        clean = {}
        for q, c in terms.items():
            if c:
                clean[Fraction(q)] = Fraction(c)
        self.terms = clean

    @classmethod
    def term(cls, coeff, exponent=0) -> "ExpRational":
        return cls({Fraction(exponent): Fraction(coeff)})

    @classmethod
    def zero(cls) -> "ExpRational":
        return cls({})

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return isinstance(other, ExpRational) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other: "ExpRational") -> "ExpRational":
        out = dict(self.terms)
        for q, c in other.terms.items():
            total = out.get(q, 0) + c
            if total:
                out[q] = total
            else:
                out.pop(q, None)
        return ExpRational(out)

    def __sub__(self, other: "ExpRational") -> "ExpRational":
        return self + other.scale(-1)

    def __mul__(self, other: "ExpRational") -> "ExpRational":
        out: dict[Fraction, Fraction] = {}
        for q1, c1 in self.terms.items():
            for q2, c2 in other.terms.items():
                q = q1 + q2
                total = out.get(q, 0) + c1 * c2
                if total:
                    out[q] = total
                else:
                    out.pop(q, None)
        return ExpRational(out)

    def scale(self, factor) -> "ExpRational":
        factor = Fraction(factor)
        if not factor:
            return ExpRational({})
        return ExpRational({q: c * factor for q, c in self.terms.items()})

    def to_float(self) -> float:
        return sum(float(c) * math.exp(q) for q, c in self.terms.items())

    def enclosure(self, ctx: IntervalContext) -> Interval:
        """Certified enclosure of the exact real value."""
        total = ctx.from_int(0)
        for q, c in self.terms.items():
            total = ctx.add(total, ctx.mul(ctx.from_fraction(c), ctx.exp_fraction(q)))
        return total

    def __repr__(self):
        return f"ExpRational({self.terms!r})"


@dataclass(frozen=True)
class ExpPoly:
    """Polynomial in y with integer exponents >= 0 and ExpRational coefficients.

    ``coeffs`` maps exponent k to its coefficient; the provenance fields
    record which (d, a, b) built it and the substitution scale c.
    """

    coeffs: dict[int, ExpRational]
    d: int
    a: int
    b: int
    c: int

    def __post_init__(self):
        clean = {}
        for k, coeff in self.coeffs.items():
            if not isinstance(k, int) or isinstance(k, bool):
                raise NegativeExponent(f"exponent {k!r} is not an integer")
            if k < 0:
                raise NegativeExponent(f"negative exponent {k} in polynomial")
            if not coeff.is_zero():
                clean[k] = coeff
        object.__setattr__(self, "coeffs", clean)

    def degree(self) -> int:
        return max(self.coeffs, default=0)

    def exponents(self) -> list[int]:
        return sorted(self.coeffs)

    def derivative(self) -> "ExpPoly":
        """Formal derivative: k maps to k-1, coefficient scaled by k."""
        out = {
            k - 1: coeff.scale(k)
            for k, coeff in self.coeffs.items()
            if k > 0
        }
        return ExpPoly(out, self.d, self.a, self.b, self.c)

    def shift_down(self, s: int) -> "ExpPoly":
        """Divide by y^s; requires every exponent to be >= s."""
        out = {k - s: coeff for k, coeff in self.coeffs.items()}
        return ExpPoly(out, self.d, self.a, self.b, self.c)

    def eval_float(self, y: float) -> float:
        """Plain float evaluation (numeric, not certified)."""
        return sum(coeff.to_float() * y**k for k, coeff in self.coeffs.items())


def g_derivative(g: ExpPoly) -> ExpPoly:
    """Formal derivative of the generating polynomial."""
    return g.derivative()


def build_g(params: DriftParams) -> ExpPoly:
    """Exactly assemble g(y), the polynomial form of the recurrence functional.

    Each monomial x^i y^j of the activation polynomial at count u contributes
    one term (coefficient times e^{i*phi_exponent - p_star}) at total
    exponent (d-1)((u+2)a - b) + j(b - 2a). The prefactor e^{-p_star} comes
    from the definition of f, which makes g(1) = e^{-p_star} an exact
    identity. Any negative assembled exponent signals a drift at or below
    1/(d+1), or an assembly bug.
    """
    d = params.d
    a, b = params.p.numerator, params.p.denominator
    coeffs: dict[int, ExpRational] = {}
    for u in range(d):
        base = (d - 1) * ((u + 2) * a - b)
        for (i, j), coeff in s_poly(d, u).terms.items():
            k = base + j * (b - 2 * a)
            if k < 0:
                raise NegativeExponent(
                    f"assembled exponent {k} < 0 at d={d}, p={params.p}, u={u}"
                )
            q = i * params.phi_exponent - params.p_star
            term = ExpRational({q: coeff})
            coeffs[k] = coeffs.get(k, ExpRational.zero()) + term
    return ExpPoly(coeffs, d=d, a=a, b=b, c=int(params.c))


def f_value(params: DriftParams, lam) -> float:
    """Numeric value of the recurrence functional at one lam >= 0.

    Computed in log space so that large lam cannot overflow:
    log f = -p_star + logsumexp((1 - p_hat(1+u)) lam + log P(U=u)).
    The log-probabilities are taken from the certified enclosures rather
    than their float midpoints because at large lam the dominant count
    probability underflows double precision while its lam-weight explodes;
    the extended-exponent endpoints keep the product finite and accurate.
    """
    lam = float(lam)
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    pmf = u_pmf(params, lam, with_intervals=True)
    p_hat = float(params.p_hat)
    exponents = []
    for u, iv in enumerate(pmf.intervals):
        if iv.lo <= 0:
            # Probability below certification resolution; since the pmf sums
            # to one, some other count carries the mass and this term's
            # weighted contribution is negligible at this lam.
            continue
        exponents.append((1 - p_hat * (1 + u)) * lam + float(gmpy2.log(iv.lo)))
    peak = max(exponents)
    total = sum(math.exp(e - peak) for e in exponents)
    return math.exp(-float(params.p_star) + peak + math.log(total))


def g_value(params: DriftParams, g: ExpPoly, y: float) -> float:
    """Numeric g(y) via the well-conditioned exponential-sum route.

    For y in (0, 1] this maps back through lam = -c log y; at y = 0 it
    returns the exact limit value exp(-p_star/d - (d-1)/d).
    """
    if y == 0:
        return math.exp(-float(params.p_star) / params.d - (params.d - 1) / params.d)
    return f_value(params, -float(params.c) * math.log(y))
