"""Exact distribution of the activation count on the star graph.

``U(d, p, lam)`` counts how many of the d-1 initially dormant leaves of a
star graph are ever visited when one Poisson(1) batch of walkers starts at
the center, an active Poisson(lam) batch sits on the first leaf, and every
newly visited leaf releases its own Poisson(lam) batch. Thinning the Poisson
batches leaf by leaf turns the probability of each count into a bivariate
polynomial ``s_{d,u}(x, y)`` evaluated at the two no-visit factors
x = e^{phi_exponent} and y = e^{-lambda_rate * lam}.

The recursion implemented here:

    s_{1,0} = 1
    s_{d,u} = C(d-1, u) * (x * y^(u+1))^(d-1-u) * s_{u+1,u}   for u <= d-2
    s_{d,d-1} = 1 - sum_{i <= d-2} s_{d,i}

Only the diagonal family s_{u+1,u} is memoized; everything else is
reassembled on demand.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from math import comb

from .errors import ArityMismatch, ResourceExhausted
from .params import (
    INITIAL_PRECISION_BITS,
    MAX_PRECISION_BITS,
    DriftParams,
    Interval,
    IntervalContext,
    exp_enclosure,
)


class BivarPoly:
    """Sparse bivariate polynomial with exact rational coefficients.

    Terms map (x-exponent, y-exponent) — both nonnegative integers — to a
    nonzero Fraction. Treated as immutable after construction.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[int, int], Fraction]):
        clean = {}
        for (i, j), coeff in terms.items():
            if i < 0 or j < 0:
                raise ValueError(f"negative exponent in BivarPoly: {(i, j)}")
            if coeff:
                clean[(i, j)] = Fraction(coeff)
        self.terms = clean

    @classmethod
    def constant(cls, value) -> "BivarPoly":
        value = Fraction(value)
        return cls({(0, 0): value} if value else {})

    def __eq__(self, other) -> bool:
        return isinstance(other, BivarPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other: "BivarPoly") -> "BivarPoly":
        out = dict(self.terms)
        for key, coeff in other.terms.items():
            total = out.get(key, 0) + coeff
            if total:
                out[key] = total
            else:
                out.pop(key, None)
        return BivarPoly(out)

    def __sub__(self, other: "BivarPoly") -> "BivarPoly":
        return self + other.scale(-1)

    def scale(self, factor) -> "BivarPoly":
        factor = Fraction(factor)
        if not factor:
            return BivarPoly({})
        return BivarPoly({key: coeff * factor for key, coeff in self.terms.items()})

    def mul_monomial(self, i: int, j: int, factor=1) -> "BivarPoly":
        factor = Fraction(factor)
        return BivarPoly(
            {(ti + i, tj + j): coeff * factor for (ti, tj), coeff in self.terms.items()}
        )

    def eval_ones(self) -> Fraction:
        """Value at x = y = 1 (the sum of the coefficients)."""
        return sum(self.terms.values(), Fraction(0))

    def eval_interval(self, ctx: IntervalContext, x: Interval, y: Interval) -> Interval:
        """Certified enclosure of the value at (x, y), both within [0, 1]."""
        total = ctx.from_int(0)
        powers_x: dict[int, Interval] = {}
        powers_y: dict[int, Interval] = {}
        for (i, j), coeff in sorted(self.terms.items()):
            xi = powers_x.get(i)
            if xi is None:
                xi = powers_x[i] = ctx.pow_nonneg(x, i)
            yj = powers_y.get(j)
            if yj is None:
                yj = powers_y[j] = ctx.pow_nonneg(y, j)
            term = ctx.mul(ctx.mul(ctx.from_fraction(coeff), xi), yj)
            total = ctx.add(total, term)
        return total

    def __repr__(self):
        return f"BivarPoly({self.terms!r})"


_ONE = BivarPoly.constant(1)
_DIAG: list[BivarPoly] = [_ONE]  # _DIAG[u] is s_{u+1,u}
_DIAG_LOCK = threading.Lock()


def _diagonal(u: int) -> BivarPoly:
    """s_{u+1,u}, memoized; computed at most once per index."""
    if u < len(_DIAG):
        return _DIAG[u]
    with _DIAG_LOCK:
        while len(_DIAG) <= u:
            n = len(_DIAG)  # building s_{n+1,n}
            acc = BivarPoly.constant(1)
            for i in range(n):
                term = _DIAG[i].mul_monomial(n - i, (i + 1) * (n - i), comb(n, i))
                acc = acc - term
            _DIAG.append(acc)
    return _DIAG[u]


def s_poly(d: int, u: int) -> BivarPoly:
    """The exact polynomial with s_poly(d, u)(Phi, Lambda) = P(U = u)."""
    if d < 1:
        raise IndexError(f"d must be >= 1, got {d}")
    if not 0 <= u <= d - 1:
        raise IndexError(f"u={u} outside [0, {d - 1}] for d={d}")
    if u <= d - 2:
        return _diagonal(u).mul_monomial(d - 1 - u, (u + 1) * (d - 1 - u), comb(d - 1, u))
    return _diagonal(d - 1)


@dataclass(frozen=True)
class UPmf:
    """Distribution of the activation count U for one (d, p, lam) triple.

    ``probs[u]`` is the midpoint value of a certified enclosure whose width
    is below 1e-14; ``intervals`` carries the enclosures themselves when the
    caller asked for them (rigorous consumers must use those).
    """

    d: int
    p: Fraction
    lam: Fraction
    probs: tuple[float, ...]
    intervals: tuple[Interval, ...] | None = None


def _pmf_intervals(
    params: DriftParams, lam: Fraction, precision_bits: int
) -> tuple[IntervalContext, list[Interval]]:
    ctx = IntervalContext(precision_bits)
    x = exp_enclosure(params.phi_exponent, precision_bits)
    y = exp_enclosure(-params.lambda_rate * lam, precision_bits)
    return ctx, [s_poly(params.d, u).eval_interval(ctx, x, y) for u in range(params.d)]


def u_pmf(
    params: DriftParams,
    lam,
    *,
    with_intervals: bool = False,
    precision_bits: int = INITIAL_PRECISION_BITS,
) -> UPmf:
    """Exact pmf of U evaluated through certified enclosures.

    ``lam`` may be a float (converted exactly to a dyadic rational) or a
    Fraction; it must be nonnegative.
    """
    lam = Fraction(lam)
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    bits = precision_bits
    while True:
        ctx, enclosures = _pmf_intervals(params, lam, bits)
        if all(float(ctx.width(iv)) < 1e-14 for iv in enclosures):
            break
        if bits >= MAX_PRECISION_BITS:
            raise ResourceExhausted(
                f"pmf enclosures wider than 1e-14 at {bits} bits for d={params.d}"
            )
        bits *= 2
    mids = tuple(float(ctx.mid(iv)) for iv in enclosures)
    return UPmf(
        d=params.d,
        p=params.p,
        lam=lam,
        probs=mids,
        intervals=tuple(enclosures) if with_intervals else None,
    )


def u_cdf_dominates(params_d: DriftParams, params_d1: DriftParams, lam) -> bool:
    """Certified check that U at arity d+1 stochastically dominates U at d.

    Returns True iff the CDF of U(d+1, p, lam) lies at or below the CDF of
    U(d, p, lam) at every k = 0..d-1, certified with intervals; the working
    precision escalates until every comparison is decided.
    """
    if params_d1.d != params_d.d + 1:
        raise ArityMismatch(
            f"expected arities d and d+1, got {params_d.d} and {params_d1.d}"
        )
    if params_d1.p != params_d.p:
        raise ArityMismatch(
            f"drift mismatch: {params_d.p} vs {params_d1.p}"
        )
    lam = Fraction(lam)
    bits = INITIAL_PRECISION_BITS
    while True:
        ctx, pmf_d = _pmf_intervals(params_d, lam, bits)
        _, pmf_d1 = _pmf_intervals(params_d1, lam, bits)

        def cdf(pmf: list[Interval]) -> list[Interval]:
            out, acc = [], ctx.from_int(0)
            for iv in pmf:
                acc = ctx.add(acc, iv)
                out.append(acc)
            return out

        cdf_d, cdf_d1 = cdf(pmf_d), cdf(pmf_d1)
        undecided = False
        for k in range(params_d.d):
            if cdf_d1[k].hi <= cdf_d[k].lo:
                continue  # dominance certified at this k
            if cdf_d1[k].lo > cdf_d[k].hi:
                return False  # violation certified at this k
            undecided = True
        if not undecided:
            return True
        if bits >= MAX_PRECISION_BITS:
            raise ResourceExhausted(
                f"CDF comparison undecided at {bits} bits "
                f"(d={params_d.d}, p={params_d.p}, lam={lam})"
            )
        bits *= 2
