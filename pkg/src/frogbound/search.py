"""Drift-bound search: rigorous rational bounds, fast approximations, thresholds.

Three layers sit on top of the certifier:

* numeric evaluation of the recurrence supremum M (fast, float64, no
  certification) used as a cheap filter and for bisection;
* the rigorous pipeline: walk best-from-above rational approximations of
  the numeric critical drift and certify the closest candidate whose
  certified supremum lands inside the acceptance window just below one;
* the approximate pipeline for large arities: decrement the drift on a
  1e-4 lattice while a fixed lambda-grid check of the functional stays
  below one.

Float drifts are welcome here (this is the numeric side of the house);
everything exact/certified flows through the rational pipeline only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import gmpy2
import numpy as np

from .certify import (
    CERTIFIED_BELOW_ONE,
    Certificate,
    CertifyConfig,
    certify_sup_below_one,
)
from .errors import OutOfRange, SearchExhausted
from .genfun import build_g
from .params import DriftParams, derive_params

#: Certified drifts (arity -> drift) as produced by rigorous_bound with the
#: default window; stored so approximate descents can start from a
#: known-good drift without re-running a certification cascade.
KNOWN_BOUNDS: dict[int, Fraction] = {
    2: Fraction(55, 159),
    3: Fraction(42, 145),
    4: Fraction(40, 153),
    5: Fraction(23, 94),
    6: Fraction(39, 167),
    7: Fraction(23, 102),
    8: Fraction(38, 173),
    9: Fraction(20, 93),
    10: Fraction(15, 71),
    11: Fraction(5, 24),
    12: Fraction(7, 34),
    13: Fraction(11, 54),
}

#: Largest arity given a live certification run by default (figure command);
#: beyond it the certified search becomes a long-running batch job.
RIGOROUS_LIMIT = 13


@dataclass(frozen=True)
class BoundResult:
    """Outcome of the rigorous drift search for one arity."""

    d: int
    p: Fraction
    certificate: Certificate
    search_trace: tuple[tuple[Fraction, str], ...]


@dataclass(frozen=True)
class QCritResult:
    """Numeric bracket for the technique threshold at one arity."""

    d: int
    lower: float
    upper: float
    iterations: int


#: Largest arity where the float64 recursion for the activation-count
#: probabilities is trusted. The diagonal values are tiny numbers obtained
#: as one minus a sum of binomially weighted terms, so rounding error grows
#: like the central binomial coefficient; beyond this arity the model
#: switches to multiprecision arithmetic sized to the arity.
_FLOAT64_MAX_D = 13


class _FloatModel:
    """Vectorized numeric evaluation of the recurrence functional.

    Rebuilds the activation-count probabilities numerically per lambda
    (values stay in [0, 1], so the recursion needs no giant coefficients at
    any arity) and combines them in log space so large lambda cannot
    overflow. Large arities run under gmpy2 multiprecision instead of
    float64 because the diagonal recursion cancels catastrophically there.
    Accepts any drift in (0, 1/2) including the lattice boundary 1/(d+1),
    which the exact pipeline deliberately rejects.
    """

    def __init__(self, d: int, p: float):
        p = float(p)
        if d < 2:
            raise OutOfRange(f"arity must be >= 2, got {d}")
        if not 0.0 < p < 0.5:
            raise OutOfRange(f"numeric drift must lie in (0, 1/2), got {p}")
        self.d = d
        self.p = p
        self.p_star = p * (d - 1) / (d - (d + 1) * p)
        self.p_hat = p / (1.0 - p)
        self.phi = -(1.0 - self.p_star) / d
        self.rate = (1.0 - self.p_hat) / (d - 1)
        self._mp_bits = 0 if d <= _FLOAT64_MAX_D else 96 + 4 * d
        if self._mp_bits:
            self._diag_combs = [
                [comb(u, i) for i in range(u)] for u in range(d)
            ]
            self._pmf_combs = [comb(d - 1, u) for u in range(d)]

    def f(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if self._mp_bits:
            return self._f_mp(lam)
        d = self.d
        x = math.exp(self.phi)
        y = np.exp(-self.rate * lam)
        logy = -self.rate * lam
        diag = [np.ones_like(y)]
        for u in range(1, d):
            acc = np.zeros_like(y)
            for i in range(u):
                acc += comb(u, i) * x ** (u - i) * y ** ((i + 1) * (u - i)) * diag[i]
            diag.append(1.0 - acc)
        # Log-probabilities assembled in log space: the power-of-y part is
        # (u+1) * logy exactly, so a probability far below float range still
        # carries its true magnitude against the exploding lambda weight.
        logs = np.empty((d, y.size))
        with np.errstate(divide="ignore", invalid="ignore"):
            for u in range(d):
                log_diag = np.where(
                    diag[u] > 0,
                    np.log(np.where(diag[u] > 0, diag[u], 1.0)),
                    -np.inf,
                )
                if u < d - 1:
                    lp = (
                        math.log(comb(d - 1, u))
                        + (d - 1 - u) * (self.phi + (u + 1) * logy)
                        + log_diag
                    )
                else:
                    lp = log_diag
                logs[u] = lp + lam * (1.0 - self.p_hat * (1 + u))
        peak = logs.max(axis=0)
        return np.exp(
            -self.p_star + peak + np.log(np.exp(logs - peak).sum(axis=0))
        )

    def _f_mp(self, lam: np.ndarray) -> np.ndarray:
        """Multiprecision path for large arities.

        Same recursion, scalar per lambda, under a precision that outruns
        the binomial error amplification; mpfr's wide exponent range also
        makes the log-space trick unnecessary here.
        """
        d = self.d
        out = np.empty(lam.size)
        with gmpy2.context(gmpy2.context(precision=self._mp_bits)):
            one = gmpy2.mpfr(1)
            x = gmpy2.exp(gmpy2.mpfr(self.phi))
            x_pow = [one]
            for _ in range(d):
                x_pow.append(x_pow[-1] * x)
            for j, lam_j in enumerate(lam):
                y = gmpy2.exp(gmpy2.mpfr(-self.rate * lam_j))
                y_pow: dict[int, object] = {0: one}

                def yp(k: int):
                    got = y_pow.get(k)
                    if got is None:
                        got = y_pow[k] = y**k
                    return got

                diag = [one]
                for u in range(1, d):
                    acc = gmpy2.mpfr(0)
                    combs = self._diag_combs[u]
                    for i in range(u):
                        acc += combs[i] * x_pow[u - i] * yp((i + 1) * (u - i)) * diag[i]
                    diag.append(one - acc)
                total = gmpy2.mpfr(0)
                for u in range(d):
                    if u < d - 1:
                        prob = (
                            self._pmf_combs[u]
                            * x_pow[d - 1 - u]
                            * yp((u + 1) * (d - 1 - u))
                            * diag[u]
                        )
                    else:
                        prob = diag[d - 1]
                    if prob > 0:
                        weight = lam_j * (1.0 - self.p_hat * (1 + u))
                        total += prob * gmpy2.exp(gmpy2.mpfr(weight))
                out[j] = float(gmpy2.exp(gmpy2.mpfr(-self.p_star)) * total)
        return out

    def f_scalar(self, lam: float) -> float:
        return float(self.f(lam)[0])

    def tail_limit(self) -> float:
        """Value of the functional as lambda grows without bound."""
        return math.exp(-self.p_star / self.d - (self.d - 1) / self.d)


_INV_GOLDEN = (math.sqrt(5) - 1) / 2


def _golden_max(fn, lo: float, hi: float, tol: float) -> tuple[float, float]:
    x1 = hi - _INV_GOLDEN * (hi - lo)
    x2 = lo + _INV_GOLDEN * (hi - lo)
    f1, f2 = fn(x1), fn(x2)
    while hi - lo > tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_GOLDEN * (hi - lo)
            f2 = fn(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_GOLDEN * (hi - lo)
            f1 = fn(x1)
    mid = (lo + hi) / 2
    return mid, fn(mid)


def m_value(params: DriftParams) -> float:
    """Numeric supremum of the recurrence functional (not certified).

    Evaluated on the polynomial side: dense y-grid of step 1e-3 over (0, 1]
    followed by golden-section refinement around the best grid point.
    """
    model = _FloatModel(params.d, float(params.p))
    c = float(params.c)
    ys = np.arange(1, 1001) / 1000.0
    vals = model.f(-c * np.log(ys))
    best = int(np.argmax(vals))
    lo = ys[max(best - 1, 0)]
    hi = ys[min(best + 1, len(ys) - 1)]

    def at(y: float) -> float:
        if y >= 1.0:
            return model.f_scalar(0.0)
        return model.f_scalar(-c * math.log(y))

    _, refined = _golden_max(at, lo, hi, 1e-9)
    return max(refined, float(vals[best]), model.tail_limit())


def m_value_numeric(d: int, p: float) -> float:
    """Float-drift variant of m_value, tolerant of the lattice boundary.

    Works in lambda space (grid on [0, 64] plus golden refinement and the
    tail limit), so it needs no rational change of variables and accepts
    p = 1/(d+1) exactly, where the exact pipeline refuses to build
    parameters.
    """
    model = _FloatModel(d, p)
    grid = np.linspace(0.0, 64.0, 1025)
    vals = model.f(grid)
    best = int(np.argmax(vals))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    _, refined = _golden_max(model.f_scalar, lo, hi, 1e-9)
    return max(refined, float(vals[best]), model.tail_limit())


def g_value_numeric(d: int, p, y: float) -> float:
    """Numeric value of the recurrence polynomial at one y in (0, 1].

    Uses the functional route g(y) = f(-c log y), recovering the intended
    rational drift from p (floats are snapped to the nearest fraction with
    denominator up to 1e9, so 0.4 means 2/5, not its binary expansion) to
    derive the y-to-lambda scale c; works at the lattice boundary too.
    """
    frac = p if isinstance(p, Fraction) else Fraction(p).limit_denominator(10**9)
    c = (frac.denominator - frac.numerator) * (d - 1)
    model = _FloatModel(d, float(frac))
    if y <= 0.0 or y > 1.0:
        raise OutOfRange(f"y must lie in (0, 1], got {y}")
    if y == 1.0:
        return model.f_scalar(0.0)
    return model.f_scalar(-float(c) * math.log(y))


def rational_candidates(target, max_denominator: int) -> list[Fraction]:
    """Best rational approximations of target from above, nearest first.

    Walks the Stern-Brocot tree toward the target, collecting every node
    that sits at or above it (these are exactly the upper convergents and
    mediants), until denominators exceed the cap. The returned list is
    ascending, so it reads closest-to-target first and retreats upward.
    """
    t = Fraction(target)
    if not 0 < t < 1:
        raise OutOfRange(f"target must lie in (0, 1), got {target}")
    if max_denominator < 1:
        raise OutOfRange(f"max_denominator must be >= 1, got {max_denominator}")
    lo_n, lo_d = 0, 1
    hi_n, hi_d = 1, 1
    uppers = {Fraction(1, 1)}
    while True:
        med_n, med_d = lo_n + hi_n, lo_d + hi_d
        if med_d > max_denominator:
            break
        mediant = Fraction(med_n, med_d)
        if mediant >= t:
            hi_n, hi_d = med_n, med_d
            uppers.add(mediant)
        else:
            lo_n, lo_d = med_n, med_d
    return sorted(uppers)


def _numeric_threshold(d: int, tol: float = 1e-7) -> float:
    """Numeric estimate of the smallest drift where M dips below one.

    Returns the lower end of the final bisection bracket (the side where
    M >= 1), so candidate enumeration from above can never skip a valid
    rational between the estimate and the true threshold.
    """
    lo = 1.0 / (d + 1) + 1e-9
    hi = 0.5 - 1e-9
    if m_value_numeric(d, lo) < 1.0 or m_value_numeric(d, hi) >= 1.0:
        raise SearchExhausted(f"no threshold bracket inside the domain at d={d}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if m_value_numeric(d, mid) < 1.0:
            hi = mid
        else:
            lo = mid
    return lo


def rigorous_bound(
    d: int,
    config: CertifyConfig | None = None,
    window: float = 0.9994,
    *,
    max_denominator: int = 300,
) -> BoundResult:
    """Certified rational drift bound for one arity, with audit trace.

    Descends the chain of best-from-above rational approximations of the
    numeric threshold, starting loose (near 1/2, small denominators) and
    tightening. Candidates whose cheap numeric supremum is still at or
    below the window are skipped as slack; the first candidate whose
    certified supremum lands inside (window, 1) is returned. Because the
    chain's denominators grow as it tightens, stopping at the first
    in-window hit keeps the reported fraction small while guaranteeing the
    bound is sharp to the stated window resolution; descending past a
    candidate whose numeric supremum reaches one means no chain member fits
    the window, so the search stops there.
    """
    if d < 2:
        raise OutOfRange(f"arity must be >= 2, got {d}")
    if not 0.0 < window < 1.0:
        raise OutOfRange(f"window must lie in (0, 1), got {window}")
    if config is None:
        config = CertifyConfig()
    target = _numeric_threshold(d)
    trace: list[tuple[Fraction, str]] = []
    for p in reversed(rational_candidates(target, max_denominator)):
        if not Fraction(1, d + 1) < p < Fraction(1, 2):
            trace.append((p, "SKIPPED_OUTSIDE_DOMAIN"))
            continue
        params = derive_params(d, p)
        m = m_value(params)
        if m <= window:
            trace.append((p, "SKIPPED_NUMERIC_SUP_BELOW_WINDOW"))
            continue
        if m >= 1.0:
            trace.append((p, "STOPPED_NUMERIC_SUP_AT_LEAST_ONE"))
            break
        cert = certify_sup_below_one(build_g(params), config)
        trace.append((p, cert.verdict))
        if (
            cert.verdict == CERTIFIED_BELOW_ONE
            and window < cert.sup_upper_bound < 1.0
        ):
            return BoundResult(
                d=d, p=p, certificate=cert, search_trace=tuple(trace)
            )
        if cert.verdict != CERTIFIED_BELOW_ONE:
            break
    raise SearchExhausted(
        f"no candidate with denominator <= {max_denominator} certified "
        f"inside the window at d={d}; trace: "
        + ", ".join(f"{p}:{what}" for p, what in trace)
    )


def _lambda_grid_below_one(
    model: _FloatModel, step: float, cap: float
) -> bool:
    """Check the functional stays below one on the printed lambda grid.

    The base grid is {0, step, ..., 1-step}. When the grid maximum sits at
    the right edge the peak has not turned over yet, so the grid is
    extended by whole blocks of the same spacing (up to the cap) before
    judging — without this, small arities whose peak sits past lambda = 1
    would pass the check spuriously far below the true threshold.
    """
    upper = 1.0
    while True:
        lam = np.arange(0.0, upper - step / 2 + step, step)
        vals = model.f(lam)
        if float(vals.max()) >= 1.0:
            return False
        if int(np.argmax(vals)) < lam.size - 1 or upper >= cap:
            return True
        upper += 1.0


def approx_bound(
    d: int,
    *,
    lambda_step: float = 0.01,
    p_step: float = 1e-4,
    lambda_cap: float = 64.0,
    start: float | None = None,
) -> float:
    """Fast numeric drift bound: decrement p until the grid check fails.

    Starts from the certified bound of the nearest smaller arity (0.45 when
    none exists), snaps to the p_step lattice, and walks down one step at a
    time while the lambda-grid check still passes; returns the last passing
    drift. The walk lands on the same lattice point from any starting drift
    at or above it, so callers sweeping many arities may pass the previous
    arity's answer as start to skip the common prefix. Numeric only — no
    certification.
    """
    if d < 2:
        raise OutOfRange(f"arity must be >= 2, got {d}")
    if start is None:
        smaller = [k for k in KNOWN_BOUNDS if k < d]
        start = float(KNOWN_BOUNDS[max(smaller)]) if smaller else 0.45
    lattice = round(1.0 / p_step)
    k = math.floor(start * lattice)
    # The start is known-good mathematically; the snap-down could land a
    # hair below it, so allow stepping back up before descending.
    while k < lattice // 2 - 1 and not _lambda_grid_below_one(
        _FloatModel(d, k / lattice), lambda_step, lambda_cap
    ):
        k += 1
    while k > 1 and _lambda_grid_below_one(
        _FloatModel(d, (k - 1) / lattice), lambda_step, lambda_cap
    ):
        k -= 1
    return k / lattice


def q_crit(d: int, tol: float = 1e-4) -> QCritResult:
    """Numeric bisection bracket for the technique threshold (not certified).

    Maintains the invariant that the numeric supremum is >= 1 at the lower
    end and < 1 at the upper end, shrinking the bracket to the tolerance.
    """
    if d < 2:
        raise OutOfRange(f"arity must be >= 2, got {d}")
    if tol < 1e-6:
        raise OutOfRange(f"tolerance must be >= 1e-6, got {tol}")
    lo = 1.0 / (d + 1) + 1e-9
    hi = 0.5 - 1e-9
    if m_value_numeric(d, lo) < 1.0 or m_value_numeric(d, hi) >= 1.0:
        raise SearchExhausted(f"no threshold bracket inside the domain at d={d}")
    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        iterations += 1
        if m_value_numeric(d, mid) < 1.0:
            hi = mid
        else:
            lo = mid
    return QCritResult(d=d, lower=lo, upper=hi, iterations=iterations)


def figure_rows(
    dmin: int,
    dmax: int,
    config: CertifyConfig | None = None,
    window: float = 0.9994,
    rigorous_limit: int = RIGOROUS_LIMIT,
) -> list[dict]:
    """Bound-per-arity rows for the figure CSV.

    Arities up to rigorous_limit get a live certified search (mode
    "rigorous"); larger ones use the approximate grid descent (mode
    "approx") on a lattice fine enough (1e-5) to keep consecutive bounds
    strictly decreasing, warm-started from the previous arity's answer.
    """
    if dmin < 2 or dmax < dmin:
        raise OutOfRange(f"need 2 <= dmin <= dmax, got {dmin}..{dmax}")
    rows = []
    prev_approx: float | None = None
    for d in range(dmin, dmax + 1):
        if d <= rigorous_limit:
            result = rigorous_bound(d, config, window)
            rows.append(
                {
                    "m": d,
                    "bound": float(result.p),
                    "mode": "rigorous",
                    "p": f"{result.p.numerator}/{result.p.denominator}",
                }
            )
        else:
            bound = approx_bound(d, p_step=1e-5, start=prev_approx)
            prev_approx = bound
            rows.append({"m": d, "bound": bound, "mode": "approx", "p": None})
    return rows
