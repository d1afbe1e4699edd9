"""Tests for the Monte Carlo simulators.

The star-graph sampler is validated against the exact probability pipeline
(total-variation distance at fixed seeds), which is the strongest available
cross-check: the two routes share no code beyond the derived parameters.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from frogbound.errors import OutOfRange
from frogbound.params import derive_params
from frogbound.sim import (
    InitMeasure,
    SimConfig,
    SimSummary,
    _replication_rng,
    sample_u,
    simulate_fm,
    simulate_sfm,
)
from frogbound.u_dist import u_pmf


def _rng(seed=20260826, rep=0):
    return _replication_rng(seed, rep)


def _empirical_pmf(params, lam, n, rng):
    counts = np.zeros(params.d)
    for _ in range(n):
        counts[sample_u(params, lam, rng)] += 1
    return counts / n


class TestSampleU:
    def test_oracle_equivalence(self):
        cases = [
            (2, Fraction(2, 5), 1.0),
            (3, Fraction(3, 10), 1.0),
            (4, Fraction(1, 4), 1.5),
            (5, Fraction(11, 50), 2.0),
        ]
        for d, p, lam in cases:
            params = derive_params(d, p)
            emp = _empirical_pmf(params, lam, 100_000, _rng())
            exact = np.array(u_pmf(params, lam).probs)
            tv = 0.5 * float(np.abs(emp - exact).sum())
            assert tv < 0.01, f"TV {tv} at {(d, p, lam)}"

    def test_zero_lambda_matches_exact(self):
        # At lambda=0 only the initial center frogs move, so the exact pmf
        # is a clean small-sample check.
        params = derive_params(3, Fraction(2, 5))
        emp = _empirical_pmf(params, 0.0, 20_000, _rng(7))
        exact = np.array(u_pmf(params, 0.0).probs)
        assert 0.5 * float(np.abs(emp - exact).sum()) < 0.02

    def test_range(self):
        rng = _rng(3)
        for d, p in [(2, Fraction(2, 5)), (5, Fraction(11, 50))]:
            params = derive_params(d, p)
            for lam in (0.0, 0.5, 3.0):
                draws = {sample_u(params, lam, rng) for _ in range(200)}
                assert draws <= set(range(d))

    def test_arity_dominance_ks(self):
        # Higher arity awakens stochastically more leaves: the empirical CDF
        # at d+1 must not exceed the one at d beyond two-sample KS noise.
        n = 100_000
        ks_tol = 1.358 * math.sqrt(2 / n)
        for d, p, lam in [(2, Fraction(2, 5), 1.0), (3, Fraction(3, 10), 2.0)]:
            lo = _empirical_pmf(derive_params(d, p), lam, n, _rng(11))
            hi = _empirical_pmf(derive_params(d + 1, p), lam, n, _rng(12))
            cdf_lo = np.cumsum(lo)
            cdf_hi = np.cumsum(hi)[:d]
            assert np.all(cdf_hi <= cdf_lo + ks_tol)

    def test_rejects_negative_lambda(self):
        with pytest.raises(OutOfRange):
            sample_u(derive_params(2, Fraction(2, 5)), -1.0, _rng())


class TestInitMeasure:
    def test_one_per_site(self):
        nu = InitMeasure.one_per_site()
        assert [nu.sample(_rng()) for _ in range(5)] == [1] * 5

    def test_poisson_mean(self):
        nu = InitMeasure.poisson(2.0)
        rng = _rng(5)
        draws = [nu.sample(rng) for _ in range(4000)]
        assert sum(draws) / len(draws) == pytest.approx(2.0, abs=0.1)

    def test_validation(self):
        with pytest.raises(OutOfRange):
            InitMeasure("bogus")
        with pytest.raises(OutOfRange):
            InitMeasure.poisson(-1.0)
        with pytest.raises(OutOfRange):
            InitMeasure.poisson(float("inf"))
        with pytest.raises(OutOfRange):
            InitMeasure(kind="one_per_site", mean=1.0)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(OutOfRange):
            SimConfig(depth=0, max_steps=10, seed=1, replications=1)
        with pytest.raises(OutOfRange):
            SimConfig(depth=5, max_steps=0, seed=1, replications=1)
        with pytest.raises(OutOfRange):
            SimConfig(depth=5, max_steps=10, seed=1, replications=0)
        with pytest.raises(OutOfRange):
            SimConfig(depth=5, max_steps=10, seed=-1, replications=1)


class TestSimulateSfm:
    CFG = SimConfig(depth=10, max_steps=400, seed=99, replications=60)

    def test_summary_consistency(self):
        out = simulate_sfm(
            derive_params(2, Fraction(2, 5)), InitMeasure.one_per_site(), self.CFG
        )
        assert len(out.root_visits) == self.CFG.replications
        assert all(v >= 0 for v in out.root_visits)
        n = len(out.root_visits)
        mean = sum(out.root_visits) / n
        var = sum((v - mean) ** 2 for v in out.root_visits) / (n - 1)
        assert out.mean == pytest.approx(mean)
        assert out.variance == pytest.approx(var)
        assert out.ci95 == pytest.approx(1.96 * math.sqrt(var / n))
        assert out.capped == ()

    def test_deterministic_across_threads(self):
        params = derive_params(3, Fraction(2, 5))
        nu = InitMeasure.poisson(1.0)
        one = simulate_sfm(params, nu, self.CFG)
        four = simulate_sfm(params, nu, self.CFG, threads=4)
        assert one == four
        other_seed = SimConfig(depth=10, max_steps=400, seed=100, replications=60)
        assert simulate_sfm(params, nu, other_seed) != one

    def test_arity_dominance_direction(self):
        nu = InitMeasure.one_per_site()
        lo = simulate_sfm(derive_params(2, Fraction(2, 5)), nu, self.CFG)
        hi = simulate_sfm(derive_params(3, Fraction(2, 5)), nu, self.CFG)
        assert hi.mean >= lo.mean - 2 * lo.ci95

    def test_step_cap_flagged(self):
        tight = SimConfig(depth=10, max_steps=1, seed=4, replications=3)
        out = simulate_sfm(
            derive_params(2, Fraction(2, 5)), InitMeasure.one_per_site(), tight
        )
        assert out.capped != ()


class TestSimulateFm:
    def test_root_started_frog_always_counts(self):
        cfg = SimConfig(depth=8, max_steps=200, seed=21, replications=20)
        out = simulate_fm(2, 0.5, InitMeasure.one_per_site(), cfg)
        assert all(v >= 1 for v in out.root_visits)
        assert out.capped == ()

    def test_sfm_stochastically_below_fm(self):
        cfg = SimConfig(depth=10, max_steps=300, seed=13, replications=60)
        nu = InitMeasure.one_per_site()
        sfm = simulate_sfm(derive_params(2, Fraction(2, 5)), nu, cfg)
        fm = simulate_fm(2, 0.4, nu, cfg)
        assert sfm.mean <= fm.mean + 2 * fm.ci95

    def test_stronger_drift_visits_root_more(self):
        cfg = SimConfig(depth=5, max_steps=200, seed=31, replications=30)
        nu = InitMeasure.one_per_site()
        weak = simulate_fm(2, 0.2, nu, cfg)
        strong = simulate_fm(2, 0.45, nu, cfg)
        assert strong.mean > weak.mean + 2 * (strong.ci95 + weak.ci95)

    def test_rejects_bad_inputs(self):
        cfg = SimConfig(depth=4, max_steps=50, seed=1, replications=2)
        nu = InitMeasure.one_per_site()
        with pytest.raises(OutOfRange):
            simulate_fm(1, 0.4, nu, cfg)
        with pytest.raises(OutOfRange):
            simulate_fm(2, 0.0, nu, cfg)
        with pytest.raises(OutOfRange):
            simulate_fm(2, 1.0, nu, cfg)

    def test_deterministic(self):
        cfg = SimConfig(depth=6, max_steps=100, seed=77, replications=10)
        nu = InitMeasure.poisson(0.5)
        assert simulate_fm(3, 0.3, nu, cfg) == simulate_fm(3, 0.3, nu, cfg)


class TestSimSummarySerialization:
    def test_as_dict_round_trip(self):
        cfg = SimConfig(depth=6, max_steps=100, seed=5, replications=8)
        out = simulate_sfm(
            derive_params(2, Fraction(2, 5)), InitMeasure.one_per_site(), cfg
        )
        payload = out.as_dict()
        assert set(payload) == {"root_visits", "mean", "variance", "ci95", "capped"}
        rebuilt = SimSummary(
            root_visits=tuple(payload["root_visits"]),
            mean=payload["mean"],
            variance=payload["variance"],
            ci95=payload["ci95"],
            capped=tuple(payload["capped"]),
        )
        assert rebuilt == out
