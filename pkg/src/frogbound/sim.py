"""Monte Carlo simulators: the frog process, its self-similar variant, and
the star-graph activation experiment.

The samplers implement the process dynamics directly (no reuse of the exact
probability pipeline), so they serve as an independent brute-force
cross-check of it. Trees are never allocated: vertices are heap-encoded
integers (root 0, children of v are v*d+1 .. v*d+d) materialized in hash
sets as they are first visited.

Reproducibility: each replication owns a counter-based Philox stream keyed
by (seed, replication index), and frogs within a replication consume that
stream in a fixed last-in-first-out order, so summaries are identical for
identical seeds regardless of thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange
from .params import DriftParams

ONE_PER_SITE = "one_per_site"
POISSON = "poisson"


@dataclass(frozen=True)
class InitMeasure:
    """Initial sleeping-frog configuration: one per site, or Poisson counts."""

    kind: str
    mean: float | None = None

    def __post_init__(self):
        if self.kind == ONE_PER_SITE:
            if self.mean is not None:
                raise OutOfRange("one-per-site measure takes no mean")
        elif self.kind == POISSON:
            if (
                self.mean is None
                or not math.isfinite(self.mean)
                or self.mean < 0
            ):
                raise OutOfRange(
                    f"Poisson mean must be finite and >= 0, got {self.mean}"
                )
        else:
            raise OutOfRange(f"unknown initial measure kind: {self.kind!r}")

    @classmethod
    def one_per_site(cls) -> "InitMeasure":
        return cls(ONE_PER_SITE)

    @classmethod
    def poisson(cls, mean: float) -> "InitMeasure":
        return cls(POISSON, float(mean))

    def sample(self, rng: np.random.Generator) -> int:
        if self.kind == ONE_PER_SITE:
            return 1
        return int(rng.poisson(self.mean))


@dataclass(frozen=True)
class SimConfig:
    """Run shape: tree truncation depth, per-frog step cap, seed, replications."""

    depth: int
    max_steps: int
    seed: int
    replications: int

    def __post_init__(self):
        if self.depth < 1:
            raise OutOfRange(f"depth must be >= 1, got {self.depth}")
        if self.max_steps < 1:
            raise OutOfRange(f"max_steps must be >= 1, got {self.max_steps}")
        if self.replications < 1:
            raise OutOfRange(
                f"replications must be >= 1, got {self.replications}"
            )
        if self.seed < 0:
            raise OutOfRange(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class SimSummary:
    """Root-visit statistics over replications.

    capped lists the replication indices in which some frog hit the step cap
    before its walk resolved naturally (flagged, never silently truncated).
    """

    root_visits: tuple[int, ...]
    mean: float
    variance: float
    ci95: float
    capped: tuple[int, ...]

    def as_dict(self) -> dict:
        return {
            "root_visits": list(self.root_visits),
            "mean": self.mean,
            "variance": self.variance,
            "ci95": self.ci95,
            "capped": list(self.capped),
        }


def sample_u(params: DriftParams, lam: float, rng: np.random.Generator) -> int:
    """One draw of the star-graph activation count.

    Star graph: a frozen root, a center, and leaves 1..d; leaf 1 starts
    active with a Poisson(lam) contingent, leaves 2..d each hold a dormant
    Poisson(lam) contingent. Poisson(1) initial frogs at the center go to
    the root (frozen) with probability p_star, else to a uniform leaf;
    every frog released by an awakened leaf routes through the center to
    the root with probability p_hat, else to a uniform other leaf. Frogs
    freeze where they land; the return value counts awakened leaves among
    2..d.
    """
    if lam < 0:
        raise OutOfRange(f"lambda must be >= 0, got {lam}")
    d = params.d
    p_star = float(params.p_star)
    p_hat = float(params.p_hat)
    woken = [False] * d
    woken[0] = True
    pending = [0]
    for _ in range(int(rng.poisson(1.0))):
        if rng.random() < p_star:
            continue
        leaf = int(rng.integers(d))
        if not woken[leaf]:
            woken[leaf] = True
            pending.append(leaf)
    while pending:
        src = pending.pop()
        for _ in range(int(rng.poisson(lam))):
            if rng.random() < p_hat:
                continue
            off = int(rng.integers(d - 1))
            leaf = off + (off >= src)
            if not woken[leaf]:
                woken[leaf] = True
                pending.append(leaf)
    return sum(woken) - 1


_JUST, _ROOTWARD, _AWAY = 0, 1, 2


def _sfm_replication(
    params: DriftParams,
    nu: InitMeasure,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> tuple[int, bool]:
    """One self-similar run; returns (root visits, hit-step-cap flag).

    Dynamics: the first frog steps from the root to a uniform child and is
    an away-mover; a just-activated frog steps rootward with probability
    p_star, a rootward-moving frog continues rootward with probability
    p_hat, and any frog that declines rootward becomes an away-mover for
    good. Away-movers die on entering an already-visited vertex or at the
    truncation depth, and wake the sleepers of each fresh vertex they
    enter; rootward moves pass through visited vertices freely; a frog
    reaching the root is counted and killed.
    """
    d = params.d
    p_star = float(params.p_star)
    p_hat = float(params.p_hat)
    depth_cap = cfg.depth
    # A frog ascends at most depth steps and then descends at most depth
    # steps, so this batch covers any uncapped lifetime.
    batch = min(cfg.max_steps, 2 * depth_cap + 4)
    visited = {0}
    root_visits = 0
    capped = False
    frogs: list[tuple[int, int]] = [(0, 0)]
    while frogs:
        vertex, depth = frogs.pop()
        mode = _AWAY if vertex == 0 else _JUST
        draws = rng.random(batch)
        children = rng.integers(0, d, batch)
        idx = 0
        used = 0
        while True:
            if used >= cfg.max_steps:
                capped = True
                break
            if idx >= batch:
                draws = rng.random(batch)
                children = rng.integers(0, d, batch)
                idx = 0
            if mode != _AWAY and draws[idx] < (
                p_star if mode == _JUST else p_hat
            ):
                mode = _ROOTWARD
                vertex = (vertex - 1) // d
                depth -= 1
                idx += 1
                used += 1
                if depth == 0:
                    root_visits += 1
                    break
                continue
            mode = _AWAY
            if depth >= depth_cap:
                break
            vertex = vertex * d + 1 + int(children[idx])
            depth += 1
            idx += 1
            used += 1
            if vertex in visited:
                break
            visited.add(vertex)
            for _ in range(nu.sample(rng)):
                frogs.append((vertex, depth))
    return root_visits, capped


def _fm_replication(
    d: int,
    p: float,
    nu: InitMeasure,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> tuple[int, bool]:
    """One full frog-process run; returns (root visits, False).

    Every active frog performs a p-biased walk on the truncated tree for
    exactly max_steps steps (the step cap is the observation horizon here,
    not an error: without killing the walks never end). Rootward with
    probability p, else to a uniform child; the root bounces frogs to a
    uniform child; the truncation leaves bounce them rootward. Arrivals at
    the root are counted (the initial root frog counts once), and sleepers
    wake on the first arrival at their site.
    """
    depth_cap = cfg.depth
    awake_sites = {0}
    root_visits = 1
    frogs: list[tuple[int, int]] = [(0, 0)]
    while frogs:
        vertex, depth = frogs.pop()
        draws = rng.random(cfg.max_steps)
        children = rng.integers(0, d, cfg.max_steps)
        for i in range(cfg.max_steps):
            if depth == 0:
                vertex = vertex * d + 1 + int(children[i])
                depth = 1
            elif depth >= depth_cap or draws[i] < p:
                vertex = (vertex - 1) // d
                depth -= 1
                if depth == 0:
                    root_visits += 1
            else:
                vertex = vertex * d + 1 + int(children[i])
                depth += 1
            if vertex not in awake_sites:
                awake_sites.add(vertex)
                for _ in range(nu.sample(rng)):
                    frogs.append((vertex, depth))
    return root_visits, False


def _summarize(results: list[tuple[int, bool]]) -> SimSummary:
    visits = tuple(int(v) for v, _ in results)
    capped = tuple(i for i, (_, flag) in enumerate(results) if flag)
    n = len(visits)
    mean = sum(visits) / n
    variance = (
        sum((v - mean) ** 2 for v in visits) / (n - 1) if n > 1 else 0.0
    )
    ci95 = 1.96 * math.sqrt(variance / n)
    return SimSummary(
        root_visits=visits,
        mean=mean,
        variance=variance,
        ci95=ci95,
        capped=capped,
    )


def _replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(rep,)))
    )


def _run_replications(worker, cfg: SimConfig, threads: int) -> SimSummary:
    def one(rep: int) -> tuple[int, bool]:
        return worker(_replication_rng(cfg.seed, rep))

    reps = range(cfg.replications)
    if threads <= 1:
        results = [one(rep) for rep in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, reps))
    return _summarize(results)


def simulate_sfm(
    params: DriftParams,
    nu: InitMeasure,
    cfg: SimConfig,
    *,
    threads: int = 1,
) -> SimSummary:
    """Root-visit statistics for the self-similar process."""
    return _run_replications(
        lambda rng: _sfm_replication(params, nu, cfg, rng), cfg, threads
    )


def simulate_fm(
    d: int,
    p: float,
    nu: InitMeasure,
    cfg: SimConfig,
    *,
    threads: int = 1,
) -> SimSummary:
    """Root-visit statistics for the full frog process.

    Unlike the exact pipeline, any drift in (0, 1) is meaningful here, so
    the drift is taken directly rather than through DriftParams.
    """
    if d < 2:
        raise OutOfRange(f"arity must be >= 2, got {d}")
    p = float(p)
    if not 0.0 < p < 1.0:
        raise OutOfRange(f"drift must lie in (0, 1), got {p}")
    return _run_replications(
        lambda rng: _fm_replication(d, p, nu, cfg, rng), cfg, threads
    )
