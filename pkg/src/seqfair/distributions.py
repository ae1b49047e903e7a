"""Type-distribution constructors and deterministic episode sampling.

Every random quantity in the package flows through :class:`SeededRng`, a
counter-based generator (Philox) that is split per replication and per agent.
Identical seeds therefore give identical sample streams no matter how work is
scheduled across threads or processes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import stats

from .core import AgentProfile, AgentType, Instance, TypeDistribution

# Auction prices per product used as linear-utility preference weights:
# cereal, diapers, pasta, paper, prepared meals, rice, meat, fruit, produce.
PRODUCT_WEIGHTS = (3.9, 3.5, 3.2, 3.0, 2.8, 2.7, 1.9, 1.2, 0.2)
PRODUCT_NAMES = (
    "cereal", "diapers", "pasta", "paper", "prepared_meals",
    "rice", "meat", "fruit", "produce",
)

# County demand means, normalized to total ~100, reused as sizes in the
# multi-resource setting.
COUNTY_MEANS = (26.72, 34.55, 12.09, 12.35, 2.96, 11.31)
COUNTY_NAMES = ("Broome", "Steuben", "Chemung", "Tioga", "Schuyler", "Tompkins")



class SeededRng:
    """Deterministic, splittable randomness rooted at a 64-bit seed.

    Streams are derived purely from ``(seed, *path)`` so a replication or an
    agent always sees the same draws regardless of evaluation order.
    """

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)

    def child(self, index: int) -> "SeededRng":
        return SeededRng(self.seed, self.path + (index,))

    def replication(self, rep_index: int) -> "SeededRng":
        return self.child(rep_index)

    def agent(self, agent_index: int) -> np.random.Generator:
        return self.child(agent_index).generator()

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


def discretized_gaussian(mean: float, variance: float, buckets: int = 20) -> TypeDistribution:
    """Bucketed normal distribution over demand levels.

    Equal-width buckets span four standard deviations either side of the
    mean; each bucket's midpoint carries its CDF mass, renormalized to one.
    Scalar demands must stay positive, so nonpositive midpoints are clamped
    to a floor strictly below the smallest positive midpoint, and coinciding
    atoms are merged.
    """
    if variance <= 0:
        raise ValueError(f"variance must be positive, got {variance}")
    if buckets < 2:
        raise ValueError(f"need at least 2 buckets, got {buckets}")
    sigma = float(np.sqrt(variance))
    edges = np.linspace(mean - 4 * sigma, mean + 4 * sigma, buckets + 1)
    mids = (edges[:-1] + edges[1:]) / 2.0
    mass = stats.norm.cdf(edges[1:], mean, sigma) - stats.norm.cdf(edges[:-1], mean, sigma)
    width = float(edges[1] - edges[0])
    positive = mids[mids > 0]
    floor = min(width, positive.min()) / 2.0 if positive.size else width / 2.0
    mids = np.maximum(mids, floor)

    merged: dict = {}
    for m, p in zip(mids, mass):
        key = float(m)
        merged[key] = merged.get(key, 0.0) + float(p)
    total = sum(merged.values())
    return TypeDistribution(tuple(merged), tuple(p / total for p in merged.values()))


def truncated_poisson(lam: float = 10.0, cap: int = 20) -> TypeDistribution:
    """Poisson demand restricted to {1, ..., cap}.

    The tail mass above the cap and the mass at zero are both folded into
    P(1): a zero demand would make the filling ratio undefined.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if cap < 1:
        raise ValueError(f"cap must be at least 1, got {cap}")
    pmf = stats.poisson.pmf(np.arange(cap + 1), lam)
    tail = 1.0 - float(pmf.sum())
    probs = pmf[1:].copy()
    probs[0] += float(pmf[0]) + max(tail, 0.0)
    probs = probs / probs.sum()
    return TypeDistribution(tuple(float(j) for j in range(1, cap + 1)), tuple(probs))


def two_point_uniform(lo: float, hi: float) -> TypeDistribution:
    """Uniform over two demand levels; a single atom when they coincide."""
    if lo == hi:
        return TypeDistribution((float(lo),), (1.0,))
    return TypeDistribution((float(lo), float(hi)), (0.5, 0.5))


def fbst_profiles(buckets: int = 20, variance_scale: float = 0.5) -> list:
    """Six unit-size county agents with Gaussian demand around each mean.

    Per-county demand variances were never published; they default to
    ``mean * variance_scale`` and can be overridden through config.
    """
    return [
        AgentProfile(1.0, discretized_gaussian(m, m * variance_scale, buckets))
        for m in COUNTY_MEANS
    ]


def bernoulli_preference_profiles(
    rng: SeededRng,
    weights: Sequence[float] = PRODUCT_WEIGHTS,
    count: int = 8,
) -> TypeDistribution:
    """Uniform distribution over randomly switched-on preference vectors.

    Each profile turns every product's weight on or off with probability one
    half.  All-zero and duplicate draws are rejected and redrawn so the
    support holds exactly ``count`` distinct types at probability 1/count.
    """
    gen = rng.generator()
    weights = tuple(float(w) for w in weights)
    profiles: list = []
    seen = set()
    while len(profiles) < count:
        mask = gen.integers(0, 2, size=len(weights))
        vec = tuple(w * int(m) for w, m in zip(weights, mask))
        if max(vec) <= 0 or vec in seen:
            continue
        seen.add(vec)
        profiles.append(vec)
    return TypeDistribution(tuple(profiles), tuple(1.0 / count for _ in profiles))


def sample_type(dist: TypeDistribution, gen: np.random.Generator) -> AgentType:
    """One inverse-CDF draw."""
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    idx = int(np.searchsorted(cdf, gen.random(), side="right"))
    return dist.support[min(idx, len(dist.support) - 1)]


def sample_episode(instance: Instance, rng: SeededRng) -> tuple:
    """Realized type sequence for one episode, one agent-split stream each."""
    return tuple(
        sample_type(agent.distribution, rng.agent(i))
        for i, agent in enumerate(instance.agents)
    )


# --- config-file distribution specs ------------------------------------------
#
# {"kind": "gaussian" | "poisson" | "uniform2" | "empirical" | "bernoulli_prefs",
#  "params": {...}}


def distribution_from_spec(spec: dict) -> TypeDistribution:
    kind = spec.get("kind")
    params = dict(spec.get("params", {}))
    if kind == "gaussian":
        return discretized_gaussian(
            params["mean"], params["variance"], int(params.get("buckets", 20))
        )
    if kind == "poisson":
        return truncated_poisson(params.get("lambda", 10.0), int(params.get("cap", 20)))
    if kind == "uniform2":
        return two_point_uniform(params["lo"], params["hi"])
    if kind == "empirical":
        return TypeDistribution(params["support"], params["probs"])
    if kind == "bernoulli_prefs":
        return bernoulli_preference_profiles(
            SeededRng(int(params.get("seed", 0))),
            params.get("weights", PRODUCT_WEIGHTS),
            int(params.get("count", 8)),
        )
    raise ValueError(f"unknown distribution kind {kind!r}")
