"""Domain model shared by every component: resources, agents, utilities.

An instance bundles an ordered list of agents (each with a size and a finite
type distribution), a vector of resource budgets, and a utility family.  Two
families are supported:

* ``filling_ratio`` -- single resource; an agent with demand ``theta`` values
  an allocation ``x`` at ``min(x / theta, 1)``.
* ``linear`` -- multiple resources; a preference vector ``theta`` values the
  bundle ``x`` at the dot product ``<theta, x>``.

Allocations are *normalized*: agent ``i`` with size ``S_i`` physically
consumes ``S_i * X_i``, so the budget constraint reads
``sum_i S_i * X_i <= B`` per resource.  All types in this module are immutable
after construction and safe to share across threads and processes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

FILLING_RATIO = "filling_ratio"
LINEAR = "linear"
FAMILIES = (FILLING_RATIO, LINEAR)

# Absolute per-resource slack allowed when checking consumption feasibility.
# Iterative solver output is inexact, so exact comparisons are never used.
FEASIBILITY_TOL = 1e-9

# A type is either a scalar demand (> 0) or a preference vector (>= 0 with at
# least one positive coordinate).
AgentType = Union[float, tuple]


def _as_type(value) -> AgentType:
    """Canonicalize a JSON-ish value into a hashable agent type."""
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in value)
    return float(value)


@dataclass(frozen=True)
class TypeDistribution:
    """Finite distribution over agent types.

    Invariants (reported by :func:`validate_instance`, not enforced here):
    non-empty distinct support, non-negative probabilities summing to one.
    """

    support: tuple
    probs: tuple

    def __init__(self, support: Sequence, probs: Sequence[float]):
        object.__setattr__(self, "support", tuple(_as_type(t) for t in support))
        object.__setattr__(self, "probs", tuple(float(p) for p in probs))

    def mean(self) -> AgentType:
        """Expected type: a float for scalar supports, a tuple for vectors."""
        if self.support and isinstance(self.support[0], tuple):
            k = len(self.support[0])
            return tuple(
                float(sum(p * t[j] for t, p in zip(self.support, self.probs)))
                for j in range(k)
            )
        return float(sum(p * t for t, p in zip(self.support, self.probs)))

    def median(self) -> float:
        """Smallest scalar support point whose CDF reaches one half."""
        pairs = sorted(zip(self.support, self.probs))
        acc = 0.0
        for value, prob in pairs:
            acc += prob
            if acc >= 0.5 - 1e-15:
                return float(value)
        return float(pairs[-1][0])

    def variance(self) -> float:
        """Variance of a scalar-valued distribution."""
        mu = self.mean()
        return float(sum(p * (t - mu) ** 2 for t, p in zip(self.support, self.probs)))


@dataclass(frozen=True)
class AgentProfile:
    """One agent: its size (endowment weight) and its type distribution."""

    size: float
    distribution: TypeDistribution


@dataclass(frozen=True)
class ResourceSpace:
    """The divisible resources: per-resource budgets and display names."""

    budgets: tuple
    names: tuple = ()

    def __init__(self, budgets: Sequence[float], names: Sequence[str] = ()):
        budgets = tuple(float(b) for b in budgets)
        names = tuple(names) if names else tuple(f"r{k}" for k in range(len(budgets)))
        object.__setattr__(self, "budgets", budgets)
        object.__setattr__(self, "names", names)

    @property
    def count(self) -> int:
        return len(self.budgets)


@dataclass(frozen=True)
class Instance:
    """An ordered allocation problem: agents, resources, utility family."""

    agents: tuple
    resources: ResourceSpace
    family: str

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def num_resources(self) -> int:
        return self.resources.count

    @property
    def budgets(self) -> tuple:
        return self.resources.budgets

    @cached_property
    def effective_size(self) -> float:
        return effective_size(self)

    @cached_property
    def lipschitz(self) -> float:
        """Instance-wide Lipschitz bound of the utility family.

        Measured against the max-norm on bundles, matching how allocation
        distances are taken: ``1 / min demand`` for filling ratios and the
        largest preference-vector L1 norm for linear utilities (a dot
        product moves by at most ``|theta|_1 * |x - y|_max``).  Taken over
        the union of all supports at construction so one constant serves
        every closeness bound computed downstream.
        """
        atoms = [t for a in self.agents for t in a.distribution.support]
        if self.family == FILLING_RATIO:
            return 1.0 / min(float(t) for t in atoms)
        return max(sum(t) for t in atoms)

    @cached_property
    def equal_share(self) -> tuple:
        """The per-agent normalized equal split ``B / S``."""
        s = self.effective_size
        return tuple(b / s for b in self.budgets)


def make_instance(
    sizes: Sequence[float],
    distributions: Sequence[TypeDistribution],
    budgets: Sequence[float],
    family: str,
    names: Sequence[str] = (),
) -> Instance:
    """Convenience constructor pairing sizes with distributions."""
    agents = tuple(
        AgentProfile(float(s), d) for s, d in zip(sizes, distributions, strict=True)
    )
    return Instance(agents, ResourceSpace(budgets, names), family)


def utility(x, theta, family: str) -> float:
    """Value of the (normalized) bundle ``x`` to an agent of type ``theta``.

    For ``filling_ratio``, ``x`` and ``theta`` are scalars (a length-1
    sequence is accepted for ``x``) and the result lies in [0, 1].  For
    ``linear``, both are length-K sequences and the result is ``<theta, x>``.

    Raises:
        ValueError: on a dimension mismatch or a non-positive scalar demand.
    """
    if family == FILLING_RATIO:
        if isinstance(x, (list, tuple, np.ndarray)):
            if len(x) != 1:
                raise ValueError(f"filling-ratio bundle must be scalar, got length {len(x)}")
            x = x[0]
        if isinstance(theta, (list, tuple, np.ndarray)):
            if len(theta) != 1:
                raise ValueError("filling-ratio type must be scalar")
            theta = theta[0]
        theta = float(theta)
        if theta <= 0:
            raise ValueError(f"scalar demand must be positive, got {theta}")
        return min(float(x) / theta, 1.0)
    if family == LINEAR:
        xv = np.asarray(x, dtype=float).reshape(-1)
        tv = np.asarray(theta, dtype=float).reshape(-1)
        if xv.shape != tv.shape:
            raise ValueError(f"dimension mismatch: bundle {xv.shape} vs type {tv.shape}")
        return float(xv @ tv)
    raise ValueError(f"unknown utility family {family!r}")


def effective_size(instance: Instance) -> float:
    """Total endowment ``S = sum_i S_i``."""
    return float(sum(a.size for a in instance.agents))


def validate_instance(instance: Instance) -> list:
    """Collect every violated invariant; an empty list means well-formed.

    Reports rather than raises so that callers (config loaders, the HTTP
    service) can surface all problems at once with the offending index.
    """
    problems: list = []
    if instance.family not in FAMILIES:
        problems.append(f"unknown utility family {instance.family!r}")
        return problems

    k = instance.resources.count
    if k < 1:
        problems.append("resource count must be at least 1")
    for j, b in enumerate(instance.resources.budgets):
        if not np.isfinite(b) or b < 0:
            problems.append(f"budget for resource {j} must be non-negative, got {b}")
    if len(instance.resources.names) != k:
        problems.append("resource names must match the number of budgets")

    if instance.n < 1:
        problems.append("instance must have at least one agent")
    if instance.family == FILLING_RATIO and k != 1:
        problems.append(f"filling_ratio requires K=1, got K={k}")

    for i, agent in enumerate(instance.agents):
        if not np.isfinite(agent.size) or agent.size <= 0:
            problems.append(f"agent {i}: size must be positive, got {agent.size}")
        dist = agent.distribution
        if len(dist.support) == 0:
            problems.append(f"agent {i}: empty type support")
            continue
        if len(dist.support) != len(dist.probs):
            problems.append(f"agent {i}: {len(dist.support)} support atoms vs {len(dist.probs)} probabilities")
            continue
        if any(p < 0 for p in dist.probs):
            problems.append(f"agent {i}: negative probability")
        total = sum(dist.probs)
        if abs(total - 1.0) > 1e-12:
            problems.append(f"agent {i}: probabilities sum to {total!r}, expected 1")
        if len(set(dist.support)) != len(dist.support):
            problems.append(f"agent {i}: duplicate support atoms")
        for t in dist.support:
            if instance.family == FILLING_RATIO:
                if isinstance(t, tuple):
                    problems.append(f"agent {i}: filling_ratio requires scalar demands")
                elif t <= 0:
                    problems.append(f"agent {i}: scalar demand must be positive, got {t}")
            else:
                if not isinstance(t, tuple):
                    problems.append(f"agent {i}: linear utilities require preference vectors")
                elif len(t) != k:
                    problems.append(f"agent {i}: preference vector of length {len(t)}, expected {k}")
                elif any(v < 0 for v in t) or max(t) <= 0:
                    problems.append(f"agent {i}: preferences must be non-negative with a positive entry")
    return problems


def require_valid(instance: Instance) -> Instance:
    """Raise ``ValueError`` listing all violations if the instance is malformed."""
    problems = validate_instance(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    return instance


def consumption(allocation: np.ndarray, instance: Instance) -> np.ndarray:
    """Per-resource consumption ``sum_i S_i * X_i`` of an (n, K) allocation."""
    x = np.asarray(allocation, dtype=float)
    sizes = np.array([a.size for a in instance.agents])
    return sizes @ x


def feasibility_gap(allocation: np.ndarray, instance: Instance) -> float:
    """Largest per-resource overconsumption; <= FEASIBILITY_TOL means feasible."""
    used = consumption(allocation, instance)
    return float(np.max(used - np.asarray(instance.budgets)))


# --- JSON serialization -----------------------------------------------------
#
# Wire format (shared by config files and the HTTP service):
#   {"agents": [{"size": 1.0, "support": [...], "probs": [...]}, ...],
#    "budgets": [...],
#    "family": "filling_ratio" | "linear"}


def instance_to_json(instance: Instance) -> dict:
    return {
        "agents": [
            {
                "size": a.size,
                "support": [list(t) if isinstance(t, tuple) else t for t in a.distribution.support],
                "probs": list(a.distribution.probs),
            }
            for a in instance.agents
        ],
        "budgets": list(instance.budgets),
        "family": instance.family,
    }


def instance_from_json(data: dict) -> Instance:
    try:
        agents = tuple(
            AgentProfile(float(a["size"]), TypeDistribution(a["support"], a["probs"]))
            for a in data["agents"]
        )
        resources = ResourceSpace(data["budgets"], data.get("names", ()))
        family = data["family"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance object: {exc}") from exc
    return Instance(agents, resources, family)


def dump_instance(instance: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_json(instance), fh, indent=2)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_json(json.load(fh))
