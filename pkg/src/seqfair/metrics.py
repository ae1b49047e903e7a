"""Distances of a realized allocation from the fairness desiderata.

Given an episode's allocation ``X`` (n x K, normalized rows) and realized
types, these functions score how far the episode landed from envy-freeness,
Pareto-efficiency (measured as per-agent waste), proportionality, the minimum
fill rate, and the hindsight optimum (max-norm / L1 / utility gaps).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FILLING_RATIO, Instance, utility

METRIC_NAMES = (
    "delta_ef",
    "delta_pe",
    "delta_prop",
    "delta_mm",
    "delta_util",
    "dist_max",
    "dist_l1",
)


@dataclass(frozen=True)
class MetricRecord:
    """One replication's metric values for one policy."""

    policy_id: str
    seed: int
    delta_ef: float
    delta_pe: float
    delta_prop: float
    delta_mm: float
    delta_util: float
    dist_max: float
    dist_l1: float
    converged: bool = True

    def values(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _cross_utilities(x: np.ndarray, types, family: str) -> np.ndarray:
    """Matrix U with U[i, j] = value of agent j's bundle to agent i."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if family == FILLING_RATIO:
        demands = np.array([float(t) for t in types])
        return np.minimum(x[:, 0][None, :] / demands[:, None], 1.0)
    prefs = np.array([t for t in types], dtype=float)
    return prefs @ x.T


def delta_ef(x, types, family: str) -> float:
    """Worst envy: ``max_{i,j} u(X_j, theta_i) - u(X_i, theta_i)`` (>= 0)."""
    u = _cross_utilities(x, types, family)
    own = np.diag(u)
    return float(np.max(u - own[:, None]))


def delta_pe(x, instance: Instance) -> float:
    """Per-agent waste on the worst resource; negative only within solver slack."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sizes = np.array([a.size for a in instance.agents])
    leftover = np.asarray(instance.budgets) - sizes @ x
    return float(np.max(leftover) / instance.n)


def delta_prop(x, types, instance: Instance) -> float:
    """Worst shortfall against the equal split ``B / S``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    share = instance.equal_share
    gaps = [
        utility(share, theta, instance.family) - utility(x[i], theta, instance.family)
        for i, theta in enumerate(types)
    ]
    return float(max(gaps))


def delta_mm(x, types, family: str) -> float:
    """Minimum realized fill rate / utility across agents."""
    u = _cross_utilities(x, types, family)
    return float(np.min(np.diag(u)))


def delta_util(x, x_opt, types, family: str) -> float:
    """Largest per-agent utility gap against the hindsight optimum."""
    u_alg = np.diag(_cross_utilities(x, types, family))
    u_opt = np.diag(_cross_utilities(x_opt, types, family))
    return float(np.max(np.abs(u_opt - u_alg)))


def dist_max(x, x_opt) -> float:
    """Entrywise max-norm distance to the hindsight optimum."""
    return float(np.max(np.abs(np.asarray(x, dtype=float) - np.asarray(x_opt, dtype=float))))


def dist_l1(x, x_opt) -> float:
    """Entrywise L1 distance to the hindsight optimum."""
    return float(np.sum(np.abs(np.asarray(x, dtype=float) - np.asarray(x_opt, dtype=float))))


def compute_record(
    policy_id: str,
    seed: int,
    x,
    x_opt,
    types: Sequence,
    instance: Instance,
    converged: bool = True,
) -> MetricRecord:
    """All metrics for one episode, sharing a single hindsight optimum."""
    return MetricRecord(
        policy_id=policy_id,
        seed=seed,
        delta_ef=delta_ef(x, types, instance.family),
        delta_pe=delta_pe(x, instance),
        delta_prop=delta_prop(x, types, instance),
        delta_mm=delta_mm(x, types, instance.family),
        delta_util=delta_util(x, x_opt, types, instance.family),
        dist_max=dist_max(x, x_opt),
        dist_l1=dist_l1(x, x_opt),
        converged=converged,
    )


def check_eclose(
    record: MetricRecord,
    lipschitz: float,
    total_size: float,
    n: int,
    slack: float = 1e-6,
    include_pe: bool = True,
) -> list:
    """Violations of the closeness bounds implied by the max-norm distance.

    With ``eps = dist_max``: envy is bounded by ``2 L eps``, waste per agent
    by ``(S / n) eps``, and the proportionality gap by ``L eps``.  The waste
    bound presumes the hindsight optimum exhausts the budget, which fails
    when realized demand falls short of it; callers that can observe the
    optimum's waste disable it via ``include_pe``.
    """
    eps = record.dist_max
    failures = []
    if record.delta_ef > 2.0 * lipschitz * eps + slack:
        failures.append(
            f"delta_ef {record.delta_ef:.3e} exceeds 2*L*eps = {2 * lipschitz * eps:.3e}"
        )
    if include_pe and record.delta_pe > (total_size / n) * eps + slack:
        failures.append(
            f"delta_pe {record.delta_pe:.3e} exceeds (S/n)*eps = {(total_size / n) * eps:.3e}"
        )
    if record.delta_prop > lipschitz * eps + slack:
        failures.append(
            f"delta_prop {record.delta_prop:.3e} exceeds L*eps = {lipschitz * eps:.3e}"
        )
    return failures
