"""Online allocation policies behind one sequential interface.

Each policy observes one agent's realized type at a time, emits that agent's
normalized allocation, and carries its knowledge forward in an immutable
:class:`PolicyState`.  Identifiers (also used by config files, the CLI and
the HTTP service):

* ``hope_online``  -- re-solves the type-level program on the remaining
  budget, with the observed type at full weight and future agents entering
  as expected histogram mass.
* ``hope_full``    -- same idea over *all* agents (past realized, future
  expected) on the original budget, clipped to what is left.
* ``et_online`` / ``et_full`` -- per-agent re-solves where future (resp.
  future and past) agents are collapsed to their expected types.
* ``maxmin``       -- two-agent decomposition heuristic targeting the
  minimum fill rate (single resource, unit sizes).
* ``greedy``       -- hands every agent its demand until the budget runs out.
* ``adaptive_threshold`` -- equal share of the remaining budget, capped at
  the demand.
* ``proportional`` -- the constant equal split ``B / S``.
* ``offline``      -- hindsight optimum; only valid at the episode level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import FILLING_RATIO, AgentType, Instance, utility
from .solvers import TypeHistogram, offline_solution, solve_eg

POLICY_IDS = (
    "hope_online",
    "hope_full",
    "et_online",
    "et_full",
    "maxmin",
    "greedy",
    "adaptive_threshold",
    "proportional",
    "offline",
)
STEP_POLICY_IDS = POLICY_IDS[:-1]


class EpisodeExhausted(RuntimeError):
    """step() called after every agent has already been served."""


@dataclass(frozen=True)
class PolicyState:
    """A policy's knowledge when facing agent ``index``.

    ``remaining`` is the unallocated budget vector, ``observed`` the realized
    types committed so far, and ``fill_floor`` the running minimum realized
    utility (the two-node heuristic's safety cap, maintained uniformly).
    """

    instance: Instance
    index: int
    remaining: tuple
    observed: tuple
    fill_floor: float = 1.0

    @property
    def done(self) -> bool:
        return self.index >= self.instance.n


@dataclass(frozen=True)
class StepResult:
    x: tuple
    state: PolicyState
    threshold: Optional[float] = None
    converged: bool = True


@dataclass
class EpisodeResult:
    policy_id: str
    allocation: np.ndarray  # (n, K)
    realized: tuple
    thresholds: tuple
    converged: bool = True


def initial_state(instance: Instance) -> PolicyState:
    return PolicyState(instance, 0, tuple(instance.budgets), ())


# --- histogram builders -------------------------------------------------------


def expected_future_histogram(instance: Instance, index: int, observed: AgentType) -> TypeHistogram:
    """Observed type at full size plus expected mass of every later agent."""
    pairs = [(observed, instance.agents[index].size)]
    for j in range(index + 1, instance.n):
        agent = instance.agents[j]
        pairs.extend((t, agent.size * p) for t, p in zip(agent.distribution.support, agent.distribution.probs))
    return TypeHistogram.from_pairs(pairs)


def full_information_histogram(instance: Instance, observed: Sequence[AgentType]) -> TypeHistogram:
    """Realized mass for every visited agent, expected mass for the rest."""
    pairs = [(theta, instance.agents[j].size) for j, theta in enumerate(observed)]
    for j in range(len(observed), instance.n):
        agent = instance.agents[j]
        pairs.extend((t, agent.size * p) for t, p in zip(agent.distribution.support, agent.distribution.probs))
    return TypeHistogram.from_pairs(pairs)


def _expected_type(instance: Instance, index: int) -> AgentType:
    return instance.agents[index].distribution.mean()


# --- the policy classes -------------------------------------------------------


class Policy:
    """Shared step contract: validate, propose, clip into the budget, advance."""

    id: str = ""
    clip_to_remaining = True

    def check_instance(self, instance: Instance) -> None:
        """Hook for family/size restrictions; raises ValueError when unmet."""

    def step(self, state: PolicyState, theta: AgentType) -> StepResult:
        instance = state.instance
        if state.done:
            raise EpisodeExhausted(f"all {instance.n} agents already served")
        agent = instance.agents[state.index]
        if theta not in agent.distribution.support:
            raise ValueError(f"type {theta!r} is not in agent {state.index}'s support")

        x, threshold, converged = self._propose(state, theta)
        x = np.clip(np.asarray(x, dtype=float).reshape(-1), 0.0, None)
        if self.clip_to_remaining:
            x = np.minimum(x, np.asarray(state.remaining) / agent.size)
        consumed = agent.size * x
        remaining = tuple(float(max(0.0, b - c)) for b, c in zip(state.remaining, consumed))
        floor = min(state.fill_floor, utility(x, theta, instance.family))
        new_state = PolicyState(instance, state.index + 1, remaining, state.observed + (theta,), floor)
        return StepResult(tuple(float(v) for v in x), new_state, threshold, converged)

    def _propose(self, state: PolicyState, theta: AgentType):
        raise NotImplementedError


class HopeOnline(Policy):
    """Type-level re-solve on the remaining budget with expected future mass."""

    id = "hope_online"

    def _propose(self, state, theta):
        hist = expected_future_histogram(state.instance, state.index, theta)
        sol = solve_eg(hist, state.remaining, state.instance.family)
        return sol.row_for(theta), sol.threshold, sol.converged


class HopeFull(Policy):
    """Type-level re-solve over all agents on the original budget.

    For the last agent this is exactly the realized-histogram program, after
    which the row is clipped into whatever budget is actually left.
    """

    id = "hope_full"

    def _propose(self, state, theta):
        hist = full_information_histogram(state.instance, state.observed + (theta,))
        sol = solve_eg(hist, state.instance.budgets, state.instance.family)
        return sol.row_for(theta), sol.threshold, sol.converged


class ETOnline(Policy):
    """Per-agent re-solve with future agents collapsed to expected types."""

    id = "et_online"

    def _propose(self, state, theta):
        instance = state.instance
        pairs = [(theta, instance.agents[state.index].size)]
        pairs.extend(
            (_expected_type(instance, j), instance.agents[j].size)
            for j in range(state.index + 1, instance.n)
        )
        hist = TypeHistogram.from_pairs(pairs)
        sol = solve_eg(hist, state.remaining, instance.family)
        return sol.row_for(theta), sol.threshold, sol.converged


class ETFull(Policy):
    """Per-agent re-solve over all agents: past realized, future expected."""

    id = "et_full"

    def _propose(self, state, theta):
        instance = state.instance
        pairs = [(t, instance.agents[j].size) for j, t in enumerate(state.observed + (theta,))]
        pairs.extend(
            (_expected_type(instance, j), instance.agents[j].size)
            for j in range(state.index + 1, instance.n)
        )
        hist = TypeHistogram.from_pairs(pairs)
        sol = solve_eg(hist, instance.budgets, instance.family)
        return sol.row_for(theta), sol.threshold, sol.converged


class _SingleResourcePolicy(Policy):
    family_error = "requires a single-resource filling-ratio instance"

    def check_instance(self, instance: Instance) -> None:
        if instance.family != FILLING_RATIO:
            raise ValueError(f"policy {self.id!r} {self.family_error}")


class MaxMin(_SingleResourcePolicy):
    """Two-agent decomposition heuristic for the minimum fill rate.

    Carves a supply allotment for the (current, next) pair out of the
    remaining budget in proportion to expected demands, splits it by a
    demand-weighted threshold, and never lets an agent's fill rate exceed
    the running minimum.  Boundary rules: the spread term is zero when there
    is no second lookahead agent, and the final agent simply takes
    ``min(fill_floor * theta, remaining)``.
    """

    id = "maxmin"

    def check_instance(self, instance: Instance) -> None:
        super().check_instance(instance)
        if any(a.size != 1.0 for a in instance.agents):
            raise ValueError("the maxmin heuristic is defined for unit sizes only")

    def _propose(self, state, theta):
        instance = state.instance
        i, n = state.index, instance.n
        budget = state.remaining[0]
        theta = float(theta)
        if i == n - 1:
            return (min(state.fill_floor * theta, budget),), None, True

        dists = [instance.agents[j].distribution for j in range(i, n)]
        mu = [d.mean() for d in dists]
        allotment = budget * (mu[0] + mu[1]) / math.fsum(mu)
        med_next = dists[1].median()
        var_next = dists[1].variance()
        if len(dists) >= 3:
            med_after = dists[2].median()
            spread = (med_next - med_after) / ((med_next + med_after) / 2.0)
        else:
            spread = 0.0
        level = allotment * theta / (theta + med_next + spread * math.sqrt(var_next))
        return (min(level, state.fill_floor * theta),), level, True


class Greedy(_SingleResourcePolicy):
    """Full demand while supplies last."""

    id = "greedy"

    def _propose(self, state, theta):
        agent = state.instance.agents[state.index]
        return (min(float(theta), state.remaining[0] / agent.size),), None, True


class AdaptiveThreshold(_SingleResourcePolicy):
    """Equal split of the remaining budget over agents not yet served.

    With 0-based ``index`` the divisor ``n - index`` counts the current agent
    too, so the final agent divides by one.  The share is in consumption
    units and is converted to a normalized allocation by the agent's size.
    """

    id = "adaptive_threshold"

    def _propose(self, state, theta):
        agent = state.instance.agents[state.index]
        share = state.remaining[0] / (state.instance.n - state.index) / agent.size
        return (min(share, float(theta)),), None, True


class Proportional(Policy):
    """The constant equal split, blind to types.

    Exactly feasible by algebra (sizes times ``B / S`` telescopes to ``B``),
    so the generic remaining-budget clip is skipped to keep every row
    bit-identical.
    """

    id = "proportional"
    clip_to_remaining = False

    def _propose(self, state, theta):
        return state.instance.equal_share, None, True


_POLICIES = {
    cls.id: cls
    for cls in (HopeOnline, HopeFull, ETOnline, ETFull, MaxMin, Greedy, AdaptiveThreshold, Proportional)
}


def get_policy(policy_id: str) -> Policy:
    if policy_id not in _POLICIES:
        raise ValueError(f"unknown policy {policy_id!r}; expected one of {sorted(_POLICIES)}")
    return _POLICIES[policy_id]()


def run_policy(policy_id: str, instance: Instance, realized_types: Sequence[AgentType]) -> EpisodeResult:
    """Drive one policy through a full episode of realized types.

    The ``offline`` pseudo-policy is resolved in hindsight instead of being
    stepped; every other policy advances one observation at a time.
    """
    realized = tuple(realized_types)
    if len(realized) != instance.n:
        raise ValueError(f"expected {instance.n} realized types, got {len(realized)}")

    if policy_id == "offline":
        rows, sol = offline_solution(instance, realized)
        thresholds = tuple(sol.threshold for _ in range(instance.n))
        return EpisodeResult("offline", rows, realized, thresholds, sol.converged)

    policy = get_policy(policy_id)
    policy.check_instance(instance)
    state = initial_state(instance)
    rows, thresholds = [], []
    converged = True
    for i, theta in enumerate(realized):
        try:
            result = policy.step(state, theta)
        except Exception as exc:
            raise RuntimeError(f"policy {policy_id!r} failed at agent {i}: {exc}") from exc
        rows.append(result.x)
        thresholds.append(result.threshold)
        converged = converged and result.converged
        state = result.state

    allocation = np.array(rows, dtype=float)
    sizes = np.array([a.size for a in instance.agents])
    overrun = np.max(sizes @ allocation - np.asarray(instance.budgets))
    assert overrun <= 1e-9, f"policy {policy_id!r} overspent by {overrun}"
    return EpisodeResult(policy_id, allocation, realized, tuple(thresholds), converged)
