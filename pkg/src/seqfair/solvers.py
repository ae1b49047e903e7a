"""Hindsight-fair allocation solvers.

The optimal fair allocation maximizes the size-weighted log-utility sum
subject to budget feasibility.  Two fast paths cover the supported utility
families:

* filling-ratio, single resource: an exact waterfilling threshold found by
  sorting demand breakpoints and scanning the piecewise-linear budget
  function (no iteration, no tolerance);
* linear, multiple resources: proportional-response dynamics on the
  equivalent Fisher market, where each type's spending power is its
  histogram weight, bids update proportionally to utility contribution,
  prices are per-resource bid sums, and allocations are bid shares of the
  budget.

Two deliberately slow oracles (:func:`brute_force_eg`) back the fast paths in
tests: exhaustive grid search for tiny programs and projected gradient ascent
with diminishing steps for anything larger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from .core import FILLING_RATIO, LINEAR, AgentType, Instance

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200_000


class SolverError(ValueError):
    """Degenerate input that no solution can satisfy."""


@dataclass(frozen=True)
class TypeHistogram:
    """Weighted finite set of agent types (merged duplicates)."""

    types: tuple
    weights: tuple

    @classmethod
    def from_pairs(cls, pairs) -> "TypeHistogram":
        """Accumulate (type, weight) pairs, merging equal types.

        Zero-weight entries are dropped; insertion order of first occurrence
        is preserved so downstream output stays deterministic.
        """
        acc: dict = {}
        for t, w in pairs:
            w = float(w)
            if w < 0:
                raise SolverError(f"negative histogram weight {w} for type {t!r}")
            if w == 0.0:
                continue
            acc[t] = acc.get(t, 0.0) + w
        if not acc:
            raise SolverError("empty histogram: no positive weight")
        return cls(tuple(acc), tuple(acc.values()))

    @property
    def total_weight(self) -> float:
        return float(math.fsum(self.weights))

    def index_of(self, theta: AgentType) -> int:
        return self.types.index(theta)


@dataclass
class EGSolution:
    """Solved type-level program: per-type normalized allocations.

    ``threshold`` is the waterfilling level (filling-ratio only);
    ``unpriced`` lists resources valued by no type, which are deliberately
    left unallocated rather than dumped on an arbitrary type.
    """

    histogram: TypeHistogram
    allocations: np.ndarray  # (num types, K)
    kkt_residual: float
    iterations: int
    converged: bool
    threshold: Optional[float] = None
    unpriced: tuple = ()

    def row_for(self, theta: AgentType) -> np.ndarray:
        return self.allocations[self.histogram.index_of(theta)]


# --- filling-ratio: exact waterfilling ---------------------------------------


def waterfilling_usage(histogram: TypeHistogram, level: float) -> float:
    """Budget consumed at a given water level: ``sum_t w_t * min(theta_t, level)``."""
    return math.fsum(w * min(float(t), level) for t, w in zip(histogram.types, histogram.weights))


def waterfilling_threshold(histogram: TypeHistogram, budget: float) -> float:
    """Exact water level spending ``min(budget, total demand)``.

    The usage function is piecewise linear in the level with breakpoints at
    the demands, so the threshold is found by a sort and a single scan; when
    the budget covers the total demand the level is the largest demand.
    """
    if budget < 0:
        raise SolverError(f"budget must be non-negative, got {budget}")
    demands = np.array([float(t) for t in histogram.types])
    if np.any(demands <= 0):
        raise SolverError("waterfilling requires strictly positive demands")
    weights = np.array(histogram.weights)
    total = math.fsum(w * d for w, d in zip(weights, demands))
    if budget >= total:
        return float(demands.max())

    order = np.argsort(demands, kind="stable")
    d = demands[order]
    w = weights[order]
    filled = 0.0  # consumption by demands already below the level
    above = math.fsum(w)  # weight of types still at or above the level
    for k in range(len(d)):
        if filled + d[k] * above >= budget:
            return (budget - filled) / above
        filled = math.fsum([filled, w[k] * d[k]])
        above = math.fsum([above, -w[k]])
    # Unreachable: budget < total guarantees the scan terminates inside.
    return float(d[-1])


def solve_waterfilling(histogram: TypeHistogram, budget: float) -> EGSolution:
    """Per-type allocations ``min(w_f, theta, budget)`` at the exact threshold."""
    level = waterfilling_threshold(histogram, budget)
    rows = np.array([[min(level, float(t), budget)] for t in histogram.types])
    target = min(budget, math.fsum(w * float(t) for t, w in zip(histogram.types, histogram.weights)))
    residual = abs(waterfilling_usage(histogram, level) - target)
    return EGSolution(histogram, rows, residual, 0, True, threshold=level)


# --- linear utilities: proportional response on the Fisher market ------------


def _pref_matrix(histogram: TypeHistogram) -> np.ndarray:
    rows = []
    for t in histogram.types:
        if not isinstance(t, tuple):
            raise SolverError(f"linear solver needs preference vectors, got {t!r}")
        rows.append(t)
    return np.array(rows, dtype=float)


def linear_kkt_residual(
    theta: np.ndarray, weights: np.ndarray, budgets: np.ndarray, allocations: np.ndarray
) -> float:
    """Optimality error of a candidate allocation for the linear program.

    Implied dual prices are the steepest utility gradients
    ``p_k = max_t theta_tk / u_t``; at the optimum every type's price-weighted
    bundle costs exactly its normalized weight share, and every priced
    resource is exhausted.  The residual adds the worst weight-share gap to
    the worst priced-resource slack.
    """
    utilities = (theta * allocations).sum(axis=1)
    if np.any(utilities <= 0):
        return float("inf")
    active = (budgets > 0) & (theta.max(axis=0) > 0)
    grads = theta / utilities[:, None]
    prices = np.where(active, grads.max(axis=0), 0.0)
    share = weights / weights.sum()
    spend_gap = np.abs(share - share * (allocations * prices).sum(axis=1))
    consumed = weights @ allocations
    slack = np.where(active, np.maximum(budgets - consumed, 0.0) * prices, 0.0)
    return float(spend_gap.max() + slack.max())


def solve_eg_linear(
    histogram: TypeHistogram,
    budgets: Sequence[float],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    check_every: int = 50,
) -> EGSolution:
    """Proportional-response dynamics for the linear-utility program.

    Each type is a Fisher-market buyer with spending power equal to its
    weight.  Bids start uniform over the goods a type values; prices are bid
    sums; goods are allocated in proportion to bids; bids then move toward
    each good's share of the achieved utility.  Stops when the KKT residual
    drops below ``tol``; on hitting ``max_iter`` the best iterate is returned
    with ``converged=False``.
    """
    theta = _pref_matrix(histogram)
    weights = np.array(histogram.weights, dtype=float)
    budgets = np.asarray(budgets, dtype=float)
    if theta.shape[1] != budgets.shape[0]:
        raise SolverError(
            f"preference length {theta.shape[1]} does not match {budgets.shape[0]} budgets"
        )

    valued = theta.max(axis=0) > 0
    active = valued & (budgets > 0)
    unpriced = tuple(int(k) for k in np.nonzero(~valued & (budgets > 0))[0])

    # Types whose every valued resource is exhausted can no longer trade;
    # they receive zero rows and the market clears among the rest.  (Policies
    # reach this state legitimately once earlier agents deplete a resource.)
    trading = (theta[:, active].sum(axis=1) > 0) if np.any(active) else np.zeros(len(weights), bool)
    full = np.zeros((len(weights), budgets.shape[0]))
    if not np.any(trading):
        return EGSolution(histogram, full, 0.0, 0, True, unpriced=unpriced)

    theta_m = theta[trading]
    weights_m = weights[trading]

    mask = (theta_m > 0) & active[None, :]
    bids = weights_m[:, None] * mask / mask.sum(axis=1, keepdims=True)
    supply = np.where(active, budgets, 0.0)

    consumption = np.zeros_like(bids)
    best = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        prices = bids.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            consumption = np.where(prices > 0, bids / prices * supply, 0.0)
        gains = theta_m * consumption
        utilities = gains.sum(axis=1)
        bids = weights_m[:, None] * gains / utilities[:, None]
        if iterations % check_every == 0 or iterations == max_iter:
            allocations = consumption / weights_m[:, None]
            residual = linear_kkt_residual(theta_m, weights_m, supply, allocations)
            if best is None or residual < best[0]:
                best = (residual, allocations, iterations)
            if residual <= tol:
                break

    if best is None:  # max_iter below check_every
        allocations = consumption / weights_m[:, None]
        best = (linear_kkt_residual(theta_m, weights_m, supply, allocations), allocations, iterations)
    residual, allocations, at_iter = best
    full[trading] = allocations
    return EGSolution(
        histogram,
        full,
        residual,
        at_iter,
        converged=residual <= tol,
        unpriced=unpriced,
    )


def solve_eg(histogram: TypeHistogram, budgets: Sequence[float], family: str, **kwargs) -> EGSolution:
    """Dispatch to the family-appropriate solver."""
    if family == FILLING_RATIO:
        return solve_waterfilling(histogram, float(budgets[0]))
    if family == LINEAR:
        return solve_eg_linear(histogram, budgets, **kwargs)
    raise SolverError(f"unknown utility family {family!r}")


# --- realized-episode optimum -------------------------------------------------


def realized_histogram(instance: Instance, realized_types: Sequence[AgentType]) -> TypeHistogram:
    """Histogram with weight ``S_i`` per agent, equal types merged."""
    return TypeHistogram.from_pairs(
        (theta, agent.size) for theta, agent in zip(realized_types, instance.agents, strict=True)
    )


def offline_solution(instance: Instance, realized_types: Sequence[AgentType], **kwargs):
    """Hindsight optimum as (per-agent allocation matrix, type-level solution)."""
    if len(realized_types) != instance.n:
        raise ValueError(f"expected {instance.n} realized types, got {len(realized_types)}")
    budgets = np.asarray(instance.budgets, dtype=float)
    if np.all(budgets <= 0):
        zeros = np.zeros((instance.n, instance.num_resources))
        hist = realized_histogram(instance, realized_types)
        sol = EGSolution(hist, np.zeros((len(hist.types), instance.num_resources)), 0.0, 0, True)
        return zeros, sol
    hist = realized_histogram(instance, realized_types)
    sol = solve_eg(hist, budgets, instance.family, **kwargs)
    rows = np.array([sol.row_for(theta) for theta in realized_types])
    return rows, sol


def offline_optimal(instance: Instance, realized_types: Sequence[AgentType], **kwargs) -> np.ndarray:
    """Per-agent (n, K) hindsight-fair allocation for a realized episode."""
    return offline_solution(instance, realized_types, **kwargs)[0]


# --- slow test oracles --------------------------------------------------------


def _log_nsw(theta_rows, weights, allocations, family) -> float:
    total = 0.0
    for t, w, x in zip(theta_rows, weights, allocations):
        if family == FILLING_RATIO:
            u = min(float(x[0]) / float(t), 1.0)
        else:
            u = float(np.dot(t, x))
        if u <= 0:
            return -math.inf
        total += w * math.log(u)
    return total


@numba.njit(cache=True)
def _dp_grid_filling(theta, weights, budget, res):  # pragma: no cover - jitted
    """Exact optimum over consumption multiples of ``res`` (single resource).

    Dynamic program over budget cells; equivalent to exhaustively enumerating
    every on-grid feasible allocation, which keeps it independent of the
    waterfilling structure.
    """
    tcount = theta.shape[0]
    cells = int(budget / res)
    neg = -1e300
    val = np.full(cells + 1, 0.0)
    choice = np.zeros((tcount, cells + 1), dtype=np.int64)
    for t in range(tcount):
        cap = int(min(weights[t] * theta[t], budget) / res + 1e-9)
        new = np.full(cells + 1, neg)
        for b in range(cells + 1):
            best = neg
            best_a = 0
            hi = min(cap, b)
            for a in range(hi + 1):
                u = min(a * res / (weights[t] * theta[t]), 1.0)
                if u <= 0.0:
                    continue
                cand = val[b - a] + weights[t] * math.log(u)
                if cand > best:
                    best = cand
                    best_a = a
            new[b] = best
            choice[t, b] = best_a
        val = new
    b = cells
    x = np.zeros(tcount)
    for t in range(tcount - 1, -1, -1):
        a = choice[t, b]
        x[t] = a * res / weights[t]
        b -= a
    return x


def _grid_search(histogram, budgets, family, resolution) -> np.ndarray:
    """Exhaustive grid over all but the last type, which takes the leftovers."""
    types = histogram.types
    weights = np.array(histogram.weights)
    budgets = np.asarray(budgets, dtype=float)
    k = budgets.shape[0]
    tcount = len(types)

    def cap(t_idx: int) -> np.ndarray:
        if family == FILLING_RATIO:
            return np.array([min(float(types[t_idx]), budgets[0] / weights[t_idx])])
        return budgets / weights[t_idx]

    if tcount == 1:
        x = cap(0)
        if family == LINEAR:
            x = budgets / weights[0]
        return x.reshape(1, k)

    axes = []
    for t in range(tcount - 1):
        for j in range(k):
            hi = cap(t)[j]
            axes.append(np.arange(0.0, hi + resolution / 2, resolution))
    mesh = np.meshgrid(*axes, indexing="ij")
    free = np.stack([m.ravel() for m in mesh], axis=1)  # (points, (T-1)*K)
    free = free.reshape(-1, tcount - 1, k)

    spent = np.tensordot(weights[:-1], free, axes=(0, 1))  # (points, K)
    leftover = (budgets[None, :] - spent) / weights[-1]
    feasible = np.all(leftover >= -1e-12, axis=1)
    free = free[feasible]
    last = np.clip(leftover[feasible], 0.0, None)
    if family == FILLING_RATIO:
        last = np.minimum(last, float(types[-1]))

    # Log-NSW over all candidates, vectorized per type.
    total = np.zeros(len(free))
    for t in range(tcount):
        x = free[:, t, :] if t < tcount - 1 else last
        if family == FILLING_RATIO:
            u = np.minimum(x[:, 0] / float(types[t]), 1.0)
        else:
            u = x @ np.asarray(types[t], dtype=float)
        with np.errstate(divide="ignore"):
            total += weights[t] * np.log(u)
    best = int(np.nanargmax(np.where(np.isfinite(total), total, -np.inf)))
    rows = np.vstack([free[best], last[best][None, :]])
    return rows


@numba.njit(cache=True)
def _project_col(v, w, budget, cap):  # pragma: no cover - jitted
    """In-place Euclidean projection of ``v`` onto {0 <= x <= cap, w @ x <= budget}.

    KKT form ``x(lam) = clip(v - lam * w, 0, cap)`` makes consumption
    monotone in ``lam``, so the multiplier is found by bisection.
    """
    tcount = v.shape[0]
    used = 0.0
    for i in range(tcount):
        xi = v[i]
        if xi < 0.0:
            xi = 0.0
        elif xi > cap[i]:
            xi = cap[i]
        used += w[i] * xi
    if used <= budget:
        for i in range(tcount):
            xi = v[i]
            if xi < 0.0:
                xi = 0.0
            elif xi > cap[i]:
                xi = cap[i]
            v[i] = xi
        return
    lo = 0.0
    hi = 0.0
    for i in range(tcount):
        r = v[i] / w[i]
        if r > hi:
            hi = r
    for _ in range(60):
        lam = 0.5 * (lo + hi)
        used = 0.0
        for i in range(tcount):
            xi = v[i] - lam * w[i]
            if xi < 0.0:
                xi = 0.0
            elif xi > cap[i]:
                xi = cap[i]
            used += w[i] * xi
        if used > budget:
            lo = lam
        else:
            hi = lam
    for i in range(tcount):
        xi = v[i] - hi * w[i]
        if xi < 0.0:
            xi = 0.0
        elif xi > cap[i]:
            xi = cap[i]
        v[i] = xi


@numba.njit(cache=True)
def _pga_filling(theta, weights, share, budget, iters, step0):  # pragma: no cover - jitted
    tcount = theta.shape[0]
    total = 0.0
    for i in range(tcount):
        total += weights[i] * theta[i]
    scale = min(1.0, budget / total) * 0.9
    x = theta * scale + 1e-9
    avg = np.zeros(tcount)
    navg = 0
    burn = iters // 2
    for it in range(iters):
        step = step0 / math.sqrt(it + 1.0)
        for i in range(tcount):
            if x[i] < theta[i]:
                xi = x[i]
                if xi < 1e-12:
                    xi = 1e-12
                x[i] += step * share[i] / xi
        _project_col(x, weights, budget, theta)
        if it >= burn:
            for i in range(tcount):
                avg[i] += x[i]
            navg += 1
    for i in range(tcount):
        avg[i] /= max(navg, 1)
    _project_col(avg, weights, budget, theta)
    return avg


@numba.njit(cache=True)
def _pga_linear(theta, weights, share, budgets, iters, step0):  # pragma: no cover - jitted
    tcount, k = theta.shape
    nocap = np.full(tcount, np.inf)
    x = np.zeros((tcount, k))
    for j in range(k):
        for t in range(tcount):
            x[t, j] = 0.5 * budgets[j] / np.sum(weights)
    col = np.zeros(tcount)
    avg = np.zeros((tcount, k))
    navg = 0
    burn = iters // 2
    for it in range(iters):
        step = step0 / math.sqrt(it + 1.0)
        for t in range(tcount):
            u = 1e-300
            for j in range(k):
                u += theta[t, j] * x[t, j]
            for j in range(k):
                x[t, j] += step * share[t] * theta[t, j] / u
        for j in range(k):
            for t in range(tcount):
                col[t] = x[t, j]
            _project_col(col, weights, budgets[j], nocap)
            for t in range(tcount):
                x[t, j] = col[t]
        if it >= burn:
            for t in range(tcount):
                for j in range(k):
                    avg[t, j] += x[t, j]
            navg += 1
    for t in range(tcount):
        for j in range(k):
            avg[t, j] /= max(navg, 1)
    for j in range(k):
        for t in range(tcount):
            col[t] = avg[t, j]
        _project_col(col, weights, budgets[j], nocap)
        for t in range(tcount):
            avg[t, j] = col[t]
    return avg


def _projected_ascent(histogram, budgets, family, iters) -> np.ndarray:
    """Projected (sub)gradient ascent with diminishing steps, tail-averaged."""
    weights = np.array(histogram.weights, dtype=float)
    share = weights / weights.sum()
    budgets = np.asarray(budgets, dtype=float)
    if family == FILLING_RATIO:
        theta = np.array([float(t) for t in histogram.types])
        step0 = 0.5 * float(theta.max())
        x = _pga_filling(theta, weights, share, float(budgets[0]), iters, step0)
        return x.reshape(-1, 1)
    theta = np.array([t for t in histogram.types], dtype=float)
    step0 = 0.5 * float((budgets / weights.sum()).max())
    return _pga_linear(theta, weights, share, budgets, iters, step0)


def brute_force_eg(
    histogram: TypeHistogram,
    budgets: Sequence[float],
    family: str,
    grid_resolution: float = 0.05,
    method: str = "auto",
    iters: int = 1_000_000,
) -> np.ndarray:
    """Slow independent maximizer of the weighted log-utility objective.

    ``grid``: exhaustive search with the last type taking per-resource
    leftovers (at most 3 types and 2 resources).  ``pga``: projected gradient
    ascent with diminishing steps.  ``auto`` picks the grid whenever the
    program is small enough.  Test oracle only; never called by policies.
    """
    tcount = len(histogram.types)
    k = len(budgets)
    if tcount > 8:
        raise SolverError(f"oracle limited to 8 types, got {tcount}")
    if method == "auto":
        method = "grid" if (family == FILLING_RATIO or (tcount <= 3 and k <= 2)) else "pga"
    if method == "grid":
        if family == FILLING_RATIO:
            theta = np.array([float(t) for t in histogram.types])
            weights = np.array(histogram.weights, dtype=float)
            x = _dp_grid_filling(theta, weights, float(budgets[0]), grid_resolution)
            return x.reshape(-1, 1)
        if tcount > 3 or k > 2:
            raise SolverError(f"grid oracle limited to 3 types x 2 resources, got {tcount}x{k}")
        return _grid_search(histogram, budgets, family, grid_resolution)
    if method == "pga":
        return _projected_ascent(histogram, budgets, family, iters)
    raise ValueError(f"unknown oracle method {method!r}")
