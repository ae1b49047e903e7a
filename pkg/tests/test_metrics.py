import numpy as np
import pytest

from seqfair.core import FILLING_RATIO, LINEAR, TypeDistribution, make_instance
from seqfair.distributions import SeededRng, discretized_gaussian, sample_episode
from seqfair.metrics import (
    MetricRecord,
    check_eclose,
    compute_record,
    delta_ef,
    delta_mm,
    delta_pe,
    delta_prop,
    delta_util,
    dist_l1,
    dist_max,
)
from seqfair.policies import STEP_POLICY_IDS, run_policy
from seqfair.solvers import offline_optimal


def fr_instance(demands, budget, sizes=None):
    sizes = sizes if sizes is not None else [1.0] * len(demands)
    dists = [TypeDistribution((float(d),), (1.0,)) for d in demands]
    return make_instance(sizes, dists, [budget], FILLING_RATIO)


class TestDeltaEF:
    def test_identical_rows(self):
        x = np.array([[1.5], [1.5], [1.5]])
        assert delta_ef(x, (2.0, 2.0, 2.0), FILLING_RATIO) == 0.0

    def test_starved_agent_envies(self):
        x = np.array([[0.0], [2.0]])
        assert delta_ef(x, (1.0, 1.0), FILLING_RATIO) == pytest.approx(1.0)

    def test_hindsight_optimum_is_envy_free(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            n = int(rng.integers(2, 8))
            demands = rng.uniform(1.0, 20.0, size=n)
            budget = float(rng.uniform(0.5, 1.2) * demands.sum())
            inst = fr_instance(demands, budget)
            types = tuple(float(d) for d in demands)
            assert delta_ef(offline_optimal(inst, types), types, FILLING_RATIO) <= 1e-9


class TestDeltaPE:
    def test_fully_spent(self):
        inst = fr_instance([5.0, 5.0], 4.0)
        x = np.array([[2.0], [2.0]])
        assert delta_pe(x, inst) == 0.0

    def test_waste_divided_by_agents(self):
        inst = fr_instance([5.0] * 4, 10.0)
        x = np.full((4, 1), 2.0)  # spends 8 of 10
        assert delta_pe(x, inst) == pytest.approx(0.5)

    def test_multi_resource_worst_case(self):
        dist = TypeDistribution(((1.0, 1.0),), (1.0,))
        inst = make_instance([1.0, 1.0], [dist, dist], [4.0, 6.0], LINEAR)
        x = np.array([[1.0, 1.0], [1.0, 1.0]])  # leaves (2, 4)
        assert delta_pe(x, inst) == pytest.approx(2.0)


class TestDeltaProp:
    def test_proportional_is_exact_zero(self):
        dist = TypeDistribution(((1.0, 2.0), (2.0, 1.0)), (0.5, 0.5))
        inst = make_instance([1.0, 1.0], [dist, dist], [2.0, 2.0], LINEAR)
        episode = run_policy("proportional", inst, ((1.0, 2.0), (2.0, 1.0)))
        assert delta_prop(episode.allocation, episode.realized, inst) == 0.0
        assert delta_ef(episode.allocation, episode.realized, LINEAR) == 0.0

    def test_starved_agent_with_ample_share(self):
        inst = fr_instance([1.0, 1.0], 4.0)
        x = np.zeros((2, 1))
        assert delta_prop(x, (1.0, 1.0), inst) == pytest.approx(1.0)

    def test_hindsight_optimum_is_proportional(self):
        rng = np.random.default_rng(32)
        for _ in range(25):
            n = int(rng.integers(1, 8))
            demands = rng.uniform(1.0, 20.0, size=n)
            budget = float(rng.uniform(0.5, 1.2) * demands.sum())
            inst = fr_instance(demands, budget)
            types = tuple(float(d) for d in demands)
            assert delta_prop(offline_optimal(inst, types), types, inst) <= 1e-9


class TestDeltaMM:
    def test_everyone_at_demand(self):
        x = np.array([[5.0], [7.0]])
        assert delta_mm(x, (5.0, 7.0), FILLING_RATIO) == 1.0

    def test_starved_agent(self):
        x = np.array([[5.0], [0.0]])
        assert delta_mm(x, (5.0, 7.0), FILLING_RATIO) == 0.0

    def test_waterfilled_example(self):
        x = np.array([[5.0], [6.5], [6.5]])
        assert delta_mm(x, (5.0, 10.0, 15.0), FILLING_RATIO) == pytest.approx(6.5 / 15.0)


class TestDeltaUtil:
    def test_zero_at_optimum(self):
        x = np.array([[1.0], [2.0]])
        assert delta_util(x, x, (2.0, 4.0), FILLING_RATIO) == 0.0

    def test_single_starved_agent(self):
        assert delta_util(np.array([[0.0]]), np.array([[3.0]]), (3.0,), FILLING_RATIO) == 1.0

    def test_bounded_by_lipschitz_times_distance(self):
        rng = np.random.default_rng(33)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            demands = rng.uniform(1.0, 10.0, size=n)
            inst = fr_instance(demands, 10.0)
            types = tuple(float(d) for d in demands)
            x = rng.uniform(0.0, 10.0, size=(n, 1))
            y = rng.uniform(0.0, 10.0, size=(n, 1))
            bound = inst.lipschitz * dist_max(x, y) + 1e-12
            assert delta_util(x, y, types, FILLING_RATIO) <= bound


class TestDistances:
    def test_equal_matrices(self):
        x = np.ones((3, 2))
        assert dist_max(x, x) == 0.0
        assert dist_l1(x, x) == 0.0

    def test_hand_example(self):
        diff = np.array([[0.5, -2.0], [1.0, 0.0]])
        x_opt = np.zeros((2, 2))
        assert dist_max(diff, x_opt) == pytest.approx(2.0)
        assert dist_l1(diff, x_opt) == pytest.approx(3.5)

    def test_two_site_worst_branch(self, two_site_instance):
        # A policy pinned at 1.0 for the first agent misses the mixed-branch
        # hindsight optimum by the full demand spread.
        alloc = np.array([[1.0], [0.8]])
        x_opt = offline_optimal(two_site_instance, (1.2, 0.8))
        assert dist_max(alloc, x_opt) == pytest.approx(0.2)


class TestCheckEclose:
    def record(self, **kw):
        base = dict(
            policy_id="x", seed=0, delta_ef=0.0, delta_pe=0.0, delta_prop=0.0,
            delta_mm=1.0, delta_util=0.0, dist_max=0.0, dist_l1=0.0,
        )
        base.update(kw)
        return MetricRecord(**base)

    def test_zero_distance_trivially_holds(self):
        assert check_eclose(self.record(), 1.0, 2.0, 2) == []

    def test_fabricated_envy_violation(self):
        rec = self.record(delta_ef=3.0, dist_max=1.0)
        failures = check_eclose(rec, 1.0, 2.0, 2)
        assert len(failures) == 1 and "delta_ef" in failures[0]

    def test_pe_clause_can_be_disabled(self):
        rec = self.record(delta_pe=5.0, dist_max=0.0)
        assert check_eclose(rec, 1.0, 2.0, 2, include_pe=False) == []
        assert len(check_eclose(rec, 1.0, 2.0, 2)) == 1

    def test_pathwise_bounds_across_policies(self):
        dist = discretized_gaussian(15.0, 3.0, 20)
        n = 10
        budget = 0.8 * n * dist.mean()
        inst = make_instance([1.0] * n, [dist] * n, [budget], FILLING_RATIO)
        rng = SeededRng(34)
        for rep in range(15):
            types = sample_episode(inst, rng.replication(rep))
            assert sum(types) >= budget  # optimum exhausts the budget
            x_opt = offline_optimal(inst, types)
            for pid in STEP_POLICY_IDS:
                episode = run_policy(pid, inst, types)
                rec = compute_record(pid, rep, episode.allocation, x_opt, types, inst)
                assert check_eclose(rec, inst.lipschitz, inst.effective_size, n) == []


def test_permutation_covariance():
    rng = np.random.default_rng(35)
    demands = rng.uniform(1.0, 20.0, size=5)
    budget = 0.7 * float(demands.sum())
    inst = fr_instance(demands, budget)
    types = tuple(float(d) for d in demands)
    x_opt = offline_optimal(inst, types)
    x = np.clip(x_opt + rng.normal(0, 1, size=x_opt.shape), 0.0, None) * 0.5
    base = compute_record("p", 0, x, x_opt, types, inst)

    perm = rng.permutation(5)
    inst_p = fr_instance(demands[perm], budget)
    types_p = tuple(float(d) for d in demands[perm])
    base_p = compute_record("p", 0, x[perm], x_opt[perm], types_p, inst_p)
    for name, value in base.values().items():
        assert base_p.values()[name] == pytest.approx(value, abs=1e-12)
