import numpy as np
import pytest

from seqfair.core import FILLING_RATIO, LINEAR, TypeDistribution, consumption, make_instance
from seqfair.distributions import SeededRng, discretized_gaussian, sample_episode, two_point_uniform
from seqfair.metrics import delta_pe
from seqfair.policies import (
    STEP_POLICY_IDS,
    EpisodeExhausted,
    expected_future_histogram,
    full_information_histogram,
    get_policy,
    initial_state,
    run_policy,
)
from seqfair.solvers import offline_optimal, realized_histogram


def degenerate_fr(demands, budget, sizes=None):
    sizes = sizes if sizes is not None else [1.0] * len(demands)
    dists = [TypeDistribution((float(d),), (1.0,)) for d in demands]
    return make_instance(sizes, dists, [budget], FILLING_RATIO)


class TestStepContract:
    def test_budget_accounting(self, two_site_instance):
        policy = get_policy("greedy")
        state = initial_state(two_site_instance)
        result = policy.step(state, 1.2)
        assert result.state.remaining[0] == pytest.approx(2.0 - 1.2)
        assert result.state.index == 1
        assert result.state.observed == (1.2,)

    def test_exhausted_episode(self, two_site_instance):
        policy = get_policy("greedy")
        state = initial_state(two_site_instance)
        for theta in (1.2, 0.8):
            state = policy.step(state, theta).state
        with pytest.raises(EpisodeExhausted):
            policy.step(state, 1.2)

    def test_type_outside_support(self, two_site_instance):
        with pytest.raises(ValueError, match="support"):
            get_policy("hope_online").step(initial_state(two_site_instance), 5.0)

    def test_unknown_policy(self):
        with pytest.raises(ValueError, match="unknown policy"):
            get_policy("oracle")


class TestHopeOnline:
    def test_single_agent_gets_hindsight_optimum(self):
        inst = degenerate_fr([5.0], 10.0)
        result = get_policy("hope_online").step(initial_state(inst), 5.0)
        assert result.x[0] == pytest.approx(5.0)
        inst = degenerate_fr([12.0], 10.0)
        result = get_policy("hope_online").step(initial_state(inst), 12.0)
        assert result.x[0] == pytest.approx(10.0)

    def test_two_agent_threshold(self, two_site_instance):
        result = get_policy("hope_online").step(initial_state(two_site_instance), 1.2)
        assert result.x[0] == pytest.approx(1.0 + 0.2 / 3)
        assert result.threshold == pytest.approx(1.0 + 0.2 / 3)

    def test_zero_remaining_budget(self, two_site_instance):
        state = initial_state(two_site_instance)
        state = get_policy("greedy").step(state, 1.2).state
        drained = state.__class__(state.instance, state.index, (0.0,), state.observed)
        assert get_policy("hope_online").step(drained, 0.8).x[0] == 0.0

    def test_degenerate_distributions_collapse_to_offline(self):
        rng = np.random.default_rng(21)
        for _ in range(15):
            n = int(rng.integers(1, 7))
            demands = rng.uniform(1.0, 20.0, size=n)
            budget = float(rng.uniform(0.5, 1.2) * demands.sum())
            inst = degenerate_fr(demands, budget)
            types = tuple(float(d) for d in demands)
            episode = run_policy("hope_online", inst, types)
            x_opt = offline_optimal(inst, types)
            assert np.max(np.abs(episode.allocation - x_opt)) < 1e-9


class TestHopeFull:
    def test_single_agent_matches_hope_online(self):
        inst = degenerate_fr([5.0], 10.0)
        a = get_policy("hope_online").step(initial_state(inst), 5.0)
        b = get_policy("hope_full").step(initial_state(inst), 5.0)
        assert a.x == b.x

    def test_first_step_matches_hope_online(self, two_site_instance):
        # With the full budget untouched both solve the same program.
        a = get_policy("hope_online").step(initial_state(two_site_instance), 1.2)
        b = get_policy("hope_full").step(initial_state(two_site_instance), 1.2)
        assert a.x == pytest.approx(b.x)

    def test_last_step_program_is_the_realized_program(self, two_site_instance):
        realized = (1.2, 0.8)
        hist = full_information_histogram(two_site_instance, realized)
        assert hist == realized_histogram(two_site_instance, realized)


class TestExpectedType:
    def test_degenerate_matches_hope(self):
        inst = degenerate_fr([5.0, 9.0], 10.0)
        for pid_et, pid_hope in (("et_online", "hope_online"), ("et_full", "hope_full")):
            a = run_policy(pid_et, inst, (5.0, 9.0))
            b = run_policy(pid_hope, inst, (5.0, 9.0))
            assert np.allclose(a.allocation, b.allocation, atol=1e-12)

    def test_et_online_two_agent_example(self, two_site_instance):
        result = get_policy("et_online").step(initial_state(two_site_instance), 1.2)
        assert result.x[0] == pytest.approx(1.0)
        assert result.threshold == pytest.approx(1.0)

    def test_zero_budget(self, two_site_instance):
        state = initial_state(two_site_instance)
        drained = state.__class__(state.instance, 0, (0.0,), ())
        assert get_policy("et_online").step(drained, 1.2).x[0] == 0.0


class TestMaxMin:
    def test_first_agent_formula(self):
        dists = [
            TypeDistribution((4.0, 6.0), (0.5, 0.5)),  # mean 5, realized 6
            TypeDistribution((5.0,), (1.0,)),  # mean 5, median 5, variance 0
        ]
        inst = make_instance([1.0, 1.0], dists, [10.0], FILLING_RATIO)
        result = get_policy("maxmin").step(initial_state(inst), 6.0)
        assert result.x[0] == pytest.approx(10.0 * 6.0 / 11.0)

    def test_last_agent_rule(self, two_site_instance):
        policy = get_policy("maxmin")
        state = policy.step(initial_state(two_site_instance), 1.2).state
        result = policy.step(state, 0.8)
        floor = state.fill_floor
        assert result.x[0] == pytest.approx(min(floor * 0.8, state.remaining[0]))

    def test_zero_budget(self, two_site_instance):
        state = initial_state(two_site_instance)
        drained = state.__class__(state.instance, 0, (0.0,), ())
        assert get_policy("maxmin").step(drained, 1.2).x[0] == 0.0

    def test_fill_floor_never_increases(self):
        dist = discretized_gaussian(15.0, 3.0, 20)
        inst = make_instance([1.0] * 12, [dist] * 12, [180.0], FILLING_RATIO)
        types = sample_episode(inst, SeededRng(4))
        policy = get_policy("maxmin")
        state = initial_state(inst)
        floors = [state.fill_floor]
        for theta in types:
            state = policy.step(state, theta).state
            floors.append(state.fill_floor)
        assert all(a >= b for a, b in zip(floors, floors[1:]))

    def test_rejects_nonunit_sizes_and_linear(self):
        inst = degenerate_fr([5.0, 6.0], 10.0, sizes=[2.0, 1.0])
        with pytest.raises(ValueError, match="unit sizes"):
            run_policy("maxmin", inst, (5.0, 6.0))
        lin = make_instance(
            [1.0], [TypeDistribution(((1.0, 2.0),), (1.0,))], [1.0, 1.0], LINEAR
        )
        with pytest.raises(ValueError, match="filling-ratio"):
            run_policy("maxmin", lin, ((1.0, 2.0),))


class TestSimpleBaselines:
    def test_greedy_depletes_budget(self):
        inst = degenerate_fr([3.0, 4.0], 5.0)
        episode = run_policy("greedy", inst, (3.0, 4.0))
        assert episode.allocation.ravel() == pytest.approx([3.0, 2.0])

    def test_greedy_ample_budget(self):
        inst = degenerate_fr([3.0, 4.0], 20.0)
        episode = run_policy("greedy", inst, (3.0, 4.0))
        assert episode.allocation.ravel() == pytest.approx([3.0, 4.0])

    def test_greedy_no_waste_when_demand_exceeds_budget(self):
        rng = np.random.default_rng(22)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            demands = rng.uniform(1.0, 10.0, size=n)
            budget = float(rng.uniform(0.3, 0.95) * demands.sum())
            inst = degenerate_fr(demands, budget)
            episode = run_policy("greedy", inst, tuple(float(d) for d in demands))
            assert delta_pe(episode.allocation, inst) <= 1e-12

    def test_adaptive_threshold_equal_share(self, two_site_instance):
        episode = run_policy("adaptive_threshold", two_site_instance, (1.2, 0.8))
        assert episode.allocation.ravel() == pytest.approx([1.0, 0.8])

    def test_adaptive_threshold_single_agent(self):
        inst = degenerate_fr([5.0], 3.0)
        assert run_policy("adaptive_threshold", inst, (5.0,)).allocation[0, 0] == 3.0
        inst = degenerate_fr([0.1], 3.0)
        assert run_policy("adaptive_threshold", inst, (0.1,)).allocation[0, 0] == pytest.approx(0.1)

    def test_proportional_constant_rows(self):
        support = [(1.0, 0.0), (0.0, 2.0)]
        dist = TypeDistribution(support, (0.5, 0.5))
        inst = make_instance([1.0, 3.0], [dist, dist], [2.0, 4.0], LINEAR)
        episode = run_policy("proportional", inst, (support[0], support[1]))
        assert np.allclose(episode.allocation, [[0.5, 1.0], [0.5, 1.0]])
        used = consumption(episode.allocation, inst)
        assert used == pytest.approx([2.0, 4.0])


class TestRunPolicy:
    def test_offline_pseudo_policy(self, two_site_instance):
        episode = run_policy("offline", two_site_instance, (1.2, 0.8))
        assert episode.allocation.ravel() == pytest.approx([1.2, 0.8])

    def test_single_agent_hope_equals_optimum(self):
        inst = degenerate_fr([7.0], 5.0)
        episode = run_policy("hope_online", inst, (7.0,))
        assert np.allclose(episode.allocation, offline_optimal(inst, (7.0,)))

    def test_wrong_episode_length(self, two_site_instance):
        with pytest.raises(ValueError, match="realized types"):
            run_policy("greedy", two_site_instance, (1.2,))

    def test_every_policy_feasible_on_random_episodes(self):
        dist = two_point_uniform(1.0, 2.0)
        gauss = discretized_gaussian(15.0, 3.0, 20)
        rng = SeededRng(77)
        episodes = 0
        for rep in range(125):
            for base, n, budget_scale in ((dist, 8, 0.8), (gauss, 6, 0.9)):
                inst = make_instance([1.0] * n, [base] * n, [1.0], FILLING_RATIO)
                budget = budget_scale * sum(
                    d.mean() for d in (a.distribution for a in inst.agents)
                )
                inst = make_instance([1.0] * n, [base] * n, [budget], FILLING_RATIO)
                types = sample_episode(inst, rng.replication(rep))
                for pid in STEP_POLICY_IDS:
                    episode = run_policy(pid, inst, types)
                    used = consumption(episode.allocation, inst)
                    assert used[0] <= inst.budgets[0] + 1e-9, pid
                    episodes += 1
        assert episodes == 125 * 2 * len(STEP_POLICY_IDS)

    def test_thresholds_recorded_for_resolving_policies(self, two_site_instance):
        episode = run_policy("hope_online", two_site_instance, (1.2, 0.8))
        assert episode.thresholds[0] == pytest.approx(1.0 + 0.2 / 3)
        assert all(t is not None for t in episode.thresholds)
        greedy = run_policy("greedy", two_site_instance, (1.2, 0.8))
        assert all(t is None for t in greedy.thresholds)


def test_expected_future_histogram_weights(two_site_instance):
    hist = expected_future_histogram(two_site_instance, 0, 1.2)
    weights = dict(zip(hist.types, hist.weights))
    assert weights[1.2] == pytest.approx(1.5)
    assert weights[0.8] == pytest.approx(0.5)
