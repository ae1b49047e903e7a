import math

import numpy as np
import pytest

from seqfair.core import FILLING_RATIO, make_instance
from seqfair.distributions import (
    COUNTY_MEANS,
    PRODUCT_WEIGHTS,
    SeededRng,
    bernoulli_preference_profiles,
    discretized_gaussian,
    distribution_from_spec,
    fbst_profiles,
    sample_episode,
    truncated_poisson,
    two_point_uniform,
)


class TestDiscretizedGaussian:
    def test_mass_and_symmetry(self):
        dist = discretized_gaussian(15.0, 3.0, 20)
        assert len(dist.support) == 20
        assert sum(dist.probs) == pytest.approx(1.0, abs=1e-12)
        mids = np.array(dist.support)
        probs = np.array(dist.probs)
        assert np.allclose(mids + mids[::-1], 30.0, atol=1e-9)
        assert np.allclose(probs, probs[::-1], atol=1e-9)

    def test_mean_close_to_target(self):
        dist = discretized_gaussian(15.0, 3.0, 20)
        mean = sum(p * t for t, p in zip(dist.support, dist.probs))
        assert abs(mean - 15.0) < 0.01

    def test_two_buckets_at_zero_mean_clamp_positive(self):
        dist = discretized_gaussian(0.0, 1.0, 2)
        assert dist.probs == pytest.approx((0.5, 0.5))
        assert all(t > 0 for t in dist.support)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            discretized_gaussian(15.0, 0.0, 20)
        with pytest.raises(ValueError):
            discretized_gaussian(15.0, 3.0, 1)


class TestTruncatedPoisson:
    def test_total_mass(self):
        dist = truncated_poisson(10.0, 20)
        assert sum(dist.probs) == pytest.approx(1.0, abs=1e-12)
        assert dist.support == tuple(float(j) for j in range(1, 21))

    def test_mode_probability_matches_pmf(self):
        dist = truncated_poisson(10.0, 20)
        expected = math.exp(-10.0) * 10.0**10 / math.factorial(10)
        p10 = dist.probs[dist.support.index(10.0)]
        assert p10 == pytest.approx(expected, abs=1e-6)
        assert p10 == pytest.approx(0.12511, abs=1e-5)

    def test_folded_mass_boosts_one(self):
        dist = truncated_poisson(10.0, 20)
        bare = math.exp(-10.0) * 10.0
        assert dist.probs[dist.support.index(1.0)] > bare


def test_two_point_uniform():
    dist = two_point_uniform(1.0, 2.0)
    assert dist.support == (1.0, 2.0)
    assert dist.probs == (0.5, 0.5)
    surrogate = two_point_uniform(0.8, 1.2)
    assert surrogate.support == (0.8, 1.2)
    atom = two_point_uniform(3.0, 3.0)
    assert atom.support == (3.0,) and atom.probs == (1.0,)


class TestFbstProfiles:
    def test_six_counties(self):
        profiles = fbst_profiles()
        assert len(profiles) == 6
        assert sum(COUNTY_MEANS) == pytest.approx(99.98)
        means = [p.distribution.mean() for p in profiles]
        # positive clamping of low buckets nudges small-county means upward
        assert sum(means) == pytest.approx(99.98, abs=0.2)
        for p, m in zip(profiles, COUNTY_MEANS):
            assert sum(p.distribution.probs) == pytest.approx(1.0, abs=1e-12)
            assert p.distribution.mean() == pytest.approx(m, abs=0.05)
            assert min(p.distribution.support) > 0
            assert p.size == 1.0


class TestBernoulliPreferences:
    def test_support_structure(self):
        dist = bernoulli_preference_profiles(SeededRng(7))
        assert len(dist.support) == 8
        assert all(p == pytest.approx(1.0 / 8) for p in dist.probs)
        for vec in dist.support:
            assert len(vec) == len(PRODUCT_WEIGHTS)
            assert all(v in (0.0, w) for v, w in zip(vec, PRODUCT_WEIGHTS))
            assert max(vec) > 0

    def test_seed_determinism(self):
        a = bernoulli_preference_profiles(SeededRng(7))
        b = bernoulli_preference_profiles(SeededRng(7))
        assert a.support == b.support
        assert a.support != bernoulli_preference_profiles(SeededRng(8)).support

    def test_distinct_atoms(self):
        for seed in range(10):
            dist = bernoulli_preference_profiles(SeededRng(seed))
            assert len(set(dist.support)) == 8


class TestSampleEpisode:
    def test_degenerate_supports(self):
        from seqfair.core import TypeDistribution

        dists = [TypeDistribution((d,), (1.0,)) for d in (3.0, 7.0)]
        inst = make_instance([1.0, 1.0], dists, [5.0], FILLING_RATIO)
        assert sample_episode(inst, SeededRng(0)) == (3.0, 7.0)

    def test_seed_reproducibility(self):
        dist = discretized_gaussian(15.0, 3.0, 20)
        inst = make_instance([1.0] * 10, [dist] * 10, [150.0], FILLING_RATIO)
        a = sample_episode(inst, SeededRng(42).replication(3))
        b = sample_episode(inst, SeededRng(42).replication(3))
        assert a == b
        assert a != sample_episode(inst, SeededRng(42).replication(4))

    def test_empirical_frequencies(self):
        from seqfair.core import TypeDistribution

        dist = TypeDistribution((1.0, 2.0, 5.0), (0.2, 0.5, 0.3))
        inst = make_instance([1.0], [dist], [2.0], FILLING_RATIO)
        draws = 100_000
        root = SeededRng(9)
        counts = {t: 0 for t in dist.support}
        for rep in range(draws):
            counts[sample_episode(inst, root.replication(rep))[0]] += 1
        for t, p in zip(dist.support, dist.probs):
            sigma = math.sqrt(p * (1 - p) * draws)
            assert abs(counts[t] - p * draws) < 3 * sigma + 1


def test_distribution_specs():
    g = distribution_from_spec({"kind": "gaussian", "params": {"mean": 15, "variance": 3}})
    assert len(g.support) == 20
    p = distribution_from_spec({"kind": "poisson", "params": {"lambda": 10, "cap": 20}})
    assert len(p.support) == 20
    u = distribution_from_spec({"kind": "uniform2", "params": {"lo": 1, "hi": 2}})
    assert u.support == (1.0, 2.0)
    e = distribution_from_spec({"kind": "empirical", "params": {"support": [2.0], "probs": [1.0]}})
    assert e.support == (2.0,)
    b = distribution_from_spec({"kind": "bernoulli_prefs", "params": {"seed": 7}})
    assert len(b.support) == 8
    with pytest.raises(ValueError):
        distribution_from_spec({"kind": "zipf", "params": {}})
