import math

import numpy as np
import pytest

from latent_structure_lab.prob import (
    CapacityError,
    Categorical,
    Grouping,
    TallyVector,
    dirichlet_mean,
    group_outcomes,
    joint_from_grouping,
    joint_from_independent_bits,
    kl_divergence,
    log_likelihood,
    total_variation,
)


def random_categorical(rng, k):
    return Categorical.normalized(rng.exponential(size=k))


class TestCategorical:
    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            Categorical(np.array([0.5, 0.6, -0.1]))

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            Categorical(np.array([0.5, 0.4]))

    def test_uniform(self):
        u = Categorical.uniform(8)
        assert u.k == 8
        np.testing.assert_allclose(u.weights, 0.125)

    def test_weights_are_read_only(self):
        c = Categorical.uniform(4)
        with pytest.raises(ValueError):
            c.weights[0] = 0.9


class TestGrouping:
    def test_rejects_partial_cover(self):
        with pytest.raises(ValueError):
            Grouping(((0, 1), (1, 2)))

    def test_rejects_unequal_sizes(self):
        with pytest.raises(ValueError):
            Grouping(((0, 1, 2), (3,)))

    def test_dims(self):
        g = Grouping(((4, 0, 10), (1, 7, 11), (3, 6, 2), (9, 5, 8)))
        assert (g.v, g.g, g.s) == (12, 4, 3)


class TestKlDivergence:
    def test_identity_case(self):
        p = Categorical(np.array([0.25, 0.25, 0.25, 0.25]))
        assert kl_divergence(p, p) == 0.0

    def test_single_nonzero_term(self):
        p = Categorical(np.array([1.0, 0.0]))
        q = Categorical(np.array([0.5, 0.5]))
        assert kl_divergence(p, q) == pytest.approx(math.log(2), abs=1e-15)

    def test_direct_evaluation(self):
        # frozen from a direct evaluation of the definition sum
        p = Categorical(np.array([0.75, 0.25]))
        q = Categorical(np.array([0.5, 0.5]))
        assert kl_divergence(p, q) == pytest.approx(0.13081203594113697, abs=1e-12)

    def test_unsupported_mass_is_infinite(self):
        p = Categorical(np.array([0.5, 0.5]))
        q = Categorical(np.array([1.0, 0.0]))
        assert kl_divergence(p, q) == math.inf

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence(Categorical.uniform(2), Categorical.uniform(3))

    def test_nonnegative_and_zero_iff_equal(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            k = int(rng.integers(2, 12))
            p = random_categorical(rng, k)
            q = random_categorical(rng, k)
            assert kl_divergence(p, q) >= -1e-12
            assert kl_divergence(p, p) == 0.0


class TestLogLikelihood:
    def test_empty_counts(self):
        assert log_likelihood(TallyVector.zeros(5), Categorical.uniform(5)) == 0.0

    def test_uniform_q(self):
        t = TallyVector(np.array([2.0, 1.0]))
        assert log_likelihood(t, Categorical.uniform(2)) == pytest.approx(
            -2.0794415416798357, abs=1e-12
        )

    def test_direct_evaluation(self):
        # frozen from a direct evaluation of the sum
        t = TallyVector(np.array([3.0, 1.0]))
        q = Categorical(np.array([0.75, 0.25]))
        assert log_likelihood(t, q) == pytest.approx(-2.249340578475233, abs=1e-12)

    def test_data_on_zero_is_minus_infinity(self):
        t = TallyVector(np.array([0.0, 1.0]))
        q = Categorical(np.array([1.0, 0.0]))
        assert log_likelihood(t, q) == -math.inf


class TestDirichletMean:
    def test_empty_data_gives_prior_mean(self):
        est = dirichlet_mean(TallyVector.zeros(8), 1.0)
        np.testing.assert_allclose(est.weights, 0.125)

    def test_formula(self):
        est = dirichlet_mean(TallyVector(np.array([3.0, 1.0])), 1.0)
        np.testing.assert_allclose(est.weights, [4 / 6, 2 / 6])

    def test_formula_k8(self):
        est = dirichlet_mean(TallyVector(np.array([15.0, 1, 0, 0, 0, 0, 0, 0])), 1.0)
        np.testing.assert_allclose(est.weights, [16 / 24] + [2 / 24] + [1 / 24] * 6)

    def test_requires_positive_pseudocount(self):
        with pytest.raises(ValueError):
            dirichlet_mean(TallyVector.zeros(4), 0.0)

    def test_converges_to_empirical(self):
        p = Categorical(np.array([0.5, 0.3, 0.15, 0.05]))
        previous = math.inf
        for n in (10, 100, 1000, 10000, 100000):
            counts = np.round(n * p.weights)
            kl = kl_divergence(p, dirichlet_mean(TallyVector(counts), 1.0))
            assert kl < previous
            previous = kl
        assert previous < 1e-6


class TestJointFromIndependentBits:
    def test_fair_bits(self):
        joint = joint_from_independent_bits([0.5, 0.5])
        np.testing.assert_allclose(joint.weights, 0.25)

    def test_deterministic_bits(self):
        joint = joint_from_independent_bits([1.0, 0.0])
        # pattern 10 (var0 set, var1 clear) carries all mass
        np.testing.assert_allclose(joint.weights, [0.0, 0.0, 1.0, 0.0])

    def test_product_evaluation(self):
        joint = joint_from_independent_bits([0.75, 0.25, 0.5])
        assert joint.weights[0b101] == pytest.approx(0.28125, abs=1e-15)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            joint_from_independent_bits([0.5] * 21)


class TestJointFromGrouping:
    def test_single_group_is_the_joint(self):
        dist = Categorical(np.array([0.1, 0.2, 0.3, 0.4]))
        joint = joint_from_grouping(Grouping(((0, 1),)), [dist])
        np.testing.assert_allclose(joint.weights, dist.weights)

    def test_slot_scatter(self):
        g = Grouping(((1,), (0,)))
        dists = [Categorical(np.array([0.9, 0.1])), Categorical(np.array([0.6, 0.4]))]
        joint = joint_from_grouping(g, dists)
        # var0=1, var1=0 -> pattern 10: group0 (var1) outcome 0, group1 (var0) outcome 1
        assert joint.weights[0b10] == pytest.approx(0.36, abs=1e-15)

    def test_uniform_groups_give_uniform_joint(self):
        g = Grouping(((2, 0), (3, 1)))
        joint = joint_from_grouping(g, [Categorical.uniform(4)] * 2)
        np.testing.assert_allclose(joint.weights, 1 / 16)

    def test_matches_independent_bits_with_single_slots(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            v = int(rng.integers(1, 8))
            probs = rng.uniform(size=v)
            order = rng.permutation(v)
            g = Grouping(tuple((int(i),) for i in order))
            dists = [
                Categorical(np.array([1 - probs[i], probs[i]])) for i in order
            ]
            a = joint_from_independent_bits(probs)
            b = joint_from_grouping(g, dists)
            np.testing.assert_allclose(a.weights, b.weights, atol=1e-14)

    def test_kl_decomposes_over_shared_grouping(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            g = Grouping(tuple(map(tuple, rng.permutation(12).reshape(4, 3))))
            truth = [random_categorical(rng, 8) for _ in range(4)]
            model = [random_categorical(rng, 8) for _ in range(4)]
            whole = kl_divergence(joint_from_grouping(g, truth), joint_from_grouping(g, model))
            parts = sum(kl_divergence(t, m) for t, m in zip(truth, model))
            assert whole == pytest.approx(parts, abs=1e-9)


def test_group_outcomes_msb_convention():
    # ordered bits (1, 1, 0) denote outcome 6
    g = Grouping(((0, 1, 2),))
    pattern = 0b110
    assert group_outcomes([pattern], g)[0, 0] == 6


def test_total_variation():
    a = Categorical(np.array([1.0, 0.0]))
    b = Categorical(np.array([0.0, 1.0]))
    assert total_variation(a, b) == 1.0
    assert total_variation(a, a) == 0.0
