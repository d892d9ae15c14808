"""Beta schedules and pool selection."""

import math

import numpy as np
import pytest

from latentbo import acquisition as acq
from latentbo import gp


def fitted_state(z, y, noise=0.05):
    hyper = gp.GPHyper(log_noise_var=math.log(noise))
    return gp.fit(np.asarray(z, dtype=float), np.asarray(y, dtype=float), hyper)


class TestBetaSchedule:
    def test_constant_default_is_four(self):
        sched = acq.BetaSchedule()
        assert sched.kind == "constant"
        for t in (1, 5, 1000):
            assert acq.beta(sched, t) == 4.0

    def test_discrete_matches_printed_formula(self):
        sched = acq.BetaSchedule(kind="discrete", pool_size=1000, delta=0.05)
        expected = 2.0 * math.log(1000 * 100 / (6 * 0.05))
        np.testing.assert_allclose(acq.beta(sched, 10), expected, rtol=1e-15)

    def test_discrete_pi2_variant(self):
        base = acq.BetaSchedule(kind="discrete", pool_size=1000, delta=0.05)
        alt = acq.BetaSchedule(
            kind="discrete", pool_size=1000, delta=0.05, pi2_correction=True
        )
        got = acq.beta(alt, 10) - acq.beta(base, 10)
        np.testing.assert_allclose(got, 2.0 * math.log(math.pi**2), rtol=1e-12)

    def test_continuous_matches_printed_formula(self):
        sched = acq.BetaSchedule(kind="continuous", delta=0.1, dim=1, radius=1.0, lipschitz=1.0)
        expected = 2.0 * math.log(math.pi**2 / 0.6) + 2.0 * math.log(1.0)
        np.testing.assert_allclose(acq.beta(sched, 1), expected, rtol=1e-15)
        np.testing.assert_allclose(acq.beta(sched, 1), 5.600570790929582, atol=1e-3)

    def test_negative_values_clamped_to_zero(self):
        # tiny pool, generous delta: log argument < 1 at t = 1
        sched = acq.BetaSchedule(kind="discrete", pool_size=1, delta=0.9)
        assert acq.beta_raw(sched, 1) < 0.0
        assert acq.beta(sched, 1) == 0.0

    def test_monotone_nondecreasing_from_two(self):
        for sched in (
            acq.BetaSchedule(kind="discrete", pool_size=50, delta=0.05),
            acq.BetaSchedule(kind="continuous", delta=0.05, dim=3, radius=2.0, lipschitz=0.5),
        ):
            values = [acq.beta(sched, t) for t in range(2, 60)]
            assert all(b >= a for a, b in zip(values, values[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            acq.BetaSchedule(kind="thompson")
        with pytest.raises(ValueError):
            acq.BetaSchedule(constant=-1.0)
        with pytest.raises(ValueError):
            acq.BetaSchedule(kind="discrete", pool_size=0)
        with pytest.raises(ValueError):
            acq.BetaSchedule(kind="discrete", delta=1.0)
        with pytest.raises(ValueError):
            acq.BetaSchedule(kind="continuous", dim=0)
        with pytest.raises(ValueError):
            acq.beta(acq.BetaSchedule(), 0)


class TestUCBScore:
    def test_hand_value(self):
        post = gp.Posterior(mean=np.array([0.5]), var=np.array([0.04]))
        np.testing.assert_allclose(acq.ucb_score(post, 4.0), [0.9], rtol=1e-15)

    def test_beta_zero_is_pure_mean(self):
        post = gp.Posterior(mean=np.array([0.3, -1.0]), var=np.array([0.5, 2.0]))
        np.testing.assert_array_equal(acq.ucb_score(post, 0.0), post.mean)

    def test_zero_variance_is_pure_mean(self):
        post = gp.Posterior(mean=np.array([0.3]), var=np.array([0.0]))
        np.testing.assert_array_equal(acq.ucb_score(post, 100.0), post.mean)

    def test_rejects_negative_beta(self):
        post = gp.Posterior(mean=np.zeros(1), var=np.zeros(1))
        with pytest.raises(ValueError):
            acq.ucb_score(post, -0.5)


class TestSelect:
    def test_single_open_candidate_is_forced(self):
        state = fitted_state([[0.0], [1.0]], [0.0, 1.0])
        pool = np.array([[0.0], [0.5], [1.0]])
        chosen = np.array([True, False, True])
        got = acq.select(pool, state, acq.BetaSchedule(), 1, chosen)
        assert got == 1

    def test_prefers_higher_variance_at_equal_mean(self):
        # symmetric observations, candidates at mirrored distances: the farther
        # one keeps the same zero mean but more variance
        state = fitted_state([[-1.0], [1.0]], [0.5, -0.5])
        pool = np.array([[0.05], [3.0]])
        chosen = np.zeros(2, dtype=bool)
        got = acq.select(pool, state, acq.BetaSchedule(constant=4.0), 1, chosen)
        assert got == 1

    def test_ties_break_to_lowest_index(self):
        state = fitted_state([[0.0]], [1.0])
        pool = np.array([[5.0], [-5.0], [5.0]])  # symmetric, identical posteriors
        chosen = np.zeros(3, dtype=bool)
        got = acq.select(pool, state, acq.BetaSchedule(), 1, chosen)
        assert got == 0

    def test_never_returns_chosen_index(self):
        rng = np.random.default_rng(0)
        state = fitted_state(rng.normal(size=(4, 1)), rng.normal(size=4))
        pool = rng.normal(size=(10, 1))
        chosen = np.zeros(10, dtype=bool)
        seen = []
        for t in range(1, 11):
            idx = acq.select(pool, state, acq.BetaSchedule(), t, chosen)
            assert not chosen[idx]
            chosen[idx] = True
            seen.append(idx)
        assert len(set(seen)) == 10

    def test_exhausted_pool_raises(self):
        state = fitted_state([[0.0]], [1.0])
        with pytest.raises(acq.PoolExhaustedError):
            acq.select(np.zeros((2, 1)), state, acq.BetaSchedule(), 1, np.array([True, True]))

    def test_argmax_invariant_to_positive_affine_score_maps(self):
        rng = np.random.default_rng(1)
        state = fitted_state(rng.normal(size=(5, 1)), rng.normal(size=5))
        post = gp.posterior(state, rng.normal(size=(30, 1)))
        scores = acq.ucb_score(post, 4.0)
        for a, b in ((1.0, 50.0), (3.5, -2.0), (0.25, 0.0)):
            assert np.argmax(a * scores + b) == np.argmax(scores)
