"""Tests for Monte Carlo estimators, resampling, and the bootstrap filter."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bayesfilt.gauss import Gaussian
from bayesfilt.kalman import filter_sequence
from bayesfilt.smc import (
    ParticleSet,
    ProposalKind,
    ZeroTotalWeight,
    ess,
    importance_estimate,
    mc_integrate,
    particle_filter,
    run_bootstrap_filter,
    sis_step,
    systematic_resample,
    write_pf_csv,
)
from bayesfilt.ssm import (
    LinearGaussianSSM,
    NonlinearSSM,
    nonlinear_from_linear_1d,
    simulate,
    ungm_model,
)


def uniform_particles(states, rng=None):
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    return ParticleSet(states=states, weights=np.full(n, 1.0 / n))


def scalar_linear(f=0.9, q=0.3, r=0.5, m0=0.0, p0=1.0):
    return LinearGaussianSSM(
        F=np.array([[f]]),
        H=np.array([[1.0]]),
        Q=np.array([[q]]),
        R=np.array([[r]]),
        initial=Gaussian(np.array([m0]), np.array([[p0]])),
    )


class TestParticleSet:
    def test_normalization_required(self):
        with pytest.raises(ValueError):
            ParticleSet(states=np.zeros((3, 1)), weights=np.array([0.5, 0.1, 0.1]))

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            ParticleSet(states=np.zeros((2, 1)), weights=np.array([1.5, -0.5]))

    def test_one_dim_states_promoted(self):
        p = ParticleSet(states=np.arange(4.0), weights=np.full(4, 0.25))
        assert p.states.shape == (4, 1)
        assert p.size == 4


class TestMcIntegrate:
    def test_second_moment_of_standard_normal(self):
        rng = np.random.default_rng(0)
        est, err = mc_integrate(
            lambda x: x**2, lambda n, r: r.standard_normal(n), 100_000, rng
        )
        assert abs(est - 1.0) < 5.0 * err
        assert abs(est - 1.0) < 0.05

    def test_error_shrinks_with_root_n(self):
        rng = np.random.default_rng(1)
        _, err_small = mc_integrate(
            lambda x: x, lambda n, r: r.standard_normal(n), 1_000, rng
        )
        _, err_big = mc_integrate(
            lambda x: x, lambda n, r: r.standard_normal(n), 100_000, rng
        )
        assert err_big < err_small / 5.0

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            mc_integrate(lambda x: x, lambda n, r: r.standard_normal(n), 1,
                         np.random.default_rng(2))


class TestImportanceEstimate:
    def test_wide_proposal_recovers_target_moment(self):
        """E[x^2] under N(0,1) estimated through a N(0, 2^2) proposal."""
        rng = np.random.default_rng(3)
        est = importance_estimate(
            f=lambda x: x**2,
            target_density=lambda x: np.exp(-0.5 * x**2),  # unnormalized is fine
            proposal_sampler=lambda n, r: 2.0 * r.standard_normal(n),
            proposal_density=lambda x: np.exp(-0.5 * (x / 2.0) ** 2) / 2.0,
            n=200_000,
            rng=rng,
        )
        assert abs(est - 1.0) < 0.02

    def test_zero_overlap_raises(self):
        rng = np.random.default_rng(4)
        with pytest.raises(ZeroTotalWeight):
            importance_estimate(
                f=lambda x: x,
                target_density=lambda x: np.where(np.abs(x) > 50.0, 1.0, 0.0),
                proposal_sampler=lambda n, r: r.standard_normal(n),
                proposal_density=lambda x: np.exp(-0.5 * x**2),
                n=1_000,
                rng=rng,
            )


class TestEss:
    def test_uniform_gives_n(self):
        p = uniform_particles(np.zeros(64))
        assert ess(p) == pytest.approx(64.0, abs=1e-12)

    def test_degenerate_gives_one(self):
        w = np.zeros(10)
        w[3] = 1.0
        p = ParticleSet(states=np.zeros((10, 1)), weights=w)
        assert ess(p) == pytest.approx(1.0, abs=1e-12)

    @given(
        arrays(
            np.float64,
            st.integers(min_value=2, max_value=200),
            elements=st.floats(1e-6, 1.0),
        )
    )
    def test_always_within_bounds(self, raw):
        w = raw / raw.sum()
        p = ParticleSet(states=np.zeros((w.size, 1)), weights=w)
        e = ess(p)
        assert 1.0 - 1e-9 <= e <= w.size + 1e-9


class TestSystematicResample:
    @given(
        arrays(
            np.float64,
            st.sampled_from([10, 100, 1000]),
            elements=st.floats(1e-9, 1.0),
        ),
        st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=200, deadline=None)
    def test_offspring_counts(self, raw, seed):
        """Each particle's offspring count differs from N w_i by < 1."""
        w = raw / raw.sum()
        n = w.size
        p = ParticleSet(states=np.arange(float(n)), weights=w)
        out = systematic_resample(p, np.random.default_rng(seed))
        counts = np.bincount(out.states[:, 0].astype(int), minlength=n)
        np.testing.assert_array_equal(out.weights, np.full(n, 1.0 / n))
        assert np.all(counts >= np.floor(n * w))
        assert np.all(counts <= np.ceil(n * w))

    def test_preserves_size_and_support(self):
        rng = np.random.default_rng(5)
        w = rng.uniform(0.0, 1.0, 30)
        w /= w.sum()
        p = ParticleSet(states=rng.standard_normal(30), weights=w)
        out = systematic_resample(p, rng)
        assert out.size == 30
        assert set(out.states[:, 0]).issubset(set(p.states[:, 0]))

    def test_deterministic_given_rng(self):
        w = np.full(8, 0.125)
        p = ParticleSet(states=np.arange(8.0), weights=w)
        a = systematic_resample(p, np.random.default_rng(9))
        b = systematic_resample(p, np.random.default_rng(9))
        np.testing.assert_array_equal(a.states, b.states)

    def test_degenerate_weight_clones_winner(self):
        w = np.zeros(5)
        w[2] = 1.0
        p = ParticleSet(states=np.arange(5.0), weights=w)
        out = systematic_resample(p, np.random.default_rng(6))
        np.testing.assert_array_equal(out.states[:, 0], np.full(5, 2.0))


class TestSisStep:
    def test_weight_update_formula(self):
        """One bootstrap step recomputed by hand for three particles."""
        model = NonlinearSSM(
            f=lambda x, k: 0.5 * np.asarray(x),
            h=lambda x: np.asarray(x),
            process_noise_var=0.2,
            obs_noise_var=0.3,
            initial=Gaussian(np.zeros(1), np.eye(1)),
        )
        start = ParticleSet(
            states=np.array([[-1.0], [0.0], [2.0]]),
            weights=np.array([0.2, 0.5, 0.3]),
        )
        z = np.array([0.4])
        seed = 17
        stepped = sis_step(start, z, model, ProposalKind.BOOTSTRAP, 1,
                           np.random.default_rng(seed))
        eps = np.random.default_rng(seed).standard_normal((3, 1))
        prop = 0.5 * start.states + np.sqrt(0.2) * eps
        lik = np.exp(-0.5 * (z[0] - prop[:, 0]) ** 2 / 0.3) / np.sqrt(2 * np.pi * 0.3)
        w = start.weights * lik
        w /= w.sum()
        np.testing.assert_allclose(stepped.states, prop, rtol=1e-12)
        np.testing.assert_allclose(stepped.weights, w, rtol=1e-10)

    def test_zero_likelihood_raises(self):
        # the observation is so remote the squared residual overflows to
        # inf, driving every log-likelihood to -inf
        model = NonlinearSSM(
            f=lambda x, k: np.asarray(x),
            h=lambda x: np.asarray(x),
            process_noise_var=1e-12,
            obs_noise_var=1e-12,
            initial=Gaussian(np.zeros(1), np.eye(1)),
        )
        start = uniform_particles(np.zeros((4, 1)))
        with pytest.raises(ZeroTotalWeight):
            sis_step(start, np.array([1e200]), model, ProposalKind.BOOTSTRAP, 1,
                     np.random.default_rng(0))

    def test_extreme_but_finite_observation_survives(self):
        """Max-subtraction keeps the update defined even when raw
        likelihoods underflow to zero."""
        model = NonlinearSSM(
            f=lambda x, k: np.asarray(x),
            h=lambda x: np.asarray(x),
            process_noise_var=1e-12,
            obs_noise_var=1e-12,
            initial=Gaussian(np.zeros(1), np.eye(1)),
        )
        start = ParticleSet(
            states=np.array([[0.0], [1.0], [2.0], [3.0]]),
            weights=np.full(4, 0.25),
        )
        stepped = sis_step(start, np.array([1e6]), model, ProposalKind.BOOTSTRAP, 1,
                           np.random.default_rng(0))
        assert stepped.weights.sum() == pytest.approx(1.0)
        assert np.argmax(stepped.weights) == 3  # closest particle wins


class TestRunBootstrapFilter:
    def test_records_are_pre_resample(self):
        """The recorded mean/ESS describe the weighted set before resampling."""
        model = ungm_model()
        traj = simulate(model, 5, np.random.default_rng(7))
        records = particle_filter(model, traj.observations, 100, 1.0,
                                  np.random.default_rng(8))
        # threshold 1.0 forces resampling every step, yet recorded ESS must
        # be the pre-resample value (almost surely not exactly N) and the
        # recorded mean must be the weighted mean of the recorded set
        for r in records:
            assert r.resampled
            assert r.ess < 100.0
            assert r.ess == pytest.approx(1.0 / np.sum(r.particles.weights**2))
            np.testing.assert_allclose(
                r.mean, r.particles.weights @ r.particles.states, rtol=1e-12
            )

    def test_no_resampling_when_threshold_zero(self):
        model = ungm_model()
        traj = simulate(model, 10, np.random.default_rng(9))
        records = particle_filter(model, traj.observations, 200, 0.0,
                                  np.random.default_rng(10))
        assert not any(r.resampled for r in records)

    def test_flat_likelihood_keeps_ess_at_n(self):
        """Near-deterministic propagation with an uninformative likelihood:
        weights stay uniform and ESS pins to N."""
        model = NonlinearSSM(
            f=lambda x, k: np.asarray(x),
            h=lambda x: np.zeros_like(np.asarray(x)),
            process_noise_var=1e-18,
            obs_noise_var=1e6,
            initial=Gaussian(np.zeros(1), np.array([[1e-18]])),
        )
        records = run = particle_filter(
            model, np.zeros((6, 1)), 50, 0.25, np.random.default_rng(11)
        )
        for r in records:
            assert r.ess == pytest.approx(50.0, rel=1e-9)
            assert not r.resampled

    def test_matches_kalman_on_linear_model(self):
        model = scalar_linear()
        traj = simulate(model, 30, np.random.default_rng(12))
        kf = filter_sequence(model, traj.observations)
        records = particle_filter(
            nonlinear_from_linear_1d(model), traj.observations, 5000, 0.5,
            np.random.default_rng(13),
        )
        kf_means = np.array([s.posterior.mean[0] for s in kf])
        kf_stds = np.sqrt([s.posterior.cov[0, 0] for s in kf])
        pf_means = np.array([r.mean[0] for r in records])
        assert np.mean(np.abs(pf_means - kf_means)) < 0.1 * kf_stds.mean()

    def test_all_steps_recorded_with_finite_means(self):
        model = ungm_model()
        traj = simulate(model, 50, np.random.default_rng(14))
        records = particle_filter(model, traj.observations, 500, 0.25,
                                  np.random.default_rng(15))
        assert len(records) == 50
        assert all(np.isfinite(r.mean).all() for r in records)
        assert any(r.resampled for r in records)

    def test_needs_two_particles(self):
        model = ungm_model()
        with pytest.raises(ValueError):
            particle_filter(model, np.zeros((2, 1)), 1, 0.25, np.random.default_rng(0))

    def test_threshold_range_checked(self):
        model = ungm_model()
        with pytest.raises(ValueError):
            particle_filter(model, np.zeros((2, 1)), 10, 1.5, np.random.default_rng(0))


class TestSisDegeneracy:
    def test_pure_sis_collapses_on_ungm(self):
        """Without resampling the weight mass concentrates: final ESS is a
        tiny fraction of N on almost every seed."""
        model = ungm_model()
        collapsed = 0
        for seed in range(10):
            traj = simulate(model, 50, np.random.default_rng(300 + seed))
            records = particle_filter(model, traj.observations, 500, 0.0,
                                      np.random.default_rng(400 + seed))
            if records[-1].ess < 0.1 * 500:
                collapsed += 1
        assert collapsed >= 9


class TestPfCsv:
    def test_layout(self, tmp_path):
        model = ungm_model()
        traj = simulate(model, 4, np.random.default_rng(16))
        records = particle_filter(model, traj.observations, 50, 0.25,
                                  np.random.default_rng(17))
        path = tmp_path / "pf.csv"
        write_pf_csv(path, traj.states[1:, 0], traj.observations[:, 0], records)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,true_state,obs,pf_mean,ess,resampled"
        assert len(lines) == 5
        row = lines[1].split(",")
        assert row[5] in ("0", "1")
        assert float(row[4]) == records[0].ess
