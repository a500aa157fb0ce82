"""Sequential Monte Carlo: importance sampling, resampling, particle filters.

Weights live in log space between normalizations (max-subtraction before
exponentiation) so long degenerate stretches cannot underflow silently;
a genuine all-zero likelihood raises :class:`ZeroTotalWeight` instead of
propagating NaNs. Resampling is the systematic (stratified comb) scheme:
one uniform per resample event, offspring counts within one of N*w_i.

The bootstrap step and filter loop are shared with the GP-driven filter
through :func:`run_bootstrap_filter`, which takes the propagation moments
as a callback; given matched moments and the same seed the two filters
produce bit-identical trajectories.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from . import backend
from .gauss import DimensionMismatch, Gaussian, mvn_sample
from .ssm import LinearGaussianSSM, NonlinearSSM, nonlinear_from_linear_1d


class ZeroTotalWeight(ArithmeticError):
    """Every particle weight underflowed; the filter has diverged."""


class ProposalKind(enum.Enum):
    """Supported proposal densities for the SIS step."""

    BOOTSTRAP = "bootstrap"  # propose from the transition prior


@dataclass(frozen=True)
class ParticleSet:
    """Weighted particles: states (n, d), weights summing to 1 within 1e-9."""

    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(-1, 1)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError(f"states must be (n, d) with n >= 1, got {states.shape}")
        if not np.all(np.isfinite(states)):
            raise ValueError("states contain non-finite values")
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (states.shape[0],):
            raise DimensionMismatch(
                f"weights shape {weights.shape} does not match {states.shape[0]} particles"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1 within 1e-9")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self):
        return self.states.shape[0]


@dataclass(frozen=True)
class PfStep:
    """One filter step: weighted particles after the SIS update, the
    weighted mean estimate, the effective sample size of those weights,
    and whether a resample followed this step."""

    particles: ParticleSet
    mean: np.ndarray
    ess: float
    resampled: bool


def mc_integrate(f, sampler, n, rng):
    """Plain Monte Carlo estimate of E[f(X)].

    Parameters
    ----------
    f : callable
        Integrand, vectorized over a stack of samples.
    sampler : callable
        sampler(n, rng) draws n samples from the law of X.
    n : int
        Number of draws (>= 2 so the standard error is defined).
    rng : numpy.random.Generator

    Returns
    -------
    (estimate, std_error) : tuple of floats
        Sample mean and sample standard deviation / sqrt(n).
    """
    if n < 2:
        raise ValueError(f"need n >= 2 draws, got {n}")
    samples = sampler(n, rng)
    fx = np.asarray(f(samples), dtype=float)
    if fx.shape != (n,):
        raise DimensionMismatch(
            f"f must map n samples to n values, got shape {fx.shape}"
        )
    return float(fx.mean()), float(fx.std(ddof=1) / np.sqrt(n))


def importance_estimate(f, target_density, proposal_sampler, proposal_density, n, rng):
    """Self-normalized importance-sampling estimate of E_target[f(X)].

    `target_density` may be unnormalized; `proposal_density` must be
    strictly positive wherever the proposal puts samples.

    Raises
    ------
    ZeroTotalWeight
        If every importance weight is zero (disjoint supports, underflow).
    """
    if n < 1:
        raise ValueError(f"need n >= 1 draws, got {n}")
    xs = proposal_sampler(n, rng)
    raw = np.asarray(target_density(xs), dtype=float) / np.asarray(
        proposal_density(xs), dtype=float
    )
    if not np.all(np.isfinite(raw)) or np.any(raw < 0):
        raise ValueError("importance weights must be finite and nonnegative")
    total = float(raw.sum())
    if total <= 0.0:
        raise ZeroTotalWeight("all importance weights are zero")
    fx = np.asarray(f(xs), dtype=float)
    return float(fx @ raw / total)


def ess(particles):
    """Effective sample size 1 / sum(w_i^2); between 1 and n."""
    w = particles.weights
    return float(1.0 / np.sum(w * w))


def systematic_resample(particles, rng):
    """Systematic resampling: one uniform, a comb of n stratified points.

    Draws u ~ U[0, 1/n), places points u + j/n over the cumulative weight
    sum, and copies the selected ancestors. Output weights are exactly
    1/n, and each ancestor's offspring count is floor(n w_i) or
    ceil(n w_i).
    """
    n = particles.size
    u0 = float(rng.uniform(0.0, 1.0 / n))
    cs = np.ascontiguousarray(np.cumsum(particles.weights))
    idx = backend.resample_indices(cs, u0)
    return ParticleSet(
        states=particles.states[idx].copy(),
        weights=np.full(n, 1.0 / n),
    )


def _reweight(weights, loglik):
    """Multiply weights by likelihoods in log space and renormalize."""
    with np.errstate(divide="ignore"):
        logw = np.log(weights) + loglik
    peak = float(np.max(logw))
    if not np.isfinite(peak):
        raise ZeroTotalWeight("every particle likelihood underflowed")
    w = np.exp(logw - peak)
    total = float(w.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise ZeroTotalWeight("particle weights sum to zero")
    return w / total


def _gauss_loglik_multi(z, hx, ov):
    """Sum of per-coordinate Gaussian log-likelihoods (vector observations)."""
    out = np.zeros(hx.shape[0])
    for j in range(hx.shape[1]):
        out += backend.gauss_loglik(float(z[j]), np.ascontiguousarray(hx[:, j]), float(ov[j]))
    return out


def _moments_from_model(model):
    pv = model.process_noise_var

    def moments(states, k):
        mean = np.asarray(model.f(states, k), dtype=float)
        if mean.shape != states.shape:
            raise DimensionMismatch(
                f"f returned shape {mean.shape} for states {states.shape}"
            )
        var = np.broadcast_to(pv, states.shape)
        return mean, var

    return moments


def _loglik_from_model(model):
    ov = model.obs_noise_var

    def loglik(states, z):
        hx = np.asarray(model.h(states), dtype=float)
        if hx.ndim == 1:
            hx = hx.reshape(-1, 1)
        if hx.shape != (states.shape[0], z.shape[0]):
            raise DimensionMismatch(
                f"h returned shape {hx.shape}, expected ({states.shape[0]}, {z.shape[0]})"
            )
        obs_var = np.broadcast_to(ov, (z.shape[0],))
        return _gauss_loglik_multi(z, hx, obs_var)

    return loglik


def sis_step(particles, z, model, proposal, k, rng):
    """One sequential-importance-sampling step with the bootstrap proposal.

    Particles move by a draw from the transition density and their weights
    are multiplied by the observation likelihood, then renormalized.

    Parameters
    ----------
    particles : ParticleSet
    z : array_like
        Observation at step k.
    model : NonlinearSSM
    proposal : ProposalKind
        Only ProposalKind.BOOTSTRAP is implemented.
    k : int
        1-based step index passed through to model.f.
    rng : numpy.random.Generator
    """
    if proposal is not ProposalKind.BOOTSTRAP:
        raise ValueError(f"unsupported proposal {proposal!r}")
    if not isinstance(model, NonlinearSSM):
        raise TypeError("sis_step expects a NonlinearSSM")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    moments = _moments_from_model(model)
    loglik = _loglik_from_model(model)
    mean, var = moments(particles.states, k)
    states = mean + np.sqrt(var) * rng.standard_normal(mean.shape)
    weights = _reweight(particles.weights, loglik(states, z))
    return ParticleSet(states=states, weights=weights)


def run_bootstrap_filter(initial, observations, n_particles, resample_frac, rng,
                         propagate_moments, obs_loglik):
    """Generic bootstrap particle filter over externally supplied moments.

    `propagate_moments(states, k)` returns the per-particle transition
    mean and variance (both shaped like `states`); the engine adds the
    Gaussian noise itself, in one place, so any two models with matched
    moments consume the random stream identically. `obs_loglik(states, z)`
    returns per-particle observation log-likelihoods.

    Per step: propagate, reweight, record (particles, weighted mean, ESS),
    then resample systematically when ESS < resample_frac * n_particles.
    The recorded estimate and ESS are those of the pre-resample weights.
    """
    if n_particles < 2:
        raise ValueError(f"need >= 2 particles, got {n_particles}")
    if not 0.0 <= resample_frac <= 1.0:
        raise ValueError(f"resample_frac must be in [0, 1], got {resample_frac}")
    obs = np.asarray(observations, dtype=float)
    if obs.ndim == 1:
        obs = obs.reshape(-1, 1)
    if obs.shape[0] < 1:
        raise ValueError("need at least one observation")

    states = mvn_sample(initial, rng, n_particles)
    weights = np.full(n_particles, 1.0 / n_particles)
    steps = []
    for k in range(1, obs.shape[0] + 1):
        mean, var = propagate_moments(states, k)
        states = mean + np.sqrt(var) * rng.standard_normal(mean.shape)
        weights = _reweight(weights, obs_loglik(states, obs[k - 1]))
        current = ParticleSet(states=states, weights=weights)
        e = ess(current)
        estimate = weights @ states
        resampled = e < resample_frac * n_particles
        steps.append(PfStep(particles=current, mean=estimate, ess=e, resampled=resampled))
        if resampled:
            fresh = systematic_resample(current, rng)
            states, weights = fresh.states, fresh.weights
    return steps


def particle_filter(model, observations, n_particles, resample_frac, rng):
    """Bootstrap particle filter for a NonlinearSSM.

    Initial particles are drawn from model.initial with uniform weights.
    Returns the list of :class:`PfStep` records, one per observation.
    1-D linear-Gaussian models are accepted and filtered as the
    equivalent nonlinear model (handy for oracle comparisons against the
    Kalman filter).
    """
    if isinstance(model, LinearGaussianSSM):
        model = nonlinear_from_linear_1d(model)
    if not isinstance(model, NonlinearSSM):
        raise TypeError("particle_filter expects a NonlinearSSM")
    return run_bootstrap_filter(
        model.initial,
        observations,
        n_particles,
        resample_frac,
        rng,
        _moments_from_model(model),
        _loglik_from_model(model),
    )


def write_pf_csv(path, true_states, observations, steps):
    """PF output CSV: step, true_state, obs, pf_mean, ess, resampled (0/1).

    Scalar-state scenarios only; rows align with the filter steps.
    """
    true_states = np.asarray(true_states, dtype=float).reshape(-1)
    observations = np.asarray(observations, dtype=float).reshape(-1)
    if not (len(true_states) == len(observations) == len(steps)):
        raise DimensionMismatch("true_states, observations, steps lengths differ")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "true_state", "obs", "pf_mean", "ess", "resampled"])
        for i, st in enumerate(steps):
            writer.writerow(
                [
                    i + 1,
                    repr(float(true_states[i])),
                    repr(float(observations[i])),
                    repr(float(st.mean[0])),
                    repr(float(st.ess)),
                    int(st.resampled),
                ]
            )
