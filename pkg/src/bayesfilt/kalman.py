"""Kalman filter for linear-Gaussian state-space models.

The gain is computed through a Cholesky solve of the innovation
covariance (no explicit inverse) and the covariance update uses the
Joseph form, which stays symmetric positive semidefinite under roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gauss import (
    DimensionMismatch,
    Gaussian,
    NotPositiveDefinite,
    as_vector,
    chol_solve,
    cholesky,
)
from .ssm import LinearGaussianSSM


class SingularInnovation(NotPositiveDefinite):
    """Innovation covariance failed its Cholesky factorization."""


def _sym(a):
    return 0.5 * (a + a.T)


def predict(posterior, model):
    """One prediction step: N(m, P) -> N(F m, Q + F P F^T)."""
    if posterior.dim != model.state_dim:
        raise DimensionMismatch(
            f"posterior dim {posterior.dim} != state dim {model.state_dim}"
        )
    mean = model.F @ posterior.mean
    cov = _sym(model.Q + model.F @ posterior.cov @ model.F.T)
    return Gaussian(mean, cov)


def update(prior, z, model):
    """Measurement update. Returns (posterior, gain).

    S = H P H^T + R is factorized by Cholesky; the gain solves
    S K^T = H P^T. The posterior covariance is the Joseph form
    (I - KH) P (I - KH)^T + K R K^T.

    Raises
    ------
    SingularInnovation
        When S is not positive definite even after jitter.
    """
    if prior.dim != model.state_dim:
        raise DimensionMismatch(
            f"prior dim {prior.dim} != state dim {model.state_dim}"
        )
    z = as_vector(z, "z")
    if z.shape[0] != model.obs_dim:
        raise DimensionMismatch(
            f"z has dim {z.shape[0]}, model observes {model.obs_dim}"
        )
    H, R, P = model.H, model.R, prior.cov
    s = _sym(H @ P @ H.T + R)
    try:
        s_factor = cholesky(s)
    except NotPositiveDefinite as err:
        raise SingularInnovation(str(err)) from err
    gain = chol_solve(s_factor, H @ P).T
    mean = prior.mean + gain @ (z - H @ prior.mean)
    a = np.eye(prior.dim) - gain @ H
    cov = _sym(a @ P @ a.T + gain @ R @ gain.T)
    return Gaussian(mean, cov), gain


@dataclass(frozen=True)
class KalmanState:
    """One filter step: prior/posterior moments, gain, and 1-based step index.

    Conditioning on data cannot inflate the state uncertainty, so
    trace(posterior.cov) <= trace(prior.cov) + 1e-9 is enforced here.
    """

    posterior: Gaussian
    prior: Gaussian
    gain: np.ndarray
    step: int

    def __post_init__(self):
        t_post = float(np.trace(self.posterior.cov))
        t_prior = float(np.trace(self.prior.cov))
        if t_post > t_prior + 1e-9:
            raise NotPositiveDefinite(
                f"update increased total variance at step {self.step}: "
                f"{t_post:.6e} > {t_prior:.6e}"
            )


def filter_sequence(model, observations):
    """Run predict/update along `observations`, starting from model.initial."""
    if not isinstance(model, LinearGaussianSSM):
        raise TypeError("filter_sequence expects a LinearGaussianSSM")
    obs = np.asarray(observations, dtype=float)
    if obs.ndim == 1:
        obs = obs.reshape(-1, 1)
    if obs.shape[0] < 1:
        raise ValueError("need at least one observation")
    if obs.shape[1] != model.obs_dim:
        raise DimensionMismatch(
            f"observations have dim {obs.shape[1]}, model observes {model.obs_dim}"
        )
    posterior = model.initial
    states = []
    for k in range(1, obs.shape[0] + 1):
        prior = predict(posterior, model)
        posterior, gain = update(prior, obs[k - 1], model)
        states.append(KalmanState(posterior=posterior, prior=prior, gain=gain, step=k))
    return states


def write_filter_csv(path, true_states, observations, states):
    """Filter CSV: step, true_state_i.., obs_j.., post_mean_i.., post_var_ii..

    true_states and observations are aligned with the filter steps
    (row k of each corresponds to states[k].step).
    """
    import csv

    true_states = np.atleast_2d(np.asarray(true_states, dtype=float))
    observations = np.atleast_2d(np.asarray(observations, dtype=float))
    if not (len(true_states) == len(observations) == len(states)):
        raise DimensionMismatch("true_states, observations, states lengths differ")
    d = true_states.shape[1]
    m = observations.shape[1]
    header = (
        ["step"]
        + [f"true_state_{i}" for i in range(d)]
        + [f"obs_{j}" for j in range(m)]
        + [f"post_mean_{i}" for i in range(d)]
        + [f"post_var_{i}{i}" for i in range(d)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row_idx, st in enumerate(states):
            row = (
                [st.step]
                + [repr(float(v)) for v in true_states[row_idx]]
                + [repr(float(v)) for v in observations[row_idx]]
                + [repr(float(v)) for v in st.posterior.mean]
                + [repr(float(v)) for v in np.diag(st.posterior.cov)]
            )
            writer.writerow(row)
