"""Particle filtering with a learned GP transition model.

The transition density is replaced by a GP posterior trained offline on
(previous state, next state) pairs: particles propagate through the GP
predictive mean with the GP predictive variance acting as state-dependent
process noise. The filter loop itself is :func:`bayesfilt.smc.run_bootstrap_filter`,
so a GP whose predictive moments match a parametric transition reproduces
the parametric filter's trajectories bit for bit under the same seed.

Known time-varying inputs (e.g. the 8cos(1.2(k-1)) drive of the UNGM
benchmark) enter as an additive offset, keeping the learned map
autonomous and the GP inputs one-dimensional.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import smc
from .gauss import Gaussian
from .gp import GpPosterior, condition, GpPrior
from .gp_train import TrainConfig, train


@dataclass(frozen=True)
class GpDynamicsModel:
    """State-space model whose transition is a conditioned GP.

    transition_gp must expose predict(xs) -> (means, variances) over a 1-D
    array of states (a :class:`bayesfilt.gp.GpPosterior`, or anything
    duck-typing it). obs_fn maps a stack of states to observation means;
    obs_noise_var is the scalar observation noise variance. time_offset,
    when given, is a known additive input added to the propagated mean at
    step k.
    """

    transition_gp: object
    obs_fn: Callable[[np.ndarray], np.ndarray]
    obs_noise_var: float
    initial: Gaussian
    time_offset: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        ov = float(self.obs_noise_var)
        if not np.isfinite(ov) or ov <= 0.0:
            raise ValueError(f"obs_noise_var must be strictly positive, got {ov}")
        object.__setattr__(self, "obs_noise_var", ov)
        if self.initial.dim != 1:
            raise ValueError("GP dynamics are one-dimensional")
        if isinstance(self.transition_gp, GpPosterior):
            if self.transition_gp.train_x.shape[0] < 2:
                raise ValueError("transition GP must be trained on >= 2 pairs")


def learn_dynamics(pairs, kernel, cfg=TrainConfig(), noise_var_init=None):
    """Fit a GP to one-step dynamics pairs and return the posterior.

    Parameters
    ----------
    pairs : array_like
        (n, 2) rows of (previous state, next state). Exact duplicate rows
        are dropped; at least 2 distinct pairs must remain.
    kernel : kernel spec
        Initial kernel whose hyperparameters seed the evidence training.
    cfg : TrainConfig
    noise_var_init : float, optional
        Starting observation-noise variance for training; defaults to 5%
        of the target variance (floored at 1e-6).
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError(f"pairs must be (n, 2), got {pairs.shape}")
    if not np.all(np.isfinite(pairs)):
        raise ValueError("pairs contain non-finite values")
    pairs = np.unique(pairs, axis=0)
    if pairs.shape[0] < 2:
        raise ValueError("need >= 2 distinct pairs to learn dynamics")
    x, y = pairs[:, 0], pairs[:, 1]
    if noise_var_init is None:
        noise_var_init = max(1e-6, 0.05 * float(np.var(y)))
    report = train(GpPrior(kernel=kernel, noise_var=noise_var_init), x, y, cfg)
    return condition(report.final_prior, x, y)


def gp_particle_filter(model, observations, n_particles, resample_frac, rng):
    """Bootstrap particle filter whose transition moments come from the GP.

    Same stepping, weighting, and resampling behavior as
    :func:`bayesfilt.smc.particle_filter`; returns the same per-step
    records.
    """
    if not isinstance(model, GpDynamicsModel):
        raise TypeError("gp_particle_filter expects a GpDynamicsModel")

    def moments(states, k):
        means, variances = model.transition_gp.predict(states[:, 0])
        means = np.asarray(means, dtype=float).reshape(states.shape)
        variances = np.asarray(variances, dtype=float).reshape(states.shape)
        if model.time_offset is not None:
            means = means + model.time_offset(k)
        return means, variances

    ov = np.array([model.obs_noise_var])

    def loglik(states, z):
        hx = np.asarray(model.obs_fn(states), dtype=float)
        if hx.ndim == 1:
            hx = hx.reshape(-1, 1)
        return smc._gauss_loglik_multi(z, hx, ov)

    return smc.run_bootstrap_filter(
        model.initial,
        observations,
        n_particles,
        resample_frac,
        rng,
        moments,
        loglik,
    )


def read_pairs_csv(path):
    """Read a dynamics-pairs CSV with header columns prev, next -> (n, 2) array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["prev", "next"]:
            raise ValueError(f"{path}: expected header 'prev,next'")
        rows = []
        for row in reader:
            if not row:
                continue
            rows.append((float(row[0]), float(row[1])))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def write_pairs_csv(path, pairs):
    """Write a dynamics-pairs CSV with header columns prev, next."""
    pairs = np.asarray(pairs, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prev", "next"])
        for prev, nxt in pairs:
            writer.writerow([repr(float(prev)), repr(float(nxt))])
