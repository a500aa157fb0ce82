"""State-space model containers, simulation, and a grid-quadrature filter.

Two model families: linear-Gaussian (matrices F, H, Q, R) and nonlinear
with additive Gaussian noise (callables f, h plus per-coordinate noise
variances). Transition callables receive the step index k (1-based) so
time-varying dynamics such as the univariate nonlinear growth model
(UNGM) benchmark fit the same interface.

Callable contract: for d-dimensional states, f(x, k) and h(x) must accept
both a single (d,) state and an (n, d) stack of states, returning the
same leading shape. Elementwise NumPy expressions satisfy this for d=1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gauss import (
    DimensionMismatch,
    Gaussian,
    as_matrix,
    cholesky,
    mvn_sample,
)


class GridUnderflow(ArithmeticError):
    """Total unnormalized grid mass fell below 1e-300."""


@dataclass(frozen=True)
class LinearGaussianSSM:
    """x_k = F x_{k-1} + w,  z_k = H x_k + v,  w ~ N(0, Q), v ~ N(0, R)."""

    F: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    initial: Gaussian

    def __post_init__(self):
        F = as_matrix(self.F, "F")
        H = as_matrix(self.H, "H")
        Q = as_matrix(self.Q, "Q")
        R = as_matrix(self.R, "R")
        d = F.shape[0]
        if F.shape[1] != d:
            raise DimensionMismatch(f"F must be square, got {F.shape}")
        if H.shape[1] != d:
            raise DimensionMismatch(f"H has {H.shape[1]} columns, state dim is {d}")
        m = H.shape[0]
        if Q.shape != (d, d):
            raise DimensionMismatch(f"Q must be {d}x{d}, got {Q.shape}")
        if R.shape != (m, m):
            raise DimensionMismatch(f"R must be {m}x{m}, got {R.shape}")
        # Validate symmetry/PSD by round-tripping through Gaussian.
        Gaussian(np.zeros(d), Q)
        Gaussian(np.zeros(m), R)
        if self.initial.dim != d:
            raise DimensionMismatch(
                f"initial has dim {self.initial.dim}, state dim is {d}"
            )
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def state_dim(self):
        return self.F.shape[0]

    @property
    def obs_dim(self):
        return self.H.shape[0]


@dataclass(frozen=True)
class NonlinearSSM:
    """x_k = f(x_{k-1}, k) + w,  z_k = h(x_k) + v, with diagonal noise.

    process_noise_var and obs_noise_var are scalars or per-coordinate
    vectors of strictly positive variances.
    """

    f: Callable[[np.ndarray, int], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    process_noise_var: float | np.ndarray
    obs_noise_var: float | np.ndarray
    initial: Gaussian

    def __post_init__(self):
        pv = np.atleast_1d(np.asarray(self.process_noise_var, dtype=float))
        ov = np.atleast_1d(np.asarray(self.obs_noise_var, dtype=float))
        if np.any(pv <= 0) or not np.all(np.isfinite(pv)):
            raise ValueError("process_noise_var must be strictly positive")
        if np.any(ov <= 0) or not np.all(np.isfinite(ov)):
            raise ValueError("obs_noise_var must be strictly positive")
        object.__setattr__(self, "process_noise_var", pv)
        object.__setattr__(self, "obs_noise_var", ov)

    @property
    def state_dim(self):
        return self.initial.dim


@dataclass(frozen=True)
class Trajectory:
    """Simulated truth: states (K+1, d) with x_0 first, observations (K, m)."""

    states: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        obs = np.atleast_2d(np.asarray(self.observations, dtype=float))
        if states.shape[0] != obs.shape[0] + 1:
            raise DimensionMismatch(
                f"{states.shape[0]} states need {states.shape[0] - 1} "
                f"observations, got {obs.shape[0]}"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "observations", obs)

    @property
    def steps(self):
        return self.observations.shape[0]


def _noise_factor(cov):
    """Cholesky factor of a noise covariance, or None for an exact zero."""
    if not np.any(cov):
        return None
    return cholesky(cov)


def _draw_initial(initial, rng):
    if not np.any(initial.cov):
        return initial.mean.copy()
    return mvn_sample(initial, rng, 1)[0]


def simulate(model, steps, rng):
    """Roll a model forward for `steps` observations.

    x_0 comes from the model's initial Gaussian (taken as exactly its mean
    when the initial covariance is the zero matrix); every subsequent
    state and observation gets a fresh noise draw from `rng`.
    """
    if steps < 1:
        raise ValueError(f"need steps >= 1, got {steps}")
    if isinstance(model, LinearGaussianSSM):
        return _simulate_linear(model, steps, rng)
    return _simulate_nonlinear(model, steps, rng)


def _simulate_linear(model, steps, rng):
    d, m = model.state_dim, model.obs_dim
    lq = _noise_factor(model.Q)
    lr = _noise_factor(model.R)
    x = _draw_initial(model.initial, rng)
    states = [x]
    observations = []
    for _ in range(steps):
        x = model.F @ x
        if lq is not None:
            x = x + lq @ rng.standard_normal(d)
        z = model.H @ x
        if lr is not None:
            z = z + lr @ rng.standard_normal(m)
        states.append(x)
        observations.append(z)
    return Trajectory(np.array(states), np.array(observations))


def _simulate_nonlinear(model, steps, rng):
    d = model.state_dim
    pv = np.broadcast_to(model.process_noise_var, (d,))
    x = _draw_initial(model.initial, rng)
    states = [x]
    observations = []
    for k in range(1, steps + 1):
        x = np.asarray(model.f(x, k), dtype=float) + np.sqrt(pv) * rng.standard_normal(d)
        hx = np.atleast_1d(np.asarray(model.h(x), dtype=float))
        ov = np.broadcast_to(model.obs_noise_var, hx.shape)
        z = hx + np.sqrt(ov) * rng.standard_normal(hx.shape)
        states.append(x)
        observations.append(z)
    return Trajectory(np.array(states), np.array(observations))


def ungm_transition(x, k):
    """UNGM drift: x/2 + 25x/(1+x^2) + 8cos(1.2(k-1)). Steps are 1-based."""
    if k < 1:
        raise ValueError(f"step index k must be >= 1, got {k}")
    return ungm_autonomous(x) + 8.0 * np.cos(1.2 * (k - 1))


def ungm_autonomous(x):
    """State-dependent part of the UNGM drift (no time term)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):  # astronomic states saturate to inf
        return x / 2.0 + 25.0 * x / (1.0 + x * x)


def ungm_observe(x):
    """UNGM measurement: x^2 / 20."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):  # astronomic states saturate to inf
        return x * x / 20.0


def ungm_model(vr_w=0.1, vr_v=0.5, x0=0.1, p0=0.1):
    """Benchmark UNGM with its customary noise levels and initial spread.

    Pass p0=0 for a point-mass start (used when simulating the truth).
    """
    return NonlinearSSM(
        f=ungm_transition,
        h=ungm_observe,
        process_noise_var=vr_w,
        obs_noise_var=vr_v,
        initial=Gaussian(np.array([x0]), np.array([[p0]])),
    )


def ar2_model(freq=0.05, q=0.1, r=0.1, theta=1.0, initial_var=1.0):
    """Second-order autoregressive tracker for a noisy sinusoid.

    State [s_k, s_{k-1}] with transition [[2cos(2 pi freq), -1], [1, 0]],
    scalar observation of the first component. Pass q=0 for a noise-free
    truth model and initial_var=0 to pin the start at [sin(theta), 0].
    """
    w = 2.0 * np.pi * freq
    F = np.array([[2.0 * np.cos(w), -1.0], [1.0, 0.0]])
    H = np.array([[1.0, 0.0]])
    Q = q * np.eye(2)
    R = np.array([[r]])
    initial = Gaussian(np.array([np.sin(theta), 0.0]), initial_var * np.eye(2))
    return LinearGaussianSSM(F=F, H=H, Q=Q, R=R, initial=initial)


def nonlinear_from_linear_1d(model):
    """View a scalar linear-Gaussian model through the nonlinear interface."""
    if model.state_dim != 1 or model.obs_dim != 1:
        raise DimensionMismatch("only 1-D state / 1-D observation models convert")
    f_coef = float(model.F[0, 0])
    h_coef = float(model.H[0, 0])
    return NonlinearSSM(
        f=lambda x, k: f_coef * np.asarray(x, dtype=float),
        h=lambda x: h_coef * np.asarray(x, dtype=float),
        process_noise_var=float(model.Q[0, 0]),
        obs_noise_var=float(model.R[0, 0]),
        initial=model.initial,
    )


@dataclass(frozen=True)
class GridFilterResult:
    """Filtering densities on a fixed 1-D grid (midpoint-rule quadrature)."""

    centers: np.ndarray
    densities: np.ndarray  # (steps, cells); row k is the posterior after z_k

    @property
    def cell_width(self):
        return float(self.centers[1] - self.centers[0])

    def means(self):
        return self.densities @ self.centers * self.cell_width

    def variances(self):
        mu = self.means()
        second = self.densities @ (self.centers**2) * self.cell_width
        return second - mu**2


def grid_filter(model, observations, bounds, cells=2000):
    """Brute-force Bayes recursion for a 1-D nonlinear model.

    Each step applies the prediction integral as a dense quadrature over
    the grid, multiplies in the observation likelihood, and renormalizes
    (mass outside the grid is truncated). Meant as a slow, assumption-free
    oracle for the closed-form filters, not for production sizes.

    Parameters
    ----------
    model : NonlinearSSM
        Must have 1-D state and observations. Callers are responsible for
        bounds wide enough to cover the reachable states (8 sigma is
        comfortable).
    observations : array_like
        Sequence of scalar measurements.
    bounds : (float, float)
        Grid endpoints, low < high.
    cells : int
        Number of grid points (>= 2).

    Raises
    ------
    GridUnderflow
        When the unnormalized mass at any step drops below 1e-300.
    """
    if isinstance(model, LinearGaussianSSM):
        model = nonlinear_from_linear_1d(model)
    if model.state_dim != 1:
        raise DimensionMismatch("grid_filter handles 1-D state models only")
    lo, hi = float(bounds[0]), float(bounds[1])
    if not lo < hi:
        raise ValueError(f"bounds must satisfy low < high, got ({lo}, {hi})")
    if cells < 2:
        raise ValueError(f"need >= 2 grid cells, got {cells}")
    obs = np.atleast_2d(np.asarray(observations, dtype=float).reshape(len(observations), -1))
    if obs.shape[1] != 1:
        raise DimensionMismatch("grid_filter handles scalar observations only")

    centers = np.linspace(lo, hi, cells)
    dx = centers[1] - centers[0]
    pvar = float(model.process_noise_var[0])
    ovar = float(model.obs_noise_var[0])

    p0_var = float(model.initial.cov[0, 0])
    p0_mean = float(model.initial.mean[0])
    if p0_var > 0.0:
        dens = np.exp(-0.5 * (centers - p0_mean) ** 2 / p0_var)
        dens /= dens.sum() * dx
    else:
        dens = np.zeros(cells)
        dens[int(np.argmin(np.abs(centers - p0_mean)))] = 1.0 / dx

    hx = np.asarray(model.h(centers), dtype=float)
    out = np.empty((obs.shape[0], cells))
    for k in range(1, obs.shape[0] + 1):
        drift = np.asarray(model.f(centers, k), dtype=float)
        # Chapman-Kolmogorov: predicted[j] = sum_i dens[i] N(x_j; f(x_i), Q) dx
        trans = np.exp(-0.5 * (centers[None, :] - drift[:, None]) ** 2 / pvar)
        trans /= np.sqrt(2.0 * np.pi * pvar)
        predicted = (dens @ trans) * dx
        mass = predicted.sum() * dx
        if mass < 1e-300:
            raise GridUnderflow(f"predictive mass underflowed at step {k}")
        predicted /= mass
        lik = np.exp(-0.5 * (obs[k - 1, 0] - hx) ** 2 / ovar)
        dens = predicted * lik
        mass = dens.sum() * dx
        if mass < 1e-300:
            raise GridUnderflow(f"posterior mass underflowed at step {k}")
        dens = dens / mass
        out[k - 1] = dens
    return GridFilterResult(centers=centers, densities=out)


def write_trajectory_csv(path, traj):
    """Trajectory CSV: step, state_0.., obs_0.. (step 0 has empty obs cells)."""
    d = traj.states.shape[1]
    m = traj.observations.shape[1]
    header = (
        ["step"]
        + [f"state_{i}" for i in range(d)]
        + [f"obs_{j}" for j in range(m)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerow([0] + [repr(float(v)) for v in traj.states[0]] + [""] * m)
        for k in range(1, traj.states.shape[0]):
            row = (
                [k]
                + [repr(float(v)) for v in traj.states[k]]
                + [repr(float(v)) for v in traj.observations[k - 1]]
            )
            writer.writerow(row)
