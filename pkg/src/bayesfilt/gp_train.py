"""Evidence maximization for GP hyperparameters.

Plain gradient ascent in log space with a backtracking line search: the
step is halved (up to 30 times) until the evidence does not decrease, so
the accepted-step sequence is monotone. Positive hyperparameters are
kept inside a configurable box by projection, since degenerate data
(e.g. noise-free targets) would otherwise drive the evidence and the
scales to infinity. Multiple restarts perturb the user's initialization
within one natural-log unit and the best final evidence wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gauss import NotPositiveDefinite
from .gp import (
    lml_gradients,
    log_marginal_likelihood,
    pack_log_params,
    param_names,
    unpack_log_params,
)

_MAX_HALVINGS = 30


class AllRestartsFailed(RuntimeError):
    """Every restart failed to evaluate the evidence at its initialization."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings.

    max_iters bounds the number of accepted ascent steps; grad_tol stops
    the run when the (projected) gradient norm falls below it; step_init
    is the first trial step of each line search; restarts >= 1 counts
    optimization starts (the first uses the initialization exactly as
    given). param_low/param_high are box bounds applied to every positive
    hyperparameter (amplitudes, lengths, noise variance — not a constant
    mean): on degenerate data the evidence can grow without bound as the
    noise vanishes or the scales diverge, so the ascent is projected into
    the box (out-of-box initializations are clamped to it). The defaults
    suit data on the O(1)-O(10) scales typical of state estimation;
    widen them for data living on other scales.
    """

    max_iters: int = 300
    grad_tol: float = 1e-3
    step_init: float = 0.2
    restarts: int = 2
    seed: int = 0
    param_low: float = 1e-10
    param_high: float = 1e2

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.grad_tol > 0:
            raise ValueError(f"grad_tol must be > 0, got {self.grad_tol}")
        if not self.step_init > 0:
            raise ValueError(f"step_init must be > 0, got {self.step_init}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if not 0 < self.param_low < self.param_high:
            raise ValueError(
                "need 0 < param_low < param_high, got "
                f"{self.param_low}, {self.param_high}"
            )


@dataclass(frozen=True)
class TrainReport:
    """Outcome of :func:`train`: the winning prior and its diagnostics.

    lml_trace holds the accepted evidence values of the winning restart,
    starting with the initialization; the line search only ever accepts
    non-decreasing steps, so the trace is monotone by construction.
    """

    final_prior: object
    final_lml: float
    iterations: int
    grad_norm: float
    restart_index: int
    lml_trace: tuple = ()

    def to_text(self):
        """Plain-text key-value block (one line per hyperparameter)."""
        lines = [
            f"restart_index={self.restart_index}",
            f"iterations={self.iterations}",
            f"grad_norm={float(self.grad_norm)!r}",
            f"final_lml={float(self.final_lml)!r}",
        ]
        vec = pack_log_params(self.final_prior)
        names = param_names(self.final_prior)
        for i, name in enumerate(names):
            if name == "mean_const":
                lines.append(f"{name} value={float(vec[i])!r}")
            else:
                lines.append(
                    f"{name} log={float(vec[i])!r} value={float(np.exp(vec[i]))!r}"
                )
        return "\n".join(lines) + "\n"


def _ascend(prior, x, y, cfg):
    """Gradient ascent from one start; returns (prior, lml, iters, grad_norm)."""

    def value(vec):
        # an unevaluable parameter vector (singular system, or exp()
        # overflow producing non-finite hyperparameters) is treated as
        # evidence -inf so the line search backs away from it
        try:
            return log_marginal_likelihood(unpack_log_params(prior, vec), x, y)
        except (NotPositiveDefinite, ValueError):
            return -np.inf

    bounded = np.array([n != "mean_const" for n in param_names(prior)])
    low = float(np.log(cfg.param_low))
    high = float(np.log(cfg.param_high))

    def project(vec):
        return np.where(bounded, np.clip(vec, low, high), vec)

    def stopping_norm(vec, g):
        # a component pinned at the box pointing outward cannot move, so
        # it is excluded from the convergence measure
        g = np.where(bounded & (vec <= low) & (g < 0.0), 0.0, g)
        g = np.where(bounded & (vec >= high) & (g > 0.0), 0.0, g)
        return float(np.linalg.norm(g))

    p = project(pack_log_params(prior))
    current = value(p)
    if not np.isfinite(current):
        raise NotPositiveDefinite("evidence undefined at initialization")
    grad = lml_gradients(unpack_log_params(prior, p), x, y)
    trace = [float(current)]
    for _ in range(cfg.max_iters):
        if stopping_norm(p, grad) < cfg.grad_tol:
            break
        step = cfg.step_init
        candidate = None
        for _ in range(_MAX_HALVINGS):
            trial = project(p + step * grad)
            trial_value = value(trial)
            if np.isfinite(trial_value) and trial_value >= current:
                candidate = (trial, trial_value)
                break
            step *= 0.5
        if candidate is None:
            break  # no non-decreasing step found; treat as converged
        p, current = candidate
        trace.append(float(current))
        grad = lml_gradients(unpack_log_params(prior, p), x, y)
    return unpack_log_params(prior, p), current, trace, stopping_norm(p, grad)


def _perturb(prior, rng):
    """Jitter the packed parameters uniformly within +-1 (log units for
    positive parameters, natural units for the mean)."""
    vec = pack_log_params(prior)
    return unpack_log_params(prior, vec + rng.uniform(-1.0, 1.0, vec.shape[0]))


def train(prior_init, train_x, train_y, cfg):
    """Fit hyperparameters by maximizing the evidence.

    Runs cfg.restarts gradient ascents (the first from prior_init as
    given, the rest from perturbed copies) and returns a
    :class:`TrainReport` for the restart with the highest final evidence.

    Raises
    ------
    AllRestartsFailed
        If every restart's initialization fails its evidence evaluation.
    ValueError
        If prior_init has zero noise variance (cannot optimize in log
        space) or cfg is malformed.
    """
    rng = np.random.default_rng(cfg.seed)
    best = None
    for index in range(cfg.restarts):
        start = prior_init if index == 0 else _perturb(prior_init, rng)
        try:
            prior, lml, trace, grad_norm = _ascend(start, train_x, train_y, cfg)
        except NotPositiveDefinite:
            continue
        if best is None or lml > best[1]:
            best = (prior, lml, trace, grad_norm, index)
    if best is None:
        raise AllRestartsFailed(
            f"all {cfg.restarts} restarts failed at initialization"
        )
    prior, lml, trace, grad_norm, index = best
    return TrainReport(
        final_prior=prior,
        final_lml=float(lml),
        iterations=len(trace) - 1,
        grad_norm=grad_norm,
        restart_index=index,
        lml_trace=tuple(trace),
    )
