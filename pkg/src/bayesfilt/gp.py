"""Gaussian process regression on 1-D inputs with composable kernels.

Four stationary kernel families plus a Sum combinator. Hyperparameters
are strictly positive and every optimizer-facing quantity (packing,
gradients) works in log space so positivity never needs constraints.
Conditioning and prediction go through Cholesky factors; no explicit
matrix inverse is formed anywhere on the prediction path.

The white-noise term of :class:`NoisyExponential` is tied to the
identity of the data point, not to coincidental value equality: it is
added to Gram diagonals and to the prior variance of a single point, but
contributes nothing to train-versus-test cross-covariances.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import backend
from .gauss import (
    DimensionMismatch,
    Gaussian,
    NotPositiveDefinite,
    chol_solve,
    cholesky,
    mvn_sample,
)


def _as_inputs(x, name="x"):
    x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1))
    if x.size < 1:
        raise ValueError(f"{name} must hold at least one point")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def _positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be strictly positive, got {value}")
    return value


@dataclass(frozen=True)
class SquaredExponential:
    """k(x, x') = amplitude^2 exp(-(x - x')^2 / length^2)."""

    amplitude: float = 1.0
    length: float = 1.0

    def __post_init__(self):
        _positive(self.amplitude, "amplitude")
        _positive(self.length, "length")

    param_names = ("amplitude", "length")
    n_params = 2

    def log_params(self):
        return np.log([self.amplitude, self.length])

    def with_log_params(self, vec):
        return SquaredExponential(float(np.exp(vec[0])), float(np.exp(vec[1])))

    def white_variance(self):
        return 0.0

    @property
    def prior_variance(self):
        return self.amplitude**2

    def smooth_gram(self, x, y):
        return backend.exp_quad_gram(x, y, self.amplitude**2, 1.0 / self.length**2)

    def gram_with_grads(self, x):
        k = self.smooth_gram(x, x)
        d2 = backend.pairwise_sqdist(x, x)
        return k, [2.0 * k, k * (2.0 * d2 / self.length**2)]


@dataclass(frozen=True)
class QuasiPeriodic:
    """Periodic correlation with a smooth decay envelope:

    k(x, x') = amplitude^2 exp(-2 sin^2(pi (x-x')) / periodic_scale^2)
               * exp(-(x - x')^2 / (2 decay_length^2))
    """

    amplitude: float = 1.0
    decay_length: float = 1.0
    periodic_scale: float = 1.0

    def __post_init__(self):
        _positive(self.amplitude, "amplitude")
        _positive(self.decay_length, "decay_length")
        _positive(self.periodic_scale, "periodic_scale")

    param_names = ("amplitude", "decay_length", "periodic_scale")
    n_params = 3

    def log_params(self):
        return np.log([self.amplitude, self.decay_length, self.periodic_scale])

    def with_log_params(self, vec):
        return QuasiPeriodic(*(float(np.exp(v)) for v in vec[:3]))

    def white_variance(self):
        return 0.0

    @property
    def prior_variance(self):
        return self.amplitude**2

    def smooth_gram(self, x, y):
        return backend.periodic_gram(
            x, y,
            self.amplitude**2,
            2.0 / self.periodic_scale**2,
            0.5 / self.decay_length**2,
        )

    def gram_with_grads(self, x):
        k = self.smooth_gram(x, x)
        d2 = backend.pairwise_sqdist(x, x)
        s2 = np.sin(np.pi * np.sqrt(d2)) ** 2
        return k, [
            2.0 * k,
            k * (d2 / self.decay_length**2),
            k * (4.0 * s2 / self.periodic_scale**2),
        ]


@dataclass(frozen=True)
class RationalQuadratic:
    """k(x, x') = amplitude^2 (1 + (x-x')^2 / (2 shape length^2))^(-shape)."""

    amplitude: float = 1.0
    length: float = 1.0
    shape: float = 1.0

    def __post_init__(self):
        _positive(self.amplitude, "amplitude")
        _positive(self.length, "length")
        _positive(self.shape, "shape")

    param_names = ("amplitude", "length", "shape")
    n_params = 3

    def log_params(self):
        return np.log([self.amplitude, self.length, self.shape])

    def with_log_params(self, vec):
        return RationalQuadratic(*(float(np.exp(v)) for v in vec[:3]))

    def white_variance(self):
        return 0.0

    @property
    def prior_variance(self):
        return self.amplitude**2

    def smooth_gram(self, x, y):
        return backend.rq_gram(x, y, self.amplitude**2, self.shape, self.length**2)

    def gram_with_grads(self, x):
        k = self.smooth_gram(x, x)
        d2 = backend.pairwise_sqdist(x, x)
        b = 1.0 + d2 / (2.0 * self.shape * self.length**2)
        return k, [
            2.0 * k,
            k * (d2 / (self.length**2 * b)),
            k * (self.shape * ((b - 1.0) / b - np.log(b))),
        ]


@dataclass(frozen=True)
class NoisyExponential:
    """Squared-exponential plus a white term tied to the data-point index:

    k(x, x') = amplitude^2 exp(-(x-x')^2 / (2 length^2)) + white^2 [x is x']
    """

    amplitude: float = 1.0
    length: float = 1.0
    white: float = 1.0

    def __post_init__(self):
        _positive(self.amplitude, "amplitude")
        _positive(self.length, "length")
        _positive(self.white, "white")

    param_names = ("amplitude", "length", "white")
    n_params = 3

    def log_params(self):
        return np.log([self.amplitude, self.length, self.white])

    def with_log_params(self, vec):
        return NoisyExponential(*(float(np.exp(v)) for v in vec[:3]))

    def white_variance(self):
        return self.white**2

    @property
    def prior_variance(self):
        return self.amplitude**2 + self.white**2

    def smooth_gram(self, x, y):
        return backend.exp_quad_gram(x, y, self.amplitude**2, 0.5 / self.length**2)

    def gram_with_grads(self, x):
        smooth = self.smooth_gram(x, x)
        eye = np.eye(x.shape[0])
        k = smooth + self.white**2 * eye
        d2 = backend.pairwise_sqdist(x, x)
        return k, [
            2.0 * smooth,
            smooth * (d2 / self.length**2),
            2.0 * self.white**2 * eye,
        ]


@dataclass(frozen=True)
class Sum:
    """Sum of kernels; hyperparameters concatenate in part order."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if len(parts) < 1:
            raise ValueError("Sum needs at least one part")
        object.__setattr__(self, "parts", parts)

    @property
    def param_names(self):
        names = []
        for i, part in enumerate(self.parts):
            names.extend(f"k{i + 1}.{n}" for n in part.param_names)
        return tuple(names)

    @property
    def n_params(self):
        return sum(p.n_params for p in self.parts)

    def log_params(self):
        return np.concatenate([p.log_params() for p in self.parts])

    def with_log_params(self, vec):
        parts = []
        at = 0
        for part in self.parts:
            parts.append(part.with_log_params(np.asarray(vec)[at:at + part.n_params]))
            at += part.n_params
        return Sum(tuple(parts))

    def white_variance(self):
        return sum(p.white_variance() for p in self.parts)

    @property
    def prior_variance(self):
        return sum(p.prior_variance for p in self.parts)

    def smooth_gram(self, x, y):
        total = self.parts[0].smooth_gram(x, y)
        for part in self.parts[1:]:
            total = total + part.smooth_gram(x, y)
        return total

    def gram_with_grads(self, x):
        total = None
        grads = []
        for part in self.parts:
            k, g = part.gram_with_grads(x)
            total = k if total is None else total + k
            grads.extend(g)
        return total, grads


def kernel_eval(spec, x, xp):
    """Kernel value for one pair of scalar inputs.

    The white term (if any) is included only when x and xp are the same
    value, the scalar stand-in for "same data point".
    """
    xa = np.ascontiguousarray([float(x)])
    xb = np.ascontiguousarray([float(xp)])
    value = float(spec.smooth_gram(xa, xb)[0, 0])
    if float(x) == float(xp):
        value += spec.white_variance()
    return value


def gram(spec, xs):
    """Symmetric Gram matrix over training inputs (white term on the diagonal)."""
    xs = _as_inputs(xs)
    k = spec.smooth_gram(xs, xs)
    white = spec.white_variance()
    if white:
        k = k + white * np.eye(xs.shape[0])
    return k


def cross_gram(spec, xs, xs_star):
    """Covariances between training and test inputs (no white term)."""
    return spec.smooth_gram(_as_inputs(xs), _as_inputs(xs_star, "xs_star"))


@dataclass(frozen=True)
class ZeroMean:
    """Identically-zero prior mean (no trainable parameter)."""

    n_params = 0

    def values(self, x):
        return np.zeros(np.asarray(x).shape[0])


@dataclass(frozen=True)
class ConstantMean:
    """Constant prior mean with one trainable parameter."""

    value: float = 0.0
    n_params = 1

    def values(self, x):
        return np.full(np.asarray(x).shape[0], float(self.value))


@dataclass(frozen=True)
class GpPrior:
    """Kernel + observation noise variance + prior mean function."""

    kernel: object
    noise_var: float
    mean_fn: object = ZeroMean()

    def __post_init__(self):
        nv = float(self.noise_var)
        if not np.isfinite(nv) or nv < 0.0:
            raise ValueError(f"noise_var must be >= 0, got {nv}")
        object.__setattr__(self, "noise_var", nv)


@dataclass(frozen=True)
class GpPosterior:
    """Conditioned GP: training data plus the Cholesky factor and weights.

    `chol` factors gram(kernel, train_x) + noise_var I and `alpha` solves
    that system against the de-meaned targets, so the predictive mean is
    the linear smoother cross_gram^T alpha.
    """

    prior: GpPrior
    train_x: np.ndarray
    train_y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray

    def predict(self, test_x, include_noise=True):
        return predict(self, test_x, include_noise=include_noise)


def condition(prior, train_x, train_y):
    """Condition a GP prior on observations; returns a :class:`GpPosterior`.

    Raises
    ------
    NotPositiveDefinite
        When the (jittered) kernel system is too close to singular to meet
        the 1e-6 relative residual contract, e.g. duplicate inputs with
        zero noise variance.
    """
    x = _as_inputs(train_x, "train_x")
    y = _as_inputs(train_y, "train_y")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"{x.shape[0]} inputs vs {y.shape[0]} targets"
        )
    k = gram(prior.kernel, x) + prior.noise_var * np.eye(x.shape[0])
    factor = cholesky(k)
    target = y - prior.mean_fn.values(x)
    alpha = chol_solve(factor, target)
    tol = 1e-6 * max(float(np.linalg.norm(target)), 1e-12)
    defect = target - k @ alpha
    residual = float(np.linalg.norm(defect))
    for _ in range(2):
        if residual <= tol:
            break
        # iterative refinement; keep the best iterate in case the factor
        # is too inaccurate for the correction to help
        candidate = alpha + chol_solve(factor, defect)
        cand_defect = target - k @ candidate
        cand_residual = float(np.linalg.norm(cand_defect))
        if cand_residual >= residual:
            break
        alpha, defect, residual = candidate, cand_defect, cand_residual
    if residual > tol:
        raise NotPositiveDefinite(
            f"kernel system too ill-conditioned: residual {residual:.3e}"
        )
    return GpPosterior(prior=prior, train_x=x, train_y=y, chol=factor, alpha=alpha)


def predict(posterior, test_x, include_noise=True):
    """Predictive means and variances at test inputs.

    By default variances describe a noisy observation at the test point
    (latent variance + noise_var); pass include_noise=False for the
    latent function variance. Tiny negative variances from roundoff are
    clamped to zero.
    """
    xs = _as_inputs(test_x, "test_x")
    prior = posterior.prior
    ks = cross_gram(prior.kernel, posterior.train_x, xs)
    means = prior.mean_fn.values(xs) + ks.T @ posterior.alpha
    v = solve_triangular(posterior.chol, ks, lower=True)
    variances = prior.kernel.prior_variance - np.einsum("ij,ij->j", v, v)
    if include_noise:
        variances = variances + prior.noise_var
    return means, np.maximum(variances, 0.0)


def prior_sample(prior, xs, rng):
    """One draw of noisy targets y = f + eps jointly over the inputs `xs`."""
    xs = _as_inputs(xs)
    cov = gram(prior.kernel, xs) + prior.noise_var * np.eye(xs.shape[0])
    g = Gaussian(prior.mean_fn.values(xs), 0.5 * (cov + cov.T))
    return mvn_sample(g, rng, 1)[0]


def log_marginal_likelihood(prior, train_x, train_y):
    """Evidence log p(y | x, hyperparameters) under the GP prior."""
    x = _as_inputs(train_x, "train_x")
    y = _as_inputs(train_y, "train_y")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} inputs vs {y.shape[0]} targets")
    k = gram(prior.kernel, x) + prior.noise_var * np.eye(x.shape[0])
    factor = cholesky(k)
    target = y - prior.mean_fn.values(x)
    alpha = chol_solve(factor, target)
    half_logdet = float(np.sum(np.log(np.diag(factor))))
    n = x.shape[0]
    with np.errstate(over="ignore"):  # huge targets overflow to evidence -inf
        quad = float(target @ alpha)
    return float(-0.5 * quad - half_logdet - 0.5 * n * np.log(2.0 * np.pi))


def lml_gradients(prior, train_x, train_y):
    """Evidence gradient wrt every hyperparameter, in pack order.

    Kernel parameters and the noise variance are differentiated in log
    space via the trace contraction with (alpha alpha^T - K^-1); the
    constant-mean parameter (when present) is in natural units and its
    gradient is sum(alpha).
    """
    x = _as_inputs(train_x, "train_x")
    y = _as_inputs(train_y, "train_y")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} inputs vs {y.shape[0]} targets")
    k_kernel, dks = prior.kernel.gram_with_grads(x)
    n = x.shape[0]
    k = k_kernel + prior.noise_var * np.eye(n)
    factor = cholesky(k)
    target = y - prior.mean_fn.values(x)
    alpha = chol_solve(factor, target)
    k_inv = chol_solve(factor, np.eye(n))
    a = np.outer(alpha, alpha) - k_inv
    grads = [0.5 * float(np.sum(a * dk)) for dk in dks]
    grads.append(0.5 * prior.noise_var * float(np.trace(a)))
    if prior.mean_fn.n_params:
        grads.append(float(np.sum(alpha)))
    return np.array(grads)


def param_names(prior):
    """Hyperparameter names in pack order (kernel, noise_var, mean)."""
    names = list(prior.kernel.param_names) + ["noise_var"]
    if prior.mean_fn.n_params:
        names.append("mean_const")
    return tuple(names)


def pack_log_params(prior):
    """Flatten a prior into the optimizer vector.

    Kernel parameters and noise_var enter as logs; the constant mean (when
    present) enters in natural units. noise_var must be positive to pack.
    """
    if prior.noise_var <= 0.0:
        raise ValueError("noise_var must be positive to optimize in log space")
    vec = list(prior.kernel.log_params()) + [np.log(prior.noise_var)]
    if prior.mean_fn.n_params:
        vec.append(float(prior.mean_fn.value))
    return np.array(vec)


def unpack_log_params(prior, vec):
    """Inverse of :func:`pack_log_params`, preserving the prior's structure."""
    vec = np.asarray(vec, dtype=float)
    kp = prior.kernel.n_params
    expected = kp + 1 + prior.mean_fn.n_params
    if vec.shape != (expected,):
        raise DimensionMismatch(f"expected {expected} parameters, got {vec.shape}")
    kernel = prior.kernel.with_log_params(vec[:kp])
    noise_var = float(np.exp(vec[kp]))
    if prior.mean_fn.n_params:
        mean_fn = ConstantMean(float(vec[kp + 1]))
    else:
        mean_fn = prior.mean_fn
    return GpPrior(kernel=kernel, noise_var=noise_var, mean_fn=mean_fn)


def read_xy_csv(path):
    """Read a dataset CSV with header columns x, y."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["x", "y"]:
            raise ValueError(f"{path}: expected header 'x,y'")
        xs, ys = [], []
        for row in reader:
            if not row:
                continue
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    if not xs:
        raise ValueError(f"{path}: no data rows")
    return np.array(xs), np.array(ys)


def write_xy_csv(path, xs, ys):
    """Write a dataset CSV with header columns x, y."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in zip(xs, ys):
            writer.writerow([repr(float(x)), repr(float(y))])


def write_predictions_csv(path, xs, means, variances):
    """Prediction CSV: x_star, mean, variance, lower95, upper95 (2-sigma band)."""
    xs = np.asarray(xs, dtype=float).reshape(-1)
    means = np.asarray(means, dtype=float).reshape(-1)
    variances = np.asarray(variances, dtype=float).reshape(-1)
    if not (xs.shape == means.shape == variances.shape):
        raise DimensionMismatch("xs, means, variances must have equal lengths")
    half = 2.0 * np.sqrt(variances)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_star", "mean", "variance", "lower95", "upper95"])
        for i in range(xs.shape[0]):
            writer.writerow(
                [
                    repr(float(xs[i])),
                    repr(float(means[i])),
                    repr(float(variances[i])),
                    repr(float(means[i] - half[i])),
                    repr(float(means[i] + half[i])),
                ]
            )
