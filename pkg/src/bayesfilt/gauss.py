"""Dense Gaussian primitives shared by every estimator in the package.

Matrices are float64 NumPy arrays in row-major order and are treated as
immutable once wrapped in a :class:`Gaussian`. Every stochastic helper
takes an explicit ``numpy.random.Generator`` so runs are reproducible and
independent streams can be spawned for concurrent use; nothing in this
module touches global RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

SYMMETRY_RTOL = 1e-10

_JITTER_SCALE = 1e-12
_JITTER_RETRIES = 3


class NotSquare(ValueError):
    """Matrix is not square where a square one is required."""


class NotSymmetric(ValueError):
    """Matrix is not symmetric within tolerance."""


class DimensionMismatch(ValueError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(ArithmeticError):
    """Cholesky failed even after the escalating-jitter retries."""


def as_matrix(a, name="matrix"):
    """Validate and return `a` as a finite float64 2-D array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_vector(a, name="vector"):
    """Validate and return `a` as a finite float64 1-D array."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _check_symmetric(a, name):
    scale = np.max(np.abs(a)) if a.size else 0.0
    tol = SYMMETRY_RTOL * max(scale, 1e-300)
    if np.max(np.abs(a - a.T)) > tol:
        raise NotSymmetric(f"{name} is not symmetric within {SYMMETRY_RTOL} relative")


def cholesky(a):
    """Lower-triangular Cholesky factor with escalating diagonal jitter.

    Parameters
    ----------
    a : array_like
        Square symmetric matrix (symmetry checked to 1e-10 relative to the
        largest entry).

    Returns
    -------
    ndarray
        Lower-triangular L with L @ L.T equal to `a` up to the added
        jitter (at most 1e-10 x mean diagonal).

    Raises
    ------
    NotSquare, NotSymmetric
        On malformed input.
    NotPositiveDefinite
        If factorization still fails after 3 jittered retries, or when
        the diagonal carries no mass to scale jitter against (e.g. the
        zero matrix). Jitter starts at 1e-12 x mean diagonal and grows
        tenfold per retry.
    """
    a = as_matrix(a, "matrix")
    if a.shape[0] != a.shape[1]:
        raise NotSquare(f"expected square matrix, got {a.shape}")
    _check_symmetric(a, "matrix")
    sym = 0.5 * (a + a.T)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        pass
    base = _JITTER_SCALE * float(np.mean(np.diag(sym))) if sym.size else 0.0
    if base <= 0.0:
        raise NotPositiveDefinite("matrix has a nonpositive diagonal")
    eye = np.eye(sym.shape[0])
    for retry in range(_JITTER_RETRIES):
        jitter = base * 10.0**retry
        try:
            return np.linalg.cholesky(sym + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefinite(
        f"matrix is not positive definite (jitter up to {base * 100:.3e} tried)"
    )


def chol_solve(factor, b):
    """Solve (L L^T) x = b given a lower Cholesky factor L.

    `b` may be a vector or a matrix of stacked right-hand sides.
    """
    factor = np.asarray(factor, dtype=float)
    b = np.asarray(b, dtype=float)
    if factor.ndim != 2 or factor.shape[0] != factor.shape[1]:
        raise NotSquare(f"factor must be square, got {factor.shape}")
    if b.shape[0] != factor.shape[0]:
        raise DimensionMismatch(
            f"rhs has leading dimension {b.shape[0]}, factor is {factor.shape[0]}"
        )
    return cho_solve((factor, True), b)


@dataclass(frozen=True)
class Gaussian:
    """Immutable multivariate normal with validated moments.

    mean is a length-d vector; cov is d x d, symmetric within 1e-10
    relative, and positive semidefinite (smallest eigenvalue no lower than
    -1e-10 x trace).
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean, "mean")
        cov = as_matrix(self.cov, "cov")
        if cov.shape[0] != cov.shape[1]:
            raise NotSquare(f"cov must be square, got {cov.shape}")
        if cov.shape[0] != mean.shape[0]:
            raise DimensionMismatch(
                f"mean has dim {mean.shape[0]}, cov is {cov.shape[0]}x{cov.shape[1]}"
            )
        _check_symmetric(cov, "cov")
        trace = float(np.trace(cov))
        min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T))))
        if min_eig < -1e-10 * max(trace, 1e-300):
            raise NotPositiveDefinite(
                f"cov has eigenvalue {min_eig:.3e} below the PSD tolerance"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.mean.shape[0]


def mvn_sample(g, rng, n):
    """Draw `n` samples from Gaussian `g` as an (n, d) array.

    Uses the jittered Cholesky factor of the covariance, so semidefinite
    covariances are sampled with at most ~1e-6 numerical spread per
    coordinate. An exactly-zero covariance yields the mean exactly (the
    same number of raw normal draws is consumed either way, keeping
    generator states aligned across model variants).
    """
    if n < 1:
        raise ValueError(f"need n >= 1 draws, got {n}")
    if np.all(g.cov == 0.0):
        factor = np.zeros_like(g.cov)
    else:
        factor = cholesky(g.cov)
    z = rng.standard_normal((n, g.dim))
    return g.mean + z @ factor.T


def mvn_logpdf(g, x):
    """Log density of Gaussian `g` at point `x` (cov must be positive definite)."""
    x = as_vector(x, "x")
    if x.shape[0] != g.dim:
        raise DimensionMismatch(f"x has dim {x.shape[0]}, Gaussian has dim {g.dim}")
    factor = cholesky(g.cov)
    white = solve_triangular(factor, x - g.mean, lower=True)
    half_logdet = float(np.sum(np.log(np.diag(factor))))
    return float(
        -0.5 * (g.dim * np.log(2.0 * np.pi) + white @ white) - half_logdet
    )


def stream(seed):
    """Fresh deterministic random stream for the given seed."""
    return np.random.default_rng(seed)


def substreams(seed, n):
    """`n` statistically independent streams derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
