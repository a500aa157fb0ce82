"""Pure-NumPy mirrors of the compiled inner loops in ``_core.pyx``.

Signatures and floating-point operation order match the Cython versions
so the two backends agree to within final-ulp rounding of exp/log/pow.
"""

import numpy as np


def pairwise_sqdist(x, y):
    """Matrix of (x_i - y_j)**2 for 1-D inputs."""
    d = np.asarray(x, float)[:, None] - np.asarray(y, float)[None, :]
    return d * d


def exp_quad_gram(x, y, amp2, gamma):
    """amp2 * exp(-gamma * (x_i - y_j)**2)."""
    t = pairwise_sqdist(x, y)
    return amp2 * np.exp(-(gamma * t))


def periodic_gram(x, y, amp2, gamma_per, gamma_decay):
    """amp2 * exp(-gamma_per*sin^2(pi d) - gamma_decay*d^2), d = x_i - y_j."""
    d = np.asarray(x, float)[:, None] - np.asarray(y, float)[None, :]
    s = np.sin(np.pi * d)
    return amp2 * np.exp(-(gamma_per * (s * s)) - (gamma_decay * (d * d)))


def rq_gram(x, y, amp2, shape, len2):
    """amp2 * (1 + d^2/(2*shape*len2))**(-shape), d = x_i - y_j."""
    c = 1.0 / (2.0 * shape * len2)
    b = 1.0 + pairwise_sqdist(x, y) * c
    return amp2 * np.power(b, -shape)


def gauss_loglik(z, means, var):
    """log N(z; means_i, var) for every i."""
    means = np.asarray(means, float)
    c = -0.5 * np.log(2.0 * np.pi * var)
    inv2v = 0.5 / var
    d = z - means
    return c - (d * d) * inv2v


def resample_indices(cumsum, u0):
    """Systematic-resampling ancestor indices.

    Index j gets the first i with cumsum[i] >= u0 + j/n; the top index is
    clipped so cumulative-sum rounding below 1.0 cannot run off the end.
    """
    cumsum = np.asarray(cumsum, float)
    n = cumsum.shape[0]
    u = u0 + np.arange(n) / n
    idx = np.searchsorted(cumsum, u, side="left")
    return np.minimum(idx, n - 1).astype(np.intp)
