"""Scalar special functions in the log domain.

Every log-quantity in the package is a plain ``float`` in nats; ``-inf``
stands for an underlying zero.
"""

import math

import numpy as np

from .errors import DomainError

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2.0 * math.pi)


def log_gamma(a: float) -> float:
    """ln Gamma(a) for a > 0."""
    a = float(a)
    if not a > 0.0 or math.isinf(a):
        raise DomainError(f"log_gamma requires a finite a > 0, got {a!r}")
    return math.lgamma(a)


def log_multivariate_gamma(m: int, a: float) -> float:
    """ln Gamma_m(a) = m(m-1)/4 ln(pi) + sum_{j=1..m} ln Gamma(a + (1-j)/2).

    Defined for a > (m-1)/2; smaller arguments mean a cluster with too few
    points for a full-rank covariance and raise :class:`DomainError`.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"dimension m must be a positive integer, got {m!r}")
    m = int(m)
    a = float(a)
    if not a > 0.5 * (m - 1):
        raise DomainError(f"log_multivariate_gamma({m}, a) requires a > {(m - 1) / 2}, got {a!r}")
    total = 0.25 * m * (m - 1) * LOG_PI
    for j in range(1, m + 1):
        total += math.lgamma(a + 0.5 * (1 - j))
    return total


def log_sum_exp(values) -> float:
    """ln sum exp(v_i) by max-shift; the empty sum is ``-inf``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return -math.inf
    if np.isnan(v).any():
        raise DomainError("log_sum_exp received NaN")
    vmax = v.max()
    if math.isinf(vmax):
        # all -inf, or a +inf term dominating
        return float(vmax)
    return float(vmax + math.log(np.exp(v - vmax).sum()))


def log_add_exp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def softplus(x):
    """ln(1 + e^x), branch-wise so neither tail overflows."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = x[pos] + np.log1p(np.exp(-x[pos]))
    out[~pos] = np.log1p(np.exp(x[~pos]))
    return out
