"""Multivariate Gaussian MLE and its restricted-domain NML code-length.

The domain Y(R, lambda_min) keeps the squared norm of the mean estimate at
most R and the j-th largest covariance eigenvalue at least lambda_min[j];
over that domain the maximised-likelihood integral is finite and has the
closed form implemented in :func:`log_C_gaussian_nml`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDomainError, DomainError, InputError, OutOfDomainError, SingularityError
from .special import LOG_2PI, log_gamma, log_multivariate_gamma

SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class GaussianMLE:
    mean: np.ndarray
    covariance: np.ndarray
    eigenvalues: np.ndarray  # nonincreasing
    n: int

    @property
    def m(self) -> int:
        return self.mean.shape[0]

    @property
    def log_det(self) -> float:
        return float(np.log(self.eigenvalues).sum())

    @property
    def mean_sq_norm(self) -> float:
        return float(self.mean @ self.mean)


@dataclass(frozen=True)
class DomainParams:
    R: float
    lambda_min: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(v) for v in np.atleast_1d(self.lambda_min))
        object.__setattr__(self, "lambda_min", lam)
        object.__setattr__(self, "R", float(self.R))
        if not self.R > 0:
            raise DomainError(f"R must be positive, got {self.R!r}")
        if not lam or any(not v > 0 for v in lam):
            raise DomainError(f"lambda_min entries must be positive, got {lam!r}")

    @classmethod
    def from_theta(cls, theta: float, m: int) -> "DomainParams":
        """R = theta and every lambda_min = theta^(-1/m), so R * prod(lambda_min)^(-1) = theta^2."""
        return cls(theta, (theta ** (-1.0 / m),) * m)

    def contains(self, fit: GaussianMLE) -> bool:
        if len(self.lambda_min) != fit.m:
            raise InputError(f"lambda_min has {len(self.lambda_min)} entries for m={fit.m} data")
        return fit.mean_sq_norm <= self.R and bool(np.all(fit.eigenvalues >= np.asarray(self.lambda_min)))


def as_matrix(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError(f"expected an n x m data matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("data contains non-finite values")
    return x


def mvn_mle(data) -> GaussianMLE:
    """Mean and divisor-n covariance; raises :class:`SingularityError` when
    n <= m or the covariance is numerically rank-deficient."""
    x = as_matrix(data)
    n, m = x.shape
    if n <= m:
        raise SingularityError(f"{n} points cannot give a full-rank {m}x{m} covariance")
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / n
    cov = 0.5 * (cov + cov.T)
    eig = np.linalg.eigvalsh(cov)[::-1]
    if not eig[0] > 0 or eig[-1] <= SINGULAR_RTOL * eig[0]:
        raise SingularityError(f"rank-deficient covariance (eigenvalues {eig})")
    return GaussianMLE(mean, cov, eig.copy(), n)


def gaussian_neg_log_likelihood(n: int, m: int, log_det: float) -> float:
    """-ln f(x^n; mu_hat, Sigma_hat) = n/2 ln((2 pi)^m |Sigma_hat|) + mn/2."""
    return 0.5 * n * (m * LOG_2PI + log_det) + 0.5 * m * n


def log_gaussian_prefactor(m: int, log_R_half_m: float, log_lambda_term: float) -> float:
    """ln[2^{m+1} X / (m^{m+1} Gamma(m/2))] for X given in logs; shared with
    the GMM B term."""
    return (m + 1) * math.log(2.0) + log_R_half_m + log_lambda_term - (m + 1) * math.log(m) - log_gamma(0.5 * m)


def log_C_gaussian_nml(n: int, m: int, params: DomainParams) -> float:
    """ln C(R, lambda_min) for n points in m dimensions.

    Requires n >= m + 1 so that Gamma_m((n-1)/2) exists.
    """
    if n < m + 1:
        raise DomainError(f"normalizer needs n >= m + 1 = {m + 1}, got n={n}")
    if len(params.lambda_min) != m:
        raise InputError(f"lambda_min has {len(params.lambda_min)} entries for m={m}")
    pre = log_gaussian_prefactor(m, 0.5 * m * math.log(params.R), -0.5 * m * sum(math.log(v) for v in params.lambda_min))
    return pre + 0.5 * m * n * math.log(n / (2.0 * math.e)) - log_multivariate_gamma(m, 0.5 * (n - 1))


def nml_codelength_gaussian(data, params: DomainParams) -> float:
    fit = mvn_mle(data)
    if not params.contains(fit):
        raise OutOfDomainError(
            f"MLE outside Y(R, lambda_min): |mu|^2={fit.mean_sq_norm:.6g} (R={params.R:.6g}), "
            f"eigenvalues={fit.eigenvalues} (lambda_min={params.lambda_min})"
        )
    return gaussian_neg_log_likelihood(fit.n, fit.m, fit.log_det) + log_C_gaussian_nml(fit.n, fit.m, params)


def ml_domain_params(data) -> DomainParams:
    """The domain parameters minimising the NML code-length: R = |mu_hat|^2 and
    lambda_min = the sorted eigenvalues, placing the data on the domain
    boundary."""
    fit = mvn_mle(data)
    r = fit.mean_sq_norm
    if r == 0.0:
        raise DegenerateDomainError("mean estimate is exactly zero; R_hat = 0")
    return DomainParams(r, tuple(fit.eigenvalues))
