"""NML code-lengths for exponential-family models with analytic normalizers.

A family qualifies when (1) its MLE is a closed-form function of the
sufficient statistics and (2) the density of the MLE, evaluated at itself,
integrates in closed form over a restricted range of estimates.  Each
concrete model below supplies both pieces; no symbolic integration happens
at runtime.

The factorisation into a delta term and per-part MLE densities assumes the
parameter parts are independent.  Both shipped models are one-parameter, so
the assumption holds trivially; it is not checked for user subclasses.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError, OutOfDomainError
from .special import log_gamma, softplus


def _as_sample(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("empty data sequence")
    if not np.all(np.isfinite(x)):
        raise InputError("data contains non-finite values")
    return x


def gamma_mle(x, k: float) -> float:
    """Scale MLE sum(x) / (k n) for a Gamma model with known shape ``k``."""
    x = _as_sample(x)
    if k <= 0:
        raise DomainError(f"shape k must be positive, got {k!r}")
    if np.any(x <= 0):
        raise DomainError("Gamma data must be strictly positive")
    return float(x.sum() / (k * x.size))


def logistic_mle(x) -> float:
    """n / sum ln(1 + e^{-x_i})."""
    x = _as_sample(x)
    return float(x.size / softplus(-x).sum())


def gamma_log_normalizer(k: float, n: int, theta_min: float, theta_max: float) -> float:
    """ln C = kn ln(kn) - ln Gamma(kn) - kn + ln ln(theta_max / theta_min)."""
    if k <= 0 or n < 1:
        raise DomainError(f"need k > 0 and n >= 1, got k={k!r}, n={n!r}")
    if not 0 < theta_min < theta_max:
        raise DomainError(f"empty scale domain [{theta_min!r}, {theta_max!r}]")
    kn = k * n
    return kn * math.log(kn) - log_gamma(kn) - kn + math.log(math.log(theta_max / theta_min))


def logistic_log_normalizer(n: int, R: float) -> float:
    """ln C = (n-1) ln n - ln Gamma(n) - n + 2 ln R."""
    if n < 1 or R <= 0:
        raise DomainError(f"need n >= 1 and R > 0, got n={n!r}, R={R!r}")
    return (n - 1) * math.log(n) - log_gamma(n) - n + 2.0 * math.log(R)


class ExpFamilyModel(ABC):
    """A family f(x; theta) = h(x) exp(eta(theta)^T T(x) - A(eta(theta))) with
    a closed-form MLE and a closed-form log-normalizer over a restricted
    domain of estimates."""

    @abstractmethod
    def mle(self, x) -> float: ...

    @abstractmethod
    def log_likelihood(self, x, theta: float) -> float: ...

    @abstractmethod
    def in_domain(self, theta_hat: float) -> bool: ...

    @abstractmethod
    def log_normalizer(self, n: int) -> float: ...


@dataclass(frozen=True)
class GammaModel(ExpFamilyModel):
    k: float
    theta_min: float
    theta_max: float

    def __post_init__(self):
        if not self.k > 0:
            raise DomainError(f"shape k must be positive, got {self.k!r}")
        if not 0 < self.theta_min < self.theta_max:
            raise DomainError(f"empty scale domain [{self.theta_min!r}, {self.theta_max!r}]")

    def mle(self, x) -> float:
        return gamma_mle(x, self.k)

    def log_likelihood(self, x, theta: float) -> float:
        x = _as_sample(x)
        k = self.k
        return float(
            -x.size * (math.lgamma(k) + k * math.log(theta))
            + (k - 1.0) * np.log(x).sum()
            - x.sum() / theta
        )

    def in_domain(self, theta_hat: float) -> bool:
        return self.theta_min <= theta_hat <= self.theta_max

    def log_normalizer(self, n: int) -> float:
        return gamma_log_normalizer(self.k, n, self.theta_min, self.theta_max)


@dataclass(frozen=True)
class LogisticModel(ExpFamilyModel):
    """f(x; theta) = theta e^{-x} / (1 + e^{-x})^{theta + 1}, with estimates
    restricted to theta_hat <= R."""

    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError(f"R must be positive, got {self.R!r}")

    def mle(self, x) -> float:
        return logistic_mle(x)

    def log_likelihood(self, x, theta: float) -> float:
        x = _as_sample(x)
        return float(x.size * math.log(theta) - x.sum() - (theta + 1.0) * softplus(-x).sum())

    def in_domain(self, theta_hat: float) -> bool:
        return 0 < theta_hat <= self.R

    def log_normalizer(self, n: int) -> float:
        return logistic_log_normalizer(n, self.R)


def nml_codelength(model: ExpFamilyModel, x) -> float:
    """-ln f(x; theta_hat(x)) + ln C, in nats.

    Raises :class:`OutOfDomainError` when the MLE is outside the model's
    restricted domain, where the NML density is zero.
    """
    x = _as_sample(x)
    theta_hat = model.mle(x)
    if not model.in_domain(theta_hat):
        raise OutOfDomainError(f"MLE {theta_hat:.6g} lies outside the restricted domain of {model!r}")
    return -model.log_likelihood(x, theta_hat) + model.log_normalizer(x.size)
