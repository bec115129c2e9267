"""Hard-assignment EM with restarts and selection of the number of clusters.

Each restart runs soft EM and labels every point by its largest
responsibility.  The M-step is the exact weighted MLE, so the observed-data
log-likelihood never decreases; the ridge reg_eps * trace(global cov) / m
only pads the starting covariances and marks a component as degenerate once
an eigenvalue of its covariance drops below it, which ends (and discards)
that restart.  Per K, the restart whose
hard clustering has the highest complete-data log-likelihood (computed from
unregularised per-cluster MLEs) is kept, and every requested criterion is
evaluated on that same clustering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import HAVE_NUMBA, njit
from .complexity import (
    DEFAULT_J_FORM,
    ComplexityTable,
    HyperParams,
    check_labels,
    cluster_fits,
    complete_neg_log_likelihood,
    complexity_table,
    default_min_size,
    nml_from_fits,
    rnml_from_fits,
)
from .errors import ConfigError, DegenerateDomainError, InfeasibleError, InputError, NMLError, SingularityError
from .gaussian import DomainParams, GaussianMLE, as_matrix
from .special import LOG_2PI

CRITERIA = ("RNML", "NML", "AIC", "BIC")
_COLLAPSE = 1e-12


@dataclass(frozen=True)
class EMConfig:
    seed: int
    max_iter: int = 200
    tol: float = 1e-6
    n_restarts: int = 100
    reg_eps: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1 or self.n_restarts < 1:
            raise ConfigError("max_iter and n_restarts must be positive")
        if not 0 < self.tol < 1:
            raise ConfigError(f"tol must lie in (0, 1), got {self.tol!r}")
        if not self.reg_eps > 0:
            raise ConfigError("reg_eps must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass
class EMTrace:
    """Outcome of a single soft-EM run."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    responsibilities: np.ndarray
    log_likelihoods: np.ndarray  # observed-data, one per E-step
    n_iter: int
    converged: bool
    collapsed: bool

    def hard_labels(self) -> np.ndarray:
        """1-based argmax of the responsibilities; ties go to the lowest index."""
        return np.argmax(self.responsibilities, axis=1) + 1


@dataclass
class ClusteringResult:
    K: int
    z: np.ndarray
    fits: list[GaussianMLE]
    log_likelihood: float  # complete-data, at the hard assignment
    n_iter: int
    converged: bool
    restart: int
    n_discarded: int = 0


# -- EM kernels ------------------------------------------------------------


@njit(cache=True)
def _em_kernel(x, means, covs, weights, max_iter, tol, reg):
    n, m = x.shape
    K = means.shape[0]
    logp = np.empty((n, K))
    resp = np.empty((n, K))
    lls = np.empty(max_iter + 1)
    diff = np.empty(m)
    y = np.empty(m)
    log2pi = np.log(2.0 * np.pi)
    converged = False
    collapsed = False
    it = 0
    while True:
        # E-step
        for k in range(K):
            L = np.linalg.cholesky(covs[k])
            logdet = 0.0
            for a in range(m):
                logdet += 2.0 * np.log(L[a, a])
            c = np.log(weights[k]) - 0.5 * (m * log2pi + logdet)
            for i in range(n):
                for a in range(m):
                    diff[a] = x[i, a] - means[k, a]
                maha = 0.0
                for a in range(m):
                    s = diff[a]
                    for b in range(a):
                        s -= L[a, b] * y[b]
                    y[a] = s / L[a, a]
                    maha += y[a] * y[a]
                logp[i, k] = c - 0.5 * maha
        ll = 0.0
        for i in range(n):
            mx = logp[i, 0]
            for k in range(1, K):
                if logp[i, k] > mx:
                    mx = logp[i, k]
            s = 0.0
            for k in range(K):
                s += np.exp(logp[i, k] - mx)
            lse = mx + np.log(s)
            ll += lse
            for k in range(K):
                resp[i, k] = np.exp(logp[i, k] - lse)
        lls[it] = ll
        if it > 0 and abs(ll - lls[it - 1]) <= tol * abs(lls[it - 1]):
            converged = True
            break
        if it == max_iter:
            break
        # M-step
        for k in range(K):
            nk = 0.0
            for i in range(n):
                nk += resp[i, k]
            if nk <= 1e-12 * n:
                collapsed = True
                break
            weights[k] = nk / n
            for a in range(m):
                s = 0.0
                for i in range(n):
                    s += resp[i, k] * x[i, a]
                means[k, a] = s / nk
            for a in range(m):
                for b in range(a + 1):
                    s = 0.0
                    for i in range(n):
                        s += resp[i, k] * (x[i, a] - means[k, a]) * (x[i, b] - means[k, b])
                    s /= nk
                    covs[k, a, b] = s
                    covs[k, b, a] = s
            if np.linalg.eigvalsh(covs[k])[0] < reg:
                collapsed = True
                break
        if collapsed:
            break
        it += 1
    return resp, lls[: it + 1], it, converged, collapsed


def _em_numpy(x, means, covs, weights, max_iter, tol, reg):
    n, m = x.shape
    K = means.shape[0]
    lls = []
    converged = collapsed = False
    it = 0
    while True:
        logp = np.empty((n, K))
        for k in range(K):
            L = np.linalg.cholesky(covs[k])
            logdet = 2.0 * np.log(np.diag(L)).sum()
            y = np.linalg.solve(L, (x - means[k]).T)
            logp[:, k] = np.log(weights[k]) - 0.5 * (m * LOG_2PI + logdet + (y * y).sum(axis=0))
        mx = logp.max(axis=1, keepdims=True)
        lse = mx + np.log(np.exp(logp - mx).sum(axis=1, keepdims=True))
        resp = np.exp(logp - lse)
        ll = float(lse.sum())
        lls.append(ll)
        if it > 0 and abs(ll - lls[-2]) <= tol * abs(lls[-2]):
            converged = True
            break
        if it == max_iter:
            break
        nk = resp.sum(axis=0)
        if np.any(nk <= _COLLAPSE * n):
            collapsed = True
            break
        weights[:] = nk / n
        means[:] = (resp.T @ x) / nk[:, None]
        for k in range(K):
            d = x - means[k]
            c = (resp[:, k, None] * d).T @ d / nk[k]
            covs[k] = 0.5 * (c + c.T)
            if np.linalg.eigvalsh(covs[k])[0] < reg:
                collapsed = True
        if collapsed:
            break
        it += 1
    return resp, np.asarray(lls), it, converged, collapsed


def global_ridge(x: np.ndarray, reg_eps: float) -> tuple[np.ndarray, float]:
    """Global ML covariance and the ridge level reg_eps * trace / m."""
    n, m = x.shape
    d = x - x.mean(axis=0)
    cov = d.T @ d / n
    return cov, reg_eps * float(np.trace(cov)) / m


def run_em(data, initial_means, config: EMConfig, *, use_numba: bool | None = None) -> EMTrace:
    """One soft-EM run from the given means, global covariance and uniform weights."""
    x = np.ascontiguousarray(as_matrix(data))
    n, m = x.shape
    means = np.array(initial_means, dtype=float).reshape(-1, m)
    K = means.shape[0]
    cov, reg = global_ridge(x, config.reg_eps)
    covs = np.repeat((cov + reg * np.eye(m))[None], K, axis=0)
    weights = np.full(K, 1.0 / K)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    kernel = _em_kernel if (use_numba and HAVE_NUMBA) else _em_numpy
    try:
        resp, lls, it, converged, collapsed = kernel(x, means, covs, weights, config.max_iter, config.tol, reg)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"EM covariance lost positive definiteness: {exc}") from exc
    return EMTrace(weights, means, covs, resp, np.asarray(lls), int(it), bool(converged), bool(collapsed))


def restart_rng(seed: int, K: int, restart: int) -> np.random.Generator:
    """Independent stream per (seed, K, restart)."""
    return np.random.default_rng([int(seed), int(K), int(restart)])


def _score_restart(x, trace: EMTrace, K: int, min_size: int):
    if trace.collapsed:
        return None
    z = trace.hard_labels()
    try:
        fits = cluster_fits(x, z, K, min_size)
    except (InfeasibleError, SingularityError):
        return None
    return z, fits, -complete_neg_log_likelihood(fits, x.shape[0])


def em_fit(data, K: int, config: EMConfig, *, initial_means=None, min_size: int | None = None) -> ClusteringResult:
    """Best of ``config.n_restarts`` EM runs by complete-data log-likelihood.

    ``initial_means`` (K x m) replaces the random initialisation with a single
    deterministic run.  Restarts that empty or flatten a component or whose hard
    clustering has an undersized or singular cluster are discarded and counted
    in ``n_discarded``; if none survive, :class:`InfeasibleError` is raised.
    """
    x = np.ascontiguousarray(as_matrix(data))
    n, m = x.shape
    ms = default_min_size(m, min_size)
    if K < 1 or n < K * ms:
        raise InfeasibleError(f"{n} points cannot form {K} clusters of at least {ms} points")
    if K == 1:
        fits = cluster_fits(x, np.ones(n, dtype=np.int64), 1, ms)
        return ClusteringResult(1, np.ones(n, dtype=np.int64), fits, -complete_neg_log_likelihood(fits, n), 0, True, 0)

    if initial_means is not None:
        starts = [np.asarray(initial_means, dtype=float).reshape(K, m)]
    else:
        starts = (x[restart_rng(config.seed, K, r).choice(n, size=K, replace=False)] for r in range(config.n_restarts))

    best = None
    discarded = 0
    for r, mu0 in enumerate(starts):
        try:
            trace = run_em(x, mu0, config)
        except SingularityError:
            discarded += 1
            continue
        scored = _score_restart(x, trace, K, ms)
        if scored is None:
            discarded += 1
            continue
        z, fits, ll = scored
        if best is None or ll > best.log_likelihood:
            best = ClusteringResult(K, z, fits, ll, trace.n_iter, trace.converged, r)
    if best is None:
        raise InfeasibleError(f"all {discarded} EM restarts for K={K} were infeasible")
    best.n_discarded = discarded
    return best


# -- information criteria --------------------------------------------------


def aic_penalty(m: int, K: int) -> float:
    return m * (m + 3) * K + K


def bic_penalty(m: int, sizes, n: int, standard: bool = False) -> float:
    sizes = np.asarray(sizes, dtype=float)
    K = sizes.size
    if standard:
        return float(0.5 * m * (m + 3) * np.log(sizes).sum() + (K - 1) * math.log(n))
    return float(0.5 * m * (m + 3) * K * np.log(sizes).sum() + K * math.log(n))


def aic_from_fits(fits: list[GaussianMLE], n: int) -> float:
    return 2.0 * complete_neg_log_likelihood(fits, n) + aic_penalty(fits[0].m, len(fits))


def bic_from_fits(fits: list[GaussianMLE], n: int, standard: bool = False) -> float:
    return 2.0 * complete_neg_log_likelihood(fits, n) + bic_penalty(fits[0].m, [f.n for f in fits], n, standard)


def _fits_or_none(data, z, K):
    x = as_matrix(data)
    check_labels(z, x.shape[0], K)
    try:
        return x.shape[0], cluster_fits(x, z, K)
    except (InfeasibleError, SingularityError):
        return x.shape[0], None


def aic(data, z, K: int) -> float:
    """-2 ln f + m(m+3)K + K; ``inf`` for an undersized cluster."""
    n, fits = _fits_or_none(data, z, K)
    return math.inf if fits is None else aic_from_fits(fits, n)


def bic(data, z, K: int, *, standard: bool = False) -> float:
    """-2 ln f + (m(m+3)K/2) sum ln h_k + K ln n.

    ``standard=True`` swaps in (m(m+3)/2) sum ln h_k + (K-1) ln n.
    """
    n, fits = _fits_or_none(data, z, K)
    return math.inf if fits is None else bic_from_fits(fits, n, standard)


# -- selection -------------------------------------------------------------


def normalize_criteria(criteria) -> tuple[str, ...]:
    if isinstance(criteria, str):
        criteria = criteria.split(",")
    out = []
    for c in criteria:
        c = c.strip().upper()
        if c not in CRITERIA:
            raise ConfigError(f"unknown criterion {c!r}; expected a subset of {CRITERIA}")
        if c not in out:
            out.append(c)
    if not out:
        raise ConfigError("no criteria requested")
    return tuple(sorted(out, key=CRITERIA.index))


@dataclass
class Scorer:
    """Evaluates criteria on stored per-cluster fits."""

    criteria: tuple[str, ...]
    gamma: HyperParams
    params: DomainParams | None
    table: ComplexityTable
    bic_standard: bool = False

    def score(self, fits: list[GaussianMLE] | None, n: int) -> dict[str, float]:
        out = {}
        for c in self.criteria:
            if fits is None:
                out[c] = math.inf
                continue
            try:
                if c == "RNML":
                    out[c] = rnml_from_fits(fits, n, self.gamma, self.table)
                elif c == "NML":
                    out[c] = nml_from_fits(fits, n, self.params, self.table.c1(len(fits), n))
                elif c == "AIC":
                    out[c] = aic_from_fits(fits, n)
                else:
                    out[c] = bic_from_fits(fits, n, self.bic_standard)
            except DegenerateDomainError:
                out[c] = math.inf
        return out


def argmin_k(scores: dict[int, float]) -> int:
    """Smallest K attaining the minimum score."""
    ks = sorted(scores)
    vals = np.array([scores[k] for k in ks])
    return ks[int(np.argmin(vals))]


@dataclass
class SelectionReport:
    k_range: tuple[int, ...]
    criteria: tuple[str, ...]
    scores: dict[str, dict[int, float]]
    chosen: dict[str, int]
    results: dict[int, ClusteringResult | None]
    notes: dict[int, str] = field(default_factory=dict)

    def rows(self):
        for c in self.criteria:
            for k in self.k_range:
                yield k, c, self.scores[c][k], int(self.chosen[c] == k)


def fit_k_range(data, k_range, config: EMConfig, *, initial_means=None, min_size=None):
    """EM fits for every K; infeasible K map to ``None`` with a note."""
    results, notes = {}, {}
    for K in k_range:
        init = None if initial_means is None else initial_means.get(K)
        try:
            results[K] = em_fit(data, K, config, initial_means=init, min_size=min_size)
        except NMLError as exc:
            results[K] = None
            notes[K] = str(exc)
    return results, notes


def select_k(
    data,
    k_range,
    criteria=CRITERIA,
    config: EMConfig | None = None,
    gamma: HyperParams | None = None,
    params: DomainParams | None = None,
    *,
    min_size: int | None = None,
    j_form: str = DEFAULT_J_FORM,
    bic_standard: bool = False,
    initial_means: dict | None = None,
    table: ComplexityTable | None = None,
) -> SelectionReport:
    """Fit each K in ``k_range`` and pick, per criterion, the K with the
    lowest score (ties toward smaller K).

    Defaults: gamma ratios 1e4; NML domain R = 1e4 with every
    lambda_min = 1e4^(-1/m).
    """
    x = as_matrix(data)
    n, m = x.shape
    k_range = tuple(sorted({int(k) for k in k_range}))
    if not k_range or k_range[0] < 1:
        raise ConfigError("k_range must contain positive integers")
    criteria = normalize_criteria(criteria)
    if config is None:
        raise ConfigError("an EMConfig with an explicit seed is required")
    gamma = gamma or HyperParams.from_ratio()
    params = params or DomainParams.from_theta(1e4, m)
    if len(params.lambda_min) != m:
        raise InputError(f"lambda_min has {len(params.lambda_min)} entries for m={m}")
    ms = default_min_size(m, min_size)
    if table is None:
        table = complexity_table(n, k_range[-1], m, ms, j_form)
    elif not table.covers(k_range[-1], n, m, ms, table.form):
        raise InputError("complexity table does not cover this data set and K range")
    scorer = Scorer(criteria, gamma, params, table, bic_standard)

    results, notes = fit_k_range(x, k_range, config, initial_means=initial_means, min_size=ms)
    scores = {c: {} for c in criteria}
    for K in k_range:
        res = results[K]
        for c, v in scorer.score(None if res is None else res.fits, n).items():
            scores[c][K] = v
    chosen = {c: argmin_k(scores[c]) for c in criteria}
    return SelectionReport(k_range, criteria, scores, chosen, results, notes)
