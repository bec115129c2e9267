"""Renormalized (RNML) and restricted-domain (NML) code-lengths of a GMM.

The RNML code-length of a hard clustering (x^n, z^n) with K clusters is

    -ln f(x, z; K, mle) + ln C1(K, n) + ln C2(K, n) + ln B(x, z) + K ln I(m, gamma)

where C1 is the multinomial parametric complexity, C2 folds the per-cluster
Gaussian factor J(h) into the same sum over cluster-size compositions, B
collects the data-dependent prefactors, and I depends on the hyperparameters
only through two double logarithms.

C1 uses the linear three-term recursion in K; C2 is built as a full
(K x n) table by repeated binomial convolution, O(n^2 K).  Both tables hold
logs throughout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._accel import HAVE_NUMBA, njit
from .errors import DegenerateDomainError, DomainError, InfeasibleError, InputError, SingularityError
from .gaussian import (
    DomainParams,
    GaussianMLE,
    as_matrix,
    gaussian_neg_log_likelihood,
    log_C_gaussian_nml,
    log_gaussian_prefactor,
    mvn_mle,
)
from .special import log_multivariate_gamma

NEG_INF = -math.inf
DEFAULT_RATIO = 1e4

# Exponent of (h / 2e) in J(h): "half" uses m h / 2, matching the single
# Gaussian normalizer so that K = 1 reduces to the one-component RNML code;
# "full" uses m h as printed alongside the GMM theorem.
J_FORMS = {"half": 0.5, "full": 1.0}
DEFAULT_J_FORM = "half"


@dataclass(frozen=True)
class HyperParams:
    """gamma = (lambda1, lambda2, R1, R2); only the ratios enter the code-length."""

    lam1: float
    lam2: float
    R1: float
    R2: float

    def __post_init__(self):
        for name in ("lam1", "lam2", "R1", "R2"):
            if not getattr(self, name) > 0:
                raise DomainError(f"hyperparameter {name} must be positive")
        if not self.R2 / self.R1 > 1 or not self.lam2 / self.lam1 > 1:
            raise DomainError("need R2/R1 > 1 and lambda2/lambda1 > 1")

    @classmethod
    def from_ratio(cls, theta: float = DEFAULT_RATIO) -> "HyperParams":
        return cls(1.0, float(theta), 1.0, float(theta))


def default_min_size(m: int, min_size: int | None = None) -> int:
    """Smallest cluster size with a nonzero J factor (default m + 1)."""
    if min_size is None:
        return m + 1
    if min_size < m + 1:
        raise DomainError(f"min_size must be >= m + 1 = {m + 1}, got {min_size}")
    return int(min_size)


def log_I(m: int, gamma: HyperParams) -> float:
    """ln[(m/2)^{m+1} ln(R2/R1) (ln(lambda2/lambda1))^m]."""
    return (
        (m + 1) * math.log(0.5 * m)
        + math.log(math.log(gamma.R2 / gamma.R1))
        + m * math.log(math.log(gamma.lam2 / gamma.lam1))
    )


def _j_power(form: str) -> float:
    try:
        return J_FORMS[form]
    except KeyError:
        raise DomainError(f"unknown J form {form!r}; expected one of {sorted(J_FORMS)}") from None


def log_J(h: int, m: int, min_size: int | None = None, form: str = DEFAULT_J_FORM) -> float:
    """ln J(h) = p m h ln(h / 2e) - ln Gamma_m((h-1)/2) with p = 1/2 ("half")
    or 1 ("full"); -inf below ``min_size``."""
    p = _j_power(form)
    if h < default_min_size(m, min_size):
        return NEG_INF
    return p * m * h * math.log(h / (2.0 * math.e)) - log_multivariate_gamma(m, 0.5 * (h - 1))


def log_J_vector(n_max: int, m: int, min_size: int | None = None, form: str = DEFAULT_J_FORM) -> np.ndarray:
    out = np.full(n_max + 1, NEG_INF)
    for h in range(default_min_size(m, min_size), n_max + 1):
        out[h] = log_J(h, m, min_size, form)
    return out


# -- kernels ---------------------------------------------------------------
#
# _log_split_weight(n, r1) = ln[ binom(n, r1) (r1/n)^r1 (r2/n)^r2 ],  0^0 = 1


def _lgamma_table(n_max: int) -> np.ndarray:
    return np.array([math.lgamma(i + 1.0) for i in range(n_max + 1)])


def _xlogx_table(n_max: int) -> np.ndarray:
    r = np.arange(n_max + 1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)), 0.0)


@njit(cache=True)
def _binary_mass_kernel(n_max, lgf, xlx):
    out = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        base = lgf[n] - xlx[n]
        # terms are ln w(n, r1); first pass for the max
        mx = -np.inf
        for r1 in range(n + 1):
            w = base - lgf[r1] - lgf[n - r1] + xlx[r1] + xlx[n - r1]
            if w > mx:
                mx = w
        s = 0.0
        for r1 in range(n + 1):
            w = base - lgf[r1] - lgf[n - r1] + xlx[r1] + xlx[n - r1]
            s += np.exp(w - mx)
        out[n] = mx + np.log(s)
    return out


@njit(cache=True)
def _c2_kernel(K_max, n_max, log_j, lgf, xlx):
    table = np.full((K_max, n_max + 1), -np.inf)
    for r in range(n_max + 1):
        table[0, r] = log_j[r]
    buf = np.empty(n_max + 1)
    for k in range(1, K_max):
        prev = table[k - 1]
        for n in range(n_max + 1):
            base = lgf[n] - xlx[n]
            mx = -np.inf
            cnt = 0
            for r1 in range(n + 1):
                r2 = n - r1
                a = prev[r1]
                b = log_j[r2]
                if a == -np.inf or b == -np.inf:
                    continue
                t = base - lgf[r1] - lgf[r2] + xlx[r1] + xlx[r2] + a + b
                buf[cnt] = t
                cnt += 1
                if t > mx:
                    mx = t
            if cnt == 0:
                continue
            s = 0.0
            for i in range(cnt):
                s += np.exp(buf[i] - mx)
            table[k, n] = mx + np.log(s)
    return table


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    mx = a.max(axis=1)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(invalid="ignore"):
        s = np.exp(a - safe[:, None]).sum(axis=1)
    with np.errstate(divide="ignore"):
        out = safe + np.log(s)
    return np.where(np.isfinite(mx), out, mx)


def _split_weight_block(rows: np.ndarray, lgf: np.ndarray, xlx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ln w(n, r1) for n in ``rows`` and r1 in 0..max(rows); entries with
    r1 > n are -inf.  Also returns r2 = n - r1 clipped at 0."""
    r1 = np.arange(rows.max() + 1)
    r2 = rows[:, None] - r1[None, :]
    valid = r2 >= 0
    r2c = np.where(valid, r2, 0)
    w = (lgf[rows] - xlx[rows])[:, None] - lgf[r1][None, :] - lgf[r2c] + xlx[r1][None, :] + xlx[r2c]
    return np.where(valid, w, NEG_INF), r2c


def _binary_mass_numpy(n_max, lgf, xlx, block=256):
    out = np.zeros(n_max + 1)
    for lo in range(1, n_max + 1, block):
        rows = np.arange(lo, min(lo + block, n_max + 1))
        w, _ = _split_weight_block(rows, lgf, xlx)
        out[rows] = _logsumexp_rows(w)
    return out


def _c2_numpy(K_max, n_max, log_j, lgf, xlx, block=256):
    table = np.full((K_max, n_max + 1), NEG_INF)
    table[0] = log_j
    blocks = []
    for lo in range(0, n_max + 1, block):
        rows = np.arange(lo, min(lo + block, n_max + 1))
        w, r2 = _split_weight_block(rows, lgf, xlx)
        w_j = np.where(np.isfinite(w), w + log_j[r2], NEG_INF)
        blocks.append((rows, w_j))
    for k in range(1, K_max):
        prev = table[k - 1]
        for rows, w_j in blocks:
            with np.errstate(invalid="ignore"):
                terms = w_j + prev[None, : w_j.shape[1]]
            terms = np.where(np.isnan(terms), NEG_INF, terms)
            table[k, rows] = _logsumexp_rows(terms)
    return table


def binary_mass_table(n_max: int, use_numba: bool | None = None) -> np.ndarray:
    """ln C1(2, r) for r = 0..n_max."""
    lgf, xlx = _lgamma_table(n_max), _xlogx_table(n_max)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _binary_mass_kernel(n_max, lgf, xlx)
    return _binary_mass_numpy(n_max, lgf, xlx)


def c2_table(K_max: int, n_max: int, log_j: np.ndarray, use_numba: bool | None = None) -> np.ndarray:
    """ln C2(K, r) for K = 1..K_max (row K-1) and r = 0..n_max."""
    lgf, xlx = _lgamma_table(n_max), _xlogx_table(n_max)
    log_j = np.ascontiguousarray(log_j[: n_max + 1], dtype=float)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _c2_kernel(K_max, n_max, log_j, lgf, xlx)
    return _c2_numpy(K_max, n_max, log_j, lgf, xlx)


def c1_table(K_max: int, n_max: int, use_numba: bool | None = None) -> np.ndarray:
    """ln C1(K, r) for K = 1..K_max (row K-1) and r = 0..n_max."""
    out = np.zeros((K_max, n_max + 1))
    if K_max >= 2:
        out[1] = binary_mass_table(n_max, use_numba)
    r = np.arange(n_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
    for k in range(1, K_max - 1):
        # C1(k+2) = C1(k+1) + (r/k) C1(k)
        out[k + 1] = np.logaddexp(out[k], log_r - math.log(k) + out[k - 1])
    return out


def log_C1(K: int, n: int) -> float:
    """ln C1(K, n) in O(n + K)."""
    if K < 1 or n < 0:
        raise DomainError(f"need K >= 1 and n >= 0, got K={K}, n={n}")
    if K == 1 or n == 0:
        return 0.0
    lgf, xlx = _lgamma_table(n), _xlogx_table(n)
    r1 = np.arange(n + 1)
    w = lgf[n] - xlx[n] - lgf[r1] - lgf[n - r1] + xlx[r1] + xlx[n - r1]
    mx = w.max()
    prev, cur = 0.0, float(mx + math.log(np.exp(w - mx).sum()))
    for k in range(1, K - 1):
        prev, cur = cur, float(np.logaddexp(cur, math.log(n / k) + prev))
    return cur


def log_C2(K: int, n: int, m: int, min_size: int | None = None, form: str = DEFAULT_J_FORM) -> float:
    """ln C2(K, n); -inf when no composition of n into K parts is feasible."""
    if K < 1 or n < 0 or m < 1:
        raise DomainError(f"need K >= 1, n >= 0, m >= 1, got K={K}, n={n}, m={m}")
    return float(complexity_table(n, K, m, min_size, form).logC2[K - 1, n])


# -- table -----------------------------------------------------------------


@dataclass(frozen=True)
class ComplexityTable:
    """ln C1(K, r) and ln C2(K, r) for all K <= K_max, r <= n; immutable once built."""

    n: int
    K_max: int
    m: int
    min_size: int
    logC1: np.ndarray  # (K_max, n + 1)
    logC2: np.ndarray  # (K_max, n + 1)
    form: str = DEFAULT_J_FORM

    def __post_init__(self):
        self.logC1.setflags(write=False)
        self.logC2.setflags(write=False)

    def c1(self, K: int, r: int) -> float:
        self._check(K, r)
        return float(self.logC1[K - 1, r])

    def c2(self, K: int, r: int) -> float:
        self._check(K, r)
        return float(self.logC2[K - 1, r])

    def covers(self, K: int, n: int, m: int, min_size: int, form: str) -> bool:
        return K <= self.K_max and n <= self.n and m == self.m and min_size == self.min_size and form == self.form

    def _check(self, K, r):
        if not (1 <= K <= self.K_max and 0 <= r <= self.n):
            raise DomainError(f"(K={K}, r={r}) outside table (K_max={self.K_max}, n={self.n})")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# m={self.m} min_size={self.min_size} form={self.form} n={self.n} K_max={self.K_max}\n")
            w = csv.writer(fh)
            w.writerow(["K", "r", "logC1", "logC2"])
            for k in range(self.K_max):
                for r in range(self.n + 1):
                    w.writerow([k + 1, r, repr(float(self.logC1[k, r])), repr(float(self.logC2[k, r]))])

    @classmethod
    def from_csv(cls, path) -> "ComplexityTable":
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            lines = []
            for line in fh:
                if line.startswith("#"):
                    for item in line[1:].split():
                        key, _, val = item.partition("=")
                        meta[key] = val if key == "form" else int(val)
                elif line.strip():
                    lines.append(line)
            reader = csv.DictReader(lines)
            for row in reader:
                rows.append((int(row["K"]), int(row["r"]), float(row["logC1"]), float(row["logC2"])))
        if not rows or "m" not in meta:
            raise InputError(f"{path}: not a complexity table")
        K_max = max(r[0] for r in rows)
        n = max(r[1] for r in rows)
        c1 = np.full((K_max, n + 1), np.nan)
        c2 = np.full((K_max, n + 1), np.nan)
        for k, r, a, b in rows:
            c1[k - 1, r], c2[k - 1, r] = a, b
        if np.isnan(c1).any() or np.isnan(c2).any():
            raise InputError(f"{path}: incomplete complexity table")
        form = meta.get("form", DEFAULT_J_FORM)
        _j_power(form)
        return cls(n, K_max, meta["m"], meta.get("min_size", meta["m"] + 1), c1, c2, form)


def build_complexity_table(
    n: int, K_max: int, m: int, min_size: int | None = None, form: str = DEFAULT_J_FORM, use_numba: bool | None = None
) -> ComplexityTable:
    ms = default_min_size(m, min_size)
    log_j = log_J_vector(n, m, ms, form)
    return ComplexityTable(n, K_max, m, ms, c1_table(K_max, n, use_numba), c2_table(K_max, n, log_j, use_numba), form)


@lru_cache(maxsize=32)
def _cached_table(n, K_max, m, min_size, form):
    return build_complexity_table(n, K_max, m, min_size, form)


def complexity_table(n: int, K_max: int, m: int, min_size: int | None = None, form: str = DEFAULT_J_FORM) -> ComplexityTable:
    _j_power(form)
    return _cached_table(int(n), int(K_max), int(m), default_min_size(m, min_size), form)


# -- data-dependent terms --------------------------------------------------


def check_labels(z, n: int, K: int) -> np.ndarray:
    """Validate a 1..K labelling and return it as an int array."""
    z = np.asarray(z)
    if z.shape != (n,):
        raise InputError(f"assignment has shape {z.shape}, expected ({n},)")
    if z.dtype.kind == "f":
        if not np.all(z == np.round(z)):
            raise InputError("cluster labels must be integers")
    elif z.dtype.kind not in "iu":
        raise InputError("cluster labels must be integers")
    z = z.astype(np.int64)
    if K < 1 or z.min() < 1 or z.max() > K:
        raise InputError(f"cluster labels must lie in 1..{K}")
    return z


def cluster_fits(data, z, K: int, min_size: int | None = None) -> list[GaussianMLE]:
    """Per-cluster Gaussian MLEs of a hard assignment.

    Raises :class:`InfeasibleError` for an empty or undersized cluster and
    :class:`SingularityError` for a rank-deficient one.
    """
    x = as_matrix(data)
    n, m = x.shape
    z = check_labels(z, n, K)
    ms = default_min_size(m, min_size)
    sizes = np.bincount(z, minlength=K + 1)[1:]
    if sizes.min() < ms:
        raise InfeasibleError(f"cluster sizes {sizes.tolist()} include one below {ms}")
    return [mvn_mle(x[z == k + 1]) for k in range(K)]


def complete_neg_log_likelihood(fits: list[GaussianMLE], n: int) -> float:
    """-ln f(x, z; K, mle): multinomial weights at h_k / n plus per-cluster
    Gaussian terms at their MLEs."""
    total = 0.0
    for f in fits:
        total += -f.n * math.log(f.n / n) + gaussian_neg_log_likelihood(f.n, f.m, f.log_det)
    return total


def log_B_fits(fits: list[GaussianMLE]) -> float:
    total = 0.0
    for f in fits:
        norm2 = f.mean_sq_norm
        if norm2 == 0.0:
            raise DegenerateDomainError("a cluster mean is exactly zero")
        m = f.m
        total += log_gaussian_prefactor(m, 0.5 * m * math.log(norm2), -0.5 * m * f.log_det)
    return total


def log_B(data, z, K: int | None = None) -> float:
    """ln B(x, z) = sum_p ln[2^{m+1} |mu_p|^m |Sigma_p|^{-m/2} / (m^{m+1} Gamma(m/2))]."""
    z = np.asarray(z)
    if K is None:
        K = int(z.max())
    return log_B_fits(cluster_fits(data, z, K))


def rnml_from_fits(fits: list[GaussianMLE], n: int, gamma: HyperParams, table: ComplexityTable) -> float:
    K, m = len(fits), fits[0].m
    return (
        complete_neg_log_likelihood(fits, n)
        + table.c1(K, n)
        + table.c2(K, n)
        + log_B_fits(fits)
        + K * log_I(m, gamma)
    )


def nml_from_fits(fits: list[GaussianMLE], n: int, params: DomainParams, log_c1: float) -> float:
    if not all(params.contains(f) for f in fits):
        return math.inf
    return complete_neg_log_likelihood(fits, n) + log_c1 + sum(log_C_gaussian_nml(f.n, f.m, params) for f in fits)


def _table_for(n, K, m, min_size, table, form):
    ms = default_min_size(m, min_size)
    if table is None:
        return complexity_table(n, K, m, ms, form)
    if not table.covers(K, n, m, ms, form):
        raise InputError(
            f"complexity table (n={table.n}, K_max={table.K_max}, m={table.m}, min_size={table.min_size}, "
            f"form={table.form}) does not cover n={n}, K={K}, m={m}, min_size={ms}, form={form}"
        )
    return table


def rnml_codelength_gmm(
    data,
    z,
    K: int,
    gamma: HyperParams,
    *,
    min_size: int | None = None,
    form: str = DEFAULT_J_FORM,
    table: ComplexityTable | None = None,
) -> float:
    """RNML code-length in nats; ``inf`` when a cluster is empty, undersized or singular.

    A cluster mean exactly at the origin raises :class:`DegenerateDomainError`.
    """
    x = as_matrix(data)
    n, m = x.shape
    check_labels(z, n, K)
    try:
        fits = cluster_fits(x, z, K, min_size)
    except (InfeasibleError, SingularityError):
        return math.inf
    return rnml_from_fits(fits, n, gamma, _table_for(n, K, m, min_size, table, form))


def nml_codelength_gmm(data, z, K: int, params: DomainParams, *, min_size: int | None = None, table: ComplexityTable | None = None) -> float:
    """Restricted-domain NML code-length of a GMM clustering: complete-data
    likelihood, ln C1(K, n), and each cluster's own ln C(R, lambda_min) at its
    size.  ``inf`` when any cluster is infeasible or outside Y(R, lambda_min)."""
    x = as_matrix(data)
    n, m = x.shape
    check_labels(z, n, K)
    try:
        fits = cluster_fits(x, z, K, min_size)
    except (InfeasibleError, SingularityError):
        return math.inf
    log_c1 = log_C1(K, n) if table is None else _table_for(n, K, m, min_size, table, table.form).c1(K, n)
    return nml_from_fits(fits, n, params, log_c1)
