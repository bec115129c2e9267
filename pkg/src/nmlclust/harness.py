"""Synthetic GMM experiments comparing cluster-number criteria.

A sweep draws, for each (m, K_true, trial), a random well-separated true
mixture, samples data sets of every size in the n-grid from it, clusters
each with EM over a range of K, and records the K chosen by every criterion.
Results reduce to accuracy / mean-benefit curves, the least n at which the
mean benefit exceeds a target, and a hyperparameter-dependency table for
RNML and NML.

Trials are independent; each derives its random streams from
(master seed, cell, trial), so the outputs do not depend on execution order
or on the number of worker processes.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend
from .complexity import DEFAULT_J_FORM, J_FORMS, HyperParams, complexity_table, default_min_size
from .errors import ConfigError
from .gaussian import DomainParams
from .selection import CRITERIA, EMConfig, Scorer, argmin_k, fit_k_range, normalize_criteria

NEVER = "never"


@dataclass(frozen=True)
class TrueModel:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, m)
    covariances: np.ndarray  # (K, m, m)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError("mixture weights must be positive and sum to 1")
        for c in self.covariances:
            if not np.allclose(c, c.T) or np.linalg.eigvalsh(c)[0] <= 0:
                raise ConfigError("component covariances must be symmetric positive definite")

    @property
    def K(self) -> int:
        return len(self.weights)

    @property
    def m(self) -> int:
        return self.means.shape[1]


def random_spd(rng: np.random.Generator, m: int, eig_range=(0.5, 2.0)) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    q = q * np.sign(np.diag(r))
    eig = rng.uniform(eig_range[0], eig_range[1], size=m)
    c = (q * eig) @ q.T
    return 0.5 * (c + c.T)


def generate_true_model(m: int, K: int, separation: float, seed, *, eig_range=(0.5, 2.0), box: float | None = None, max_attempts: int = 100_000) -> TrueModel:
    """Equal-weight mixture with pairwise mean distances at least
    ``separation * sqrt(eig_range[1])``.

    Means are drawn uniformly from [-box, box]^m by rejection; the default
    box half-width is that minimum distance times max(1, K^(1/m)).
    """
    if not separation > 0:
        raise ConfigError("separation must be positive")
    if not 0 < eig_range[0] <= eig_range[1]:
        raise ConfigError("eig_range must be an increasing pair of positive numbers")
    rng = np.random.default_rng(seed)
    d_min = separation * math.sqrt(eig_range[1])
    if box is None:
        box = d_min * max(1.0, K ** (1.0 / m))
    means = []
    attempts = 0
    while len(means) < K:
        cand = rng.uniform(-box, box, size=m)
        attempts += 1
        if all(np.linalg.norm(cand - mu) >= d_min for mu in means):
            means.append(cand)
        elif attempts >= max_attempts:
            raise ConfigError(f"could not place {K} means {d_min:.3g} apart inside [-{box:.3g}, {box:.3g}]^{m}")
    covs = np.stack([random_spd(rng, m, eig_range) for _ in range(K)])
    return TrueModel(np.full(K, 1.0 / K), np.array(means), covs)


def generate_gmm_data(model: TrueModel, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """n points and their 1-based component labels."""
    if n < 1:
        raise ConfigError("n must be at least 1")
    rng = np.random.default_rng(seed)
    z = rng.choice(model.K, size=n, p=model.weights)
    x = np.empty((n, model.m))
    for k in range(model.K):
        idx = np.flatnonzero(z == k)
        if idx.size:
            x[idx] = rng.multivariate_normal(model.means[k], model.covariances[k], size=idx.size, method="cholesky")
    return x, z + 1


def benefit(k_star: int, k_true: int, T: float = 2.0) -> float:
    """max(0, 1 - |K* - K| / T)."""
    if not T > 0:
        raise ConfigError("T must be positive")
    return max(0.0, 1.0 - abs(k_star - k_true) / T)


@dataclass(frozen=True)
class TrialResult:
    m: int
    K_true: int
    n: int
    trial: int
    chosen: dict  # criterion -> K*
    benefit: dict  # criterion -> benefit
    theta_chosen: dict = field(default_factory=dict)  # (theta, criterion) -> K*


def identification_probability(results, K_true: int, criterion: str) -> float:
    """Fraction of trials whose chosen K equals ``K_true``."""
    results = list(results)
    if not results:
        raise ConfigError("no trial results")
    return sum(r.chosen[criterion] == K_true for r in results) / len(results)


# -- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    seed: int
    m_list: tuple = (1, 2, 5)
    k_true_list: tuple = (2, 3)
    n_list: tuple = tuple(range(100, 1001, 100))
    trials: int = 30
    restarts: int = 20
    criteria: tuple = CRITERIA
    gamma: tuple = (1.0, 1e4, 1.0, 1e4)  # (lambda1, lambda2, R1, R2)
    nml_theta: float = 1e4  # R = theta, lambda_min = theta^(-1/m)
    nml_R: float | None = None  # explicit override of R
    nml_lambda_min: float | None = None  # explicit override, same in every dimension
    T: float = 2.0
    target: float = 0.8
    separation: float = 6.0
    eig_range: tuple = (0.5, 2.0)
    mean_box: float | None = None
    k_min: int = 1
    k_extra: int = 3  # candidates are k_min .. K_true + k_extra
    thetas: tuple = ()
    theta_metric: str = "benefit"
    bic_standard: bool = False
    j_form: str = DEFAULT_J_FORM
    max_iter: int = 200
    tol: float = 1e-6
    reg_eps: float = 1e-6

    def __post_init__(self):
        for name in ("m_list", "k_true_list", "n_list", "criteria", "thetas", "gamma", "eig_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "criteria", normalize_criteria(self.criteria))
        if not (self.m_list and self.k_true_list and self.n_list):
            raise ConfigError("m_list, k_true_list and n_list must be nonempty")
        if any(int(v) < 1 for v in self.m_list + self.k_true_list + self.n_list):
            raise ConfigError("m, K_true and n values must be positive integers")
        if self.trials < 1 or self.restarts < 1:
            raise ConfigError("trials and restarts must be positive")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if not 0 <= self.target <= 1:
            raise ConfigError("target must lie in [0, 1]")
        if self.k_min < 1 or self.k_extra < 0:
            raise ConfigError("need k_min >= 1 and k_extra >= 0")
        if any(self.k_min > k + self.k_extra for k in self.k_true_list):
            raise ConfigError("k_min exceeds the largest candidate K for some K_true")
        if any(not t > 1 for t in self.thetas):
            raise ConfigError("every theta must exceed 1")
        if self.theta_metric not in ("benefit", "accuracy"):
            raise ConfigError("theta_metric must be 'benefit' or 'accuracy'")
        if self.j_form not in J_FORMS:
            raise ConfigError(f"j_form must be one of {sorted(J_FORMS)}")
        if len(self.gamma) != 4:
            raise ConfigError("gamma must be (lambda1, lambda2, R1, R2)")
        HyperParams(*self.gamma)
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in d:
            raise ConfigError("config must set 'seed'")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read sweep config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("sweep config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def k_range(self, K_true: int) -> tuple:
        return tuple(range(self.k_min, K_true + self.k_extra + 1))

    def domain_params(self, m: int, theta: float | None = None) -> DomainParams:
        if theta is not None:
            return DomainParams.from_theta(theta, m)
        base = DomainParams.from_theta(self.nml_theta, m)
        R = base.R if self.nml_R is None else self.nml_R
        lam = base.lambda_min if self.nml_lambda_min is None else (self.nml_lambda_min,) * m
        return DomainParams(R, lam)

    def theta_cell(self) -> tuple[int, int]:
        """The (m, K_true) cell used for the dependency sweep: the first of each list."""
        return int(self.m_list[0]), int(self.k_true_list[0])


# -- trials ----------------------------------------------------------------


def _seed(*parts) -> list[int]:
    return [int(p) for p in parts]


def em_seed(master: int, m: int, K_true: int, n: int, trial: int) -> int:
    return int(np.random.SeedSequence(_seed(master, 3, m, K_true, n, trial)).generate_state(1, np.uint64)[0])


def run_trial(config: SweepConfig, m: int, K_true: int, n: int, trial: int) -> TrialResult:
    """One synthetic data set scored by every criterion (and by RNML/NML at
    every theta when this is the dependency-sweep cell)."""
    model = generate_true_model(m, K_true, config.separation, _seed(config.seed, 1, m, K_true, trial), eig_range=config.eig_range, box=config.mean_box)
    x, _ = generate_gmm_data(model, n, _seed(config.seed, 2, m, K_true, n, trial))
    k_range = config.k_range(K_true)
    em = EMConfig(seed=em_seed(config.seed, m, K_true, n, trial), max_iter=config.max_iter, tol=config.tol, n_restarts=config.restarts, reg_eps=config.reg_eps)
    ms = default_min_size(m)
    k_max_all = max(config.k_range(k)[-1] for k in config.k_true_list)
    table = complexity_table(max(config.n_list), k_max_all, m, ms, config.j_form)
    results, _ = fit_k_range(x, k_range, em, min_size=ms)
    fits = {K: (None if results[K] is None else results[K].fits) for K in k_range}

    def choose(scorer):
        per_k = {K: scorer.score(fits[K], n) for K in k_range}
        return {c: argmin_k({K: per_k[K][c] for K in k_range}) for c in scorer.criteria}

    scorer = Scorer(config.criteria, HyperParams(*config.gamma), config.domain_params(m), table, config.bic_standard)
    chosen = choose(scorer)
    theta_chosen = {}
    if config.thetas and (m, K_true) == config.theta_cell():
        for theta in config.thetas:
            s = Scorer(("RNML", "NML"), HyperParams.from_ratio(theta), config.domain_params(m, theta), table)
            for c, k in choose(s).items():
                theta_chosen[(float(theta), c)] = k
    return TrialResult(m, K_true, n, trial, chosen, {c: benefit(k, K_true, config.T) for c, k in chosen.items()}, theta_chosen)


def _run_trial_args(args):
    return run_trial(*args)


def trial_grid(config: SweepConfig, theta_only: bool = False):
    cells = [config.theta_cell()] if theta_only else [(int(m), int(k)) for m in config.m_list for k in config.k_true_list]
    return [(config, m, k, int(n), t) for (m, k) in cells for n in sorted(config.n_list) for t in range(config.trials)]


def run_trials(config: SweepConfig, jobs: int = 1, theta_only: bool = False) -> list[TrialResult]:
    tasks = trial_grid(config, theta_only)
    if jobs <= 1:
        return [_run_trial_args(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_trial_args, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))


# -- reduction -------------------------------------------------------------


@dataclass
class SweepTables:
    accuracy: list  # (m, K_true, n, criterion, accuracy, mean_benefit)
    least_n: list  # (m, K_true, criterion, least_n | NEVER)
    theta: list  # (theta, criterion, least_n | NEVER)


def _least_n(curve: dict, target: float):
    for n in sorted(curve):
        if curve[n] > target:
            return n
    return NEVER


def reduce_trials(config: SweepConfig, trials: list[TrialResult]) -> SweepTables:
    trials = sorted(trials, key=lambda r: (r.m, r.K_true, r.n, r.trial))
    groups: dict = {}
    for r in trials:
        groups.setdefault((r.m, r.K_true, r.n), []).append(r)
    accuracy, least = [], []
    cells = sorted({(m, k) for (m, k, _) in groups})
    for m, K_true in cells:
        for c in config.criteria:
            curve = {}
            for n in sorted(n for (mm, kk, n) in groups if (mm, kk) == (m, K_true)):
                rs = groups[(m, K_true, n)]
                acc = identification_probability(rs, K_true, c)
                mb = float(np.mean([r.benefit[c] for r in rs]))
                accuracy.append((m, K_true, n, c, acc, mb))
                curve[n] = mb
            least.append((m, K_true, c, _least_n(curve, config.target)))
    theta_rows = []
    if config.thetas:
        m0, k0 = config.theta_cell()
        for theta in config.thetas:
            for c in ("RNML", "NML"):
                curve = {}
                for (m, K_true, n), rs in groups.items():
                    if (m, K_true) != (m0, k0) or not rs[0].theta_chosen:
                        continue
                    picks = [r.theta_chosen[(float(theta), c)] for r in rs]
                    if config.theta_metric == "accuracy":
                        curve[n] = float(np.mean([p == K_true for p in picks]))
                    else:
                        curve[n] = float(np.mean([benefit(p, K_true, config.T) for p in picks]))
                theta_rows.append((float(theta), c, _least_n(curve, config.target) if curve else NEVER))
    return SweepTables(accuracy, least, theta_rows)


def run_sweep(config: SweepConfig, jobs: int = 1, theta_only: bool = False) -> SweepTables:
    return reduce_trials(config, run_trials(config, jobs, theta_only))


# -- output ----------------------------------------------------------------


def fmt(v) -> str:
    """Numbers as 9 significant digits; integers and sentinels verbatim."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".9g")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_tables(tables: SweepTables, out_dir, *, accuracy=True, theta=True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if accuracy:
        write_csv(out / "accuracy.csv", ["m", "K_true", "n", "criterion", "accuracy", "mean_benefit"], tables.accuracy)
        write_csv(out / "least_n.csv", ["m", "K_true", "criterion", "least_n"], tables.least_n)
        written += [out / "accuracy.csv", out / "least_n.csv"]
    if theta and tables.theta:
        write_csv(out / "theta_sweep.csv", ["theta", "criterion", "least_n"], tables.theta)
        written.append(out / "theta_sweep.csv")
    return written


def manifest(config: SweepConfig, **extra) -> dict:
    return {
        "package": "nmlclust",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "backend": backend(),
        "seed": int(config.seed),
        "config": config.to_dict(),
        **extra,
    }


def write_manifest(path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
