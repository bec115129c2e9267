"""Command-line front end.

Exit status:
  0  success
  1  other library error
  2  usage error (unknown or malformed flags)
  3  input error (missing/unreadable file, bad CSV, bad labels)
  4  domain error (argument or MLE outside the model's domain)
  5  infeasible clustering or singular covariance
  6  configuration error (bad sweep config, bad EM settings)

Numbers are printed with 9 significant digits; nothing else is rounded.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .complexity import DEFAULT_J_FORM, J_FORMS, HyperParams, nml_codelength_gmm, rnml_codelength_gmm
from .errors import ConfigError, InputError, NMLError
from .exponential_family import GammaModel, LogisticModel, nml_codelength
from .gaussian import DomainParams, nml_codelength_gaussian
from .harness import SweepConfig, fmt, manifest, run_sweep, write_csv, write_manifest, write_tables
from .selection import CRITERIA, EMConfig, em_fit, normalize_criteria, select_k

LN2 = math.log(2.0)

EXIT_HELP = """exit status:
  0 success, 1 other error, 2 usage error, 3 input error,
  4 domain error, 5 infeasible/singular, 6 configuration error"""


def read_matrix(path, header: bool) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"data file not found: {path}")
    try:
        x = np.loadtxt(p, delimiter=",", skiprows=1 if header else 0, ndmin=2, dtype=float)
    except ValueError as exc:
        raise InputError(f"cannot parse {path}: {exc}") from exc
    if x.size == 0:
        raise InputError(f"{path} contains no data rows")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{path} contains non-finite values")
    return x


def read_labels(path, header: bool, n: int) -> np.ndarray:
    z = read_matrix(path, header)
    if z.shape[1] != 1 or z.shape[0] != n:
        raise InputError(f"labels file {path} must hold one label per data row ({n} rows)")
    z = z[:, 0]
    if not np.all(z == np.round(z)):
        raise InputError("labels must be integers")
    return z.astype(np.int64)


def parse_k_range(text: str) -> tuple[int, ...]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            ks = tuple(range(int(lo), int(hi) + 1))
        else:
            ks = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad K range {text!r}; use e.g. 1..6 or 1,2,3") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("K range must contain positive integers")
    return ks


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def parse_seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _domain_params(args, m: int) -> DomainParams:
    if args.R is None or args.lambda_min is None:
        raise ConfigError("--R and --lambda-min are required for this family")
    lam = args.lambda_min
    if len(lam) == 1:
        lam = lam * m
    if len(lam) != m:
        raise InputError(f"--lambda-min needs 1 or {m} values, got {len(lam)}")
    return DomainParams(args.R, lam)


def _hyper(args) -> HyperParams:
    if args.gamma is not None:
        if len(args.gamma) != 4:
            raise ConfigError("--gamma takes lambda1,lambda2,R1,R2")
        return HyperParams(*args.gamma)
    return HyperParams.from_ratio(args.gamma_ratio)


def _emit_length(value: float, bits: bool) -> None:
    if bits:
        print(f"{fmt(value / LN2)} bits")
    else:
        print(f"{fmt(value)} nats")


# -- commands --------------------------------------------------------------


def cmd_codelength(args) -> int:
    fam = args.family
    if fam == "gamma" and (args.k is None or args.theta_min is None or args.theta_max is None):
        raise ConfigError("gamma needs --k, --theta-min and --theta-max")
    if fam == "logistic" and args.R is None:
        raise ConfigError("logistic needs --R")
    if fam in ("gmm-nml", "gmm-rnml") and (args.labels is None or args.K is None):
        raise ConfigError(f"{fam} needs --labels and --K")

    x = read_matrix(args.data, args.header)
    if fam in ("gamma", "logistic"):
        if x.shape[1] != 1:
            raise InputError(f"{fam} data must have exactly one column")
        model = GammaModel(args.k, args.theta_min, args.theta_max) if fam == "gamma" else LogisticModel(args.R)
        value = nml_codelength(model, x[:, 0])
    elif fam == "gaussian":
        value = nml_codelength_gaussian(x, _domain_params(args, x.shape[1]))
    else:
        z = read_labels(args.labels, args.header, x.shape[0])
        if fam == "gmm-nml":
            value = nml_codelength_gmm(x, z, args.K, _domain_params(args, x.shape[1]), min_size=args.min_size)
        else:
            value = rnml_codelength_gmm(x, z, args.K, _hyper(args), min_size=args.min_size, form=args.j_form)
    _emit_length(value, args.bits)
    return 0


def _em_config(args) -> EMConfig:
    return EMConfig(seed=args.seed, max_iter=args.max_iter, tol=args.tol, n_restarts=args.restarts, reg_eps=args.reg_eps)


def cmd_cluster(args) -> int:
    config = _em_config(args)
    x = read_matrix(args.data, args.header)
    res = em_fit(x, args.K, config)
    if args.out:
        write_csv(args.out, ["label"], ([int(v)] for v in res.z))
    print(f"complete-data log-likelihood: {fmt(res.log_likelihood)}")
    print(f"cluster sizes: {' '.join(str(f.n) for f in res.fits)}")
    return 0


def cmd_select_k(args) -> int:
    config = _em_config(args)
    criteria = normalize_criteria(args.criteria)
    gamma = _hyper(args)
    x = read_matrix(args.data, args.header)
    m = x.shape[1]
    params = _domain_params(args, m) if (args.R is not None or args.lambda_min is not None) else DomainParams.from_theta(args.nml_theta, m)
    report = select_k(
        x, args.k_range, criteria, config, gamma, params,
        min_size=args.min_size, j_form=args.j_form, bic_standard=args.bic_standard,
    )
    if args.report:
        write_csv(args.report, ["K", "criterion", "score", "chosen"], report.rows())
    if args.manifest:
        write_manifest(args.manifest, {
            "package": "nmlclust",
            "version": __version__,
            "seed": args.seed,
            "em": vars(config),
            "gamma": vars(gamma),
            "domain_params": {"R": params.R, "lambda_min": list(params.lambda_min)},
            "k_range": list(report.k_range),
            "criteria": list(criteria),
            "j_form": args.j_form,
            "bic_standard": args.bic_standard,
            "data": str(args.data),
        })
    for c in report.criteria:
        print(f"{c}: K={report.chosen[c]}")
    return 0


def _load_sweep(args) -> SweepConfig:
    config = SweepConfig.from_json(args.config)
    if args.seed is not None:
        config = SweepConfig.from_dict({**config.to_dict(), "seed": args.seed})
    return config


def cmd_sweep(args) -> int:
    config = _load_sweep(args)
    tables = run_sweep(config, jobs=args.jobs)
    out = Path(args.out_dir)
    write_tables(tables, out)
    write_manifest(out / "manifest.json", manifest(config, command="sweep"))
    for m, k, c, least in tables.least_n:
        print(f"m={m} K={k} {c}: least n = {least}")
    return 0


def cmd_theta_sweep(args) -> int:
    config = _load_sweep(args)
    if not config.thetas:
        raise ConfigError("theta-sweep needs a nonempty 'thetas' list in the config")
    tables = run_sweep(config, jobs=args.jobs, theta_only=True)
    out = Path(args.out_dir)
    write_tables(tables, out, accuracy=False)
    write_manifest(out / "manifest.json", manifest(config, command="theta-sweep"))
    for theta, c, least in tables.theta:
        print(f"theta={fmt(theta)} {c}: least n = {least}")
    return 0


# -- parser ----------------------------------------------------------------


def _add_data(p):
    p.add_argument("data", help="comma-separated data file, one observation per row")
    p.add_argument("--header", action="store_true", help="skip one header line in CSV inputs")


def _add_em(p):
    p.add_argument("--seed", type=parse_seed, required=True, help="master seed (required)")
    p.add_argument("--restarts", type=positive_int, default=100)
    p.add_argument("--max-iter", type=positive_int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--reg-eps", type=float, default=1e-6)


def _add_rnml(p):
    p.add_argument("--gamma-ratio", type=float, default=1e4, help="R2/R1 = lambda2/lambda1 (default 1e4)")
    p.add_argument("--gamma", type=parse_floats, default=None, help="explicit lambda1,lambda2,R1,R2")
    p.add_argument("--j-form", choices=sorted(J_FORMS), default=DEFAULT_J_FORM)
    p.add_argument("--min-size", type=positive_int, default=None, help="smallest admissible cluster (default m+1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nmlclust",
        description="NML / RNML code-lengths and cluster-number selection.",
        epilog=EXIT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codelength", help="code-length of a data set under one model", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_data(p)
    p.add_argument("--family", required=True, choices=["gamma", "logistic", "gaussian", "gmm-nml", "gmm-rnml"])
    p.add_argument("--k", type=float, help="Gamma shape")
    p.add_argument("--theta-min", type=float)
    p.add_argument("--theta-max", type=float)
    p.add_argument("--R", type=float, help="logistic bound on theta_hat, or Gaussian bound on |mu_hat|^2")
    p.add_argument("--lambda-min", type=parse_floats, help="eigenvalue lower bounds (one value or m values)")
    p.add_argument("--labels", help="cluster labels 1..K, one per row (GMM families)")
    p.add_argument("--K", type=positive_int)
    p.add_argument("--bits", action="store_true", help="report bits instead of nats")
    _add_rnml(p)
    p.set_defaults(func=cmd_codelength)

    p = sub.add_parser("cluster", help="EM clustering with restarts", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_data(p)
    p.add_argument("--K", type=positive_int, required=True)
    p.add_argument("--out", help="write 1-based labels here")
    _add_em(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("select-k", help="choose the number of clusters", epilog=EXIT_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_data(p)
    p.add_argument("--k-range", type=parse_k_range, required=True, help="e.g. 1..6 or 1,2,3")
    p.add_argument("--criteria", default=",".join(CRITERIA))
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--lambda-min", type=parse_floats, default=None)
    p.add_argument("--nml-theta", type=float, default=1e4, help="NML domain R=theta, lambda_min=theta^(-1/m) when --R is absent")
    p.add_argument("--bic-standard", action="store_true", help="use the standard BIC penalty")
    p.add_argument("--report", help="write K,criterion,score,chosen CSV here")
    p.add_argument("--manifest", help="write a JSON run manifest here")
    _add_em(p)
    _add_rnml(p)
    p.set_defaults(func=cmd_select_k)

    for name, func, help_ in (
        ("sweep", cmd_sweep, "criterion-comparison sweep"),
        ("theta-sweep", cmd_theta_sweep, "hyperparameter-dependency sweep"),
    ):
        p = sub.add_parser(name, help=help_, epilog=EXIT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config", help="JSON sweep configuration")
        p.add_argument("--out-dir", required=True)
        p.add_argument("--jobs", type=positive_int, default=1, help="worker processes for trials")
        p.add_argument("--seed", type=parse_seed, default=None, help="override the config seed")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NMLError as exc:
        print(f"nmlclust {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"nmlclust {args.command}: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
