import itertools
import json
import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmlclust.complexity import HyperParams, log_I, nml_codelength_gmm, rnml_codelength_gmm
from nmlclust.errors import ConfigError
from nmlclust.harness import (
    NEVER,
    SweepConfig,
    TrialResult,
    TrueModel,
    benefit,
    generate_gmm_data,
    generate_true_model,
    identification_probability,
    reduce_trials,
    run_sweep,
    run_trials,
    write_tables,
)

from nmlclust.gaussian import DomainParams


def test_true_model_validation():
    with pytest.raises(ConfigError):
        TrueModel(np.array([0.5, 0.6]), np.zeros((2, 1)), np.ones((2, 1, 1)))
    with pytest.raises(ConfigError):
        TrueModel(np.array([1.0]), np.zeros((1, 2)), -np.eye(2)[None])


def test_generate_true_model_single_and_deterministic():
    one = generate_true_model(3, 1, 6.0, 0)
    assert one.K == 1 and one.m == 3 and one.weights[0] == 1.0
    a = generate_true_model(2, 3, 6.0, [1, 2])
    b = generate_true_model(2, 3, 6.0, [1, 2])
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.covariances, b.covariances)


@pytest.mark.parametrize("seed", range(10))
def test_generate_true_model_separation(seed):
    model = generate_true_model(2, 3, 6.0, seed)
    for i, j in itertools.combinations(range(3), 2):
        assert np.linalg.norm(model.means[i] - model.means[j]) >= 6.0 * math.sqrt(2.0)
    np.testing.assert_allclose(model.weights, 1 / 3)
    for c in model.covariances:
        eig = np.linalg.eigvalsh(c)
        assert eig.min() >= 0.5 - 1e-9 and eig.max() <= 2.0 + 1e-9


def test_generate_true_model_rejection_failure():
    with pytest.raises(ConfigError):
        generate_true_model(1, 4, 10.0, 0, box=1.0, max_attempts=1000)
    with pytest.raises(ConfigError):
        generate_true_model(1, 2, 0.0, 0)


def test_generate_gmm_data_law_of_large_numbers():
    model = generate_true_model(2, 1, 6.0, 4)
    x, z = generate_gmm_data(model, 10_000, 5)
    assert np.all(z == 1)
    se = np.sqrt(np.diag(model.covariances[0]) / 10_000)
    assert np.all(np.abs(x.mean(axis=0) - model.means[0]) < 5 * se)


def test_generate_gmm_data_deterministic_and_validated():
    model = generate_true_model(2, 3, 6.0, 4)
    a = generate_gmm_data(model, 50, 9)
    b = generate_gmm_data(model, 50, 9)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert set(np.unique(a[1])) <= {1, 2, 3}
    with pytest.raises(ConfigError):
        generate_gmm_data(model, 0, 9)


def test_benefit_examples():
    assert benefit(3, 3) == 1.0
    assert benefit(4, 3, 2) == 0.5
    assert benefit(0, 3, 2) == 0.0
    with pytest.raises(ConfigError):
        benefit(1, 1, 0)


@given(st.integers(1, 20), st.integers(1, 20), st.floats(0.1, 10))
def test_benefit_range(k_star, k, T):
    b = benefit(k_star, k, T)
    assert 0.0 <= b <= 1.0
    assert b == max(0.0, 1.0 - abs(k_star - k) / T)


def _results(picks):
    return [TrialResult(2, 3, 100, i, {"RNML": p}, {"RNML": benefit(p, 3)}) for i, p in enumerate(picks)]


def test_identification_probability():
    assert identification_probability(_results([3, 3]), 3, "RNML") == 1.0
    assert identification_probability(_results([1, 2]), 3, "RNML") == 0.0
    assert identification_probability(_results([3, 3, 4, 3]), 3, "RNML") == 0.75
    with pytest.raises(ConfigError):
        identification_probability([], 3, "RNML")


# -- config ----------------------------------------------------------------


@pytest.mark.parametrize(
    "patch",
    [{"bogus": 1}, {"m_list": []}, {"T": 0}, {"target": 2}, {"criteria": ["MDL"]}, {"thetas": [0.5]}, {"trials": 0}, {"gamma": [1, 2]}, {"j_form": "x"}],
)
def test_sweep_config_rejects(patch):
    with pytest.raises(ConfigError):
        SweepConfig.from_dict({"seed": 1, **patch})


def test_sweep_config_requires_seed(tmp_path):
    with pytest.raises(ConfigError):
        SweepConfig.from_dict({"m_list": [1]})
    path = tmp_path / "c.json"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        SweepConfig.from_json(path)
    path.write_text(json.dumps({"seed": 4, "m_list": [2], "thetas": [100, 1e4]}))
    cfg = SweepConfig.from_json(path)
    assert cfg.m_list == (2,) and cfg.thetas == (100, 1e4)
    assert cfg.k_range(3) == (1, 2, 3, 4, 5, 6)


def tiny(**kw):
    base = dict(seed=3, m_list=[1], k_true_list=[2], n_list=[60, 90], trials=3, restarts=3, k_extra=1)
    base.update(kw)
    return SweepConfig.from_dict(base)


def test_degenerate_sweep_is_perfect():
    cfg = tiny(k_min=2, k_extra=0, trials=1, n_list=[60])
    tables = run_sweep(cfg)
    for m, k, n, c, acc, mb in tables.accuracy:
        assert acc == 1.0 and mb == 1.0
    assert all(row[3] == 60 for row in tables.least_n)


def test_sweep_outputs_deterministic(tmp_path):
    cfg = tiny(thetas=[100.0, 1e6])
    a = write_tables(run_sweep(cfg), tmp_path / "a")
    b = write_tables(run_sweep(cfg), tmp_path / "b")
    assert [p.name for p in a] == ["accuracy.csv", "least_n.csv", "theta_sweep.csv"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    header = (tmp_path / "a" / "theta_sweep.csv").read_text().splitlines()[0]
    assert header == "theta,criterion,least_n"


def test_sweep_invariant_to_trial_order():
    cfg = tiny(thetas=[100.0])
    trials = run_trials(cfg)
    shuffled = list(trials)
    random.Random(0).shuffle(shuffled)
    assert reduce_trials(cfg, trials) == reduce_trials(cfg, shuffled)


def test_mean_benefit_in_unit_interval_and_never_marker():
    cfg = tiny(target=1.0)
    tables = run_sweep(cfg)
    assert all(0.0 <= row[5] <= 1.0 for row in tables.accuracy)
    assert all(row[3] == NEVER for row in tables.least_n)


def test_theta_score_shift_identities():
    model = generate_true_model(2, 3, 6.0, 1)
    x, z = generate_gmm_data(model, 300, 2)
    K, m = 3, 2
    thetas = [1e2, 1e4, 1e6, 1e8]
    rnml = [rnml_codelength_gmm(x, z, K, HyperParams.from_ratio(t)) for t in thetas]
    nml = [nml_codelength_gmm(x, z, K, DomainParams.from_theta(t, m)) for t in thetas]
    checked = 0
    for t0, r0, n0, t1, r1, n1 in zip(thetas, rnml, nml, thetas[1:], rnml[1:], nml[1:]):
        d_log_i = log_I(m, HyperParams.from_ratio(t1)) - log_I(m, HyperParams.from_ratio(t0))
        assert r1 - r0 == pytest.approx(K * d_log_i, abs=1e-9)
        assert d_log_i == pytest.approx((m + 1) * (math.log(math.log(t1)) - math.log(math.log(t0))), abs=1e-12)
        if math.isfinite(n0):
            checked += 1
            # R = theta and each lambda_min = theta^(-1/m): (m/2) dln R - (m/2) sum dln lambda_min = m dln theta
            assert n1 - n0 == pytest.approx(K * m * math.log(t1 / t0), abs=1e-8)
    assert checked >= 2
    # once every cluster fits the domain, widening it keeps them inside
    assert all(math.isfinite(v) for v in nml[nml.index(next(v for v in nml if math.isfinite(v))):])
