"""The compiled kernels and their numpy twins must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from nmlclust._accel import HAVE_NUMBA
from nmlclust.complexity import binary_mass_table, c2_table, log_J_vector
from nmlclust.selection import EMConfig, restart_rng, run_em

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not available")


@needs_numba
@pytest.mark.parametrize("m,form", [(1, "half"), (2, "full"), (5, "half")])
def test_c2_kernels_agree(m, form):
    log_j = log_J_vector(700, m, form=form)
    a = c2_table(5, 700, log_j, use_numba=True)
    b = c2_table(5, 700, log_j, use_numba=False)
    assert np.array_equal(np.isinf(a), np.isinf(b))
    fin = np.isfinite(a)
    np.testing.assert_allclose(a[fin], b[fin], rtol=1e-12, atol=1e-10)


@needs_numba
def test_binary_mass_kernels_agree():
    np.testing.assert_allclose(binary_mass_table(2000, True), binary_mass_table(2000, False), rtol=1e-12, atol=1e-12)


@needs_numba
@pytest.mark.parametrize("m,K", [(1, 3), (2, 2), (5, 3)])
def test_em_kernels_agree(m, K):
    x = np.random.default_rng(m * 10 + K).standard_normal((300, m)) * 2
    x[:100] += 6
    cfg = EMConfig(seed=1, tol=1e-8)
    mu0 = x[restart_rng(1, K, 0).choice(300, size=K, replace=False)]
    a = run_em(x, mu0, cfg, use_numba=True)
    b = run_em(x, mu0, cfg, use_numba=False)
    assert a.n_iter == b.n_iter and a.converged == b.converged
    np.testing.assert_allclose(a.log_likelihoods, b.log_likelihoods, rtol=1e-10)
    np.testing.assert_array_equal(a.hard_labels(), b.hard_labels())


def test_env_flag_selects_numpy_backend():
    code = (
        "import numpy as np, nmlclust as p;"
        "from nmlclust.complexity import log_C2;"
        "print(p.backend(), repr(log_C2(3, 60, 2)))"
    )
    env = dict(os.environ, NMLCLUST_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.split()
    assert out[0] == "numpy"
    from nmlclust.complexity import log_C2

    assert float(out[1]) == pytest.approx(log_C2(3, 60, 2), rel=1e-12)
