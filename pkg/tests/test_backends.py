import os
import subprocess
import sys

import numpy as np
import pytest

from cuspfactor import _pykernels
from cuspfactor.prob_core import make_rng

ck = pytest.importorskip("cuspfactor._ckernels")


def _inputs(seed, n=12, p=7, H=5):
    r = make_rng(seed)
    return dict(y=r.standard_normal((n, p)), eta=r.standard_normal((n, H)), lam=r.standard_normal((p, H)),
                sigma2=r.uniform(0.2, 2, p), prior_var=r.uniform(0.01, 3, (p, H)),
                noise_l=r.standard_normal((p, H)), noise_f=r.standard_normal((n, H)), u=r.random(H),
                log_omega=np.log(np.append(r.dirichlet(np.ones(H - 1)) * 0.9, 0.1)))


@pytest.mark.parametrize("seed", range(5))
def test_kernels_agree(seed):
    d = _inputs(seed)
    args = (d["y"], d["eta"], d["sigma2"], d["prior_var"], d["noise_l"])
    assert np.allclose(ck.sample_loadings(*args), _pykernels.sample_loadings(*args), rtol=1e-12, atol=1e-13)
    args = (d["y"], d["lam"], d["sigma2"], d["noise_f"])
    assert np.allclose(ck.sample_factors(*args), _pykernels.sample_factors(*args), rtol=1e-12, atol=1e-13)
    a, b = ck.column_log_densities(d["lam"], 0.05, 2.0, 2.0), _pykernels.column_log_densities(d["lam"], 0.05, 2.0, 2.0)
    assert np.allclose(a[0], b[0], rtol=1e-13) and np.allclose(a[1], b[1], rtol=1e-13)
    args = (d["lam"], d["log_omega"], 0.05, 2.0, 2.0, d["u"])
    assert np.array_equal(ck.sample_indicators(*args), _pykernels.sample_indicators(*args))
    args = (d["y"], d["eta"], d["lam"])
    assert np.allclose(ck.residual_ss(*args), _pykernels.residual_ss(*args), rtol=1e-12)


def test_empty_data():
    out = ck.sample_loadings(np.zeros((0, 2)), np.zeros((0, 3)), np.ones(2), np.ones((2, 3)), np.ones((2, 3)))
    assert np.allclose(out, 1.0)
    assert ck.sample_factors(np.zeros((0, 2)), np.ones((2, 3)), np.ones(2), np.zeros((0, 3))).shape == (0, 3)


def test_jitter_path_agrees():
    """A singular prior-free precision is rescued identically by both backends."""
    eta = np.ones((4, 2))  # rank-one gram matrix
    y = np.ones((4, 1))
    prior_var = np.full((1, 2), 1e12)
    noise = np.zeros((1, 2))
    a = ck.sample_loadings(y, eta, np.ones(1), prior_var, noise)
    b = _pykernels.sample_loadings(y, eta, np.ones(1), prior_var, noise)
    assert np.all(np.isfinite(a)) and np.allclose(a, b, rtol=1e-6)


def test_short_chains_agree():
    """Whole chains match across backends up to rounding drift."""
    code = (
        "import numpy as np, sys\n"
        "from cuspfactor.gibbs_cusp import Dataset, FactorHyper, McmcSettings, run_chain\n"
        "from cuspfactor.prob_core import make_rng\n"
        "from cuspfactor import BACKEND\n"
        "y = make_rng(1).standard_normal((30, 5))\n"
        "s = McmcSettings(n_iterations=60, burn_in=0, thin=1, t_bar=10, seed=4)\n"
        "st = run_chain(Dataset(y), FactorHyper(), s)\n"
        "np.save(sys.argv[1], st.omega)\n"
        "print(BACKEND)\n"
    )
    outs = {}
    for backend in ("python", "cython"):
        path = f"/tmp/cuspfactor_chain_{backend}_{os.getpid()}.npy"
        env = dict(os.environ, CUSPFACTOR_BACKEND=backend)
        res = subprocess.run([sys.executable, "-c", code, path], env=env, capture_output=True, text=True, check=True)
        assert res.stdout.strip() == backend
        outs[backend] = np.load(path)
        os.remove(path)
    assert np.allclose(outs["python"], outs["cython"], rtol=1e-6, atol=1e-8)


def test_bad_backend_name():
    env = dict(os.environ, CUSPFACTOR_BACKEND="fortran")
    res = subprocess.run([sys.executable, "-c", "import cuspfactor"], env=env, capture_output=True, text=True)
    assert res.returncode != 0 and "CUSPFACTOR_BACKEND" in res.stderr
