import sys

import numpy as np
import pytest

from cuspfactor import _pykernels
from cuspfactor.prob_core import make_rng

try:
    from cuspfactor import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNEL_MODULES = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    KERNEL_MODULES.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture(params=KERNEL_MODULES)
def kern(request):
    return request.param


def mc_within(samples, target, n_se=3.0):
    """True when the sample mean is within ``n_se`` standard errors of ``target``."""
    samples = np.asarray(samples, dtype=float)
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    return abs(samples.mean() - target) <= n_se * se


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
