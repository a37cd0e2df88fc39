import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heatframe.calculus import builtin_symbol  # noqa: E402
from heatframe.frame import build_frame, estimate_R_norm, search_params  # noqa: E402
from heatframe.grid import GridDomain  # noqa: E402
from heatframe.operators import build_operator  # noqa: E402


@pytest.fixture(scope="session")
def dom64():
    return GridDomain(1, 64)


@pytest.fixture(scope="session")
def dom128():
    return GridDomain(1, 128)


@pytest.fixture(scope="session")
def lap64(dom64):
    return build_operator("laplacian", dom64)


@pytest.fixture(scope="session")
def lap128(dom128):
    return build_operator("laplacian", dom128)


@pytest.fixture(scope="session")
def zeta1():
    return builtin_symbol("zeta_exp", 1)


@pytest.fixture(scope="session")
def tuned128(lap128, zeta1):
    """The searched (delta, M) frame on the N=128 laplacian."""
    res = search_params(lap128, zeta1)
    ctx = build_frame(lap128, zeta1, res.delta, res.M)
    estimate_R_norm(ctx)
    return ctx


@pytest.fixture(scope="session")
def frame64(lap64, zeta1):
    ctx = build_frame(lap64, zeta1, 1.2, 4)
    estimate_R_norm(ctx)
    return ctx


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
