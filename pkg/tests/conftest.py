import numpy as np
import pytest

from memhop.models import random_hermitian, random_state

# 4-node random models whose exact evolution keeps min_t min_n |psi_n(t)|
# above 0.10 over t in [0, 10]; found by scanning seeds in order with
# memhop.oracle.zero_free_margin (the first test below re-verifies this).
ZERO_FREE_SEEDS = [0, 18, 91, 120, 132]


@pytest.fixture
def zero_free_models():
    out = []
    for seed in ZERO_FREE_SEEDS:
        out.append((random_hermitian(4, seed), random_state(4, seed + 1000)))
    return out


def assert_rel_close(a, b, tol, msg=""):
    a = np.asarray(a)
    b = np.asarray(b)
    scale = np.maximum(np.abs(a), np.abs(b))
    rel = np.abs(a - b) / np.maximum(scale, 1e-300)
    worst = float(rel.max()) if rel.size else 0.0
    assert worst < tol, f"{msg} max relative error {worst:.3e} >= {tol}"
