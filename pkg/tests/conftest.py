import os

for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np
import pytest

from quadrobin.geometry import QuadParams
from quadrobin.mesh import build_mesh


def random_params(rng, count, S=1.0, a_range=2.0, c_range=(0.4, 2.2), s1_frac=(0.15, 0.85)):
    """Random valid parameter tuples, moderate enough for accurate FEM."""
    out = []
    for _ in range(count):
        out.append(
            QuadParams(
                a1=float(rng.uniform(-a_range, a_range)),
                a2=float(rng.uniform(-a_range, a_range)),
                c=float(np.exp(rng.uniform(np.log(c_range[0]), np.log(c_range[1])))),
                S1=float(rng.uniform(s1_frac[0], s1_frac[1]) * 2.0 * S),
                S=S,
            )
        )
    return out


@pytest.fixture(scope="session")
def meshes():
    cache = {}

    def get(n, S=1.0):
        key = (n, S)
        if key not in cache:
            cache[key] = build_mesh(n, S)
        return cache[key]

    return get


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
