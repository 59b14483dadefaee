import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kleinz.exact import polys_for
from kleinz.graph import lattice

settings.register_profile("kleinz", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kleinz")

DIMER_LATTICES = ("square_2x1", "square_1x2", "hexagonal", "triangular")


@functools.lru_cache(maxsize=None)
def cached_polys(name):
    return polys_for(lattice(name))


def weighted(name, seed, lo=0.3, hi=2.0):
    g = lattice(name)
    return g.with_weights(list(np.random.default_rng(seed).uniform(lo, hi, g.n_edges)))


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


@pytest.fixture(params=DIMER_LATTICES)
def dimer_name(request):
    return request.param
