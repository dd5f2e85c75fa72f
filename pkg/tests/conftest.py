import functools
import math

import numpy as np
import pytest
from scipy.special import gammaincc

from polybergman import make_builtin, model_for

# acceptance tests append (criterion, verdict, detail) here; printed at the end of the run
ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def cached_weight(name, params=(), n=1):
    return make_builtin(name, params, n=n)


@functools.lru_cache(maxsize=None)
def cached_model(name, k, params=(), n=1):
    return model_for(cached_weight(name, params, n), k)


def gaussian_bergman_oracle(k, z):
    """B_k for phi = |z|^2, n = 1: (k / pi) * P(Poisson(k|z|^2) < k)."""
    return k / np.pi * gammaincc(k, k * np.abs(np.asarray(z)) ** 2)


def square_grid(extent, h):
    xs = np.arange(-extent, extent + h / 2, h)
    x, y = np.meshgrid(xs, xs)
    return (x + 1j * y).ravel()


def mismatch_within_cells(mask, oracle_mask, r, radii, cells, h):
    """Every disagreement lies within ``cells`` grid cells of one of the oracle boundary circles."""
    bad = mask != oracle_mask
    if not np.any(bad):
        return True
    dist = np.min(np.abs(r[bad][:, None] - np.asarray(radii)[None, :]), axis=1)
    return bool(np.all(dist <= cells * h * math.sqrt(2)))


@pytest.fixture(scope="session")
def gaussian():
    return cached_weight("gaussian")


@pytest.fixture(scope="session")
def annulus():
    return cached_weight("annulus")


@pytest.fixture(scope="session")
def model():
    return cached_model


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
