"""Property-based checks with hypothesis."""

import math

import numpy as np
from conftest import cached_model
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from polybergman import (
    Polytope,
    RadialGrid,
    Weight,
    bergman_function,
    extremal_ratio,
    make_builtin,
    ma_density,
    model_for,
    radial_envelope,
    sample_dpp,
    sample_zeros,
    support_weight,
    weighted_kernel,
)
from polybergman.experiment import fmt

SETTINGS = settings(deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
SLOW = settings(deadline=None, max_examples=6, suppress_health_check=[HealthCheck.too_slow])

coef = st.floats(-1.0, 1.0, allow_nan=False)
point = st.builds(complex, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))


def profile_values(v, a, b, c, d):
    # a convex part plus a wiggle; the envelope has to cut the wiggle off
    return (0.3 + abs(a)) * v ** 2 / 2 + b * np.sin((2 + 3 * abs(c)) * v) + d * v


def grid_for(a, b, c, d):
    return RadialGrid.from_profile(lambda v: profile_values(v, a, b, c, d), -4.0, 4.0, 241, "punctured")


def envelope(g):
    return radial_envelope(g, (0.0, 1.0), warn=False)


# -- envelope ----------------------------------------------------------------

@SETTINGS
@given(coef, coef, coef, coef)
def test_envelope_is_convex_minorant(a, b, c, d):
    env = envelope(grid_for(a, b, c, d))
    pe, v = env.phi_e_values, env.v_values
    assert np.all(pe <= env.phi_values + 1e-12)
    slopes = np.diff(pe) / np.diff(v)
    assert np.all(np.diff(slopes) >= -1e-9)
    assert slopes.min() >= -1e-9 and slopes.max() <= 1 + 1e-9


@SETTINGS
@given(coef, coef, coef, coef)
def test_envelope_idempotent(a, b, c, d):
    g = grid_for(a, b, c, d)
    e1 = envelope(g)
    e2 = envelope(RadialGrid(g.v_values, e1.phi_e_values, "punctured"))
    assert np.allclose(e2.phi_e_values, e1.phi_e_values, rtol=0, atol=1e-10 * (1 + np.max(np.abs(e1.phi_e_values))))


@SETTINGS
@given(coef, coef, coef, coef, st.floats(0.0, 2.0), st.floats(-4, 4))
def test_envelope_monotone(a, b, c, d, height, centre):
    g = grid_for(a, b, c, d)
    bump = height * np.exp(-((g.v_values - centre) ** 2))
    lower = envelope(g).phi_e_values
    upper = envelope(RadialGrid(g.v_values, g.phi_values + bump, "punctured")).phi_e_values
    assert np.all(upper >= lower - 1e-10 * (1 + np.abs(lower)))


@SETTINGS
@given(coef, coef, coef, coef)
def test_envelope_mass_bound(a, b, c, d):
    env = envelope(grid_for(a, b, c, d))
    assert np.all(env.ma_density_v >= 0)
    assert -1e-12 <= env.total_mass <= 1 + 1e-12


# -- kernel ------------------------------------------------------------------

@SETTINGS
@given(st.lists(point, min_size=2, max_size=12))
def test_kernel_matrix_psd(zs):
    m = cached_model("annulus", 12)
    z = np.array(zs)
    zi, zj = np.meshgrid(z, z, indexing="ij")
    mat = weighted_kernel(m, zi, zj)
    assert np.allclose(mat, mat.conj().T, rtol=0, atol=1e-14 * np.max(np.abs(mat)))
    eig = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
    assert eig.min() >= -1e-10 * max(eig.max(), 1e-300)


@SLOW
@given(st.lists(coef, min_size=20, max_size=20), st.lists(point, min_size=20, max_size=20))
def test_kernel_reproduces_polynomials(c, zs):
    m = model_for(make_builtin("perturbed-gaussian", [0.3, 2]), 10)
    coeffs = np.array(c[:10]) + 1j * np.array(c[10:])
    if not np.any(coeffs):
        coeffs[0] = 1.0
    nodes, wts = m.rule.nodes, m.rule.weights
    vec, shift, _ = m.weighted_vectors(nodes)
    f_nodes = (vec @ coeffs) * np.exp(shift)  # f e^{-k phi / 2} at the nodes
    scale = np.max(np.abs(f_nodes))
    for z in zs:
        vz, sz, _ = m.weighted_vectors(np.array([z]))
        direct = (vz @ coeffs)[0] * np.exp(sz[0])
        kz = weighted_kernel(m, np.full(nodes.shape, z), nodes)
        reproduced = np.sum(wts * kz * f_nodes)
        assert abs(reproduced - direct) <= 1e-6 * scale


@SLOW
@given(st.builds(complex, st.floats(-2, 2), st.floats(-2, 2)), st.sampled_from(["gaussian", "annulus"]))
def test_bergman_function_constant_gauge_invariant(a, name):
    # a linear gauge term is not exact here: e^{k b z} does not preserve polynomials of degree < k
    w = make_builtin(name)
    z = np.array([0.0, 0.4 + 0.2j, -0.7j, 1.1])
    b0 = bergman_function(cached_model(name, 8), z)
    b1 = bergman_function(model_for(w.gauge(a), 8), z)
    assert np.allclose(b1, b0, rtol=1e-10)


@SETTINGS
@given(st.floats(0.0, 2.5), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_radial_weight_gives_radial_bergman(r, t1, t2):
    m = cached_model("annulus", 16)
    b = bergman_function(m, np.array([r * np.exp(1j * t1), r * np.exp(1j * t2)]))
    assert math.isclose(b[0], b[1], rel_tol=1e-10, abs_tol=1e-300)


@SETTINGS
@given(st.lists(coef, min_size=32, max_size=32), st.lists(point, min_size=1, max_size=10))
def test_extremal_ratio_below_bergman(c, zs):
    m = cached_model("gaussian", 16)
    coeffs = np.array(c[:16]) + 1j * np.array(c[16:])
    if not np.any(coeffs):
        coeffs[0] = 1.0
    z = np.array(zs)
    assert np.all(extremal_ratio(m, coeffs, z) <= bergman_function(m, z) * (1 + 1e-9))


# -- serialization, seeding --------------------------------------------------

@SETTINGS
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trip(x):
    assert float(fmt(x)) == x


@SLOW
@given(st.integers(0, 2 ** 63 - 1), st.integers(0, 1000))
def test_sampling_reproducible(seed, batch):
    m = cached_model("gaussian", 8)
    assert np.array_equal(sample_dpp(m, seed, batch).points, sample_dpp(m, seed, batch).points)
    assert np.array_equal(sample_zeros(m, seed, batch).points, sample_zeros(m, seed, batch).points)


# -- polytope support function and MA density --------------------------------

@SETTINGS
@given(st.floats(0.0, 0.45), st.floats(0.55, 1.0), st.floats(-5, 5), st.floats(-5, 5))
def test_support_weight_midpoint_convex(lo, hi, v1, v2):
    delta = Polytope.interval(lo, hi)
    z = np.exp(0.5 * np.array([v1, v2, 0.5 * (v1 + v2)]))
    h = support_weight(delta, z)
    assert h[2] <= 0.5 * (h[0] + h[1]) + 1e-12


QUARTIC = Weight(eval=lambda z: np.abs(z) ** 4 / 4 + np.abs(z) ** 2, name="quartic")


@SETTINGS
@given(point, st.builds(complex, st.floats(-1, 1), st.floats(-1, 1)),
       st.builds(complex, st.floats(-1, 1), st.floats(-1, 1)))
def test_ma_density_gauge_invariant(z, a, b):
    base = ma_density(QUARTIC, z)
    gauged = ma_density(QUARTIC.gauge(a, [b]), z)
    assert math.isclose(float(gauged), float(base), rel_tol=1e-5)
    # |z|^4/4 + |z|^2 has dd^c density (1 + |z|^2) / pi
    assert math.isclose(float(base), (1 + abs(z) ** 2) / math.pi, rel_tol=1e-5)


@SETTINGS
@given(st.floats(0.05, 2.5), st.floats(0, 2 * math.pi))
def test_ma_density_radial_invariant(r, t):
    w = make_builtin("annulus")
    d = ma_density(w, np.array([r, r * np.exp(1j * t)]))
    assert math.isclose(d[0], d[1], rel_tol=1e-9, abs_tol=1e-12)
