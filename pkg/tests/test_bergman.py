import math

import numpy as np
import pytest
from conftest import cached_model, gaussian_bergman_oracle

from polybergman import (
    ConditioningError,
    Polytope,
    Weight,
    bergman_function,
    build_model,
    dimension_residual,
    extremal_ratio,
    kernel,
    log_kernel_potential,
    make_builtin,
    model_for,
    monomial_basis,
    polytope_model,
)
from polybergman.bergman import gram_on_rule
from polybergman.quadrature import default_rule, polar_rule

RNG = np.random.default_rng(11)


# -- monomial_basis ----------------------------------------------------------

def test_basis_n1_k3():
    b = monomial_basis(1, 3)
    assert b.exponents[:, 0].tolist() == [0, 1, 2] and b.dim == 3


def test_basis_n2_k3():
    b = monomial_basis(2, 3)
    assert b.dim == 6
    assert sorted(map(tuple, b.exponents)) == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)]
    assert np.all(np.diff(b.exponents.sum(axis=1)) >= 0)


def test_basis_n2_k1():
    assert monomial_basis(2, 1).exponents.tolist() == [[0, 0]]


@pytest.mark.parametrize("k", [1, 5, 17])
def test_basis_count(k):
    assert monomial_basis(2, k).dim == math.comb(k + 1, 2)
    assert monomial_basis(2, k).max_degree == k - 1


# -- build_model -------------------------------------------------------------

def test_gaussian_k1_constant():
    m = cached_model("gaussian", 1)
    assert m.dim == 1
    assert m.scaling[0] == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    z = np.array([0.0, 0.3 + 0.1j, -1.0j])
    assert np.allclose(kernel(m, z, z[::-1]), 1 / np.pi, rtol=1e-12)


def test_gaussian_norms_closed_form():
    k = 12
    m = cached_model("gaussian", k)
    assert m.radial_fast_path and np.array_equal(m.transform, np.eye(k))
    j = np.arange(k)
    exact = 0.5 * (np.log(np.pi) + np.array([math.lgamma(i + 1) for i in j]) - (j + 1) * np.log(k))
    assert np.allclose(m.log_scaling, exact, rtol=0, atol=1e-13)


def test_perturbed_model_is_dense_and_orthonormal():
    w = make_builtin("perturbed-gaussian", [0.1, 2])
    m = model_for(w, 12)
    assert not m.radial_fast_path and np.isfinite(m.condition_estimate)
    T = m.transform
    assert np.allclose(T, np.triu(T)) and np.max(np.abs(np.triu(T, 1))) > 1e-6
    refined = default_rule(w, 12, m.basis.exponents, nodes_per_panel=2 * m.rule.radial_t.size // 10 + 48,
                           n_angular=2 * m.rule.n_angular, panel_width=1.0)
    g = gram_on_rule(m, refined)
    assert np.max(np.abs(g - g.conj().T)) <= 1e-12
    assert np.max(np.abs(g - np.eye(m.dim))) <= 1e-8


def test_radial_transform_is_diagonal():
    for name, params in [("annulus", ()), ("hoelder", (0.5,))]:
        T = cached_model(name, 16, params).transform
        assert np.max(np.abs(T - np.diag(np.diag(T)))) <= 1e-10 * np.max(np.abs(T))


def test_refusal_on_ill_conditioned_gram():
    w = make_builtin("perturbed-gaussian", [0.9, 1])
    with pytest.raises(ConditioningError, match="condition"):
        model_for(w, 48)


def test_capacity_check():
    w = make_builtin("gaussian")
    with pytest.raises(ValueError, match="capacity"):
        build_model(w, monomial_basis(1, 20), polar_rule(5.0, 8, 8))


# -- kernel and Bergman function ---------------------------------------------

def test_kernel_diagonal_nonnegative():
    m = cached_model("annulus", 16)
    z = RNG.normal(size=100) + 1j * RNG.normal(size=100)
    assert np.all(kernel(m, z, z).real >= 0)
    assert np.allclose(kernel(m, z, z).imag, 0)


def test_kernel_hermitian():
    m = model_for(make_builtin("perturbed-gaussian", [0.3, 2]), 10)
    z, w = RNG.normal(size=20) + 1j * RNG.normal(size=20), RNG.normal(size=20) + 1j * RNG.normal(size=20)
    assert np.array_equal(kernel(m, z, w), np.conj(kernel(m, w, z)))


def test_gaussian_k8_kernel_at_origin():
    assert kernel(cached_model("gaussian", 8), 0.0, 0.0).real == pytest.approx(8 / np.pi, rel=1e-12)


@pytest.mark.parametrize("k", [1, 8, 32, 64])
def test_gaussian_bergman_at_origin(k):
    assert bergman_function(cached_model("gaussian", k), 0.0) == pytest.approx(k / np.pi, rel=1e-12)


def test_gaussian_bergman_matches_partial_sum_oracle():
    for k in (8, 32, 64):
        z = np.linspace(0, 2.5, 60) * np.exp(0.3j)
        assert np.allclose(bergman_function(cached_model("gaussian", k), z), gaussian_bergman_oracle(k, z),
                           rtol=1e-10, atol=1e-300)


def test_gaussian_unit_circle_tends_to_half_density():
    errs = [abs(bergman_function(cached_model("gaussian", k), 1.0) / k - 1 / (2 * np.pi)) for k in (16, 64, 128)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01


def test_gaussian_outside_disc_is_tiny():
    assert bergman_function(cached_model("gaussian", 32), 2.0) / 32 <= 1e-6


def test_log_kernel_potential_k1():
    z = np.array([0.0, 1.0, 2.0 + 1j])
    assert np.allclose(log_kernel_potential(cached_model("gaussian", 1), z), -math.log(math.pi), atol=1e-12)


def test_log_kernel_potential_k64():
    m = cached_model("gaussian", 64)
    tol = 2 * math.log(64) / 64
    assert abs(log_kernel_potential(m, 0.5) - 0.25) <= tol
    assert abs(log_kernel_potential(m, 2.0j) - (math.log(4) + 1)) <= tol


# -- dimension identity ------------------------------------------------------

def test_dimension_residual_gaussian_k16():
    assert dimension_residual(cached_model("gaussian", 16)) <= 1e-8


def test_dimension_residual_polytope():
    m = polytope_model(make_builtin("toric-quadratic"), Polytope.interval(0.25, 0.75), 8)
    assert m.dim == 5 and dimension_residual(m) <= 1e-8


def test_dimension_residual_dense_and_n2():
    assert dimension_residual(model_for(make_builtin("perturbed-gaussian", [0.3, 2]), 16)) <= 1e-8
    assert dimension_residual(cached_model("gaussian", 6, (), 2)) <= 1e-8


# -- extremal characterization -----------------------------------------------

def test_single_basis_vector_below_bergman():
    m = cached_model("annulus", 12)
    z = RNG.normal(size=30) + 1j * RNG.normal(size=30)
    b = bergman_function(m, z)
    for j in range(m.dim):
        e = np.zeros(m.dim)
        e[j] = 1
        assert np.all(extremal_ratio(m, e, z) <= b * (1 + 1e-9))


def test_reproducing_element_attains_bergman():
    m = model_for(make_builtin("perturbed-gaussian", [0.3, 2]), 12)
    for z in (0.2 + 0.1j, -1.0, 1.3j):
        vec, shift, _ = m.weighted_vectors(np.array([z]))
        c = np.conj(vec[0])
        assert extremal_ratio(m, c, z) == pytest.approx(bergman_function(m, z), rel=1e-9)


def test_random_coefficients_below_bergman():
    m = cached_model("gaussian", 16)
    z = RNG.normal(size=100) + 1j * RNG.normal(size=100)
    b = bergman_function(m, z)
    for _ in range(100):
        c = RNG.normal(size=m.dim) + 1j * RNG.normal(size=m.dim)
        assert np.all(extremal_ratio(m, c, z) <= b * (1 + 1e-9))


def test_zero_coefficients_rejected():
    with pytest.raises(ValueError):
        extremal_ratio(cached_model("gaussian", 4), np.zeros(4), 0.0)


# -- gauge and translation ---------------------------------------------------

def test_constant_gauge_leaves_bergman_function():
    w = make_builtin("perturbed-gaussian", [0.3, 2])
    z = RNG.normal(size=20) + 1j * RNG.normal(size=20)
    b0 = bergman_function(model_for(w, 10), z)
    b1 = bergman_function(model_for(w.gauge(0.7 - 0.4j), 10), z)
    assert np.allclose(b1, b0, rtol=1e-6)


def test_translation_of_gaussian():
    c = 0.3 - 0.2j
    shifted = Weight(eval=lambda z: np.abs(z - c) ** 2, growth_radius=2.0, name="shifted-gaussian")
    z = RNG.normal(size=20) * 0.7 + 1j * RNG.normal(size=20) * 0.7
    b_shift = bergman_function(model_for(shifted, 10), z + c)
    assert np.allclose(b_shift, gaussian_bergman_oracle(10, z), rtol=1e-6)
