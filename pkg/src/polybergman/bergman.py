"""Bergman kernels of weighted polynomial spaces.

The Hilbert space is spanned by monomials z^alpha (total degree < k, or the
lattice points of a scaled polytope) with norm ||f||^2 = int |f|^2 e^{-k phi}.
Monomials are pre-scaled to unit norm and orthonormalized by an unpivoted
Cholesky factorization of the scaled Gram matrix.  Torus-invariant weights give
a diagonal Gram matrix and skip the factorization.

All evaluations work with the *weighted* basis vector
u(z) = (psi_j(z) e^{-k phi(z)/2})_j, computed in log space with a per-point
scale factor so that neither large |z| nor large k overflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .quadrature import QuadRule, default_rule, fsum_complex
from .weights import Weight, as_points

__all__ = [
    "Basis",
    "BergmanModel",
    "ConditioningError",
    "monomial_basis",
    "build_model",
    "model_for",
    "kernel",
    "weighted_kernel",
    "bergman_function",
    "log_bergman_function",
    "log_kernel_potential",
    "dimension_residual",
    "extremal_ratio",
    "gram_on_rule",
    "monomial_coefficients",
]

CONDITION_LIMIT = 1e12
_GRAM_CHUNK = 8192


class ConditioningError(RuntimeError):
    """Raised when the scaled Gram matrix is too ill-conditioned to factor."""


@dataclass(frozen=True)
class Basis:
    exponents: np.ndarray  # (dim, n) integer multi-indices
    n: int
    k: int
    kind: str = "total"

    @property
    def dim(self) -> int:
        return int(self.exponents.shape[0])

    @property
    def max_degree(self) -> int:
        return int(np.abs(self.exponents).sum(axis=1).max()) if self.dim else 0


def monomial_basis(n: int, k: int) -> Basis:
    """All multi-indices of total degree <= k - 1, ordered by degree then lexicographically."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n == 1:
        exps = np.arange(k).reshape(-1, 1)
    else:
        exps = np.array([(a, d - a) for d in range(k) for a in range(d, -1, -1)])
    assert exps.shape[0] == comb(n + k - 1, n)
    return Basis(exponents=exps.astype(int), n=n, k=k, kind="total")


@dataclass(frozen=True, eq=False)
class BergmanModel:
    weight: Weight
    k: int
    basis: Basis
    rule: QuadRule
    log_scaling: np.ndarray  # ln s_alpha, s_alpha = ||z^alpha||
    chol: Optional[np.ndarray]  # lower factor of the scaled Gram matrix; None when diagonal
    condition_estimate: float
    radial_fast_path: bool

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def scaling(self) -> np.ndarray:
        return np.exp(self.log_scaling)

    @property
    def transform(self) -> np.ndarray:
        """Upper triangular T with psi_j = sum_alpha T[alpha, j] z^alpha / s_alpha."""
        if self.chol is None:
            return np.eye(self.dim)
        return solve_triangular(self.chol, np.eye(self.dim), lower=True).T

    # -- evaluation helpers -------------------------------------------------

    def _log_monomials(self, z):
        """ln|z^alpha| and arg(z^alpha) for each point and exponent."""
        z = as_points(z, self.n)
        zz = z[..., None] if self.n == 1 else z
        with np.errstate(divide="ignore"):
            la = np.log(np.abs(zz))
        ang = np.angle(zz)
        exps = self.basis.exponents
        # exponent 0 contributes nothing even at a zero coordinate
        with np.errstate(invalid="ignore"):
            terms = np.where(exps[None, :, :] == 0, 0.0, la.reshape(-1, 1, self.n) * exps[None, :, :])
        log_abs = terms.sum(axis=-1)
        phase = (ang.reshape(-1, 1, self.n) * exps[None, :, :]).sum(axis=-1)
        return log_abs, phase, z.shape[:-1] if self.n > 1 else z.shape

    def weighted_vectors(self, z):
        """Return (u_tilde, shift, shape) with u(z) = exp(shift) * u_tilde.

        u has rows u_j(z) = psi_j(z) exp(-k phi(z) / 2); u_tilde is flattened
        over points, shape (points, dim).
        """
        log_abs, phase, shape = self._log_monomials(z)
        z = as_points(z, self.n)
        phi = np.asarray(self.weight.eval(z), dtype=float).reshape(-1)
        la = log_abs - self.log_scaling[None, :]
        shift = np.max(la, axis=1)
        shift = np.where(np.isfinite(shift), shift, 0.0)
        vec = np.exp(la - shift[:, None]) * np.exp(1j * phase)
        if self.chol is not None:
            vec = solve_triangular(self.chol, vec.T, lower=True).T
        return vec, shift - 0.5 * self.k * phi, shape


def _log_gram_diagonal(w: Weight, k: int, exps: np.ndarray, rule: QuadRule) -> np.ndarray:
    """ln ||z^alpha||^2 for a torus-invariant weight, using the rule's orbit nodes."""
    pts = rule.orbit_nodes
    with np.errstate(divide="ignore"):
        logw = np.log(rule.orbit_weights)
        phi = np.asarray(w.eval(pts), dtype=float)
        logt = np.log(np.abs(pts) ** 2)
    if w.n == 1:
        logt = logt[:, None]
    expo = logt @ exps.T.astype(float) if exps.size else np.zeros((len(pts), 0))
    expo = np.where(np.isnan(expo), -np.inf, expo)
    return logsumexp(logw[:, None] + expo - k * phi[:, None], axis=0)


def build_model(w: Weight, basis: Basis, rule: QuadRule, *, check_capacity: bool = True) -> BergmanModel:
    """Orthonormalize ``basis`` with respect to int |f|^2 exp(-k phi) on ``rule``."""
    if basis.n != w.n or rule.n != w.n:
        raise ValueError("weight, basis and rule must share the dimension n")
    if basis.dim == 0:
        raise ValueError("empty basis")
    k = basis.k
    exps = basis.exponents
    if check_capacity and rule.degree_capacity < 2 * basis.max_degree:
        raise ValueError(
            f"rule degree capacity {rule.degree_capacity} is below twice the basis degree "
            f"{basis.max_degree}; use more radial/angular nodes"
        )
    if w.torus_invariant:
        log_g = _log_gram_diagonal(w, k, exps, rule)
        if not np.all(np.isfinite(log_g)):
            raise ConditioningError("a monomial has zero or infinite norm on this rule")
        return BergmanModel(w, k, basis, rule, 0.5 * log_g, None, 1.0, True)

    pts = rule.nodes
    zz_all = pts[:, None] if w.n == 1 else pts
    with np.errstate(divide="ignore"):
        phi_all = np.asarray(w.eval(pts), dtype=float)
        logw_all = np.log(rule.weights)

    def log_amp_chunk(sl):
        zz = zz_all[sl]
        with np.errstate(divide="ignore", invalid="ignore"):
            la = np.log(np.abs(zz))
            terms = np.where(exps[None, :, :] == 0, 0.0, la[:, None, :] * exps[None, :, :]).sum(-1)
        phase = (np.angle(zz)[:, None, :] * exps[None, :, :]).sum(-1)
        return terms + 0.5 * (logw_all[sl] - k * phi_all[sl])[:, None], phase

    # two passes over node chunks: monomial norms first, then the scaled Gram matrix
    chunks = [slice(i, i + _GRAM_CHUNK) for i in range(0, len(pts), _GRAM_CHUNK)]
    log_diag = np.full(basis.dim, -np.inf)
    for sl in chunks:
        la, _ = log_amp_chunk(sl)
        log_diag = np.logaddexp(log_diag, logsumexp(2.0 * la, axis=0))
    if not np.all(np.isfinite(log_diag)):
        raise ConditioningError("a monomial has zero or infinite norm on this rule")
    log_s = 0.5 * log_diag
    gram = np.zeros((basis.dim, basis.dim), dtype=complex)
    for sl in chunks:
        la, phase = log_amp_chunk(sl)
        amp = np.exp(la - log_s[None, :]) * np.exp(1j * phase)
        gram += amp.T @ amp.conj()
    gram = 0.5 * (gram + gram.conj().T)
    eig = np.linalg.eigvalsh(gram)
    cond = float(eig[-1] / eig[0]) if eig[0] > 0 else np.inf
    if not cond <= CONDITION_LIMIT:
        raise ConditioningError(
            f"scaled Gram matrix condition estimate {cond:.3g} exceeds {CONDITION_LIMIT:.0e} "
            f"(k={k}, dim={basis.dim}); use a finer rule or a smaller k"
        )
    chol = np.linalg.cholesky(gram)
    return BergmanModel(w, k, basis, rule, log_s, chol, cond, False)


def model_for(w: Weight, k: int, basis: Optional[Basis] = None, **rule_kwargs) -> BergmanModel:
    """Build a model on :func:`~polybergman.quadrature.default_rule` for the basis."""
    basis = basis or monomial_basis(w.n, k)
    if not w.torus_invariant:
        rule_kwargs.setdefault("panel_width", 2.0)
    rule = default_rule(w, basis.k, basis.exponents, **rule_kwargs)
    return build_model(w, basis, rule)


# ---------------------------------------------------------------------------
# kernel evaluation


def log_bergman_function(m: BergmanModel, z) -> np.ndarray:
    """ln B_k(z)."""
    vec, shift, shape = m.weighted_vectors(z)
    with np.errstate(divide="ignore"):
        out = 2.0 * shift + np.log(np.sum(np.abs(vec) ** 2, axis=1))
    return out.reshape(shape) if shape else float(out[0])


def bergman_function(m: BergmanModel, z) -> np.ndarray:
    """B_k(z) = K_k(z, z) exp(-k phi(z))."""
    return np.exp(log_bergman_function(m, z))


def log_kernel_potential(m: BergmanModel, z) -> np.ndarray:
    """k^{-1} ln K_k(z, z)."""
    z = as_points(z, m.n)
    phi = np.asarray(m.weight.eval(z), dtype=float)
    return log_bergman_function(m, z) / m.k + phi


def _inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise sum a * conj(b) from real operations, so swapping a and b conjugates the result exactly."""
    re = np.sum(a.real * b.real + a.imag * b.imag, axis=1)
    im = np.sum(a.imag * b.real - a.real * b.imag, axis=1)
    return re + 1j * im


def weighted_kernel(m: BergmanModel, z, w) -> np.ndarray:
    """K_k(z, w) exp(-k phi(z)/2 - k phi(w)/2), the projection kernel on L^2(Lebesgue)."""
    uz, sz, shape = m.weighted_vectors(z)
    uw, sw, _ = m.weighted_vectors(w)
    out = _inner(uz, uw) * np.exp(sz + sw)
    return out.reshape(shape) if shape else complex(out[0])


def kernel(m: BergmanModel, z, w) -> np.ndarray:
    """K_k(z, w) = sum_i psi_i(z) conj(psi_i(w))."""
    z = as_points(z, m.n)
    w_ = as_points(w, m.n)
    uz, sz, shape = m.weighted_vectors(z)
    uw, sw, _ = m.weighted_vectors(w_)
    phz = np.asarray(m.weight.eval(z), dtype=float).reshape(-1)
    phw = np.asarray(m.weight.eval(w_), dtype=float).reshape(-1)
    scale = np.exp(sz + sw + 0.5 * m.k * (phz + phw))
    out = _inner(uz, uw) * scale
    return out.reshape(shape) if shape else complex(out[0])


def dimension_residual(m: BergmanModel) -> float:
    """|int B_k - dim H_k| / dim H_k on the model's own rule."""
    rule = m.rule
    if m.radial_fast_path:
        vals = bergman_function(m, rule.orbit_nodes)
        total = fsum_complex(rule.orbit_weights * vals).real
    else:
        vals = bergman_function(m, rule.nodes)
        total = fsum_complex(rule.weights * vals).real
    return abs(total - m.dim) / m.dim


def extremal_ratio(m: BergmanModel, coeffs: Sequence[complex], z) -> np.ndarray:
    """|f(z)|^2 e^{-k phi(z)} / ||f||^2 for f = sum c_i psi_i."""
    c = np.asarray(coeffs, dtype=complex).reshape(m.dim)
    norm2 = float(np.sum(np.abs(c) ** 2))
    if norm2 == 0.0:
        raise ValueError("the zero polynomial has no extremal ratio")
    vec, shift, shape = m.weighted_vectors(z)
    val = np.abs(vec @ c) ** 2 * np.exp(2.0 * shift) / norm2
    return val.reshape(shape) if shape else float(val[0])


def monomial_coefficients(m: BergmanModel, coeffs: Sequence[complex]) -> np.ndarray:
    """Coefficients a_alpha with sum_i c_i psi_i(z) = sum_alpha a_alpha z^alpha."""
    c = np.asarray(coeffs, dtype=complex).reshape(m.dim)
    if m.chol is not None:
        c = solve_triangular(m.chol.T, c, lower=False)
    return c * np.exp(-m.log_scaling)


def gram_on_rule(m: BergmanModel, rule: QuadRule) -> np.ndarray:
    """Gram matrix <psi_i, psi_j> re-integrated on another rule."""
    vec, shift, _ = m.weighted_vectors(rule.nodes)
    amp = vec * (np.exp(shift) * np.sqrt(rule.weights))[:, None]
    return amp.T @ amp.conj()
