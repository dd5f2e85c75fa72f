"""Spaces of Laurent polynomials with exponents in a scaled lattice polytope k*Delta.

The growth benchmark is the support function H_Delta(z) = 2 max_{p in Delta} p . ln|z|,
and for torus-invariant weights the coincidence set is the preimage of Delta
under the gradient of the toric profile.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .bergman import Basis, BergmanModel, build_model, log_bergman_function
from .equilibrium import EnvelopeResult, RadialGrid, radial_envelope
from .quadrature import default_rule, fsum_complex
from .weights import GrowthReport, Weight, as_points

__all__ = [
    "Polytope",
    "support_weight",
    "lattice_basis",
    "validate_growth_polytope",
    "toric_coincidence",
    "polytope_equilibrium",
    "polytope_model",
    "mass_fraction",
]

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex polytope given by its vertices (an interval when n = 1)."""

    vertices: np.ndarray
    n: int

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if self.n == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[1] != self.n or self.n not in (1, 2):
            raise ValueError("vertices must have shape (m, n) with n in {1, 2}")
        if self.n == 1:
            if v.shape[0] != 2 or not v[0, 0] < v[1, 0]:
                raise ValueError("a 1-D polytope is an interval [a, b] with a < b")
        else:
            if v.shape[0] < 3:
                raise ValueError("a 2-D polytope needs at least three vertices")
            try:
                hull = ConvexHull(v)
            except QhullError as exc:
                raise ValueError("polytope has empty interior") from exc
            if hull.volume <= 0:
                raise ValueError("polytope has empty interior")
            if len(hull.vertices) != v.shape[0]:
                raise ValueError("vertices are not in convex position")
        object.__setattr__(self, "vertices", v)

    @classmethod
    def interval(cls, a: float, b: float) -> "Polytope":
        return cls(np.array([[a], [b]]), 1)

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def volume(self) -> float:
        if self.n == 1:
            return float(self.vertices[1, 0] - self.vertices[0, 0])
        return float(ConvexHull(self.vertices).volume)

    def scaled(self, k: float) -> "Polytope":
        return Polytope(k * self.vertices, self.n)

    def _halfplanes(self):
        if self.n == 1:
            a, b = self.vertices[:, 0]
            return np.array([[-1.0], [1.0]]), np.array([a, -b])
        eq = ConvexHull(self.vertices).equations
        return eq[:, :-1], eq[:, -1]

    def contains(self, p, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        """Closed membership via the facet half-planes, with absolute slack ``tol``."""
        p = np.asarray(p, dtype=float)
        pts = p.reshape(-1, self.n)
        normals, offsets = self._halfplanes()
        ok = np.all(pts @ normals.T + offsets[None, :] <= tol, axis=1)
        return ok.reshape(p.shape if self.n == 1 else p.shape[:-1])


def support_weight(delta: Polytope, z) -> np.ndarray:
    """H_Delta(z) = 2 max over vertices p of sum_i p_i ln|z_i|."""
    pts = as_points(z, delta.n)
    a = np.abs(pts)
    if np.any(a == 0):
        raise ValueError("support_weight is undefined where a coordinate vanishes")
    logs = np.log(a)
    logs = logs[..., None] if delta.n == 1 else logs
    vals = np.einsum("...i,pi->...p", logs, delta.vertices)
    return 2.0 * vals.max(axis=-1)


def lattice_basis(delta: Polytope, k: int) -> Basis:
    """All alpha in Z^n with alpha / k in Delta, ordered by total degree then lexicographically."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lo, hi = delta.bounds
    ranges = [np.arange(math.floor(k * l - 1e-6), math.ceil(k * h + 1e-6) + 1) for l, h in zip(lo, hi)]
    if delta.n == 1:
        cand = ranges[0].reshape(-1, 1)
    else:
        a, b = np.meshgrid(*ranges, indexing="ij")
        cand = np.stack([a.ravel(), b.ravel()], -1)
    keep = delta.contains(cand / k).reshape(-1)
    exps = cand[keep].astype(int)
    if delta.n == 2 and exps.size:
        order = np.lexsort((-exps[:, 0], exps.sum(axis=1)))
        exps = exps[order]
    if exps.shape[0] == 0:
        warnings.warn(f"k*Delta contains no lattice points for k={k}", RuntimeWarning, stacklevel=2)
    return Basis(exponents=exps.reshape(-1, delta.n), n=delta.n, k=k, kind="polytope")


def validate_growth_polytope(w: Weight, delta: Polytope, eps: float, sample_count: int = 1000,
                             seed: int = 0, v_radius: Optional[float] = None) -> GrowthReport:
    """Check phi >= (1 + eps) H_Delta at log-radii v with |v| in [V, 4V].

    V defaults to max(1, 2 ln growth_radius); both directions of every axis
    are sampled (v -> +inf and v -> -inf).
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    rng = np.random.default_rng(seed)
    V = v_radius if v_radius is not None else max(1.0, 2.0 * math.log(w.growth_radius))
    norms = rng.uniform(V, 4.0 * V, size=sample_count)
    if w.n == 1:
        v = norms * rng.choice([-1.0, 1.0], size=sample_count)
        z = np.exp(0.5 * v) * np.exp(2j * np.pi * rng.uniform(size=sample_count))
    else:
        d = rng.normal(size=(sample_count, 2))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        v = norms[:, None] * d
        z = np.exp(0.5 * v) * np.exp(2j * np.pi * rng.uniform(size=(sample_count, 2)))
    with np.errstate(all="ignore"):
        margin = w(z) - (1.0 + eps) * support_weight(delta, z)
    margin = np.where(np.isnan(margin), -np.inf, margin)
    worst = float(np.min(margin))
    return GrowthReport(ok=bool(worst >= 0.0), worst_margin=worst)


def toric_coincidence(profile: Callable, delta: Polytope, v_grid, fd_step: float = 1e-5) -> np.ndarray:
    """mask(v) = (grad Phi(v) in Delta), gradient by central differences.

    ``v_grid`` is a 1-D array (n = 1) or an array of shape (..., 2).  Raises
    when sampled second differences reveal a non-convex profile.
    """
    n = delta.n
    v = np.asarray(v_grid, dtype=float)
    pts = v.reshape(-1, 1) if n == 1 else v.reshape(-1, 2)
    f = (lambda p: np.asarray(profile(p[:, 0] if n == 1 else p), dtype=float))
    h = fd_step * (1.0 + np.abs(pts).max(axis=1, keepdims=True))
    grads = np.empty_like(pts)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        grads[:, i] = (f(pts + h * e) - f(pts - h * e)) / (2.0 * h[:, 0])
    # convexity: second differences along axes and diagonals with a coarse step
    s = 1e-3
    dirs = [np.array([1.0])] if n == 1 else [np.array(d) for d in ([1, 0], [0, 1], [1, 1], [1, -1])]
    f0 = f(pts)
    for d in dirs:
        sd = f(pts + s * d) - 2.0 * f0 + f(pts - s * d)
        if np.min(sd) < -1e-8:
            raise ValueError("profile is not convex on the sampled grid")
    mask = delta.contains(grads).reshape(-1)
    return mask.reshape(v.shape if n == 1 else v.shape[:-1])


def polytope_equilibrium(profile: RadialGrid, delta: Polytope, **kwargs) -> EnvelopeResult:
    """Envelope with slopes restricted to Delta = [a, b]; its contact set is D_Delta."""
    if delta.n != 1:
        raise ValueError("polytope_equilibrium handles the one-variable case only")
    a, b = delta.vertices[:, 0]
    return radial_envelope(profile, (float(a), float(b)), **kwargs)


def polytope_model(w: Weight, delta: Polytope, k: int, **rule_kwargs) -> BergmanModel:
    """Bergman model of the span of z^alpha, alpha in k*Delta, with norm from exp(-k phi)."""
    basis = lattice_basis(delta, k)
    if basis.dim == 0:
        raise ValueError(f"k*Delta has no lattice points for k={k}")
    rule = default_rule(w, k, basis.exponents, **rule_kwargs)
    return build_model(w, basis, rule)


def mass_fraction(m: BergmanModel, t_interval: Sequence[float]) -> float:
    """Share of int B_k lying in the shell t_lo <= |z|^2 <= t_hi (radial n = 1 models).

    The rule is rebuilt with panel ends at t_lo and t_hi so the indicator is
    integrated exactly up to the quadrature error of B_k itself.
    """
    if m.n != 1 or not m.radial_fast_path:
        raise ValueError("mass_fraction needs a radial one-variable model")
    t_lo, t_hi = (float(t) for t in t_interval)
    rule = default_rule(m.weight, m.k, m.basis.exponents, extra_breaks=[t_lo, t_hi])
    t = rule.radial_t
    vals = np.exp(log_bergman_function(m, rule.orbit_nodes)) * rule.orbit_weights
    inside = (t >= t_lo) & (t <= t_hi)
    return fsum_complex(vals[inside]).real / fsum_complex(vals).real
