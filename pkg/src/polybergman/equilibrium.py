"""Equilibrium potentials, coincidence sets and the convergence diagnostics built on them.

For a torus-invariant weight phi(z) = Phi(ln|z|^2) the equilibrium potential is
Phi_e, the largest convex function below Phi whose slopes lie in [0, 1] (the
Lelong class) or in [a, b] (the class attached to a segment [a, b]).  It is
computed as a restricted discrete Legendre biconjugate.  Other weights fall
back on k^{-1} ln K_k.
"""

from __future__ import annotations

import math
import warnings
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .bergman import (
    BergmanModel,
    bergman_function,
    log_bergman_function,
    log_kernel_potential,
)
from .quadrature import QuadRule, default_rule, fsum_complex, polar_rule
from .weights import Weight, as_points, ma_density

__all__ = [
    "RadialGrid",
    "EnvelopeResult",
    "radial_envelope",
    "default_radial_grid",
    "weight_envelope",
    "phi_e_point",
    "toric_envelope_point",
    "coincidence_set",
    "log_kernel_contact",
    "equilibrium_density",
    "l1_error",
    "DecayReport",
    "decay_check",
    "DominationReport",
    "domination_check",
    "offdiag_mass",
    "ExpansionReport",
    "expansion_probe",
    "growth_exponent",
]

MODES = ("extends_over_origin", "punctured")


@dataclass(frozen=True)
class RadialGrid:
    """Samples of a profile Phi on an increasing grid in v = ln|z|^2.

    ``phi_at_origin`` is the value of the weight at z = 0; in the
    ``extends_over_origin`` mode it bounds the envelope from above as
    v -> -inf.
    """

    v_values: np.ndarray
    phi_values: np.ndarray
    left_mode: str = "extends_over_origin"
    phi_at_origin: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.v_values, dtype=float)
        p = np.asarray(self.phi_values, dtype=float)
        object.__setattr__(self, "v_values", v)
        object.__setattr__(self, "phi_values", p)
        if v.ndim != 1 or v.shape != p.shape or v.size < 3:
            raise ValueError("v_values and phi_values must be 1-D of equal length >= 3")
        if not np.all(np.diff(v) > 0):
            raise ValueError("v_values must be strictly increasing")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(p))):
            raise ValueError("grid values must be finite")
        if self.left_mode not in MODES:
            raise ValueError(f"left_mode must be one of {MODES}")

    @classmethod
    def from_profile(cls, profile: Callable, v_min: float, v_max: float, count: int = 4001,
                     left_mode: str = "extends_over_origin", phi_at_origin: Optional[float] = None):
        v = np.linspace(v_min, v_max, count)
        return cls(v, np.asarray(profile(v), dtype=float), left_mode, phi_at_origin)


@dataclass(frozen=True)
class EnvelopeResult:
    v_values: np.ndarray
    phi_values: np.ndarray
    phi_e_values: np.ndarray
    slopes: np.ndarray
    contact_mask: np.ndarray
    ma_density_v: np.ndarray
    slope_interval: Tuple[float, float]
    boundary_contact: bool = False
    # the finite slope set and conjugate values that define the envelope exactly
    slope_set: np.ndarray = field(default=None, repr=False)
    conjugate: np.ndarray = field(default=None, repr=False)

    @property
    def total_mass(self) -> float:
        """Sum of ma_density_v over dual cells; equals the range of attained slopes."""
        h = _dual_widths(self.v_values)
        return math.fsum(self.ma_density_v * h)

    def evaluate(self, v) -> np.ndarray:
        """Phi_e at arbitrary v (piecewise linear between grid points, exact affine tails)."""
        v = np.asarray(v, dtype=float)
        flat = v.reshape(-1)
        out = np.empty_like(flat)
        inside = (flat >= self.v_values[0]) & (flat <= self.v_values[-1])
        out[inside] = np.interp(flat[inside], self.v_values, self.phi_e_values)
        outside = ~inside
        if np.any(outside):
            vo = flat[outside]
            with np.errstate(invalid="ignore"):
                lines = self.slope_set[None, :] * vo[:, None] - self.conjugate[None, :]
            # at v = -inf only the zero slope (if admissible) stays finite
            zero = np.broadcast_to(self.slope_set[None, :] == 0.0, lines.shape)
            lines = np.where(np.isnan(lines) & zero, -self.conjugate[None, :], lines)
            lines = np.where(np.isnan(lines), -np.inf, lines)
            out[outside] = lines.max(axis=1)
        return out.reshape(v.shape) if v.ndim else float(out[0])

    def contact_interval(self) -> Tuple[float, float]:
        """Smallest and largest v in contact (nan when there is no contact)."""
        idx = np.nonzero(self.contact_mask)[0]
        if idx.size == 0:
            return (math.nan, math.nan)
        return float(self.v_values[idx[0]]), float(self.v_values[idx[-1]])


def _dual_widths(v):
    h = np.empty_like(v)
    h[1:-1] = 0.5 * (v[2:] - v[:-2])
    h[0] = 0.5 * (v[1] - v[0])
    h[-1] = 0.5 * (v[-1] - v[-2])
    return h


def _conjugate(v, phi, slopes, origin_value, chunk=512):
    """Phi*(s) = max_i (s v_i - Phi_i) and the maximizing index (largest v on ties)."""
    vals = np.empty(slopes.size)
    arg = np.empty(slopes.size, dtype=int)
    rv, rp = v[::-1], phi[::-1]
    for i in range(0, slopes.size, chunk):
        s = slopes[i:i + chunk]
        m = s[:, None] * rv[None, :] - rp[None, :]
        j = np.argmax(m, axis=1)
        vals[i:i + chunk] = m[np.arange(s.size), j]
        arg[i:i + chunk] = v.size - 1 - j
    if origin_value is not None:
        zero = slopes == 0.0
        vals[zero] = np.maximum(vals[zero], -origin_value)
    return vals, arg


def _biconjugate(v, slopes, conj, chunk=512):
    out = np.empty(v.size)
    for i in range(0, v.size, chunk):
        m = slopes[None, :] * v[i:i + chunk, None] - conj[None, :]
        out[i:i + chunk] = m.max(axis=1)
    return out


def radial_envelope(g: RadialGrid, slope_interval: Sequence[float] = (0.0, 1.0), *,
                    slope_factor: int = 4, warn: bool = True) -> EnvelopeResult:
    """Largest convex minorant of Phi with slopes restricted to ``slope_interval``.

    The conjugate is taken on a uniform slope grid (``slope_factor`` times the
    v-grid size, endpoints included).  Chord slopes between consecutive active
    vertices are then added until no vertex is missed, which makes the result
    the exact restricted hull of the samples.
    """
    s_lo, s_hi = (float(s) for s in slope_interval)
    if not (np.isfinite(s_lo) and np.isfinite(s_hi)) or s_lo > s_hi:
        raise ValueError(f"slope interval [{s_lo}, {s_hi}] is empty or reversed")
    if g.left_mode == "extends_over_origin" and s_lo < 0.0:
        raise ValueError("negative slopes are inadmissible when the weight extends over the origin")
    v, phi = g.v_values, g.phi_values
    origin = g.phi_at_origin if g.left_mode == "extends_over_origin" else None
    if origin is not None and not np.isfinite(origin):
        origin = None

    slopes = np.unique(np.concatenate([np.linspace(s_lo, s_hi, slope_factor * v.size + 1), [s_lo, s_hi]]))
    conj, arg = _conjugate(v, phi, slopes, origin)
    for _ in range(200):
        verts = np.unique(arg)
        if verts.size < 2:
            break
        chords = (phi[verts[1:]] - phi[verts[:-1]]) / (v[verts[1:]] - v[verts[:-1]])
        chords = chords[(chords > s_lo) & (chords < s_hi)]
        new = np.setdiff1d(chords, slopes)
        if new.size == 0:
            break
        c_conj, c_arg = _conjugate(v, phi, new, origin)
        slopes = np.concatenate([slopes, new])
        conj = np.concatenate([conj, c_conj])
        arg = np.concatenate([arg, c_arg])
        order = np.argsort(slopes)
        slopes, conj, arg = slopes[order], conj[order], arg[order]
        if np.array_equal(np.unique(arg), verts):
            break

    phi_e = np.minimum(_biconjugate(v, slopes, conj), phi)
    d = np.diff(phi_e) / np.diff(v)
    left = slopes[np.argmax(slopes * v[0] - conj >= phi_e[0] - 1e-12 * (1 + abs(phi_e[0])))]
    slope_left = np.concatenate([[left], d])
    # difference quotients of a convex sequence can dip by rounding on affine stretches
    slope_left = np.maximum.accumulate(np.clip(slope_left, s_lo, s_hi))
    ma = np.zeros_like(v)
    h = _dual_widths(v)
    ma[:-1] = np.diff(slope_left) / h[:-1]
    tau = 1e-10 * (1.0 + np.abs(phi))
    contact = (phi - phi_e) <= tau
    boundary = bool(contact[-1] or (g.left_mode == "punctured" and contact[0]))
    if boundary and warn:
        warnings.warn("contact set touches the end of the v grid; extend the grid", RuntimeWarning,
                      stacklevel=2)
    return EnvelopeResult(v, phi, phi_e, slope_left, contact, ma, (s_lo, s_hi), boundary, slopes, conj)


# ---------------------------------------------------------------------------
# weight-level oracles


def default_radial_grid(w: Weight, count: int = 4001, v_min: float = -12.0) -> RadialGrid:
    """Grid on [v_min, ln(growth_radius^2) + 4] for a torus-invariant n = 1 weight."""
    if w.n != 1 or not w.torus_invariant:
        raise ValueError("a radial grid needs a torus-invariant weight with n = 1")
    v_max = 2.0 * math.log(w.growth_radius) + 4.0
    origin = w.value_at_origin()
    mode = "extends_over_origin" if np.isfinite(origin) else "punctured"
    return RadialGrid.from_profile(w.profile, v_min, v_max, count, mode,
                                   origin if np.isfinite(origin) else None)


_ENVELOPES: "weakref.WeakKeyDictionary[Weight, EnvelopeResult]" = weakref.WeakKeyDictionary()


def weight_envelope(w: Weight) -> EnvelopeResult:
    """Cached Lelong-class envelope of a radial weight on its default grid."""
    env = _ENVELOPES.get(w)
    if env is None:
        env = radial_envelope(default_radial_grid(w), (0.0, 1.0))
        _ENVELOPES[w] = env
    return env


def _radial_phi_e(w: Weight, v: np.ndarray) -> np.ndarray:
    env = weight_envelope(w)
    out = np.asarray(env.evaluate(v), dtype=float)
    # inside contact cells the envelope is Phi itself; use the exact profile there
    vv = np.asarray(v, dtype=float)
    idx = np.clip(np.searchsorted(env.v_values, vv) - 1, 0, env.v_values.size - 2)
    in_grid = (vv >= env.v_values[0]) & (vv <= env.v_values[-1])
    cell_contact = env.contact_mask[idx] & env.contact_mask[idx + 1] & in_grid
    if np.any(cell_contact):
        with np.errstate(all="ignore"):
            exact = np.asarray(w.profile(vv), dtype=float)
        out = np.where(cell_contact, np.minimum(out, exact), out)
    return out


def phi_e_point(w: Weight, z, model: Optional[BergmanModel] = None, C: float = 1.0):
    """Equilibrium potential at z.

    Torus-invariant weights use the envelope oracle and return the values.
    Otherwise ``model`` is required and ``(values, budget)`` is returned, with
    values = k^{-1} ln K_k(z, z) and budget = C n ln k / k.
    """
    if w.torus_invariant:
        z = as_points(z, w.n)
        if w.n == 1:
            with np.errstate(divide="ignore"):
                v = np.log(np.abs(z) ** 2)
            out = _radial_phi_e(w, v)
            return out if np.ndim(out) else float(out)
        return toric_envelope_point(w, z)
    if model is None:
        raise ValueError(f"no equilibrium oracle for weight {w.name!r}; supply a BergmanModel")
    vals = log_kernel_potential(model, z)
    return vals, C * model.n * math.log(model.k) / model.k


class _ToricConjugate:
    """Discrete conjugate of a two-variable toric profile over the simplex of slopes."""

    def __init__(self, w: Weight, count: int = 121, slope_steps: int = 100):
        v_max = 2.0 * math.log(w.growth_radius) + 4.0
        axis = np.linspace(-12.0, v_max, count)
        h = axis[1] - axis[0]
        a, b = np.meshgrid(axis, axis, indexing="ij")
        v = np.stack([a.ravel(), b.ravel()], -1)
        phi = np.asarray(w.profile(v), dtype=float)
        # graded slope values, dense near the faces s_i = 0 where Phi* curves most
        g = (np.arange(slope_steps + 1) / slope_steps) ** 2
        a, b = np.meshgrid(g, g, indexing="ij")
        inner = np.stack([a.ravel(), b.ravel()], -1)
        inner = inner[inner.sum(axis=1) <= 1.0]
        edge = np.concatenate([np.stack([g, 1.0 - g], -1), np.stack([1.0 - g, g], -1)])
        self.slopes = np.unique(np.concatenate([inner, edge]), axis=0)
        conj = np.empty(len(self.slopes))
        best = np.empty((len(self.slopes), 2))
        for i in range(0, len(conj), 256):
            m = self.slopes[i:i + 256] @ v.T - phi[None, :]
            j = np.argmax(m, axis=1)
            conj[i:i + 256] = m[np.arange(len(j)), j]
            best[i:i + 256] = v[j]
        # refine each maximizer on two nested 11 x 11 sub-grids
        off = np.stack(np.meshgrid(np.linspace(-1, 1, 11), np.linspace(-1, 1, 11), indexing="ij"), -1).reshape(-1, 2)
        for scale in (h, h / 5.0):
            cand = best[:, None, :] + scale * off[None, :, :]
            vals = np.einsum("sk,sck->sc", self.slopes, cand) - np.asarray(w.profile(cand), dtype=float)
            j = np.argmax(vals, axis=1)
            better = vals[np.arange(len(j)), j] > conj
            conj = np.where(better, vals[np.arange(len(j)), j], conj)
            best = np.where(better[:, None], cand[np.arange(len(j)), j], best)
        origin = w.value_at_origin()
        if np.isfinite(origin):
            zero = ~np.any(self.slopes, axis=1)
            conj[zero] = np.maximum(conj[zero], -origin)
        self.conj = conj

    def value(self, v: np.ndarray) -> np.ndarray:
        out = np.empty(len(v))
        for i in range(0, len(v), 256):
            lines = v[i:i + 256] @ self.slopes.T
            lines -= self.conj[None, :]
            out[i:i + 256] = lines.max(axis=1)
        return out


_TORIC: "weakref.WeakKeyDictionary[Weight, _ToricConjugate]" = weakref.WeakKeyDictionary()


def toric_envelope_point(w: Weight, z) -> np.ndarray:
    """Lelong-class envelope of a torus-invariant weight on C^2 at points z (shape (..., 2)).

    Slopes are sampled on a graded grid; expect errors of order 1e-4.
    """
    if w.n != 2 or not w.torus_invariant:
        raise ValueError("toric_envelope_point needs a torus-invariant weight with n = 2")
    tc = _TORIC.get(w)
    if tc is None:
        tc = _TORIC[w] = _ToricConjugate(w)
    z = as_points(z, 2)
    with np.errstate(divide="ignore"):
        v = np.log(np.abs(z) ** 2).reshape(-1, 2)
    # a vanishing coordinate: a huge finite v keeps 0 * v = 0 for slopes with a zero entry
    v = np.where(np.isneginf(v), -1e200, v)
    out = tc.value(v)
    return out.reshape(z.shape[:-1]) if z.ndim > 1 else float(out[0])


# ---------------------------------------------------------------------------
# coincidence sets and densities


def coincidence_set(w: Weight, phi_e, grid, tau: Optional[float] = None) -> np.ndarray:
    """mask(z) = phi(z) - phi_e(z) <= tau on an array of points.

    ``phi_e`` may be a callable or precomputed values.  The default tolerance
    is 1e-6 (1 + max |phi|), appropriate for an oracle potential.
    """
    pts = as_points(grid, w.n)
    phi = w(pts)
    pe = phi_e(pts) if callable(phi_e) else np.asarray(phi_e, dtype=float)
    if tau is None:
        tau = 1e-6 * (1.0 + float(np.max(np.abs(phi))))
    if tau <= 0:
        raise ValueError("tau must be positive")
    if math.isinf(tau):
        return np.ones(phi.shape, dtype=bool)
    return (phi - pe) <= tau


def log_kernel_contact(m: BergmanModel, grid, C: float = 1.0, density_floor: float = 1e-3):
    """Coincidence estimate from the Bergman model alone.

    A point is kept when (i) phi - k^{-1} ln K_k <= 3 C n ln k / k, (ii) the
    complex Hessian is positive definite there, and (iii) k^{-n} B_k is at least
    half the Monge-Ampere density.  Condition (i) is the rate tolerance; on its
    own it only localises D to a band of width ~ (ln k / k)^{1/2}, so (iii)
    supplies the sharp boundary where k^{-n} B_k crosses the midpoint of its
    jump.  Returns (mask, rho) with rho the Monge-Ampere density on the grid.
    """
    w = m.weight
    pts = as_points(grid, m.n)
    k, n = m.k, m.n
    logb = log_bergman_function(m, pts)
    phi = w(pts)
    gap = -logb / k  # phi - k^{-1} ln K
    rate = gap <= 3.0 * C * n * math.log(k) / k
    rho = ma_density(w, pts)
    smooth = rho > density_floor
    mid = np.exp(logb - n * math.log(k)) >= 0.5 * rho
    return rate & smooth & mid, rho


def equilibrium_density(w: Weight, z) -> np.ndarray:
    """Density of the equilibrium measure: 1_D * det(dd^c phi) / pi^n (radial oracle)."""
    if not w.torus_invariant:
        raise ValueError("the oracle equilibrium density needs a torus-invariant weight")
    pts = as_points(z, w.n)
    mask = coincidence_set(w, lambda p: phi_e_point(w, p), pts, tau=1e-8 * (1.0 + np.abs(w(pts)).max()))
    rho = ma_density(w, pts)
    return np.where(mask, rho, 0.0)


def l1_error(m: BergmanModel, target_density: Callable, rule: Optional[QuadRule] = None,
             radial: Optional[bool] = None) -> float:
    """int |k^{-n} B_k - target| over a rule.

    When both the weight and the target are radial, the integrand is evaluated
    once per orbit (``radial=True``, the default for radial models).
    """
    rule = rule or m.rule
    radial = m.radial_fast_path if radial is None else radial
    if radial:
        pts, wts = rule.orbit_nodes, rule.orbit_weights
    else:
        pts, wts = rule.nodes, rule.weights
    bk = np.exp(log_bergman_function(m, pts) - m.n * math.log(m.k))
    tgt = np.asarray(target_density(pts), dtype=float)
    return fsum_complex(wts * np.abs(bk - tgt)).real


def l1_rule(m: BergmanModel, breaks_t: Sequence[float] = ()) -> QuadRule:
    """The model's default rule with extra panel ends at jumps of the target (in t = |z|^2)."""
    return default_rule(m.weight, m.k, m.basis.exponents, extra_breaks=breaks_t)


@dataclass(frozen=True)
class DecayReport:
    C_fit: float
    violations: int
    threshold: float


def decay_check(m: BergmanModel, phi_e, sample_points, density_sup: Optional[float] = None,
                tau: Optional[float] = None) -> DecayReport:
    """Fit C in k^{-n} B_k(z) <= C exp(-k (phi(z) - phi_e(z))) over sample points.

    A point violates when its own required C exceeds 10 * sup over D of the
    Monge-Ampere density.  The sup is estimated on the samples that lie in D
    unless ``density_sup`` is given.
    """
    w = m.weight
    pts = as_points(sample_points, m.n)
    phi = w(pts)
    pe = phi_e(pts) if callable(phi_e) else np.asarray(phi_e, dtype=float)
    gap = phi - pe
    logc = log_bergman_function(m, pts) - m.n * math.log(m.k) + m.k * gap
    if density_sup is None:
        tau = 1e-6 * (1.0 + float(np.max(np.abs(phi)))) if tau is None else tau
        in_d = gap <= tau
        if not np.any(in_d):
            raise ValueError("no sample point lies in the coincidence set")
        density_sup = float(np.max(ma_density(w, pts[in_d])))
    threshold = 10.0 * density_sup
    req = np.exp(logc)
    return DecayReport(float(np.max(req)), int(np.sum(req > threshold)), threshold)


@dataclass(frozen=True)
class DominationReport:
    ratio: float
    sup_all: float
    sup_d: float

    @property
    def passed(self) -> bool:
        return self.ratio <= 1.0 + 1e-3


def domination_check(m: BergmanModel, coeffs, grid, mask_D, phi_e: Optional[Callable] = None,
                     polish: bool = True) -> DominationReport:
    """max_grid |f|^2 e^{-k phi_e} / max_{D} |f|^2 e^{-k phi} for f = sum c_i psi_i.

    Both maxima are located on the grid and then refined by a local search
    (the denominator constrained to D via the mask's defining potential).
    """
    w = m.weight
    pts = as_points(grid, m.n).reshape(-1) if m.n == 1 else as_points(grid, m.n).reshape(-1, m.n)
    mask = np.asarray(mask_D, dtype=bool).reshape(-1)
    if not np.any(mask):
        raise ValueError("mask_D is empty")
    if phi_e is None:
        phi_e = lambda p: phi_e_point(w, p)  # noqa: E731
    c = np.asarray(coeffs, dtype=complex).reshape(m.dim)
    k = m.k

    def log_f2w(p):
        vec, shift, _ = m.weighted_vectors(p)
        with np.errstate(divide="ignore"):
            return 2.0 * shift + np.log(np.abs(vec @ c) ** 2)

    def log_num(p):
        p = as_points(p, m.n)
        return log_f2w(p) + k * (w(p).reshape(-1) - np.asarray(phi_e(p), dtype=float).reshape(-1))

    ln = log_num(pts)
    ld = log_f2w(pts)
    num, den = float(np.max(ln)), float(np.max(ld[mask]))
    if polish and m.n == 1:
        tau = 1e-9

        def to_pt(x):
            return np.array([complex(x[0], x[1])])

        def in_d(p):
            return float(w(p)[0] - np.asarray(phi_e(p), dtype=float).reshape(-1)[0]) <= tau

        z0 = pts[int(np.argmax(ln))]
        r = minimize(lambda x: -float(log_num(to_pt(x))[0]), [z0.real, z0.imag], method="Nelder-Mead",
                     options=dict(xatol=1e-9, fatol=1e-12))
        num = max(num, -float(r.fun))
        z1 = pts[mask][int(np.argmax(ld[mask]))]

        def obj(x):
            p = to_pt(x)
            return -float(log_f2w(p)[0]) if in_d(p) else np.inf

        r = minimize(obj, [z1.real, z1.imag], method="Nelder-Mead", options=dict(xatol=1e-9, fatol=1e-12))
        if np.isfinite(r.fun):
            den = max(den, -float(r.fun))
    return DominationReport(float(np.exp(num - den)), float(np.exp(num)), float(np.exp(den)))


# ---------------------------------------------------------------------------
# off-diagonal mass


def _offdiag_radial(m: BergmanModel, eta: float, n_radial: Optional[int] = None,
                    n_angular: Optional[int] = None) -> float:
    """Radial models: for z = r > 0 and w = rho e^{i theta},
    K(z, w) = sum_j (r rho)^{a_j} e^{-i a_j theta} / s_j^2, so each (r, rho) pair
    needs one FFT over the exponents.  One z per rotation orbit suffices.
    """
    k = m.k
    exps = m.basis.exponents[:, 0]
    lo = int(exps.min())
    span = int(exps.max()) - lo
    R = m.rule.truncation_radius
    r0 = m.rule.inner_radius
    q = n_radial or int(min(768, max(256, math.ceil(20.0 * math.sqrt(k) * R))))
    panels = max(1, q // 32)
    t_edges = np.linspace(r0 ** 2, R ** 2, panels + 1)
    rule = polar_rule(R, 32, 16, inner_radius=r0, breaks=list(t_edges[1:-1]))
    # enough angles for |K|^2 to be integrated exactly, and many more to resolve the cut |z - w| = eta
    M = max(2 * (span + 1) + 2, n_angular or (1024 if eta > 0 else 0))
    t, wr = rule.radial_t, rule.radial_w
    r = np.sqrt(t)
    phi = np.asarray(m.weight.eval(r.astype(complex)), dtype=float)
    theta = 2.0 * np.pi * np.arange(M) / M
    logs2 = 2.0 * m.log_scaling
    lr = np.log(r)
    total = []
    for i in range(r.size):
        # log |coefficient| of e^{-i (a_j - lo) theta}, for every rho at once
        la = (exps[None, :] * (lr[i] + lr[:, None]) - logs2[None, :]
              - 0.5 * k * (phi[i] + phi[:, None]))
        coef = np.zeros((r.size, M))
        coef[:, exps - lo] = np.exp(la)
        g = np.fft.fft(coef, axis=1)  # sum_j c_j e^{-2 pi i j m / M}
        val = np.abs(g) ** 2
        if eta > 0:
            dist2 = r[i] ** 2 + t[:, None] - 2.0 * r[i] * r[:, None] * np.cos(theta)[None, :]
            val = np.where(dist2 > eta * eta, val, 0.0)
        total.append(wr[i] * math.fsum(wr * val.sum(axis=1) / M))
    return math.fsum(total) / k


def offdiag_mass(m: BergmanModel, eta: float, rule: Optional[QuadRule] = None, chunk: int = 64) -> float:
    """k^{-n} iint_{|z-w|>eta} |K_k(z,w)|^2 e^{-k phi(z) - k phi(w)} over a product rule.

    Radial one-variable models use an exact angular reduction (see
    ``_offdiag_radial``); other models sum over the full product of ``rule``
    (by default a coarse version of the model's rule) in chunks.
    """
    if not eta >= 0:
        raise ValueError("eta must be non-negative")
    if rule is None and m.radial_fast_path and m.n == 1:
        return _offdiag_radial(m, eta)
    if rule is None:
        k = m.k
        rule = default_rule(m.weight, k, m.basis.exponents, panel_width=2.0,
                            nodes_per_panel=max(24, k // 3 + 8), n_angular=2 * m.basis.max_degree + 4)
    nodes, wts = rule.nodes, rule.weights
    uw, sw, _ = m.weighted_vectors(nodes)
    uw = (uw * np.exp(sw)[:, None]).conj()
    uz = uw.conj()
    parts = []
    for i in range(0, len(nodes), chunk):
        g = uz[i:i + chunk] @ uw.T  # weighted kernel values, (chunk, N)
        val = np.abs(g) ** 2
        if eta > 0:
            if m.n == 1:
                dist = np.abs(nodes[i:i + chunk, None] - nodes[None, :])
            else:
                dist = np.sqrt(np.sum(np.abs(nodes[i:i + chunk, None, :] - nodes[None, :, :]) ** 2, axis=-1))
            val = np.where(dist > eta, val, 0.0)
        parts.append(wts[i:i + chunk] * (val @ wts))
    return math.fsum(np.concatenate(parts)) / m.k ** m.n


# ---------------------------------------------------------------------------
# asymptotic expansion and growth exponents


@dataclass(frozen=True)
class ExpansionReport:
    ks: Tuple[int, int, int]
    values: Tuple[float, float, float]
    c0: float
    slope: float
    ma_density: float


def expansion_probe(models: Sequence[BergmanModel], z, mask_check: bool = True) -> ExpansionReport:
    """Richardson analysis of k^{-n} B_k(z) on models at k, 2k, 4k.

    c0 eliminates the k^{-1} and k^{-2} terms; slope is log2 of the ratio of
    successive differences, i.e. the observed order of the first correction.
    """
    if len(models) != 3:
        raise ValueError("expansion_probe needs models at k, 2k and 4k")
    ks = tuple(mm.k for mm in models)
    if not (ks[1] == 2 * ks[0] and ks[2] == 2 * ks[1]):
        raise ValueError(f"model orders must be k, 2k, 4k; got {ks}")
    w = models[0].weight
    pts = as_points(z, w.n)
    rho = float(np.asarray(ma_density(w, pts)).reshape(-1)[0])
    if mask_check:
        if w.torus_invariant:
            gap = float(w(pts).reshape(-1)[0] - np.asarray(phi_e_point(w, pts)).reshape(-1)[0])
            inside = gap <= 1e-8 and rho > 0
        else:
            mask, _ = log_kernel_contact(models[-1], pts)
            inside = bool(np.asarray(mask).reshape(-1)[0])
        if not inside:
            raise ValueError("z is not interior to the coincidence set where the Hessian is positive")
    y = [float(np.asarray(bergman_function(mm, pts)).reshape(-1)[0]) / mm.k ** mm.n for mm in models]
    r1a = 2.0 * y[1] - y[0]
    r1b = 2.0 * y[2] - y[1]
    c0 = (4.0 * r1b - r1a) / 3.0
    d1, d2 = abs(y[1] - y[0]), abs(y[2] - y[1])
    slope = math.log2(d2 / d1) if d1 > 0 and d2 > 0 else (-math.inf if d1 > 0 else math.nan)
    return ExpansionReport(ks, tuple(y), c0, slope, rho)


def growth_exponent(models: Sequence[BergmanModel], z=0.0) -> float:
    """Least-squares slope of ln B_k(z) against ln k."""
    ks = np.array([mm.k for mm in models], dtype=float)
    lb = np.array([float(np.asarray(log_bergman_function(mm, z)).reshape(-1)[0]) for mm in models])
    return float(np.polyfit(np.log(ks), lb, 1)[0])
