"""Truncated cubature on C^n for integrands of the form |poly|^2 exp(-k phi).

The radial variable is t = r^2, so that dA = (1/2) dt dtheta and weighted
monomial moments become smooth one-dimensional integrals.  Angles use the
uniform trapezoid rule.  For n = 2 the rule is the tensor product of two
polar rules (a cubature on a polydisc).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .weights import Weight

__all__ = [
    "QuadRule",
    "polar_rule",
    "truncation_radius",
    "default_rule",
    "integrate",
    "fsum_complex",
]


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Positive cubature rule on a disc/annulus (n = 1) or polydisc (n = 2).

    The rule is stored in factored form: per-coordinate radial nodes ``radial_t``
    (in t = r^2) with weights ``radial_w`` that already include the full angular
    integral, and ``n_angular`` equispaced angles.  ``nodes``/``weights`` expand
    the tensor product on first access.
    """

    radial_t: np.ndarray
    radial_w: np.ndarray
    n_angular: int
    truncation_radius: float
    degree_capacity: int
    n: int = 1
    inner_radius: float = 0.0

    @cached_property
    def _circle(self):
        theta = 2.0 * np.pi * np.arange(self.n_angular) / self.n_angular
        pts = (np.sqrt(self.radial_t)[:, None] * np.exp(1j * theta)[None, :]).ravel()
        wts = np.repeat(self.radial_w / self.n_angular, self.n_angular)
        return pts, wts

    @cached_property
    def nodes(self) -> np.ndarray:
        pts, _ = self._circle
        if self.n == 1:
            return pts
        a, b = np.meshgrid(pts, pts, indexing="ij")
        return np.stack([a.ravel(), b.ravel()], axis=-1)

    @cached_property
    def weights(self) -> np.ndarray:
        _, wts = self._circle
        if self.n == 1:
            return wts
        return np.outer(wts, wts).ravel()

    @cached_property
    def orbit_nodes(self) -> np.ndarray:
        """One representative (real, non-negative coordinates) per torus orbit."""
        r = np.sqrt(self.radial_t).astype(complex)
        if self.n == 1:
            return r
        a, b = np.meshgrid(r, r, indexing="ij")
        return np.stack([a.ravel(), b.ravel()], axis=-1)

    @cached_property
    def orbit_weights(self) -> np.ndarray:
        """Weights for torus-invariant integrands evaluated at ``orbit_nodes``."""
        if self.n == 1:
            return self.radial_w
        return np.outer(self.radial_w, self.radial_w).ravel()

    @property
    def size(self) -> int:
        return (self.radial_t.size * self.n_angular) ** self.n


def _gl_panels(breaks: Sequence[float], q: int):
    x, w = leggauss(q)
    ts, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (b - a)
        ts.append(half * x + 0.5 * (a + b))
        ws.append(half * w)
    return np.concatenate(ts), np.concatenate(ws)


def polar_rule(R: float, n_radial: int, n_angular: int, *, n: int = 1,
               inner_radius: float = 0.0, breaks: Optional[Sequence[float]] = None) -> QuadRule:
    """Gauss-Legendre in t = r^2 on [inner_radius^2, R^2] times the trapezoid rule in angle.

    ``breaks`` are optional interior breakpoints in t; each panel gets
    ``n_radial`` Gauss nodes.
    """
    if n_radial < 8 or n_angular < 8:
        raise ValueError("polar_rule needs n_radial >= 8 and n_angular >= 8")
    if not 0.0 <= inner_radius < R:
        raise ValueError("need 0 <= inner_radius < R")
    t_lo, t_hi = inner_radius ** 2, R ** 2
    inner = sorted(b for b in (breaks or ()) if t_lo < b < t_hi)
    t, w = _gl_panels([t_lo, *inner, t_hi], int(n_radial))
    return QuadRule(
        radial_t=t,
        radial_w=np.pi * w,
        n_angular=int(n_angular),
        truncation_radius=float(R),
        degree_capacity=int(min(2 * n_radial - 2, n_angular // 2 - 1)),
        n=n,
        inner_radius=float(inner_radius),
    )


def _direction_samples(n: int, count: int = 48, torus_invariant: bool = False):
    """Unit-modulus directions used to bound phi from below on spheres."""
    if torus_invariant and n == 2:
        rho = np.linspace(0.0, 1.0, 9)
        ones = np.ones_like(rho)
        return np.concatenate([np.stack([ones, rho], -1), np.stack([rho, ones], -1)]).astype(complex)
    theta = 2.0 * np.pi * (np.arange(count) + 0.5) / count
    if n == 1:
        return np.exp(1j * theta)
    # points on the polydisc face |z_1| = 1 (and its mirror) with |z_2| <= 1
    rho = np.linspace(0.0, 1.0, 7)
    th1, th2, rr = np.meshgrid(theta[::4], theta[::4], rho, indexing="ij")
    a = np.exp(1j * th1).ravel()
    b = (rr * np.exp(1j * th2)).ravel()
    return np.concatenate([np.stack([a, b], -1), np.stack([b, a], -1)])


def _phi_lower(w: Weight, radii: np.ndarray) -> np.ndarray:
    """min of phi over the sampled sphere (n = 1: circle) of each radius."""
    if w.n == 1 and w.torus_invariant:
        with np.errstate(all="ignore"):
            return w.profile(2.0 * np.log(radii))
    u = _direction_samples(w.n, torus_invariant=w.torus_invariant)
    if w.n == 1:
        pts = radii[:, None] * u[None, :]
    else:
        pts = radii[:, None, None] * u[None, :, :]
    with np.errstate(all="ignore"):
        vals = np.asarray(w.eval(pts), dtype=float)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    return vals.min(axis=1)


def truncation_radius(w: Weight, k: int, max_degree: int, tol: float) -> float:
    """Smallest R >= max(1, growth_radius) with 2 d ln R - k phi(R u) <= ln tol beyond R.

    The condition is checked for all sampled directions u, on a logarithmic
    grid up to R = 1e3, and the crossing is located by bisection.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    r0 = max(1.0, w.growth_radius)
    log_tol = math.log(tol)

    def excess(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return 2.0 * max_degree * np.log(r) - k * _phi_lower(w, r) - log_tol

    grid = np.geomspace(r0, 1e3, 4001)
    ex = excess(grid)
    bad = np.nonzero(ex > 0)[0]
    if bad.size == 0:
        return float(r0)
    last = bad[-1]
    if last == grid.size - 1:
        raise ValueError(
            f"tail bound never satisfied below R = 1e3 for k={k}, degree={max_degree}: "
            "the weight grows too slowly"
        )
    lo, hi = grid[last], grid[last + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if excess(mid)[0] > 0:
            lo = mid
        else:
            hi = mid
    return float(hi)


def _log_extent(w: Weight, k: int, exps: np.ndarray, rel_tol: float):
    """Range [v_lo, v_hi] of v = ln r^2 outside which every weighted moment tail is negligible.

    ``exps`` are the exponent sums that can appear on a coordinate face (total
    degree for n = 1 monomials).  Each integrand exp((j+1) v - k Phi(v)) is
    compared with its own peak, so the criterion is relative per moment.
    """
    v = np.linspace(-90.0, 25.0, 11501)
    phi = _phi_lower(w, np.exp(0.5 * v))
    phi = np.where(np.isnan(phi), np.inf, phi)
    js = np.unique(exps).astype(float)
    g = (js[:, None] + w.n) * v[None, :] - k * phi[None, :]
    peak = np.max(g, axis=1, keepdims=True)
    if not np.all(np.isfinite(peak)):
        raise ValueError("weighted moments are not finite for this weight")
    ok = np.all(g - peak <= math.log(rel_tol), axis=0)
    # beyond v_hi (and below v_lo) every point must be negligible
    tail_ok_hi = np.flip(np.logical_and.accumulate(np.flip(ok)))
    tail_ok_lo = np.logical_and.accumulate(ok)
    if not tail_ok_hi[-1]:
        raise ValueError(f"weight {w.name!r} does not decay fast enough for k={k}")
    i_hi = int(np.argmax(tail_ok_hi))
    v_hi = v[i_hi]
    v_lo = v[np.nonzero(tail_ok_lo)[0][-1]] if tail_ok_lo[0] else None
    v_peak_min = float(v[np.argmax(g, axis=1)].min())
    return v_lo, v_hi, v_peak_min


def default_rule(w: Weight, k: int, exponents: Optional[np.ndarray] = None, *,
                 rel_tol: float = 1e-17, nodes_per_panel: Optional[int] = None,
                 n_angular: Optional[int] = None, panel_width: float = 1.0,
                 extra_breaks: Sequence[float] = ()) -> QuadRule:
    """Composite polar rule adapted to exp(-k phi) and the exponents of a basis.

    Panels are uniform in v = ln t so that every moment, whatever its peak
    location, is resolved by a few panels; ``extra_breaks`` (in t) can align
    panel ends with known discontinuities of an integrand.
    """
    if exponents is None:
        exponents = np.arange(k).reshape(-1, 1) if w.n == 1 else None
        if exponents is None:
            raise ValueError("exponents are required for n > 1")
    exponents = np.asarray(exponents).reshape(len(exponents), -1)
    sums = exponents.sum(axis=1)
    max_deg = int(np.abs(exponents).max()) if w.n == 1 else int(np.abs(sums).max())
    faces = exponents.ravel() if w.n == 1 else sums
    v_lo, v_hi, v_peak = _log_extent(w, k, faces, rel_tol)
    origin_ok = exponents.min() >= 0 and np.isfinite(w.value_at_origin())
    q = nodes_per_panel or max(max_deg + 1, 24)
    n_ang = n_angular or max(16, 4 * max_deg + 2)
    R = math.exp(0.5 * v_hi)
    if origin_ok:
        v_start = max(min(v_peak - 8.0, v_hi - 1.0), -80.0)
        inner = 0.0
    else:
        if v_lo is None:
            raise ValueError("weighted moments do not decay toward the origin; no inner radius exists")
        v_start = v_lo
        inner = math.exp(0.5 * v_lo)
    panels = max(1, int(math.ceil((v_hi - v_start) / panel_width)))
    vb = np.linspace(v_start, v_hi, panels + 1)
    breaks = list(np.exp(vb[:-1] if origin_ok else vb[1:-1])) + [b for b in extra_breaks]
    return polar_rule(R, q, n_ang, n=w.n, inner_radius=inner, breaks=breaks)


def fsum_complex(values) -> complex:
    """Correctly rounded sum of complex values (independent of summation order)."""
    values = np.asarray(values).ravel()
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return complex(math.fsum(values), 0.0)


def integrate(rule: QuadRule, f: Callable[[np.ndarray], np.ndarray]) -> complex:
    """sum_i w_i f(node_i) with error-free (fsum) accumulation."""
    vals = np.asarray(f(rule.nodes))
    vals = np.broadcast_to(vals, rule.weights.shape)
    bad = np.nonzero(~np.isfinite(vals))[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"integrand is not finite at node {i} ({rule.nodes[i]!r})")
    return fsum_complex(rule.weights * vals)
