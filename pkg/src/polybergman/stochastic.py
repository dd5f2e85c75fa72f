"""Determinantal eigenvalue ensembles and zeros of Gaussian random polynomials (n = 1).

Randomness comes from Philox streams keyed by (seed, batch, step), so every
batch can be regenerated on its own and in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import companion, eigvals, matrix_balance
from scipy.special import softmax

from .bergman import BergmanModel, log_bergman_function, log_kernel_potential, monomial_coefficients

__all__ = [
    "SampleBatch",
    "SamplingError",
    "rng_for",
    "sample_dpp",
    "sample_zeros",
    "empirical_discrepancy",
    "bergman_radial_cdf",
    "zeros_radial_cdf",
    "zero_intensity",
]

MIN_ACCEPTANCE = 1e-4


class SamplingError(RuntimeError):
    """Raised when the rejection envelope is invalid or accepts too rarely."""


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray
    seed: int
    kind: str  # "dpp_eigenvalues" or "polynomial_zeros"
    k: int
    batch: int = 0
    redraws: int = 0
    discarded: int = 0


def rng_for(seed: int, batch: int, step: int) -> np.random.Generator:
    """Independent counter-based stream for one draw of one batch."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(batch, step))))


def _require_1d(m: BergmanModel):
    if m.n != 1:
        raise ValueError("sampling is implemented for n = 1 only")


def _bmax_bound(m: BergmanModel, R: float) -> float:
    """Upper bound for B_k on the disc |z| <= R, from a fine scan with 10% headroom."""
    r = np.linspace(0.0, R, 2001)
    if m.radial_fast_path:
        pts = r.astype(complex)
    else:
        theta = np.linspace(0.0, 2.0 * np.pi, 181)[:-1]
        pts = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    return 1.1 * float(np.exp(np.max(log_bergman_function(m, pts))))


def _weighted_u(m: BergmanModel, z):
    vec, shift, _ = m.weighted_vectors(z)
    return vec * np.exp(shift)[:, None]


def sample_dpp(m: BergmanModel, seed: int, batch: int = 0, block: int = 256) -> SampleBatch:
    """Exact draw from the projection process with kernel K_k(z,w) e^{-k phi(z)/2 - k phi(w)/2}.

    Points are added one at a time.  Given the current points, the next one
    has density ||(I - QQ^H) u(z)||^2 / (dim - j) where u(z) is the weighted
    orthonormal basis vector and Q spans u at the chosen points; it is drawn
    by rejection from the uniform law on the truncation disc, using
    ||(I - QQ^H) u||^2 <= B_k <= Bmax.
    """
    _require_1d(m)
    R = m.rule.truncation_radius
    bmax = _bmax_bound(m, R)
    dim = m.dim
    Q = np.zeros((dim, 0), dtype=complex)
    pts = []
    for step in range(dim):
        rng = rng_for(seed, batch, step)
        attempts = 0
        while True:
            r = R * np.sqrt(rng.uniform(size=block))
            z = r * np.exp(2j * np.pi * rng.uniform(size=block))
            u = _weighted_u(m, z)
            full = np.sum(np.abs(u) ** 2, axis=1)
            if np.any(full > bmax):
                raise SamplingError(f"B_k exceeds the rejection bound {bmax:.6g}; envelope misconfigured")
            resid = u - (u @ Q.conj()) @ Q.T
            dens = np.sum(np.abs(resid) ** 2, axis=1)
            acc = rng.uniform(size=block) * bmax < dens
            hit = np.nonzero(acc)[0]
            if hit.size:
                i = int(hit[0])
                attempts += i + 1
                break
            attempts += block
            if attempts >= 10.0 / MIN_ACCEPTANCE:
                raise SamplingError(f"acceptance rate below {MIN_ACCEPTANCE:g} at step {step}")
        pts.append(z[i])
        q = resid[i]
        # second Gram-Schmidt pass keeps Q orthonormal to working precision
        q = q - Q @ (Q.conj().T @ q)
        Q = np.concatenate([Q, (q / np.linalg.norm(q))[:, None]], axis=1)
    return SampleBatch(np.array(pts), int(seed), "dpp_eigenvalues", m.k, batch)


def _roots(a: np.ndarray) -> np.ndarray:
    """Roots of sum_j a_j z^j (a_0 first) via a balanced companion matrix."""
    c = companion(a[::-1])
    with np.errstate(invalid="ignore"):  # the unused permutation output triggers a cast warning
        bal, _ = matrix_balance(c, permute=False)
    return eigvals(bal)


def sample_zeros(m: BergmanModel, seed: int, batch: int = 0, max_redraws: int = 100) -> SampleBatch:
    """Zeros of f = sum c_i psi_i with c_i i.i.d. standard complex Gaussian.

    Draws whose top monomial coefficient is below 1e-14 of the largest are
    redrawn (and counted); roots beyond ten truncation radii are discarded.
    """
    _require_1d(m)
    exps = m.basis.exponents[:, 0]
    lo, hi = int(exps.min()), int(exps.max())
    redraws = 0
    for attempt in range(max_redraws + 1):
        rng = rng_for(seed, batch, attempt)
        c = (rng.standard_normal(m.dim) + 1j * rng.standard_normal(m.dim)) / math.sqrt(2.0)
        a_basis = monomial_coefficients(m, c)
        a = np.zeros(hi - lo + 1, dtype=complex)
        np.add.at(a, exps - lo, a_basis)
        if abs(a[-1]) >= 1e-14 * np.max(np.abs(a)) and hi > lo:
            break
        redraws += 1
    else:
        raise SamplingError("degenerate top coefficient in every draw")
    roots = _roots(a)
    roots = roots[np.isfinite(roots)]
    far = np.abs(roots) > 10.0 * m.rule.truncation_radius
    return SampleBatch(np.sort_complex(roots[~far]), int(seed), "polynomial_zeros", m.k, batch,
                       redraws, int(np.sum(far)))


# ---------------------------------------------------------------------------
# radial intensities


def _radial_table(m: BergmanModel, f: Callable, intervals: int = 2000, q: int = 8):
    """Cumulative integral of a radial density over t = |z|^2 on [0, R^2]."""
    R2 = m.rule.truncation_radius ** 2
    t0 = m.rule.inner_radius ** 2
    edges = np.linspace(t0, R2, intervals + 1)
    x, wq = leggauss(q)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    vals = np.pi * f(np.sqrt(t).astype(complex)) * np.repeat(half, q) * np.tile(wq, intervals)
    cum = np.concatenate([[0.0], np.cumsum(vals.reshape(intervals, q).sum(axis=1))])
    return edges, cum


def bergman_radial_cdf(m: BergmanModel) -> Callable:
    """r -> int_{|z| <= r} B_k dlambda / dim, for radial models."""
    if not m.radial_fast_path or m.n != 1:
        raise ValueError("bergman_radial_cdf needs a radial one-variable model")
    edges, cum = _radial_table(m, lambda z: np.exp(log_bergman_function(m, z)))
    cum = cum / cum[-1]

    def cdf(r):
        return np.interp(np.asarray(r, dtype=float) ** 2, edges, cum, left=0.0, right=1.0)

    return cdf


def zeros_radial_cdf(m: BergmanModel) -> Callable:
    """Normalized radial CDF of dd^c ln K_k for radial models.

    With p_j proportional to t^j / s_j^2 the mass of dd^c ln K_k in
    {|z|^2 <= t} equals the mean of j under p, so the CDF is
    (E_p[j] - j_min) / (j_max - j_min).
    """
    if not m.radial_fast_path or m.n != 1:
        raise ValueError("zeros_radial_cdf needs a radial one-variable model")
    j = m.basis.exponents[:, 0].astype(float)
    span = j.max() - j.min()
    if span <= 0:
        raise ValueError("a single monomial has no zeros away from the origin")
    logs2 = 2.0 * m.log_scaling

    def cdf(r):
        r = np.asarray(r, dtype=float)
        flat = r.reshape(-1)
        out = np.empty_like(flat)
        for i, rr in enumerate(flat):
            if rr <= 0:
                out[i] = 0.0
                continue
            p = softmax(j * math.log(rr * rr) - logs2)
            out[i] = (float(p @ j) - j.min()) / span
        return out.reshape(r.shape) if r.ndim else float(out[0])

    return cdf


def zero_intensity(m: BergmanModel, z, h: float = 1e-4) -> np.ndarray:
    """Expected zero density (1/pi) d^2 ln K / dz dzbar, by a five-point Laplacian."""
    z = np.asarray(z, dtype=complex)
    k = m.k
    f = lambda p: k * np.asarray(log_kernel_potential(m, p), dtype=float)  # noqa: E731
    lap = (f(z + h) + f(z - h) + f(z + 1j * h) + f(z - 1j * h) - 4.0 * f(z)) / h ** 2
    return lap / (4.0 * np.pi)


def empirical_discrepancy(batches: Sequence[SampleBatch], cdf: Callable,
                          bins: Union[int, np.ndarray] = 200, min_points: int = 1000) -> float:
    """sup over radial bin edges of |empirical CDF - cdf| for the pooled points."""
    if not batches:
        raise ValueError("no batches")
    r = np.sort(np.concatenate([np.abs(b.points) for b in batches]))
    if r.size == 0:
        raise ValueError("batches contain no points")
    if r.size < min_points:
        raise ValueError(f"need at least {min_points} points, got {r.size}")
    edges = np.linspace(0.0, r[-1], bins + 1) if np.isscalar(bins) else np.asarray(bins, dtype=float)
    emp = np.searchsorted(r, edges, side="right") / r.size
    ref = np.asarray(cdf(edges), dtype=float)
    return float(np.max(np.abs(emp - ref)))
