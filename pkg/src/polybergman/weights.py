"""Weight functions on C^n and their pointwise Monge-Ampere densities.

Points are complex arrays: shape ``(...,)`` when ``n == 1`` and ``(..., n)``
otherwise.  All callables stored on a :class:`Weight` are vectorized over the
leading axes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "Weight",
    "GrowthReport",
    "make_builtin",
    "validate_growth",
    "ma_density",
    "complex_hessian_fd",
    "as_points",
    "BUILTIN_FAMILIES",
]

BUILTIN_FAMILIES = ("gaussian", "annulus", "hoelder", "toric-quadratic", "perturbed-gaussian")


def as_points(z, n: int) -> np.ndarray:
    """Coerce ``z`` to a complex array following the point convention for ``n``."""
    z = np.asarray(z, dtype=complex)
    if n > 1 and (z.ndim == 0 or z.shape[-1] != n):
        raise ValueError(f"points in C^{n} need a trailing axis of length {n}, got shape {z.shape}")
    return z


def _sq_norm(z, n):
    return np.abs(z) ** 2 if n == 1 else np.sum(np.abs(z) ** 2, axis=-1)


@dataclass(frozen=True, eq=False)
class Weight:
    """A weight function phi together with whatever analytic data is known about it.

    ``radial_profile`` is Phi with phi(z) = Phi(ln|z|^2) (n = 1) and
    ``toric_profile`` is Phi(v) with v_i = ln|z_i|^2.  ``complex_hessian``
    returns the matrix of d^2 phi / dz_i dzbar_j with shape ``(..., n, n)``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    n: int = 1
    gradient: Optional[Callable] = None
    complex_hessian: Optional[Callable] = None
    growth_epsilon: float = 0.5
    growth_radius: float = 1.0
    radial_profile: Optional[Callable] = None
    toric_profile: Optional[Callable] = None
    smoothness: str = "C_infinity"
    hoelder_delta: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only n = 1 and n = 2 are supported")
        if self.growth_epsilon <= 0 or self.growth_radius <= 0:
            raise ValueError("growth_epsilon and growth_radius must be positive")
        if self.smoothness not in ("C_infinity", "C_1_1", "Hoelder"):
            raise ValueError(f"unknown smoothness class {self.smoothness!r}")

    def __call__(self, z):
        return np.asarray(self.eval(as_points(z, self.n)), dtype=float)

    @property
    def torus_invariant(self) -> bool:
        """True when phi depends only on (|z_1|, ..., |z_n|)."""
        if self.n == 1:
            return self.radial_profile is not None or self.toric_profile is not None
        return self.toric_profile is not None

    def profile(self, v):
        """Phi(v) in logarithmic coordinates v_i = ln|z_i|^2."""
        v = np.asarray(v, dtype=float)
        if self.n == 1 and self.radial_profile is not None:
            return np.asarray(self.radial_profile(v), dtype=float)
        if self.toric_profile is not None:
            return np.asarray(self.toric_profile(v), dtype=float)
        raise ValueError(f"weight {self.name!r} is not torus invariant")

    def value_at_origin(self) -> float:
        """phi(0), or +inf when the weight blows up (or is undefined) at the origin."""
        with np.errstate(all="ignore"):
            val = float(self(np.zeros(self.n) if self.n > 1 else 0.0))
        return val if np.isfinite(val) else np.inf

    def gauge(self, a: complex = 0.0, b: Optional[Sequence[complex]] = None) -> "Weight":
        """Return phi - 2 Re(a + sum b_i z_i).

        The subtracted term is pluriharmonic, so the complex Hessian is carried
        over unchanged.
        """
        b = np.zeros(self.n, dtype=complex) if b is None else np.asarray(b, dtype=complex).reshape(self.n)
        a = complex(a)
        base = self.eval
        n = self.n

        def shifted(z):
            z = as_points(z, n)
            lin = a + (b[0] * z if n == 1 else z @ b)
            return base(z) - 2.0 * np.real(lin)

        keep_profile = not np.any(b)
        shift = 2.0 * a.real
        radial = toric = None
        if keep_profile and self.radial_profile is not None:
            rp = self.radial_profile
            radial = lambda v: rp(v) - shift  # noqa: E731
        if keep_profile and self.toric_profile is not None:
            tp = self.toric_profile
            toric = lambda v: tp(v) - shift  # noqa: E731
        return dataclasses.replace(
            self,
            eval=shifted,
            gradient=None,
            radial_profile=radial,
            toric_profile=toric,
            name=f"{self.name}-gauged",
        )


# ---------------------------------------------------------------------------
# builtin families


def _gaussian(n):
    def ev(z):
        return _sq_norm(z, n)

    def grad(z):
        z = np.asarray(z, dtype=complex)
        parts = np.stack([2 * z.real, 2 * z.imag], axis=-1)
        return parts if n == 1 else parts.reshape(z.shape[:-1] + (2 * n,))

    def hess(z):
        shape = np.shape(z) if n == 1 else np.shape(z)[:-1]
        return np.broadcast_to(np.eye(n, dtype=complex), shape + (n, n)).copy()

    kwargs = dict(eval=ev, n=n, gradient=grad, complex_hessian=hess, growth_epsilon=0.5,
                  growth_radius=1.0, name="gaussian")
    if n == 1:
        kwargs["radial_profile"] = np.exp
    kwargs["toric_profile"] = (lambda v: np.exp(v)) if n == 1 else (lambda v: np.sum(np.exp(v), axis=-1))
    return Weight(**kwargs)


def _annulus():
    def ev(z):
        return (np.abs(z) ** 2 - 1.0) ** 2

    def hess(z):
        t = np.abs(np.asarray(z)) ** 2
        return (4.0 * t - 2.0)[..., None, None].astype(complex)

    return Weight(eval=ev, n=1, complex_hessian=hess, growth_epsilon=1.0, growth_radius=2.0,
                  radial_profile=lambda v: np.expm1(v) ** 2, name="annulus")


def _hoelder(delta):
    if not 0.0 < delta <= 1.0:
        raise ValueError("hoelder exponent delta must lie in (0, 1]")
    p = 1.0 - delta / 2.0

    def ev(z):
        return np.abs(z) ** (2.0 - delta)

    def hess(z):
        t = np.abs(np.asarray(z)) ** 2
        with np.errstate(divide="ignore"):
            h = p * p * t ** (-delta / 2.0)
        return h[..., None, None].astype(complex)

    return Weight(eval=ev, n=1, complex_hessian=hess, growth_epsilon=0.5, growth_radius=8.0,
                  radial_profile=lambda v: np.exp(p * v), smoothness="Hoelder",
                  hoelder_delta=delta, name="hoelder")


def _toric_quadratic(n):
    def ev(z):
        with np.errstate(divide="ignore"):
            v = np.log(np.abs(z) ** 2)
        return 0.5 * (v ** 2 if n == 1 else np.sum(v ** 2, axis=-1))

    def hess(z):
        t = np.abs(np.asarray(z)) ** 2
        if n == 1:
            return (1.0 / t)[..., None, None].astype(complex)
        out = np.zeros(t.shape[:-1] + (n, n), dtype=complex)
        for i in range(n):
            out[..., i, i] = 1.0 / t[..., i]
        return out

    kwargs = dict(eval=ev, n=n, complex_hessian=hess, growth_epsilon=0.5, growth_radius=5.0,
                  toric_profile=(lambda v: 0.5 * np.asarray(v) ** 2) if n == 1
                  else (lambda v: 0.5 * np.sum(np.asarray(v) ** 2, axis=-1)),
                  name="toric-quadratic")
    if n == 1:
        kwargs["radial_profile"] = lambda v: 0.5 * np.asarray(v) ** 2
    return Weight(**kwargs)


def _perturbed_gaussian(a, m):
    if m < 1 or m != int(m):
        raise ValueError("perturbation order m must be a positive integer")
    m = int(m)

    def ev(z):
        t = np.abs(z) ** 2
        return t + a * np.real(np.asarray(z) ** m) * np.exp(-t)

    def hess(z):
        z = np.asarray(z, dtype=complex)
        t = np.abs(z) ** 2
        h = 1.0 - a * np.real(z ** m) * (m + 1.0 - t) * np.exp(-t)
        return h[..., None, None].astype(complex)

    return Weight(eval=ev, n=1, complex_hessian=hess, growth_epsilon=0.5,
                  growth_radius=max(1.0, 1.0 + abs(a)), name="perturbed-gaussian")


def make_builtin(name: str, params: Sequence[float] = (), n: int = 1) -> Weight:
    """Construct one of the builtin weight families.

    ==================== ======================================= ==========
    family               phi                                     params
    ==================== ======================================= ==========
    gaussian             |z|^2                                   none
    annulus              (|z|^2 - 1)^2                           none
    hoelder              |z|^(2 - delta)                         [delta]
    toric-quadratic      sum (ln|z_i|^2)^2 / 2  on (C^*)^n       none
    perturbed-gaussian   |z|^2 + a Re(z^m) exp(-|z|^2)           [a, m]
    ==================== ======================================= ==========
    """
    params = [float(p) for p in params]
    if name == "gaussian":
        _expect(name, params, 0)
        return _gaussian(n)
    if n != 1 and name != "toric-quadratic":
        raise ValueError(f"family {name!r} is only defined for n = 1")
    if name == "annulus":
        _expect(name, params, 0)
        return _annulus()
    if name == "hoelder":
        _expect(name, params, 1)
        return _hoelder(params[0])
    if name == "toric-quadratic":
        _expect(name, params, 0)
        return _toric_quadratic(n)
    if name == "perturbed-gaussian":
        if len(params) == 1:
            params = params + [1.0]
        _expect(name, params, 2)
        return _perturbed_gaussian(params[0], params[1])
    raise ValueError(f"unknown weight family {name!r}; expected one of {BUILTIN_FAMILIES}")


def _expect(name, params, count):
    if len(params) != count:
        raise ValueError(f"family {name!r} takes {count} parameter(s), got {len(params)}")


# ---------------------------------------------------------------------------
# growth


class GrowthReport(NamedTuple):
    ok: bool
    worst_margin: float


def _sample_shell(n, r_lo, r_hi, count, rng):
    radii = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), size=count))
    if n == 1:
        return radii * np.exp(2j * np.pi * rng.uniform(size=count))
    g = rng.normal(size=(count, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return radii[:, None] * (g[:, :n] + 1j * g[:, n:])


def validate_growth(w: Weight, sample_count: int = 1000, seed: int = 0) -> GrowthReport:
    """Check phi(z) >= (1 + eps) ln|z|^2 on the shell growth_radius <= |z| <= 4 growth_radius."""
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    rng = np.random.default_rng(seed)
    z = _sample_shell(w.n, w.growth_radius, 4.0 * w.growth_radius, sample_count, rng)
    with np.errstate(all="ignore"):
        margin = w(z) - (1.0 + w.growth_epsilon) * np.log(_sq_norm(z, w.n))
    margin = np.where(np.isnan(margin), -np.inf, margin)
    worst = float(np.min(margin))
    return GrowthReport(ok=bool(worst >= 0.0), worst_margin=worst)


# ---------------------------------------------------------------------------
# Monge-Ampere density


def complex_hessian_fd(w: Weight, z, fd_step: Optional[float] = None) -> np.ndarray:
    """Complex Hessian d^2 phi / dz_i dzbar_j from central second differences.

    Built from the real 2n x 2n Hessian in (x_1, y_1, ..., x_n, y_n).
    """
    n = w.n
    z = as_points(z, n)
    zz = z[..., None] if n == 1 else z
    base_shape = zz.shape[:-1]
    if fd_step is None:
        h = 1e-4 * (1.0 + np.sqrt(np.sum(np.abs(zz) ** 2, axis=-1)))
    else:
        h = np.full(base_shape, float(fd_step))
    if np.any(h <= 0):
        raise ValueError("fd_step must be positive")

    def f(shift):
        pts = zz + shift
        return np.asarray(w.eval(pts[..., 0] if n == 1 else pts), dtype=float)

    # real directions e_0..e_{2n-1}: (x_1, y_1, x_2, y_2, ...)
    dirs = []
    for i in range(n):
        for unit in (1.0, 1j):
            d = np.zeros(n, dtype=complex)
            d[i] = unit
            dirs.append(d)
    hh = h[..., None]
    f0 = f(0.0)
    real_h = np.empty(base_shape + (2 * n, 2 * n))
    for a, da in enumerate(dirs):
        fp = f(hh * da)
        fm = f(-hh * da)
        real_h[..., a, a] = (fp - 2.0 * f0 + fm) / h ** 2
        for b in range(a + 1, 2 * n):
            db = dirs[b]
            val = (f(hh * (da + db)) - f(hh * (da - db)) - f(hh * (db - da)) + f(-hh * (da + db))) / (4.0 * h ** 2)
            real_h[..., a, b] = real_h[..., b, a] = val
    hc = np.empty(base_shape + (n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            xx = real_h[..., 2 * i, 2 * j]
            yy = real_h[..., 2 * i + 1, 2 * j + 1]
            xy = real_h[..., 2 * i, 2 * j + 1]
            yx = real_h[..., 2 * i + 1, 2 * j]
            hc[..., i, j] = 0.25 * ((xx + yy) + 1j * (xy - yx))
    return hc


def ma_density(w: Weight, z, fd_step: Optional[float] = None) -> np.ndarray:
    """det(dd^c phi) against Lebesgue measure: det(H) / pi^n where H is positive definite, else 0."""
    z = as_points(z, w.n)
    if w.complex_hessian is not None:
        with np.errstate(all="ignore"):
            hess = np.asarray(w.complex_hessian(z), dtype=complex)
    else:
        hess = complex_hessian_fd(w, z, fd_step)
    if not np.all(np.isfinite(hess)):
        raise ValueError("complex Hessian is not finite at some evaluation point")
    herm = 0.5 * (hess + np.conj(np.swapaxes(hess, -1, -2)))
    eig = np.linalg.eigvalsh(herm)
    pd = eig[..., 0] > 0.0
    det = np.prod(eig, axis=-1)
    out = np.where(pd, det, 0.0) / np.pi ** w.n
    return out if out.ndim else float(out)
