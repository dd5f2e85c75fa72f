"""Config-driven experiments: flat key = value configs in, CSV tables out."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bergman import (
    BergmanModel,
    bergman_function,
    build_model,
    dimension_residual,
    log_kernel_potential,
    monomial_basis,
)
from .equilibrium import (
    EnvelopeResult,
    default_radial_grid,
    growth_exponent,
    log_kernel_contact,
    offdiag_mass,
    phi_e_point,
    radial_envelope,
)
from .polytope import Polytope, lattice_basis, mass_fraction
from .quadrature import default_rule, fsum_complex
from .stochastic import (
    SampleBatch,
    bergman_radial_cdf,
    empirical_discrepancy,
    sample_dpp,
    sample_zeros,
    zeros_radial_cdf,
)
from .weights import BUILTIN_FAMILIES, Weight, ma_density, make_builtin

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "build_weight",
    "build_experiment_model",
    "KResult",
    "run_experiment",
    "convergence_table",
    "run_sampling",
    "write_envelope",
    "fmt",
    "SUMMARY_COLUMNS",
]

# the two-variable toric oracle is accurate to ~1e-4, so contact decisions need slack
TORIC_TAU = 5e-4

SUMMARY_COLUMNS = ["k", "dim", "dim_residual", "l1_error", "sup_potential_error",
                   "offdiag_mass_eta0p3", "mass_on_D"]

KEYS = {
    "weight.family", "weight.params", "space.n", "space.k", "quad.radial", "quad.angular",
    "quad.tol", "grid.extent", "grid.res", "polytope.vertices", "stochastic.batches",
    "stochastic.seed", "out.dir", "target.mode",
}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    params: Tuple[float, ...] = ()
    n: int = 1
    ks: Tuple[int, ...] = (16,)
    quad_radial: Optional[int] = None
    quad_angular: Optional[int] = None
    quad_tol: float = 1e-17
    grid_extent: float = 2.0
    grid_res: int = 64
    polytope: Optional[Tuple[Tuple[float, ...], ...]] = None
    batches: int = 0
    seed: int = 0
    out_dir: str = "out"
    target_mode: str = "oracle"
    base_dir: str = field(default=".", compare=False)

    @property
    def output_path(self) -> str:
        return self.out_dir if os.path.isabs(self.out_dir) else os.path.join(self.base_dir, self.out_dir)


def _floats(text: str, key: str) -> Tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(x) for x in text.replace(" ", "").split(","))
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from exc


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from exc


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    """Parse the flat ``key = value`` format ('#' starts a comment)."""
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    if "weight.family" not in raw:
        raise ConfigError("weight.family is required")
    family = raw["weight.family"]
    if family not in BUILTIN_FAMILIES:
        raise ConfigError(f"unknown weight family {family!r}; expected one of {BUILTIN_FAMILIES}")
    cfg = ExperimentConfig(family=family, base_dir=base_dir)
    kw = {}
    kw["params"] = _floats(raw.get("weight.params", ""), "weight.params")
    if "space.n" in raw:
        kw["n"] = _int(raw["space.n"], "space.n")
        if kw["n"] not in (1, 2):
            raise ConfigError("space.n must be 1 or 2")
    if "space.k" in raw:
        ks = tuple(_int(x, "space.k") for x in raw["space.k"].replace(" ", "").split(",") if x)
        if not ks or any(k < 1 for k in ks):
            raise ConfigError("space.k must list positive integers")
        if list(ks) != sorted(set(ks)):
            raise ConfigError("space.k must be sorted ascending without repeats")
        kw["ks"] = ks
    if "quad.radial" in raw:
        kw["quad_radial"] = _int(raw["quad.radial"], "quad.radial")
        if kw["quad_radial"] < 8:
            raise ConfigError("quad.radial must be >= 8")
    if "quad.angular" in raw:
        kw["quad_angular"] = _int(raw["quad.angular"], "quad.angular")
        if kw["quad_angular"] < 8:
            raise ConfigError("quad.angular must be >= 8")
    if "quad.tol" in raw:
        (tol,) = _floats(raw["quad.tol"], "quad.tol") or (None,)
        if tol is None or not 0 < tol <= 1e-6:
            raise ConfigError("quad.tol must lie in (0, 1e-6]")
        kw["quad_tol"] = tol
    if "grid.extent" in raw:
        (ext,) = _floats(raw["grid.extent"], "grid.extent") or (None,)
        if ext is None or not ext > 0:
            raise ConfigError("grid.extent must be positive")
        kw["grid_extent"] = ext
    if "grid.res" in raw:
        kw["grid_res"] = _int(raw["grid.res"], "grid.res")
        if kw["grid_res"] < 64:
            raise ConfigError("grid.res must be >= 64")
    if raw.get("polytope.vertices", "").strip():
        verts = tuple(_floats(v, "polytope.vertices") for v in raw["polytope.vertices"].split(";"))
        n = kw.get("n", 1)
        if n == 1:
            flat = tuple(x for v in verts for x in v)
            if len(flat) != 2:
                raise ConfigError("polytope.vertices for n = 1 is 'a, b'")
            verts = ((flat[0],), (flat[1],))
        else:
            raise ConfigError("polytope experiments are implemented for n = 1 only")
        try:
            Polytope(np.array(verts), n)
        except ValueError as exc:
            raise ConfigError(f"polytope.vertices: {exc}") from exc
        kw["polytope"] = verts
    if "stochastic.batches" in raw:
        kw["batches"] = _int(raw["stochastic.batches"], "stochastic.batches")
        if kw["batches"] < 0:
            raise ConfigError("stochastic.batches must be >= 0")
    if "stochastic.seed" in raw:
        kw["seed"] = _int(raw["stochastic.seed"], "stochastic.seed")
    if "out.dir" in raw:
        kw["out_dir"] = raw["out.dir"]
    if "target.mode" in raw:
        if raw["target.mode"] not in ("oracle", "self"):
            raise ConfigError("target.mode must be 'oracle' or 'self'")
        kw["target_mode"] = raw["target.mode"]
    cfg = replace(cfg, **kw)
    try:
        build_weight(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Read and parse a config file; OSError propagates for the caller to map to an I/O failure."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def build_weight(cfg: ExperimentConfig) -> Weight:
    return make_builtin(cfg.family, cfg.params, n=cfg.n)


def _polytope(cfg: ExperimentConfig) -> Optional[Polytope]:
    return None if cfg.polytope is None else Polytope(np.array(cfg.polytope), cfg.n)


def build_experiment_model(cfg: ExperimentConfig, k: int, w: Optional[Weight] = None) -> BergmanModel:
    w = w or build_weight(cfg)
    delta = _polytope(cfg)
    basis = lattice_basis(delta, k) if delta is not None else monomial_basis(cfg.n, k)
    if basis.dim == 0:
        raise ConfigError(f"k*Delta has no lattice points for k={k}")
    kw = dict(rel_tol=cfg.quad_tol)
    if cfg.quad_radial:
        kw["nodes_per_panel"] = cfg.quad_radial
    if cfg.quad_angular:
        kw["n_angular"] = cfg.quad_angular
    if not w.torus_invariant:
        kw["panel_width"] = 2.0
    rule = default_rule(w, k, basis.exponents, **kw)
    return build_model(w, basis, rule)


# ---------------------------------------------------------------------------
# oracles for one experiment


class _Oracle:
    """Equilibrium potential, coincidence set and target density for a config."""

    def __init__(self, cfg: ExperimentConfig, w: Weight):
        self.cfg, self.w = cfg, w
        self.delta = _polytope(cfg)
        self.env: Optional[EnvelopeResult] = None
        self._cache = {}
        if w.n == 1 and w.torus_invariant:
            if self.delta is None:
                self.env = radial_envelope(default_radial_grid(w), (0.0, 1.0), warn=False)
            else:
                a, b = self.delta.vertices[:, 0]
                self.env = radial_envelope(default_radial_grid(w), (a, b), warn=False)

    @property
    def available(self) -> bool:
        return self.w.torus_invariant and (self.env is not None or self.w.n == 2)

    def phi_e(self, pts) -> np.ndarray:
        if self.env is not None:
            with np.errstate(divide="ignore"):
                v = np.log(np.abs(pts) ** 2)
            if self.delta is None:
                return np.asarray(phi_e_point(self.w, pts), dtype=float)
            return np.asarray(self.env.evaluate(v), dtype=float)
        return np.asarray(phi_e_point(self.w, pts), dtype=float)

    def contact_t(self) -> Tuple[float, float]:
        """Contact set in t = |z|^2 as one interval (radial n = 1)."""
        lo, hi = self.env.contact_interval()
        from_origin = lo == self.env.v_values[0] and np.isfinite(self.w.value_at_origin())
        return (0.0 if from_origin else math.exp(lo)), math.exp(hi)

    def target(self, m: BergmanModel, pts) -> np.ndarray:
        # one-entry cache; holding m and pts keeps their ids from being reused
        hit = self._cache.get((id(m), id(pts)))
        if hit is None:
            hit = (m, pts, self._target(m, pts))
            self._cache = {(id(m), id(pts)): hit}
        return hit[2]

    def _target(self, m: BergmanModel, pts) -> np.ndarray:
        if not self.available:
            mask, rho = log_kernel_contact(m, pts)
            return np.where(mask, rho, 0.0)
        with np.errstate(all="ignore"):
            phi = self.w(pts)
            gap = phi - self.phi_e(pts)
        tau = 1e-8 * (1.0 + np.max(np.abs(phi[np.isfinite(phi)])))
        if self.w.n == 2:
            tau = max(tau, TORIC_TAU)
        mask = gap <= tau
        out = np.zeros(mask.shape)
        out[mask] = ma_density(self.w, pts[mask])
        return out


def _grid_points(cfg: ExperimentConfig, w: Weight):
    xs = np.linspace(-cfg.grid_extent, cfg.grid_extent, cfg.grid_res)
    x, y = np.meshgrid(xs, xs, indexing="xy")
    z1 = (x + 1j * y).ravel()
    if cfg.n == 1:
        return z1, z1
    # n = 2: the slice z_2 = 0, or z_2 = 1 when the weight is singular on {z_2 = 0}
    with np.errstate(all="ignore"):
        second = 0.0 if np.isfinite(w(np.array([1.0, 0.0]))) else 1.0
    return z1, np.stack([z1, np.full_like(z1, second)], -1)


def fmt(x) -> str:
    """17 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


@dataclass
class KResult:
    k: int
    dim: int
    dim_residual: float
    l1_error: float
    sup_potential_error: float
    offdiag_mass: float
    mass_on_D: float
    files: List[str] = field(default_factory=list)

    def row(self):
        return [self.k, self.dim, self.dim_residual, self.l1_error, self.sup_potential_error,
                self.offdiag_mass, self.mass_on_D]


def _l1(cfg, oracle: _Oracle, m: BergmanModel) -> float:
    if cfg.target_mode == "self":
        return 0.0
    w = m.weight
    if oracle.env is not None:
        t_lo, t_hi = oracle.contact_t()
        rule = default_rule(w, m.k, m.basis.exponents, extra_breaks=[t for t in (t_lo, t_hi) if t > 0])
        pts, wts = rule.orbit_nodes, rule.orbit_weights
    elif m.radial_fast_path:
        pts, wts = m.rule.orbit_nodes, m.rule.orbit_weights
    else:
        pts, wts = m.rule.nodes, m.rule.weights
    bk = bergman_function(m, pts) / m.k ** m.n
    return fsum_complex(wts * np.abs(bk - oracle.target(m, pts))).real


def _mass_on_d(oracle: _Oracle, m: BergmanModel) -> float:
    if oracle.env is not None:
        return mass_fraction(m, oracle.contact_t())
    if m.radial_fast_path:
        pts, wts = m.rule.orbit_nodes, m.rule.orbit_weights
    else:
        pts, wts = m.rule.nodes, m.rule.weights
    b = bergman_function(m, pts) * wts
    inside = oracle.target(m, pts) > 0
    return fsum_complex(b[inside]).real / fsum_complex(b).real


def _offdiag(m: BergmanModel) -> float:
    if m.n != 1:
        return math.nan  # the four-fold product rule is out of reach for n = 2
    return offdiag_mass(m, 0.3)


def run_k(cfg: ExperimentConfig, k: int, w: Weight, oracle: _Oracle, write: bool = True) -> KResult:
    m = build_experiment_model(cfg, k, w)
    z1, pts = _grid_points(cfg, w)
    bk = bergman_function(m, pts) / k ** cfg.n
    target = bk.copy() if cfg.target_mode == "self" else oracle.target(m, pts)
    lkp = log_kernel_potential(m, pts)
    if oracle.available:
        pe = oracle.phi_e(pts)
        err = np.abs(lkp - pe)
        sup_err = float(np.nanmax(err))
    else:
        pe = err = np.full(lkp.shape, math.nan)
        sup_err = math.nan
    res = KResult(k, m.dim, dimension_residual(m), _l1(cfg, oracle, m), sup_err, _offdiag(m),
                  _mass_on_d(oracle, m))
    if write:
        d = os.path.join(cfg.output_path, f"k{k}")
        os.makedirs(d, exist_ok=True)
        p1 = os.path.join(d, "bergman_density.csv")
        _write_csv(p1, ["re", "im", "Bk_over_kn", "target_density", "abs_diff"],
                   zip(z1.real, z1.imag, bk, target, np.abs(bk - target)))
        p2 = os.path.join(d, "potential.csv")
        _write_csv(p2, ["re", "im", "log_kernel_potential", "phi_e_oracle", "abs_err"],
                   zip(z1.real, z1.imag, lkp, pe, err))
        res.files += [p1, p2]
        if cfg.batches > 0 and cfg.n == 1:
            res.files.append(_write_samples(cfg, m, d))
    return res


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> List[KResult]:
    """Run every k of the config; writes per-k CSVs and summary.csv when ``write``."""
    w = build_weight(cfg)
    oracle = _Oracle(cfg, w)
    if write:
        os.makedirs(cfg.output_path, exist_ok=True)
    results = [run_k(cfg, k, w, oracle, write) for k in cfg.ks]
    if write:
        _write_csv(os.path.join(cfg.output_path, "summary.csv"), SUMMARY_COLUMNS, (r.row() for r in results))
    return results


# ---------------------------------------------------------------------------
# convergence table, sampling and envelopes


def convergence_table(cfg: ExperimentConfig) -> str:
    """Per-k rows: k, sup error of k^{-1} ln K_k, that error times k / ln k, L1 error, off-diagonal mass."""
    results = run_experiment(cfg, write=False)
    lines = [f"{'k':>6} {'sup_err':>14} {'sup_err*k/lnk':>14} {'l1_error':>14} {'offdiag_eta0.3':>15}"]
    for r in results:
        scaled = r.sup_potential_error * r.k / math.log(r.k) if r.k > 1 else math.nan
        lines.append(f"{r.k:>6d} {r.sup_potential_error:>14.6g} {scaled:>14.6g} {r.l1_error:>14.6g} "
                     f"{r.offdiag_mass:>15.6g}")
    if cfg.family == "hoelder" and len(cfg.ks) >= 2:
        w = build_weight(cfg)
        models = [build_experiment_model(cfg, k, w) for k in cfg.ks]
        origin = 0.0 if cfg.n == 1 else np.zeros(cfg.n)
        lines.append(f"fitted slope of ln B_k(0) vs ln k: {growth_exponent(models, origin):.6f}")
    return "\n".join(lines)


def _batches(cfg: ExperimentConfig, m: BergmanModel) -> Tuple[List[SampleBatch], List[SampleBatch]]:
    dpp = [sample_dpp(m, cfg.seed, b) for b in range(cfg.batches)]
    zeros = [sample_zeros(m, cfg.seed, b) for b in range(cfg.batches)] if m.basis.kind == "total" else []
    return dpp, zeros


def _write_samples(cfg: ExperimentConfig, m: BergmanModel, d: str, batches=None) -> str:
    dpp, zeros = batches or _batches(cfg, m)
    path = os.path.join(d, "samples.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["re", "im", "batch", "kind"])
        wr.writerows([fmt(p.real), fmt(p.imag), str(b.batch), b.kind] for b in dpp + zeros for p in b.points)
    return path


def run_sampling(cfg: ExperimentConfig) -> List[str]:
    """Write samples.csv per k and return report lines with radial discrepancies."""
    if cfg.n != 1:
        raise ConfigError("sampling is implemented for n = 1 only")
    if cfg.batches < 1:
        raise ConfigError("stochastic.batches must be >= 1 for sampling")
    w = build_weight(cfg)
    lines = []
    os.makedirs(cfg.output_path, exist_ok=True)
    for k in cfg.ks:
        m = build_experiment_model(cfg, k, w)
        d = os.path.join(cfg.output_path, f"k{k}")
        os.makedirs(d, exist_ok=True)
        dpp, zeros = _batches(cfg, m)
        path = _write_samples(cfg, m, d, (dpp, zeros))
        msg = f"k={k}: {cfg.batches} batches written to {path}"
        if m.radial_fast_path:
            if sum(len(b.points) for b in dpp) >= 1000:
                msg += f"; dpp radial discrepancy {empirical_discrepancy(dpp, bergman_radial_cdf(m)):.4g}"
            if zeros and sum(len(b.points) for b in zeros) >= 1000:
                msg += f"; zeros radial discrepancy {empirical_discrepancy(zeros, zeros_radial_cdf(m)):.4g}"
        lines.append(msg)
    return lines


def write_envelope(cfg: ExperimentConfig) -> str:
    """Write envelope.csv (v, phi, phi_e, slope, contact) for a radial weight."""
    w = build_weight(cfg)
    if cfg.n != 1 or not w.torus_invariant:
        raise ConfigError("the envelope mode needs a radial one-variable weight")
    delta = _polytope(cfg)
    slopes = (0.0, 1.0) if delta is None else tuple(float(x) for x in delta.vertices[:, 0])
    env = radial_envelope(default_radial_grid(w), slopes, warn=False)
    os.makedirs(cfg.output_path, exist_ok=True)
    path = os.path.join(cfg.output_path, "envelope.csv")
    _write_csv(path, ["v", "phi", "phi_e", "slope", "contact"],
               zip(env.v_values, env.phi_values, env.phi_e_values, env.slopes, env.contact_mask))
    return path
