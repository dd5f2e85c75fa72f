"""Polynomials with exponents restricted to k * Delta.

With Delta = [1/4, 3/4] and Phi(v) = v^2 / 2 the admissible slopes of the
envelope are cut down to Delta, so contact shrinks to v in [1/4, 3/4],
the annulus e^{1/8} <= |z| <= e^{3/8}.  The Bergman mass moves there as k grows,
slowly: the boundary layers have width k^{-1/2}.
"""

import math

from polybergman import Polytope, RadialGrid, lattice_basis, make_builtin, mass_fraction, polytope_equilibrium
from polybergman import polytope_model, support_weight

delta = Polytope.interval(0.25, 0.75)
print("lattice points of k Delta:", lattice_basis(delta, 8).exponents[:, 0].tolist())
print(f"support function H_Delta(e) = {support_weight(delta, math.e):.3f}")

g = RadialGrid.from_profile(lambda v: 0.5 * v ** 2, -6, 6, 4001, "punctured")
lo, hi = polytope_equilibrium(g, delta).contact_interval()
print(f"contact v in [{lo:.4f}, {hi:.4f}], |z| in [{math.exp(lo / 2):.4f}, {math.exp(hi / 2):.4f}]")

w = make_builtin("toric-quadratic")
for k in (16, 48, 96, 192):
    m = polytope_model(w, delta, k)
    print(f"k={k:4d} dim={m.dim:4d}  Bergman mass on the annulus {mass_fraction(m, (math.exp(0.25), math.exp(0.75))):.4f}")
