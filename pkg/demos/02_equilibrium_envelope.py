"""Equilibrium potentials as convex envelopes.

phi = (|z|^2 - 1)^2 is a double well in v = ln|z|^2.  Its equilibrium
potential is the largest convex function of v with slopes in [0, 1] lying
below the profile; the two touch on an annulus 1 <= |z|^2 <= (1 + sqrt 3)/2.
The Bergman model finds the same annulus without being told about it.
"""

import math

import numpy as np

from polybergman import coincidence_set, log_kernel_potential, make_builtin, model_for, phi_e_point, weight_envelope
from polybergman.equilibrium import log_kernel_contact

w = make_builtin("annulus")
env = weight_envelope(w)
lo, hi = env.contact_interval()
print(f"contact in v: [{lo:.4f}, {hi:.4f}]   expected [0, {math.log((1 + math.sqrt(3)) / 2):.4f}]")
print(f"total Monge-Ampere mass of the envelope: {env.total_mass:.6f}")

h = 0.01
xs = np.arange(-1.5, 1.5 + h / 2, h)
pts = (xs[None, :] + 1j * xs[:, None]).ravel()
oracle = coincidence_set(w, lambda p: phi_e_point(w, p), pts, tau=1e-9)
for k in (16, 64):
    m = model_for(w, k)
    mask, rho = log_kernel_contact(m, pts)
    print(f"k={k:3d}: cells where the Bergman estimate of D disagrees with the envelope: {np.sum(mask != oracle)}"
          f" of {pts.size};  MA mass over the estimate {np.sum(rho[mask]) * h * h:.4f}")

z = np.array([0.0, 0.5, 1.0, 1.2, 2.0])
m = model_for(w, 64)
print("\n  |z|   phi_e    k^-1 ln K_64")
for zi, a, b in zip(z, phi_e_point(w, z), log_kernel_potential(m, z)):
    print(f"  {zi:.1f}  {a:8.4f}  {b:8.4f}")
