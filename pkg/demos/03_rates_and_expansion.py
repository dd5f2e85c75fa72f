"""Rates: the log-kernel error, growth at a Hoelder point, off-diagonal decay
and the first correction of the Bergman function."""

import math

import numpy as np

from polybergman import expansion_probe, growth_exponent, log_kernel_potential, make_builtin, model_for, offdiag_mass
from polybergman import phi_e_point

g = make_builtin("gaussian")
r = np.linspace(0, 3, 201)
print("sup |k^-1 ln K_k - phi_e| on |z| <= 3, scaled by k / ln k")
for k in (8, 16, 32, 64):
    err = np.max(np.abs(log_kernel_potential(model_for(g, k), r) - phi_e_point(g, r)))
    print(f"  k={k:3d}  raw {err:.4f}  scaled {err * k / math.log(k):.3f}")

hw = make_builtin("hoelder", [0.5])
ks = (16, 32, 64, 128, 256)
print(f"\nphi = |z|^(1/2) + |z|^2 near 0: ln B_k(0) grows like {growth_exponent([model_for(hw, k) for k in ks]):.4f} "
      "ln k (4/3 expected)")

print("\nmass of |K_k(z,w)|^2 e^{-k phi(z) - k phi(w)} / k with |z - w| > 0.3:")
for k in (16, 32, 64):
    print(f"  k={k:3d}  {offdiag_mass(model_for(g, k), 0.3):.5f}")

# on the gaussian every power of 1/k vanishes; the annulus has a genuine 1/k term
a = make_builtin("annulus")
rep = expansion_probe([model_for(a, k) for k in (256, 512, 1024)], 1.1)
print(f"\nannulus at |z| = 1.1: c0 {rep.c0:.6f} vs density {rep.ma_density:.6f}, first correction ~ k^{rep.slope:.2f}")
rep = expansion_probe([model_for(g, k) for k in (16, 32, 64)], 0.5)
print(f"gaussian at |z| = 0.5: c0 {rep.c0:.8f} vs 1/pi {1 / math.pi:.8f}; successive differences shrink like "
      f"2^{rep.slope:.1f} (exponential, no power law)")
