"""Random point clouds governed by the same kernel.

Eigenvalue-like points: the projection DPP with kernel K_k e^{-k phi}; always
exactly dim points.  Zeros of random polynomials sum xi_i psi_i: their mean
density is dd^c ln K_k.  Both are compared with their oracles through the
radial CDF.
"""

import numpy as np

from polybergman import bergman_radial_cdf, empirical_discrepancy, make_builtin, model_for, sample_dpp, sample_zeros
from polybergman import zeros_radial_cdf

SEED = 7
w = make_builtin("gaussian")
m = model_for(w, 16)
dpp = [sample_dpp(m, SEED, b) for b in range(200)]
r = np.abs(np.concatenate([b.points for b in dpp]))
print(f"DPP k=16: {len(dpp)} batches, sizes {sorted({len(b.points) for b in dpp})}, "
      f"fraction in |z| <= 1/sqrt 2: {np.mean(r <= 2 ** -0.5):.3f}")
print(f"  radial CDF distance to B_k/dim: {empirical_discrepancy(dpp, bergman_radial_cdf(m)):.4f}")

m = model_for(w, 32)
zs = [sample_zeros(m, SEED, b) for b in range(200)]
r = np.abs(np.concatenate([b.points for b in zs]))
print(f"zeros k=32: fraction in the unit disc {np.mean(r <= 1):.4f} (oracle {zeros_radial_cdf(m)(1.0):.4f})")
print(f"  radial CDF distance to the log-kernel curvature: {empirical_discrepancy(zs, zeros_radial_cdf(m)):.4f}")
