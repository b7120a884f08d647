"""Contracted polarization tensors of a particle and their basic laws.

The first-order tensor of an ellipse has a closed form; higher blocks obey
M_{m,n} = M_{n,m}^T and scale like s^{m+n} under dilation by s.
"""

import numpy as np

from plasmosense.geometry import make_ellipse, make_fourier_shape, scale_translate
from plasmosense.gpt import cgpt_block, cgpt_set, ellipse_pt_analytic, harmonic_sum_N1

ellipse = make_ellipse(1.0, 2.0, n=256)
for lam in (1.0, 0.8, 2 + 0.5j):
    M = cgpt_block(lam, ellipse, 1, 1)
    ref = ellipse_pt_analytic(lam, 1.0, 2.0)
    print(f"lambda = {lam}:  diag M11 = {np.diag(M)},  closed-form error {np.abs(M - ref).max():.1e}")

shape = make_fourier_shape(1.0, [0.0, 0.1, 0.15], [0.0, -0.05, 0.02], n=128)
s = cgpt_set(1.0, shape, 6)
sym = max(np.abs(s[(m, n)] - s[(n, m)].T).max() for m, n in s.blocks)
print(f"\nblocks with m + n <= 6: {len(s.blocks)}, worst symmetry defect {sym:.1e}")

small = cgpt_set(1.0, scale_translate(shape, 0.1), 6)
print("scaling exponent log10(|M(shape)| / |M(0.1 shape)|) per block:")
for m, n in [(1, 1), (1, 2), (2, 2), (1, 4), (3, 3)]:
    p = np.log10(np.linalg.norm(s[(m, n)]) / np.linalg.norm(small[(m, n)]))
    print(f"  ({m},{n}): {p:.6f}  (m + n = {m + n})")

print("\ncomplex harmonic sums N1_{m,n}:")
for m, n in [(1, 1), (1, 2), (2, 2)]:
    print(f"  ({m},{n}): {harmonic_sum_N1(s, m, n):.6f}")
