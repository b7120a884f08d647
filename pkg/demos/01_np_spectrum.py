"""Neumann–Poincaré spectrum of an ellipse and how fast the discretization converges.

For an ellipse with semi-axes a, b the nonzero eigenvalues are
±(1/2)((a - b)/(a + b))^j, so the discrete spectrum can be checked exactly.
"""

import numpy as np

from plasmosense.bem import np_spectrum
from plasmosense.geometry import make_ellipse

a, b = 1.0, 2.0
q = abs(a - b) / (a + b)
exact = np.ravel([[-0.5 * q**j, 0.5 * q**j] for j in range(1, 6)])

sp = np_spectrum(make_ellipse(a, b, n=512), J=10)
print(" j   computed              exact")
for j, (lam, ref) in enumerate(zip(sp.eigenvalues, exact), start=1):
    print(f"{j:2d}  {lam:+.15f}  {ref:+.15f}")

# A thin ellipse is harder: the error still falls geometrically with N.
q = 9 / 11
exact = np.ravel([[-0.5 * q**j, 0.5 * q**j] for j in range(1, 6)])
print("\nellipse 1 x 10, max eigenvalue error against N")
for n in (32, 64, 128, 256):
    err = np.abs(np_spectrum(make_ellipse(1.0, 10.0, n=n), J=10).eigenvalues - exact).max()
    print(f"N = {n:4d}   {err:.2e}")
