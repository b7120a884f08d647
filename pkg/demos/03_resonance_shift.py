"""A small particle near a plasmonic ellipse shifts its resonance.

The plasmonic ellipse D2 (1 x 2) resonates at lambda_1 = -1/6. A small
particle D1 of size delta moves the peak of |M11(lambda)| by P_1, which is
read off a sweep with Im lambda = 1e-4 and compared with the perturbation
series. The shift scales like delta^2.
"""

import numpy as np

from plasmosense.bem import np_spectrum
from plasmosense.forward import TwoParticleSystem
from plasmosense.geometry import (
    make_ellipse,
    make_fourier_shape,
    recenter,
    scale_translate,
)

spectrum = np_spectrum(make_ellipse(1.0, 2.0, n=256), J=20)
base = make_fourier_shape(1.0, [0.0, 0.0, 0.2], n=128)
z = (4.5, 0.7)

print("delta   P1 from sweep    P1 from series   lambda_r")
shifts = []
for delta in (0.2, 0.1, 0.05):
    d1 = recenter(scale_translate(base, delta))
    system = TwoParticleSystem(spectrum, d1, lam1=1.0)
    sweep = system.sweep(z, j=1, imag=1e-4)
    shifts.append(sweep.shift)
    print(f"{delta:5.2f}   {sweep.shift:+.6e}    {system.shift(z, 1):+.6e}    {sweep.lam_r:.10f}")

slope = np.polyfit(np.log([0.2, 0.1, 0.05]), np.log(np.abs(shifts)), 1)[0]
print(f"log-log slope of |P1| in delta: {slope:.3f}")

# The shift depends on where D2 sits relative to D1.
system = TwoParticleSystem(spectrum, recenter(scale_translate(base, 0.2)), lam1=1.0)
print("\nposition          P1")
for angle in np.linspace(0, np.pi, 5):
    pos = (4.5 * np.cos(angle), 4.5 * np.sin(angle))
    print(f"({pos[0]:+.2f}, {pos[1]:+.2f})   {system.shift(pos, 1):+.6e}")
