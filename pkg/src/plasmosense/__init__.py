"""Shape sensing of a small particle from plasmonic resonance shifts.

A plasmonic particle D₂ with known Neumann–Poincaré spectrum is moved around
an unknown particle D₁. The shifts of its resonances encode the contracted
generalized polarization tensors (CGPTs) of D₁, from which the shape is
reconstructed by gradient descent.
"""

from .bem import np_spectrum
from .errors import PlasmoSenseError
from .forward import TwoParticleSystem, shift_p, sweep_and_peak
from .geometry import (
    make_circle,
    make_ellipse,
    make_fourier_shape,
    make_rounded_polygon,
)
from .gpt import CGPTSet, cgpt_block, cgpt_set
from .inverse import descend_shape, equivalent_ellipse, recover_cgpt

__version__ = "0.1.0"

__all__ = [
    "CGPTSet",
    "PlasmoSenseError",
    "TwoParticleSystem",
    "cgpt_block",
    "cgpt_set",
    "descend_shape",
    "equivalent_ellipse",
    "make_circle",
    "make_ellipse",
    "make_fourier_shape",
    "make_rounded_polygon",
    "np_spectrum",
    "recover_cgpt",
    "shift_p",
    "sweep_and_peak",
]
