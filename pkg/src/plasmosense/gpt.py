"""Contracted generalized polarization tensors (CGPTs).

Blocks are indexed ``(m, n)`` and laid out as

    [[M^cc, M^cs],
     [M^sc, M^ss]]

where the first letter refers to Re/Im of the source polynomial P_m (inside
the solve) and the second to Re/Im of the trace polynomial P_n.  Harmonic
polynomials P_m = (x₁ + i x₂)^m are taken about ``origin`` (default: the
curve center).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bem import SecondKindSolver, hstar_gram
from .errors import InvalidArgumentError, NumericalError


def block_indices(order):
    """All (m, n) with m, n ≥ 1 and m + n ≤ order, m ascending then n."""
    return [(m, n) for m in range(1, order) for n in range(1, order - m + 1)]


def harmonic_polynomials(curve, degree, origin=None):
    """P_m and ∂P_m/∂ν at the nodes for m = 0..degree (complex arrays)."""
    o = curve.center if origin is None else np.asarray(origin, float)
    z = (curve.nodes[:, 0] - o[0]) + 1j * (curve.nodes[:, 1] - o[1])
    nu = curve.normals[:, 0] + 1j * curve.normals[:, 1]
    P = np.array([z**m for m in range(degree + 1)])
    dP = np.array([m * z ** (m - 1) * nu if m else np.zeros_like(z) for m in range(degree + 1)])
    return P, dP


@dataclass
class CGPTSet:
    order: int
    contrast: complex
    blocks: dict
    origin: tuple = (0.0, 0.0)
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __getitem__(self, mn):
        return self.blocks[tuple(mn)]

    def get(self, m, n):
        if (m, n) not in self.blocks:
            raise InvalidArgumentError(f"block ({m},{n}) not present (order {self.order})")
        return self.blocks[(m, n)]

    def truncated(self, order):
        if order > self.order:
            raise InvalidArgumentError(f"cannot extend order {self.order} to {order}")
        return CGPTSet(order, self.contrast, {k: self.blocks[k] for k in block_indices(order)},
                       self.origin, self.source, dict(self.meta))

    def scaled(self, s):
        """Blocks of the s-dilated particle: M_{m,n} s^{m+n}."""
        return CGPTSet(self.order, self.contrast,
                       {(m, n): b * s ** (m + n) for (m, n), b in self.blocks.items()},
                       self.origin, self.source, dict(self.meta))

    def to_dict(self):
        lam = complex(self.contrast)
        return {
            "order": self.order,
            "contrast": lam.real if lam.imag == 0 else [lam.real, lam.imag],
            "origin": [float(v) for v in self.origin],
            "blocks": {
                f"{m},{n}": [_num(v) for v in np.asarray(self.blocks[(m, n)]).ravel()]
                for (m, n) in block_indices(self.order)
                if (m, n) in self.blocks
            },
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        lam = d["contrast"]
        lam = complex(*lam) if isinstance(lam, (list, tuple)) else lam
        blocks = {}
        for key, vals in d["blocks"].items():
            m, n = (int(s) for s in key.split(","))
            vals = [complex(*v) if isinstance(v, (list, tuple)) else v for v in vals]
            blocks[(m, n)] = np.array(vals).reshape(2, 2)
        return cls(int(d["order"]), lam, blocks, tuple(d.get("origin", (0.0, 0.0))))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _num(v):
    v = complex(v)
    return v.real if v.imag == 0 else [v.real, v.imag]


def _traces_and_densities(solver, curve, order, origin):
    P, dP = harmonic_polynomials(curve, order, origin)
    rhs = np.concatenate([dP[1:order].real, dP[1:order].imag]).T
    dens = solver.solve(rhs.astype(complex) if np.iscomplexobj(solver.lam) else rhs)
    k = order - 1
    return P, dens[:, :k].T, dens[:, k:].T


def cgpt_set(lam, curve, order, origin=None, solver=None):
    """All blocks M_{m,n}(λ, D) with m + n ≤ order from one factorization."""
    if order < 2:
        raise InvalidArgumentError("CGPT order must be at least 2")
    origin = curve.center if origin is None else np.asarray(origin, float)
    solver = SecondKindSolver(lam, curve) if solver is None else solver
    P, phi_c, phi_s = _traces_and_densities(solver, curve, order, origin)
    w = curve.weights
    blocks = {}
    for m, n in block_indices(order):
        rc, rs = P[n].real * w, P[n].imag * w
        c, s = phi_c[m - 1], phi_s[m - 1]
        blocks[(m, n)] = np.array([[rc @ c, rs @ c], [rc @ s, rs @ s]])
    return CGPTSet(order, lam, blocks, tuple(float(v) for v in origin), curve.label)


def cgpt_block(lam, curve, m, n, origin=None):
    if m < 1 or n < 1:
        raise InvalidArgumentError("block indices start at 1")
    return cgpt_set(lam, curve, m + n, origin)[(m, n)]


def ellipse_pt_analytic(lam, a, b):
    """First-order PT of the centered ellipse x²/a² + y²/b² ≤ 1."""
    q = 0.5 * (a - b) / (a + b)
    d1, d2 = lam - q, lam + q
    if d1 == 0 or d2 == 0:
        raise NumericalError(f"λ={lam} is a pole of the ellipse polarization tensor (±{abs(q)})")
    return np.diag([np.pi * a * b / d1, np.pi * a * b / d2])


def disk_cgpt_analytic(lam, radius, m):
    """Diagonal block M_{m,m} of a centered disk: 2πm r^{2m}(k-1)/(k+1) · I, (k-1)/(k+1) = 1/(2λ)."""
    return np.pi * m * radius ** (2 * m) / lam * np.eye(2)


def harmonic_sum_N1(cgpts, m, n):
    """N^(1)_{m,n} = ∫ P_n (λI - K*)^{-1}[∂P_m/∂ν] = (M^cc - M^ss) + i(M^cs + M^sc)."""
    b = cgpts.get(m, n) if isinstance(cgpts, CGPTSet) else np.asarray(cgpts)
    return (b[0, 0] - b[1, 1]) + 1j * (b[0, 1] + b[1, 0])


def pt_spectral(lam, spectrum):
    """First-order PT from the eigen-expansion Σ (ν_l, φ_j)_{H*}(φ_j, x_m)/(λ - λ_j)."""
    num = pt_numerators(spectrum)
    return np.einsum("jlm,j->lm", num, 1.0 / (lam - spectrum.eigenvalues))


def pt_numerators(spectrum):
    """Array (J, 2, 2) of (ν_l, φ_j)_{H*} (φ_j, x_m)_{L²}."""
    curve = spectrum.curve
    G = hstar_gram(curve)
    phi = spectrum.eigendensities
    nu_proj = phi @ G @ curve.normals  # (J, 2): (φ_j, ν_l)_{H*}
    x = curve.nodes - curve.center
    x_proj = (phi * curve.weights) @ x  # (J, 2): (φ_j, x_m)
    return nu_proj[:, :, None] * x_proj[:, None, :]


def far_field_leading(M, direction, x):
    """Leading far field of u - u^i for u^i = d·x: -(1/2π) d·M x / |x|²."""
    x = np.atleast_2d(np.asarray(x, float))
    return -(np.asarray(direction) @ M @ x.T) / (2 * np.pi * np.einsum("ij,ij->i", x, x))


def first_order_pt(lam, curve):
    return cgpt_block(lam, curve, 1, 1)
