"""Two-particle forward model: a small ordinary particle D₁ near a plasmonic D₂.

D₁ sits at the origin; D₂ is described by the NP spectrum of a reference
copy of its boundary and is translated so that its center lands at ``z``
(the spectrum is translation invariant, so one eigendecomposition serves
every position).

Eigen-indices ``j`` in the public functions follow the 1-based numbering
λ₁, λ₂, ... of :func:`plasmosense.bem.np_spectrum` ordering.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .bem import SecondKindSolver, single_layer_gradient_matrices, single_layer_matrix
from .errors import (
    DegenerateEigenvalueError,
    InvalidArgumentError,
    NumericalError,
    PeakDetectionError,
    RegimeError,
)
from .geometry import scale_translate
from .gpt import block_indices, pt_numerators

DEFAULT_GAP = 1e-3


def placed_curve(spectrum, z):
    """D₂'s boundary with its center moved to ``z``."""
    c = spectrum.curve
    return scale_translate(c, 1.0, np.asarray(z, float) - c.center)


def check_regime(spectrum, z, origin=(0.0, 0.0), c1=None, c2=np.inf):
    """Intermediate-regime test C₁ ≤ dist(origin, D₂) ≤ C₂; returns the distance."""
    curve = placed_curve(spectrum, z)
    c1 = 0.5 * spectrum.curve.diameter if c1 is None else c1
    r = np.hypot(*(curve.nodes - np.asarray(origin, float)).T)
    dist = float(r.min())
    if not c1 <= dist <= c2:
        raise RegimeError(
            f"D₂ at z={list(map(float, z))} is at distance {dist:.4g} from the origin; "
            f"intermediate regime requires [{c1:.4g}, {c2:.4g}]",
            distance=dist,
        )
    return dist


@dataclass
class CouplingCoefficients:
    """Harmonic moments a^j_m = (a^j_{m,c}, a^j_{m,s}) of D₂'s eigendensities.

    ``a[j-1, m-1]`` holds the pair for eigen-index j and order m.
    """

    a: np.ndarray
    z: np.ndarray
    m_max: int
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def pair(self, j, m):
        return self.a[j - 1, m - 1]

    def decay_constant(self):
        """Largest C with |a^j_m| ≤ C^{-m}/m for all j, m (fitted bound)."""
        mags = np.abs(self.a).max(axis=2)  # (J, M)
        m = np.arange(1, self.m_max + 1)
        with np.errstate(divide="ignore"):
            ratio = np.log(1.0 / (m * mags)) / m
        return float(np.exp(np.min(ratio[np.isfinite(ratio)])))


def coupling_coefficients(spectrum, z, m_max, origin=(0.0, 0.0), c1=None, c2=np.inf, check=True):
    """a^j_{m,c}, a^j_{m,s} = -(1/2πm) ∫ cos|sin(mθ_y)/r_y^m φ_j dσ for D₂ at ``z``."""
    if m_max < 1:
        raise InvalidArgumentError("m_max must be at least 1")
    if check:
        check_regime(spectrum, z, origin, c1, c2)
    curve = placed_curve(spectrum, z)
    y = (curve.nodes[:, 0] - origin[0]) + 1j * (curve.nodes[:, 1] - origin[1])
    m = np.arange(1, m_max + 1)
    inv = y[None, :] ** (-m[:, None])  # r^{-m} e^{-imθ}
    moments = (spectrum.eigendensities * curve.weights) @ inv.T  # (J, M)
    c = -moments / (2 * np.pi * m[None, :])
    a = np.stack([c.real, -c.imag], axis=-1)
    return CouplingCoefficients(a, np.asarray(z, float), int(m_max), np.asarray(origin, float))


def r_jl_series(coeffs, cgpts, eigenvalues):
    """R_{jl} ≈ (1/2 - λ_j) Σ_{m+n≤K} a^j_m M_{m,n} (a^l_n)^t over the blocks of ``cgpts``."""
    need = cgpts.order - 1
    if coeffs.m_max < need:
        raise InvalidArgumentError(
            f"CGPT order {cgpts.order} needs coupling coefficients up to m={need}, have {coeffs.m_max}"
        )
    lam = np.asarray(eigenvalues)
    J = len(lam)
    a = coeffs.a[:J]
    dtype = np.result_type(a, *(np.asarray(b) for b in cgpts.blocks.values()))
    R = np.zeros((J, J), dtype=dtype)
    for m, n in block_indices(cgpts.order):
        R += np.einsum("jx,xy,ly->jl", a[:, m - 1], cgpts[(m, n)], a[:, n - 1])
    return (0.5 - lam)[:, None] * R


def r_jl_direct(curve1, lam1, spectrum, z, pairing="hstar", solver=None):
    """R_{jl} = (A_{D₂,1}[φ_l], φ_j)_{H*} by explicit quadrature (no multipole series).

    ``pairing="l2"`` uses the equivalent form (1/2 - λ_j)(S_{D₁}[φ̃_l], φ_j)_{L²(∂D₂)}.
    """
    curve2 = placed_curve(spectrum, z)
    phi = spectrum.eigendensities  # (J, N2)
    gx, gy = single_layer_gradient_matrices(curve2, curve1.nodes)
    f = curve1.normals[:, :1] * (gx @ phi.T) + curve1.normals[:, 1:] * (gy @ phi.T)
    solver = SecondKindSolver(lam1, curve1) if solver is None else solver
    phit = solver.solve(f)  # (N1, J)
    if pairing == "l2":
        d = curve2.nodes[:, None, :] - curve1.nodes[None, :, :]
        Smat = np.log(np.einsum("ijk,ijk->ij", d, d)) / (4 * np.pi) * curve1.weights[None, :]
        F = Smat @ phit
        return (0.5 - spectrum.eigenvalues)[:, None] * ((phi * curve2.weights) @ F)
    if pairing != "hstar":
        raise InvalidArgumentError(f"unknown pairing {pairing!r}")
    hx, hy = single_layer_gradient_matrices(curve1, curve2.nodes)
    g = curve2.normals[:, :1] * (hx @ phit) + curve2.normals[:, 1:] * (hy @ phit)
    # (g_l, φ_j)_{H*} = -(S_{D₂} φ_j, g_l)
    Sphi = single_layer_matrix(curve2) @ phi.T
    return -(Sphi * curve2.weights[:, None]).T @ g


def _check_gap(lam, j, gap):
    others = np.delete(lam, j)
    if len(others) and np.min(np.abs(others - lam[j])) <= gap:
        raise DegenerateEigenvalueError(
            f"λ_{j + 1}={lam[j]:.6g} is not separated from the rest of the spectrum by {gap:g}"
        )


def series_order_for_accuracy(accuracy):
    """Number of R-factors kept so that every product R⋯R of size δ^{2n} has 2n ≤ accuracy."""
    return max(1, int(accuracy) // 2)


def shift_p(R, eigenvalues, j, series_order=4, gap=DEFAULT_GAP):
    """Perturbative shift P_j of the j-th resonance from the matrix R.

    Terms are the Rayleigh–Schrödinger corrections of diag(λ_{D₂} - λ) + R;
    order n collects products of n entries of R (size δ^{2n}).
    """
    R = np.asarray(R)
    lam = np.asarray(eigenvalues)
    jj = j - 1
    if not 0 <= jj < len(lam):
        raise InvalidArgumentError(f"eigen-index {j} outside 1..{len(lam)}")
    _check_gap(lam, jj, gap)
    if series_order < 1:
        raise InvalidArgumentError("series_order must be >= 1")
    denom = lam - lam[jj]  # e_j - e_l with e = -λ
    denom[jj] = 1.0
    mask = np.ones(len(lam), bool)
    mask[jj] = False
    psi = [np.zeros(len(lam), dtype=np.result_type(R, float))]
    psi[0][jj] = 1.0
    E = []
    for n in range(1, series_order + 1):
        Vpsi = R @ psi[n - 1]
        E.append(Vpsi[jj])
        if n == series_order:
            break
        nxt = Vpsi.copy()
        for k in range(1, n + 1):
            nxt = nxt - E[k - 1] * psi[n - k]
        nxt = np.where(mask, nxt / denom, 0.0)
        psi.append(nxt)
    return sum(E)


def shift_exact(R, eigenvalues, j):
    """P_j from the exact eigenvalue of diag(-λ) + R nearest to -λ_j."""
    lam = np.asarray(eigenvalues)
    ev = np.linalg.eigvals(np.diag(-lam).astype(np.result_type(R, float)) + R)
    k = np.argmin(np.abs(ev + lam[j - 1]))
    return ev[k] + lam[j - 1]


def all_shifts(R, eigenvalues, series_order=4, gap=DEFAULT_GAP):
    """P_l for every retained mode; modes without a spectral gap get R_ll."""
    P = np.array(np.diag(R), dtype=np.result_type(R, float))
    for l in range(1, len(eigenvalues) + 1):
        try:
            P[l - 1] = shift_p(R, eigenvalues, l, series_order, gap)
        except DegenerateEigenvalueError:
            pass
    return P


def coupled_pt(lam2, spectrum, P=None, numerators=None):
    """Far-field PT of the coupled system, Σ_j num_j / (λ_{D₂} - λ_j + P_j).

    ``lam2`` may be an array; the result then has shape (len(lam2), 2, 2).
    """
    num = pt_numerators(spectrum) if numerators is None else numerators
    P = np.zeros(spectrum.J) if P is None else np.asarray(P)
    lam2 = np.asarray(lam2)
    den = lam2[..., None] - spectrum.eigenvalues + P
    if np.any(den == 0):
        raise NumericalError("contrast hits a shifted resonance pole exactly")
    return np.einsum("jlm,...j->...lm", num, 1.0 / den)


@dataclass
class ResonanceSweep:
    lam: np.ndarray  # complex grid
    response: np.ndarray  # (len, 2): |M11|, |M22|
    lam_r: float
    j: int
    lam_j: float
    entry: tuple = (0, 0)

    @property
    def shift(self):
        return self.lam_j - self.lam_r

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_lambda", "im_lambda", "abs_M11", "abs_M22"])
            for lam, (m11, m22) in zip(self.lam, self.response):
                w.writerow([f"{lam.real:.17g}", f"{lam.imag:.17g}", f"{m11:.17g}", f"{m22:.17g}"])


def refine_peak(x, y):
    """Vertex of the parabola through 1/y² at the discrete argmax of ``y``.

    For a single Lorentzian-type pole |c/(x - x0 + iη)| the quantity 1/y² is
    exactly quadratic in x, so the refinement is exact there.
    """
    k = int(np.argmax(y))
    if k == 0 or k == len(y) - 1:
        raise PeakDetectionError("resonance peak sits at the end of the sweep window; widen the grid")
    q = 1.0 / y[k - 1 : k + 2] ** 2
    h = x[k + 1] - x[k]
    den = q[0] - 2 * q[1] + q[2]
    if den <= 0:
        return float(x[k])
    return float(x[k] + 0.5 * h * (q[0] - q[2]) / den)


def _check_single_peak(y, ratio=0.5):
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    peaks = np.flatnonzero(inner) + 1
    if len(peaks) > 1:
        h = np.sort(y[peaks])[::-1]
        if h[1] >= ratio * h[0]:
            raise PeakDetectionError(
                f"two comparable resonance peaks in the sweep window ({h[0]:.3e}, {h[1]:.3e})"
            )


def sweep_grid(re_min, re_max, count, imag=1e-4):
    return np.linspace(re_min, re_max, int(count)) + 1j * imag


def sweep_and_peak(spectrum, P, j, re_min=-0.5, re_max=0.5, count=2001, imag=1e-4,
                   entry=(0, 0), zoom=True, zoom_points=401, numerators=None):
    """Scan |M_entry(λ)| over Re λ and locate the resonance nearest λ_j.

    The discrete argmax of the coarse scan is refined on successively finer
    grids (spacing down to ~Im λ/40) and finally by a three-point parabola.
    """
    num = pt_numerators(spectrum) if numerators is None else numerators
    lam_j = float(spectrum.eigenvalues[j - 1])
    grid = sweep_grid(re_min, re_max, count, imag)
    resp = np.abs(coupled_pt(grid, spectrum, P, num))
    y = resp[:, entry[0], entry[1]]
    _check_single_peak(y)
    x = grid.real
    k = int(np.argmax(y))
    if k == 0 or k == len(y) - 1:
        raise PeakDetectionError("resonance peak sits at the end of the sweep window; widen the grid")
    fine_x, fine_y = x, y
    if zoom:
        h = x[1] - x[0]
        center = x[k]
        while h > abs(imag) / 40:
            half = 2 * h
            fine_x = np.linspace(center - half, center + half, zoom_points)
            g = fine_x + 1j * imag
            fine_y = np.abs(coupled_pt(g, spectrum, P, num))[:, entry[0], entry[1]]
            h = fine_x[1] - fine_x[0]
            center = fine_x[int(np.argmax(fine_y))]
    lam_r = refine_peak(fine_x, fine_y)
    return ResonanceSweep(grid, np.stack([resp[:, 0, 0], resp[:, 1, 1]], axis=1), lam_r, j, lam_j, entry)


# -- full system ---------------------------------------------------------------


@dataclass
class TwoParticleSystem:
    """Known plasmonic particle (through its spectrum) plus an optional D₁ at the origin."""

    spectrum: object
    d1: object = None
    lam1: complex = 1.0
    series_order: int = 4
    method: str = "direct"  # or "series"
    cgpts: object = None  # required for method="series"
    c1: float = None
    c2: float = np.inf

    def r_matrix(self, z):
        J = self.spectrum.J
        if self.d1 is None:
            return np.zeros((J, J))
        check_regime(self.spectrum, z, (0.0, 0.0), self.c1, self.c2)
        if self.method == "series":
            if self.cgpts is None:
                raise InvalidArgumentError("series method needs the CGPTs of D₁")
            co = coupling_coefficients(self.spectrum, z, self.cgpts.order - 1, check=False)
            return r_jl_series(co, self.cgpts, self.spectrum.eigenvalues)
        return r_jl_direct(self.d1, self.lam1, self.spectrum, z, solver=self._solver())

    def _solver(self):
        if getattr(self, "_cached_solver", None) is None:
            self._cached_solver = SecondKindSolver(self.lam1, self.d1)
        return self._cached_solver

    def shift(self, z, j=1):
        R = self.r_matrix(z)
        if self.d1 is None:
            return 0.0
        return shift_p(R, self.spectrum.eigenvalues, j, self.series_order)

    def shifts(self, z):
        return all_shifts(self.r_matrix(z), self.spectrum.eigenvalues, self.series_order)

    def sweep(self, z, j=1, half_width=None, count=2001, imag=1e-4, entry=(0, 0)):
        """Resonance sweep at position z with a window centred on λ_j."""
        P = self.shifts(z)
        if half_width is None:
            half_width = max(10 * abs(P[j - 1]), 50 * abs(imag), 1e-3)
        lam_j = float(self.spectrum.eigenvalues[j - 1])
        return sweep_and_peak(self.spectrum, P, j, lam_j - half_width, lam_j + half_width,
                              count, imag, entry)


# -- Drude conversion -------------------------------------------------------------


def drude_permittivity(omega, omega_p, gamma):
    return 1 - omega_p**2 / (omega * (omega + 1j * gamma))


def contrast_from_permittivity(eps, eps_m=1.0):
    return (eps + eps_m) / (2 * (eps - eps_m))


def contrast_from_frequency(omega, omega_p, gamma, eps_m=1.0):
    return contrast_from_permittivity(drude_permittivity(omega, omega_p, gamma), eps_m)


def write_measurements_json(records, path):
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in records], fh, indent=1)
