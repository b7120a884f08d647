"""Inverse problems: CGPTs from resonance shifts, then shape from CGPTs."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .bem import (
    SecondKindSolver,
    double_layer_normal_derivative,
    np_matrix,
    np_transpose_matrix,
    single_layer_matrix,
    tangential_derivative,
)
from .errors import (
    InsufficientDataError,
    InvalidArgumentError,
    MeasurementGeometryError,
    NumericalError,
    StallError,
)
from .forward import (
    coupling_coefficients,
    r_jl_series,
    series_order_for_accuracy,
    shift_p,
)
from .geometry import make_fourier_shape
from .gpt import CGPTSet, block_indices, cgpt_set, harmonic_polynomials, harmonic_sum_N1

log = logging.getLogger(__name__)


def ek(k):
    """Number of independent real unknowns among symmetric blocks with m + n ≤ k."""
    if int(k) != k or k < 2:
        raise InvalidArgumentError(f"e_k is defined for integers k >= 2, got {k}")
    k = int(k)
    return k * (k - 1) + (k // 2 if k % 2 == 0 else (k - 1) // 2)


# -- measurements ----------------------------------------------------------------


@dataclass
class MeasurementRecord:
    z: tuple
    j: int
    P: float
    lam_r: float = None
    noise: float = None

    def to_dict(self):
        d = {"z": [float(v) for v in self.z], "j": int(self.j), "P_j": float(np.real(self.P))}
        if self.lam_r is not None:
            d["lambda_r"] = float(self.lam_r)
        if self.noise is not None:
            d["noise"] = float(self.noise)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["z"]), int(d.get("j", 1)), float(d["P_j"]), d.get("lambda_r"), d.get("noise"))


def load_measurements(path):
    with open(path) as fh:
        return [MeasurementRecord.from_dict(d) for d in json.load(fh)]


def save_measurements(records, path):
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in records], fh, indent=1)


def ring_positions(radius, count, offset=0.0):
    """``count`` points equally spaced on a circle about the origin."""
    th = offset + 2 * np.pi * np.arange(count) / count
    return [(float(radius * np.cos(t)), float(radius * np.sin(t))) for t in th]


def multi_ring_positions(radii, count, offset=0.0):
    """Equally spaced angles; radii cycle through ``radii``."""
    th = offset + 2 * np.pi * np.arange(count) / count
    r = np.resize(np.asarray(radii, float), count)
    return [(float(ri * np.cos(t)), float(ri * np.sin(t))) for ri, t in zip(r, th)]


def synthetic_measurements(system, positions, j=1, noise=0.0, rng=None):
    """Noiseless (or multiplicatively noisy) shifts from a forward model."""
    out = []
    for z in positions:
        P = float(np.real(system.shift(z, j)))
        if noise:
            P *= 1 + noise * rng.standard_normal()
        out.append(MeasurementRecord(tuple(z), j, P, noise=noise or None))
    return out


# -- staged CGPT recovery ------------------------------------------------------------


def unknown_layout(k):
    """[(m, n, entries)] for the independent parameters of blocks with m ≤ n, m + n ≤ k."""
    lay = []
    for m, n in block_indices(k):
        if m < n:
            lay.append((m, n, [(0, 0), (0, 1), (1, 0), (1, 1)]))
        elif m == n:
            lay.append((m, n, [(0, 0), (0, 1), (1, 1)]))
    return lay


def design_row(a, k, lam_j):
    """Coefficients of P̃ ≈ (1/2 - λ_j) Σ a_m M_{m,n} a_n^t in the packed unknowns."""
    row = []
    for m, n, entries in unknown_layout(k):
        am, an = a[m - 1], a[n - 1]
        for p, q in entries:
            if m < n:
                row.append(2 * am[p] * an[q])
            elif p == q:
                row.append(am[p] * am[p])
            else:
                row.append(2 * am[0] * am[1])
    return (0.5 - lam_j) * np.array(row)


def unpack(x, k, contrast, origin=(0.0, 0.0)):
    blocks = {}
    i = 0
    for m, n, entries in unknown_layout(k):
        X = np.zeros((2, 2), dtype=x.dtype)
        for p, q in entries:
            X[p, q] = x[i]
            i += 1
        if m == n:
            X[1, 0] = X[0, 1]
            blocks[(m, m)] = X
        else:
            blocks[(m, n)] = X
            blocks[(n, m)] = X.T.copy()
    return CGPTSet(k, contrast, {mn: blocks[mn] for mn in block_indices(k)}, tuple(origin), "recovered")


@dataclass
class RecoveryState:
    k: int
    cgpts: CGPTSet
    residual: float
    rank: int
    condition: float
    corrected: np.ndarray = field(repr=False, default=None)


def recover_cgpt(measurements, spectrum, K, lam1=1.0, rcond=1e-12, stage_subset=False):
    """Staged least-squares recovery of M_{m,n}, m + n ≤ K, from shift data.

    Stage k fits corrected data P̃^{(k-1)} (higher-order perturbation terms
    removed using stage k-1 estimates) with the e_k symmetric unknowns.
    With ``stage_subset`` only the first e_k records enter stage k.
    Returns (CGPTSet, list of RecoveryState).
    """
    if K < 2:
        raise InvalidArgumentError("recovery order K must be >= 2")
    recs = list(measurements)
    if len(recs) < ek(K):
        raise InsufficientDataError(
            f"order {K} needs at least e_{K}={ek(K)} measurements, got {len(recs)}"
        )
    lam = spectrum.eigenvalues
    coeffs = [coupling_coefficients(spectrum, r.z, K - 1) for r in recs]
    P = np.array([r.P for r in recs], float)
    js = [r.j for r in recs]
    states = []
    prev = None
    for k in range(2, K + 1):
        use = ek(k) if stage_subset else len(recs)
        Pt = P.copy()
        if prev is not None:
            order = series_order_for_accuracy(k + 1)
            for i in range(use):
                R = r_jl_series(coeffs[i], prev, lam)
                Pt[i] -= np.real(shift_p(R, lam, js[i], order) - R[js[i] - 1, js[i] - 1])
        A = np.array([design_row(coeffs[i].a[js[i] - 1], k, lam[js[i] - 1]) for i in range(use)])
        scale = np.linalg.norm(A, axis=0)
        scale[scale == 0] = 1.0
        As = A / scale
        s = np.linalg.svd(As, compute_uv=False)
        rank = int(np.sum(s > rcond * s[0]))
        if rank < As.shape[1]:
            raise MeasurementGeometryError(
                f"stage {k}: design matrix has rank {rank} < {As.shape[1]} unknowns; "
                "use more diverse measurement positions"
            )
        y, *_ = np.linalg.lstsq(As, Pt[:use], rcond=None)
        x = y / scale
        res = float(np.linalg.norm(A @ x - Pt[:use]))
        prev = unpack(x, k, lam1)
        states.append(RecoveryState(k, prev, res, rank, float(s[0] / s[-1]), Pt[:use]))
        log.info("stage %d: residual %.3e cond %.3e", k, res, s[0] / s[-1])
    return prev, states


def stage_report_rows(states, truth=None):
    """Rows (stage, residual, block, entries..., delta) for the stage CSV."""
    rows = []
    for st in states:
        for mn in block_indices(st.k):
            b = st.cgpts[mn]
            delta = float(np.abs(b - truth[mn]).max()) if truth is not None else float("nan")
            rows.append([st.k, st.residual, f"{mn[0]},{mn[1]}", *np.ravel(b).tolist(), delta])
    return rows


def write_stage_report(states, path, truth=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "residual", "block", "cc", "cs", "sc", "ss", "delta"])
        for row in stage_report_rows(states, truth):
            w.writerow([row[0], f"{row[1]:.17g}", row[2]] + [f"{v:.17g}" for v in row[3:]])


def cgpt_error(est, truth, k):
    return float(np.sqrt(sum(np.sum(np.abs(est[mn] - truth[mn]) ** 2) for mn in block_indices(k))))


# -- transmission problems and shape derivative -------------------------------------


def k_lambda(lam):
    """Interior conductivity (2λ + 1)/(2λ - 1) of contrast λ (background 1)."""
    return (2 * lam + 1) / (2 * lam - 1)


def _solver(curve, lam, adjoint, cache):
    key = ("K" if adjoint else "K*", lam)
    if cache is None:
        return SecondKindSolver(lam, curve, adjoint)
    if key not in cache:
        cache[key] = SecondKindSolver(lam, curve, adjoint)
    return cache[key]


def transmission_traces_u(B, lam, m, origin=None, cache=None):
    """Interior traces (∂u/∂ν|₋, ∂u/∂T|₋) for u = P_m + S_B[φ], φ = (λ - K*)^{-1}[∂P_m/∂ν].

    u solves the transmission problem with ∂u/∂ν|₊ = k_λ ∂u/∂ν|₋ and
    u - (x₁ + i x₂)^m → 0 at infinity.  Complex valued.
    """
    P, dP = harmonic_polynomials(B, m, origin)
    phi = _solver(B, lam, False, cache).solve(dP[m].astype(complex))
    dn = dP[m] + (-0.5 * phi + np_matrix(B) @ phi)
    dt = tangential_derivative(B, P[m] + single_layer_matrix(B) @ phi)
    return dn, dt


def transmission_traces_v(B, lam, n, origin=None, cache=None):
    """Interior traces (∂v/∂ν|₋, ∂v/∂T|₋) for v = P_n + D_B[ψ], ψ = (λ - K)^{-1}[P_n].

    v solves k_λ v|₊ = v|₋ with continuous flux and v - (x₁ + i x₂)^n → 0.
    """
    P, dP = harmonic_polynomials(B, n, origin)
    psi = _solver(B, lam, True, cache).solve(P[n].astype(complex))
    inner = P[n] + 0.5 * psi + np_transpose_matrix(B) @ psi
    dn = dP[n] + double_layer_normal_derivative(B, psi)
    dt = tangential_derivative(B, inner)
    return dn, dt


def shape_gradient(B, lam, m, n, origin=None, cache=None, traces=None):
    """w_{m,n} = (k-1)[∂u/∂ν ∂v/∂ν + (1/k) ∂u/∂T ∂v/∂T] (interior traces).

    ⟨w_{m,n}, h⟩_{L²(∂B)} is the derivative of N^(1)_{m,n} under x ↦ x + εhν.
    """
    k = k_lambda(lam)
    if traces is None:
        un, ut = transmission_traces_u(B, lam, m, origin, cache)
        vn, vt = transmission_traces_v(B, lam, n, origin, cache)
    else:
        (un, ut), (vn, vt) = traces["u"][m], traces["v"][n]
    return (k - 1) * (un * vn + ut * vt / k)


def n1_values(cgpts, K):
    return {mn: harmonic_sum_N1(cgpts, *mn) for mn in block_indices(K)}


def objective_jc(target, B, lam, K, origin=(0.0, 0.0)):
    """½ Σ_{m+n≤K} |N^(1)_{mn}(λ, B) - N^(1)_{mn}(target)|² over both orderings."""
    if target.order < K:
        raise InvalidArgumentError(f"target CGPTs have order {target.order} < {K}")
    cur = cgpt_set(lam, B, K, origin)
    return _jc(n1_values(target, K), n1_values(cur, K))


def _jc(tn, cn):
    return 0.5 * float(sum(abs(cn[mn] - tn[mn]) ** 2 for mn in tn))


def objective_and_gradient(target_n1, B, lam, K, origin, h_basis):
    """J_c and its derivative along each normal perturbation in ``h_basis`` (rows)."""
    cache = {}
    cur = cgpt_set(lam, B, K, origin, solver=_solver(B, lam, False, cache))
    cn = n1_values(cur, K)
    J = _jc(target_n1, cn)
    traces = {
        "u": {m: transmission_traces_u(B, lam, m, origin, cache) for m in range(1, K)},
        "v": {n: transmission_traces_v(B, lam, n, origin, cache) for n in range(1, K)},
    }
    g = np.zeros(len(h_basis))
    hw = h_basis * B.weights
    for (m, n), val in cn.items():
        w = shape_gradient(B, lam, m, n, traces=traces)
        g += np.real(np.conj(val - target_n1[(m, n)]) * (hw @ w))
    return J, g


# -- shape descent --------------------------------------------------------------------


@dataclass
class ShapeIterate:
    """Radial Fourier shape r(t) = r0 + Σ a_k cos kt + b_k sin kt about ``center``."""

    r0: float
    cos: tuple
    sin: tuple
    lam: float
    J: float = float("nan")
    iteration: int = 0
    step: float = 0.0
    center: tuple = (0.0, 0.0)

    def curve(self, n=128):
        return make_fourier_shape(self.r0, self.cos, self.sin, self.center, n)

    @property
    def modes(self):
        return max(len(self.cos), len(self.sin))

    def params(self):
        """Descent parameters: r0 and modes 2..L (mode 1 ≈ translation, held fixed)."""
        L = self.modes
        cos = np.resize(np.r_[self.cos, np.zeros(L)][:L], L)
        sin = np.resize(np.r_[self.sin, np.zeros(L)][:L], L)
        return np.r_[self.r0, cos[1:], sin[1:]]

    def with_params(self, p, **kw):
        L = self.modes
        cos = np.r_[self.cos[0] if self.cos else 0.0, p[1:L]]
        sin = np.r_[self.sin[0] if self.sin else 0.0, p[L:]]
        d = {"r0": float(p[0]), "cos": tuple(map(float, cos)), "sin": tuple(map(float, sin)),
             "lam": self.lam, "center": self.center}
        d.update(kw)
        return ShapeIterate(**d)

    def scaled(self, s):
        return ShapeIterate(self.r0 * s, tuple(c * s for c in self.cos), tuple(c * s for c in self.sin),
                            self.lam, self.J, self.iteration, self.step * s,
                            tuple(s * c for c in self.center))

    def to_dict(self):
        return {"r0": self.r0, "cos": list(self.cos), "sin": list(self.sin), "lambda": self.lam,
                "J_c": self.J, "iteration": self.iteration, "center": list(self.center)}


def _h_basis(it, B):
    """Normal components of the node displacements induced by each parameter."""
    t = B.t
    e = np.column_stack([np.cos(t), np.sin(t)])
    en = np.einsum("ij,ij->i", e, B.normals)
    L = it.modes
    rows = [np.ones_like(t)]
    rows += [np.cos(k * t) for k in range(2, L + 1)]
    rows += [np.sin(k * t) for k in range(2, L + 1)]
    return np.array(rows) * en


def descend_shape(target, init, K, max_iters=30, n=128, c_armijo=1e-4, step0=0.05,
                  max_halvings=30, rtol=1e-8, callback=None):
    """Gradient descent with Armijo backtracking on J_c over radial Fourier modes.

    The first trial step moves the parameters by ``step0 * r0`` along the
    negative gradient; later trials start from twice the last accepted step.
    Iteration also stops once J_c reaches the round-off floor, where the
    N^(1) mismatch is a few ulps of the target values.
    Returns the list of accepted iterates (index 0 is ``init``).
    """
    lam = init.lam
    origin = np.asarray(init.center, float)
    tn = n1_values(target, K)
    floor = 0.5 * (64 * np.finfo(float).eps) ** 2 * sum(abs(v) ** 2 for v in tn.values())

    def evaluate(cand):
        B = cand.curve(n)
        return objective_and_gradient(tn, B, lam, K, origin, _h_basis(cand, B))

    it = ShapeIterate(init.r0, tuple(init.cos), tuple(init.sin), lam, center=tuple(origin))
    J, g = evaluate(it)
    it.J = J
    traj = [it]
    if callback:
        callback(it)
    step = step0 * it.r0 / max(np.linalg.norm(g), 1e-300)
    for i in range(1, max_iters + 1):
        if J <= floor or not np.any(g):
            break
        p = it.params()
        gg = float(g @ g)
        accepted = None
        t = step
        for _ in range(max_halvings):
            try:
                cand = it.with_params(p - t * g)
                Jc, gc = evaluate(cand)
            except (InvalidArgumentError, NumericalError):
                # radius positivity (or a resonant geometry) violated: shorten
                t *= 0.5
                continue
            if Jc <= J - c_armijo * t * gg:
                accepted = (cand, Jc, gc)
                break
            t *= 0.5
        if accepted is None:
            raise StallError(f"no descent step found at iteration {i}", last_iterate=it)
        cand, Jc, gc = accepted
        cand.J, cand.iteration, cand.step = Jc, i, t
        rel = (J - Jc) / J
        it, J, g = cand, Jc, gc
        traj.append(it)
        if callback:
            callback(it)
        step = 2 * t
        if rel < rtol:
            break
    return traj


def write_trajectory_csv(traj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "J_c", "step"])
        for x in traj:
            w.writerow([x.iteration, f"{x.J:.17g}", f"{x.step:.17g}"])


def write_shape_outputs(it, prefix, n=256):
    """``<prefix>.json`` with the Fourier coefficients, ``<prefix>.csv`` with a polyline."""
    with open(f"{prefix}.json", "w") as fh:
        json.dump(it.to_dict(), fh, indent=1)
    it.curve(n).to_csv(f"{prefix}.csv")


# -- initialisation ---------------------------------------------------------------------


def equivalent_ellipse(M11, lam):
    """Semi-axes (a, b) and angle of the ellipse whose first-order PT is ``M11``.

    The semi-axis ``a`` lies along ``(cos angle, sin angle)``, chosen as the
    eigenvector with the smaller eigenvalue; angle in [0, π).
    """
    M = np.asarray(M11)
    if np.iscomplexobj(M) and np.max(np.abs(M.imag)) > 1e-12 * np.max(np.abs(M)):
        raise NumericalError("equivalent ellipse needs a real polarization tensor")
    M = np.real(M)
    if np.max(np.abs(M - M.T)) > 1e-8 * np.max(np.abs(M)):
        raise NumericalError("polarization tensor is not symmetric")
    mu, V = np.linalg.eigh(0.5 * (M + M.T))
    if lam <= 0.5 or np.any(mu <= 0):
        raise NumericalError("no equivalent ellipse: need λ > 1/2 and a positive definite tensor")
    inv = 1.0 / mu
    area = 2 * lam / (np.pi * inv.sum())  # ab
    s = 2 * lam * (mu[0] - mu[1]) / (mu[0] + mu[1])  # (a - b)/(a + b)
    if not abs(s) < 1:
        raise NumericalError("eigenvalues of the tensor are inconsistent with any ellipse")
    a = np.sqrt(area * (1 + s) / (1 - s))
    b = np.sqrt(area * (1 - s) / (1 + s))
    v = V[:, 0]
    angle = float(np.mod(np.arctan2(v[1], v[0]), np.pi))
    if abs(mu[0] - mu[1]) <= 1e-12 * abs(mu[1]):
        angle = 0.0
    if abs(angle - np.pi) < 1e-12:
        angle = 0.0
    return float(a), float(b), angle


def ellipse_as_fourier(a, b, angle, modes, lam, center=(0.0, 0.0), n=512):
    """Least-squares radial Fourier fit (modes ≤ ``modes``) of an ellipse."""
    t = 2 * np.pi * np.arange(n) / n
    c, s = np.cos(t - angle), np.sin(t - angle)
    r = a * b / np.sqrt((b * c) ** 2 + (a * s) ** 2)
    cos = [2 * np.mean(r * np.cos(k * t)) for k in range(1, modes + 1)]
    sin = [2 * np.mean(r * np.sin(k * t)) for k in range(1, modes + 1)]
    cos[0] = sin[0] = 0.0
    return ShapeIterate(float(np.mean(r)), tuple(cos), tuple(sin), lam, center=tuple(center))


def initial_iterate(target, lam, K, modes=None, center=(0.0, 0.0)):
    a, b, ang = equivalent_ellipse(target[(1, 1)], lam)
    return ellipse_as_fourier(a, b, ang, K + 2 if modes is None else modes, lam, center)
