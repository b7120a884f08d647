"""Layer potentials and the Neumann–Poincaré operator on a closed curve.

Discretization is Nyström on the uniform parameter grid of a
:class:`~plasmosense.geometry.BoundaryCurve`:

* smooth kernels (K*, K, far evaluations) use the periodic trapezoid rule;
* the single layer splits off ``log(4 sin²((t-s)/2))`` and integrates it
  with Kress' trigonometric product weights.

Both are spectrally accurate for analytic curves.  Green's function is
``G(x, y) = log|x - y| / 2π``.
"""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConditioningError,
    InvalidArgumentError,
    NearBoundaryError,
    NumericalError,
    ResonanceProximityError,
)
from .geometry import spectral_derivative

RESONANCE_TOL = 1e-12

_cache = weakref.WeakKeyDictionary()


def _cached(curve, key, build):
    slot = _cache.setdefault(curve, {})
    if key not in slot:
        slot[key] = build()
    return slot[key]


@lru_cache(maxsize=16)
def _kress_weights(n):
    """Circulant weights R with ∫ log(4 sin²((t_i-s)/2)) f(s) ds ≈ Σ_j R_ij f(t_j)."""
    half = n // 2
    t = 2 * np.pi * np.arange(n) / n
    m = np.arange(1, half)
    col = -(2 * np.pi / half) * (np.cos(np.outer(t, m)) / m).sum(axis=1)
    col -= (np.pi / half**2) * np.cos(half * t)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    R = col[idx]
    R.setflags(write=False)
    return R


def _pairwise(curve):
    d = curve.nodes[:, None, :] - curve.nodes[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    return d, r2


def single_layer_matrix(curve):
    """Matrix of S_D on the boundary nodes (values of S_D[φ] at the nodes)."""

    def build():
        n = curve.n
        t = curve.t
        _, r2 = _pairwise(curve)
        dt = t[:, None] - t[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            smooth = 0.5 * np.log(r2) - 0.5 * np.log(4 * np.sin(dt / 2) ** 2)
        np.fill_diagonal(smooth, np.log(curve.speed))
        S = (0.5 * _kress_weights(n) + (2 * np.pi / n) * smooth) * curve.speed[None, :] / (2 * np.pi)
        S.setflags(write=False)
        return S

    return _cached(curve, "S", build)


def np_matrix(curve):
    """Nyström matrix of the NP operator K*_D (kernel ∂G/∂ν(x))."""

    def build():
        d, r2 = _pairwise(curve)
        np.fill_diagonal(r2, 1.0)
        num = np.einsum("ijk,ik->ij", d, curve.normals)
        K = num / (2 * np.pi * r2)
        np.fill_diagonal(K, curve.curvature / (4 * np.pi))
        K = K * curve.weights[None, :]
        K.setflags(write=False)
        return K

    return _cached(curve, "Kstar", build)


def np_transpose_matrix(curve):
    """K_D, the transpose of K*_D under the arclength pairing."""

    def build():
        w = curve.weights
        K = np_matrix(curve).T * w[None, :] / w[:, None]
        K.setflags(write=False)
        return K

    return _cached(curve, "K", build)


def mean_zero_basis(curve):
    """Orthonormal (Euclidean) basis of {φ : Σ w_i φ_i = 0}, shape (N, N-1)."""
    return _cached(curve, "Q", lambda: sla.null_space(curve.weights[None, :]))


def hstar_gram(curve):
    """Gram matrix of (φ, ψ)_{H*} = -(φ, S_D ψ) under the arclength pairing.

    Positive definiteness is certified on mean-zero densities.
    """

    def build():
        G = -curve.weights[:, None] * single_layer_matrix(curve)
        G = 0.5 * (G + G.T)
        Q = mean_zero_basis(curve)
        lo = np.linalg.eigvalsh(Q.T @ G @ Q)[0]
        if not lo > 0:
            raise ConditioningError(
                f"H* Gram matrix is not positive definite on mean-zero densities "
                f"(smallest eigenvalue {lo:.3e}); rescale the curve"
            )
        G.setflags(write=False)
        return G

    return _cached(curve, "gram", build)


def hstar_inner(curve, phi, psi):
    return phi @ hstar_gram(curve) @ psi


def l2_pair(curve, f, g):
    return np.sum(curve.weights * f * g)


@dataclass(frozen=True, eq=False)
class NPSpectrum:
    """Eigenpairs of K*_D on mean-zero densities, H*-orthonormal.

    ``eigendensities[j]`` is the nodal density of the j-th mode (0-based:
    index 0 is the tracked λ₁ of the ellipse experiments).
    """

    eigenvalues: np.ndarray
    eigendensities: np.ndarray
    gram: np.ndarray
    curve: object

    @property
    def J(self):
        return len(self.eigenvalues)

    def to_json(self):
        return json.dumps(
            {
                "n": self.curve.n,
                "J": self.J,
                "eigenvalues": [float(v) for v in self.eigenvalues],
                "eigendensities": [[float(v) for v in row] for row in self.eigendensities],
            }
        )


def _order_modes(lam):
    """Sort by |λ| descending; within a ±pair the negative value comes first."""
    order = list(np.argsort(-np.abs(lam), kind="stable"))
    changed = True
    while changed:
        changed = False
        for i in range(len(order) - 1):
            a, b = lam[order[i]], lam[order[i + 1]]
            if abs(abs(a) - abs(b)) < 1e-9 and a > b:
                order[i], order[i + 1] = order[i + 1], order[i]
                changed = True
    return np.array(order, dtype=int)


def np_spectrum(curve, J=None):
    """Symmetrized eigendecomposition of K*_D on H*(∂D).

    Solves the Gram-weighted symmetric problem Q^T G K* Q c = λ Q^T G Q c on
    the mean-zero subspace, so the discrete Plemelj symmetry is exact by
    construction.
    """
    n = curve.n
    J = n // 2 if J is None else int(J)
    if not 1 <= J <= n // 2:
        raise InvalidArgumentError(f"J must lie in [1, N/2] = [1, {n // 2}], got {J}")

    def build():
        G = hstar_gram(curve)
        Q = mean_zero_basis(curve)
        B = Q.T @ G @ Q
        A = Q.T @ G @ np_matrix(curve) @ Q
        A = 0.5 * (A + A.T)
        try:
            lam, C = sla.eigh(A, 0.5 * (B + B.T))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"NP eigen-solver failed: {exc}") from exc
        order = _order_modes(lam)
        phi = (Q @ C[:, order]).T
        # deterministic sign: largest-magnitude entry positive
        pivots = phi[np.arange(len(phi)), np.argmax(np.abs(phi), axis=1)]
        phi = phi * np.sign(pivots)[:, None]
        return lam[order], phi

    lam, phi = _cached(curve, "spectrum", build)
    return NPSpectrum(lam[:J].copy(), phi[:J].copy(), hstar_gram(curve), curve)


def _full_np_eigenvalues(curve):
    return _cached(curve, "eigvals", lambda: np.linalg.eigvals(np_matrix(curve)))


def resonance_distance(lam, curve):
    return float(np.min(np.abs(_full_np_eigenvalues(curve) - lam)))


class SecondKindSolver:
    """Factorized (λI - K*_D)^{-1} (or (λI - K_D)^{-1} with ``adjoint=True``)."""

    def __init__(self, lam, curve, adjoint=False):
        self.lam = complex(lam) if np.iscomplexobj(lam) or isinstance(lam, complex) else float(lam)
        self.curve = curve
        # |λ| > 1/2 is invertible in theory; only check near the spectrum
        if abs(lam) <= 0.5 + 1e-6:
            dist = resonance_distance(lam, curve)
            if dist < RESONANCE_TOL:
                raise ResonanceProximityError(lam, dist)
        K = np_transpose_matrix(curve) if adjoint else np_matrix(curve)
        A = self.lam * np.eye(curve.n) - K
        self._lu = sla.lu_factor(A, check_finite=False)

    def solve(self, rhs):
        return sla.lu_solve(self._lu, rhs, check_finite=False)

    __call__ = solve


def solve_second_kind(lam, curve, rhs):
    """Return (λI - K*_D)^{-1}[rhs]."""
    return SecondKindSolver(lam, curve).solve(np.asarray(rhs))


def solve_nonadjoint(lam, curve, rhs_trace):
    """Return (λI - K_D)^{-1}[rhs_trace]."""
    return SecondKindSolver(lam, curve, adjoint=True).solve(np.asarray(rhs_trace))


def tangential_derivative(curve, f):
    """∂f/∂T of nodal boundary values (spectral differentiation in t)."""
    return spectral_derivative(np.asarray(f), 1) / curve.speed.reshape((-1,) + (1,) * (np.ndim(f) - 1))


def _check_targets(curve, targets):
    d = targets[:, None, :] - curve.nodes[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    nearest = np.argmin(dist, axis=1)
    gap = dist[np.arange(len(targets)), nearest]
    bad = gap < curve.weights[nearest]
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NearBoundaryError(
            f"target {targets[i].tolist()} lies within one node spacing of the boundary; "
            "plain quadrature is inaccurate there",
            distance=float(gap[i]),
        )
    return d, dist**2


def eval_single_layer(curve, density, targets, check=True):
    """S_D[φ] at off-boundary targets by the trapezoid rule."""
    targets = np.atleast_2d(np.asarray(targets, float))
    if check:
        _, r2 = _check_targets(curve, targets)
    else:
        d = targets[:, None, :] - curve.nodes[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
    return (np.log(r2) / (4 * np.pi)) @ (curve.weights * np.asarray(density).T).T


def single_layer_gradient_matrices(curve, targets, check=True):
    """Matrices (Gx, Gy) with ∇S_D[φ](targets) = (Gx φ, Gy φ)."""
    targets = np.atleast_2d(np.asarray(targets, float))
    if check:
        d, r2 = _check_targets(curve, targets)
    else:
        d = targets[:, None, :] - curve.nodes[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
    c = curve.weights[None, :] / (2 * np.pi * r2)
    return d[..., 0] * c, d[..., 1] * c


def eval_single_layer_gradient(curve, density, targets, check=True):
    gx, gy = single_layer_gradient_matrices(curve, targets, check)
    density = np.asarray(density)
    return np.stack([gx @ density, gy @ density], axis=-1)


def eval_double_layer(curve, density, targets, check=True):
    """D_D[ψ](x) = ∫ ∂G(x, y)/∂ν(y) ψ(y) dσ(y) at off-boundary targets."""
    targets = np.atleast_2d(np.asarray(targets, float))
    if check:
        d, r2 = _check_targets(curve, targets)
    else:
        d = targets[:, None, :] - curve.nodes[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", d, d)
    ker = -np.einsum("ijk,jk->ij", d, curve.normals) / (2 * np.pi * r2)
    return (ker * curve.weights[None, :]) @ np.asarray(density)


def double_layer_normal_derivative(curve, density):
    """∂D_D[ψ]/∂ν on the boundary via Maue's identity d/ds S_D[dψ/ds]."""
    return tangential_derivative(curve, single_layer_matrix(curve) @ tangential_derivative(curve, density))
