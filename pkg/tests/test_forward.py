from types import SimpleNamespace

import numpy as np
import pytest
from conftest import loglog_slope
from scipy.special import binom

from plasmosense.bem import np_spectrum
from plasmosense.errors import (
    DegenerateEigenvalueError,
    InvalidArgumentError,
    NumericalError,
    PeakDetectionError,
    RegimeError,
)
from plasmosense.forward import (
    TwoParticleSystem,
    check_regime,
    contrast_from_frequency,
    coupled_pt,
    coupling_coefficients,
    r_jl_direct,
    r_jl_series,
    refine_peak,
    shift_exact,
    shift_p,
    sweep_and_peak,
)
from plasmosense.geometry import (
    make_circle,
    make_ellipse,
    recenter,
    rotate,
    scale_translate,
)
from plasmosense.gpt import cgpt_set, ellipse_pt_analytic, pt_spectral

DELTAS = (0.2, 0.1, 0.05)
Z = (4.5, 0.7)


def small(curve, delta):
    return recenter(scale_translate(curve, delta))


def circle_densities(rho, ks, n=128):
    c = make_circle(rho, n=n)
    return SimpleNamespace(curve=c, eigendensities=np.array([np.cos(k * c.t) for k in ks]),
                           eigenvalues=np.zeros(len(ks)), J=len(ks))


def test_coupling_coefficients_circle_oracle():
    # y = d + ρe^{it}: ∫ cos(kt) y^{-m} ρ dt = πρ d^{-m} C(-m, k) (ρ/d)^k, C(-m, k) = (-1)^k C(m+k-1, k)
    rho, d, ks = 1.0, 3.0, [1, 2, 3]
    sp = circle_densities(rho, ks)
    co = coupling_coefficients(sp, (d, 0.0), 4)
    for i, k in enumerate(ks):
        for m in range(1, 5):
            c = (-1) ** k * binom(m + k - 1, k)
            ref = -np.pi * rho * d**-m * c * (rho / d) ** k / (2 * np.pi * m)
            np.testing.assert_allclose(co.pair(i + 1, m), [ref, 0.0], atol=1e-12)


def test_coupling_coefficients_decay():
    sp = circle_densities(1.0, [1, 2])
    a1 = coupling_coefficients(sp, (3.0, 0.0), 5).a
    a2 = coupling_coefficients(sp, (6.0, 0.0), 5).a
    for m in range(1, 6):
        assert np.abs(a2[:, m - 1]).max() <= 1.1 * np.abs(a1[:, m - 1]).max() / 2**m


def test_decay_constant_in_regime(d2_spectrum):
    co = coupling_coefficients(d2_spectrum, Z, 6)
    assert np.all(np.isfinite(co.a))
    assert co.decay_constant() > 1


def test_regime_violation(d2_spectrum):
    with pytest.raises(RegimeError) as info:
        coupling_coefficients(d2_spectrum, (2.5, 0.0), 3)
    assert info.value.distance == pytest.approx(1.5, abs=1e-3)
    assert check_regime(d2_spectrum, (4.0, 0.0)) == pytest.approx(3.0, abs=1e-3)
    with pytest.raises(RegimeError):
        check_regime(d2_spectrum, (40.0, 0.0), c2=10.0)


@pytest.mark.parametrize("K", [2, 4, 6])
def test_series_matches_direct(d2_spectrum, shape_b, K):
    errs = []
    for d in DELTAS:
        D = small(shape_b, d)
        cg = cgpt_set(1.0, D, K, origin=(0, 0))
        co = coupling_coefficients(d2_spectrum, Z, K - 1)
        Rs = r_jl_series(co, cg, d2_spectrum.eigenvalues)
        Rd = r_jl_direct(D, 1.0, d2_spectrum, Z)
        errs.append(np.abs(Rs - Rd).max())
    assert loglog_slope(DELTAS, errs) >= K + 0.7


def test_series_order_mismatch(d2_spectrum, shape_b):
    co = coupling_coefficients(d2_spectrum, Z, 2)
    with pytest.raises(InvalidArgumentError):
        r_jl_series(co, cgpt_set(1.0, shape_b, 5), d2_spectrum.eigenvalues)


def test_series_zero_cgpts(d2_spectrum, shape_b):
    cg = cgpt_set(1.0, shape_b, 4)
    cg.blocks = {k: 0 * v for k, v in cg.blocks.items()}
    R = r_jl_series(coupling_coefficients(d2_spectrum, Z, 3), cg, d2_spectrum.eigenvalues)
    assert np.all(R == 0)


def test_direct_r_properties(d2_spectrum, shape_b):
    Rs = [r_jl_direct(small(shape_b, d), 1.0, d2_spectrum, Z) for d in DELTAS]
    assert abs(loglog_slope(DELTAS, [abs(R[0, 0]) for R in Rs]) - 2) < 0.1
    D = small(shape_b, 0.1)
    l2 = r_jl_direct(D, 1.0, d2_spectrum, Z, pairing="l2")
    assert np.abs(l2 - Rs[1]).max() < 1e-10 * np.abs(Rs[1]).max()
    assert np.abs(r_jl_direct(D, 1e6, d2_spectrum, Z)).max() < 1e-8
    near = abs(r_jl_direct(D, 1.0, d2_spectrum, (4.0, 0.0))[0, 0])
    far = abs(r_jl_direct(D, 1.0, d2_spectrum, (8.0, 0.0))[0, 0])
    assert far < near


def test_shift_series_basics(d2_spectrum):
    lam = d2_spectrum.eigenvalues
    J = len(lam)
    assert shift_p(np.zeros((J, J)), lam, 1) == 0
    R = np.random.default_rng(0).standard_normal((J, J)) * 1e-3
    assert shift_p(R, lam, 1, series_order=1) == R[0, 0]
    with pytest.raises(InvalidArgumentError):
        shift_p(R, lam, 1, series_order=0)
    with pytest.raises(InvalidArgumentError):
        shift_p(R, lam, J + 1)
    with pytest.raises(DegenerateEigenvalueError):
        shift_p(R, [-0.2, -0.2005, 0.1], 1)


def test_shift_series_converges(d2_spectrum, shape_b):
    lam = d2_spectrum.eigenvalues
    diffs, exact = [], []
    for d in DELTAS:
        R = r_jl_direct(small(shape_b, d), 1.0, d2_spectrum, Z)
        diffs.append(abs(shift_p(R, lam, 1, 3) - shift_p(R, lam, 1, 2)))
        exact.append(abs(shift_p(R, lam, 1, 6) - shift_exact(R, lam, 1)) / abs(R[0, 0]))
    assert loglog_slope(DELTAS, diffs) >= 5.7
    assert max(exact) < 1e-10


def test_coupled_pt_reductions(d2_spectrum):
    g = np.array([0.3 + 1e-4j, -0.05 + 0.01j])
    np.testing.assert_array_equal(coupled_pt(g, d2_spectrum), coupled_pt(g, d2_spectrum, np.zeros(d2_spectrum.J)))
    for lam in g:
        np.testing.assert_allclose(coupled_pt(lam, d2_spectrum), pt_spectral(lam, d2_spectrum), atol=1e-10)
    ref = ellipse_pt_analytic(0.4, 1, 2)
    assert np.abs(coupled_pt(0.4, d2_spectrum) - ref).max() < 1e-6 * np.abs(ref).max()
    with pytest.raises(NumericalError):
        coupled_pt(d2_spectrum.eigenvalues[0], d2_spectrum)


def test_peak_tracks_shift(d2_spectrum):
    P = np.zeros(d2_spectrum.J)
    P[0] = 2e-3
    sw = sweep_and_peak(d2_spectrum, P, 1, -0.2, -0.14, 601, 1e-4)
    assert sw.shift == pytest.approx(2e-3, rel=1e-3)
    sw0 = sweep_and_peak(d2_spectrum, None, 1, -0.2, -0.14, 601, 1e-4)
    assert abs(sw0.shift) < 1e-7


def test_refine_peak_lorentzian():
    x = np.linspace(-1, 1, 41)
    h = x[1] - x[0]
    for x0 in (0.013, -0.27, 0.5 + 0.3 * h):
        y = np.abs(1.0 / (x - x0 + 0.05j))
        assert abs(refine_peak(x, y) - x0) < 1e-2 * h
    with pytest.raises(PeakDetectionError):
        refine_peak(x, np.abs(1.0 / (x - 1.2 + 0.05j)))


def test_sweep_errors(d2_spectrum):
    with pytest.raises(PeakDetectionError):
        sweep_and_peak(d2_spectrum, None, 1, -0.16, -0.1, 201, 1e-4)
    # two modes coupling equally to entry (1,1): λ₁ = -1/6 and λ₃ = -1/18
    num = np.zeros((d2_spectrum.J, 2, 2))
    num[0, 0, 0] = num[2, 0, 0] = 1.0
    with pytest.raises(PeakDetectionError):
        sweep_and_peak(d2_spectrum, None, 1, -0.2, 0.0, 2001, 1e-4, numerators=num)


def test_sweep_matches_series(d2_spectrum, shape_b):
    sysm = TwoParticleSystem(d2_spectrum, small(shape_b, 0.05), 1.0)
    P = sysm.shift(Z)
    sw = sysm.sweep(Z)
    assert abs(sw.shift - P) < 0.05 * abs(P)
    empty = TwoParticleSystem(d2_spectrum)
    assert abs(empty.sweep(Z).shift) < 1e-8


def test_shift_depends_on_position(d2_spectrum, shape_b):
    sysm = TwoParticleSystem(d2_spectrum, small(shape_b, 0.1), 1.0)
    a, b = sysm.shift((4.5, 0.7)), sysm.shift((0.3, 4.8))
    assert abs(a - b) > 1e-3 * abs(a)


def test_rotation_invariance(shape_b):
    e = make_ellipse(1, 2, n=256)
    sp = np_spectrum(e, J=10)
    D = small(shape_b, 0.1)
    P = abs(TwoParticleSystem(sp, D, 1.0).shift(Z))
    th = 0.7
    sp_r = np_spectrum(rotate(e, th), J=10)
    np.testing.assert_allclose(sp_r.eigenvalues, sp.eigenvalues, atol=1e-8)
    zr = (np.cos(th) * Z[0] - np.sin(th) * Z[1], np.sin(th) * Z[0] + np.cos(th) * Z[1])
    Pr = abs(TwoParticleSystem(sp_r, rotate(D, th), 1.0).shift(zr))
    assert Pr == pytest.approx(P, rel=1e-8)


def test_drude_contrast():
    lam = contrast_from_frequency(1.0, 2.0, 0.0)
    # ε = -3, λ = (-3+1)/(2(-3-1)) = 1/4
    assert lam == pytest.approx(0.25)
