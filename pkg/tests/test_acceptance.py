"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""

import itertools
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE, loglog_slope, random_fourier

from plasmosense.bem import np_spectrum
from plasmosense.forward import (
    TwoParticleSystem,
    coupling_coefficients,
    r_jl_direct,
    r_jl_series,
)
from plasmosense.geometry import (
    make_ellipse,
    make_fourier_shape,
    make_rounded_polygon,
    perturb_normal,
    recenter,
    scale_translate,
)
from plasmosense.gpt import cgpt_block, cgpt_set, harmonic_sum_N1
from plasmosense.inverse import (
    cgpt_error,
    descend_shape,
    ek,
    initial_iterate,
    multi_ring_positions,
    recover_cgpt,
    ring_positions,
    shape_gradient,
    synthetic_measurements,
)

DELTAS = (0.2, 0.1, 0.05)
Z = (4.5, 0.7)
_cache = {}


def record(number, ok, detail):
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}")
    print(ACCEPTANCE[-1])
    assert ok, detail


def d2():
    if "d2" not in _cache:
        _cache["d2"] = np_spectrum(make_ellipse(1.0, 2.0, n=256), J=20)
    return _cache["d2"]


def reference_b():
    return make_fourier_shape(1.0, [0.1, 0.05, 0.2], [0.03, -0.1], n=128)


def small(curve, delta):
    return recenter(scale_translate(curve, delta))


def test_criterion_1_ellipse_spectrum():
    t0 = time.perf_counter()
    sp = np_spectrum(make_ellipse(1.0, 2.0, n=512), J=10)
    dt = time.perf_counter() - t0
    ref = np.ravel([[-0.5 / 3**j, 0.5 / 3**j] for j in range(1, 6)])
    err = np.abs(sp.eigenvalues - ref).max()
    record(1, err < 1e-8 and dt < 10, f"max eigenvalue error {err:.2e} (< 1e-8), {dt:.2f} s (< 10 s)")


def test_criterion_2_first_order_pt():
    M = cgpt_block(1.0, make_ellipse(1.0, 2.0, n=256), 1, 1)
    ref = np.diag([12 * np.pi / 7, 12 * np.pi / 5])
    err = np.abs(M - ref).max() / np.abs(ref).max()
    record(2, err < 1e-6, f"relative error {err:.2e} (< 1e-6)")


def test_criterion_3_symmetry_and_scaling():
    rng = np.random.default_rng(11)
    worst_sym, worst_exp = 0.0, 0.0
    for _ in range(5):
        B = random_fourier(rng, n=128)
        s = cgpt_set(1.0, B, 6)
        scale = max(np.abs(b).max() for b in s.blocks.values())
        worst_sym = max(worst_sym, max(np.abs(s[(m, n)] - s[(n, m)].T).max() for m, n in s.blocks) / scale)
        a = cgpt_set(1.0, scale_translate(B, 0.2), 6)
        b = cgpt_set(1.0, scale_translate(B, 0.1), 6)
        for m, n in s.blocks:
            p = np.log(np.linalg.norm(a[(m, n)]) / np.linalg.norm(b[(m, n)])) / np.log(2)
            worst_exp = max(worst_exp, abs(p - (m + n)))
    record(3, worst_sym < 1e-8 and worst_exp < 1e-3,
           f"symmetry defect {worst_sym:.1e} (< 1e-8), scaling exponent deviation {worst_exp:.1e} (< 1e-3)")


def test_criterion_4_series_vs_direct():
    t0 = time.perf_counter()
    B, sp = reference_b(), d2()
    slopes = {}
    for MN in (1, 2):
        K = 2 * MN
        errs = []
        for d in DELTAS:
            D = small(B, d)
            Rs = r_jl_series(coupling_coefficients(sp, Z, K - 1), cgpt_set(1.0, D, K, origin=(0, 0)),
                             sp.eigenvalues)
            errs.append(np.abs(Rs - r_jl_direct(D, 1.0, sp, Z)).max())
        slopes[MN] = loglog_slope(DELTAS, errs)
    dt = time.perf_counter() - t0
    ok = all(slopes[MN] >= 2 * MN + 0.7 for MN in slopes) and dt < 120
    record(4, ok, f"slopes M=N=1: {slopes[1]:.2f} (>= 2.7), M=N=2: {slopes[2]:.2f} (>= 4.7), {dt:.1f} s")


def test_criterion_5_shift_scaling():
    sp, B = d2(), reference_b()
    P = []
    for d in DELTAS:
        sw = TwoParticleSystem(sp, small(B, d), 1.0).sweep(Z, 1, imag=1e-4)
        assert -0.5 < sw.lam_r < 0.5
        P.append(abs(sw.shift))
    s = loglog_slope(DELTAS, P)
    record(5, 1.8 <= s <= 2.2, f"sweep-measured P1 slope {s:.3f} (in [1.8, 2.2]), P1(0.2) = {P[0]:.3e}")


def _stage_slope(k):
    sp, B = d2(), reference_b()
    errs = []
    for d in DELTAS:
        D = small(B, d)
        recs = synthetic_measurements(TwoParticleSystem(sp, D, 1.0), ring_positions(4.5, ek(k), 0.1))
        est, _ = recover_cgpt(recs, sp, k)
        errs.append(cgpt_error(est, cgpt_set(1.0, D, k, origin=(0, 0)), k))
    return loglog_slope(DELTAS, errs)


def test_criterion_6a_stage2_order():
    s = _stage_slope(2)
    record("6 (k=2)", s >= 2.5, f"stage-2 error slope {s:.2f} (>= 2.5)")


def test_criterion_6b_stage3_order():
    s = _stage_slope(3)
    record("6 (k=3)", s >= 4.5, f"stage-3 error slope {s:.2f} (>= 4.5)")


def test_criterion_6c_stage5_pipeline():
    sp = d2()
    D = small(make_fourier_shape(1.0, [0.0, 0.0, 0.2], n=128), 0.2)
    recs = synthetic_measurements(TwoParticleSystem(sp, D, 1.0), multi_ring_positions([4.2, 5.5], 22, 0.1))
    est, _ = recover_cgpt(recs, sp, 5)
    truth = cgpt_block(1.0, D, 1, 1)
    err = np.abs(est[(1, 1)] - truth).max() / np.abs(truth).max()
    record("6 (k=5)", len(recs) == 22 and err < 5e-3, f"22 positions, stage-5 M11 relative error {err:.2e} (< 5e-3)")


def test_criterion_7_shape_derivative():
    rng = np.random.default_rng(7)
    eps, worst = 1e-4, 0.0
    for _ in range(10):
        B = random_fourier(rng, n=128)
        h = sum(rng.uniform(-1, 1) * np.cos(k * B.t + rng.uniform(0, 2 * np.pi)) for k in range(6))
        o = B.center
        sp = cgpt_set(1.0, perturb_normal(B, h, eps), 4, origin=o)
        sm = cgpt_set(1.0, perturb_normal(B, h, -eps), 4, origin=o)
        for m, n in sp.blocks:
            fd = (harmonic_sum_N1(sp, m, n) - harmonic_sum_N1(sm, m, n)) / (2 * eps)
            an = np.sum(B.weights * h * shape_gradient(B, 1.0, m, n, origin=o))
            worst = max(worst, abs(an - fd) / abs(fd))
    record(7, worst < 1e-3, f"worst relative error over 10 pairs and m+n <= 4: {worst:.1e} (< 1e-3)")


def test_criterion_8_descent():
    t0 = time.perf_counter()
    sp = d2()
    D = make_fourier_shape(0.2, [0.0, 0.0, 0.04], n=128)
    recs = synthetic_measurements(TwoParticleSystem(sp, D, 1.0), multi_ring_positions([4.2, 5.5], 22, 0.1))
    target, _ = recover_cgpt(recs, sp, 5)
    traj = descend_shape(target, initial_iterate(target, 1.0, 5), 5, max_iters=30)
    dt = time.perf_counter() - t0
    J = [it.J for it in traj]
    strict = all(b < a for a, b in itertools.pairwise(J))
    ratio = J[-1] / J[0]
    ok = strict and len(traj) == 31 and ratio <= 0.2 and dt < 300
    record(8, ok, f"{len(traj) - 1} accepted steps, strictly decreasing: {strict}, "
                  f"J(30)/J(0) = {ratio:.3e} (<= 0.2), {dt:.1f} s")


def test_criterion_9_rounded_square():
    sp = d2()
    h = 0.26
    D = make_rounded_polygon([(h, 0), (0, h), (-h, 0), (0, -h)], n=256)
    recs = synthetic_measurements(TwoParticleSystem(sp, D, 1.0), multi_ring_positions([4.2, 5.5], 22, 0.1))
    est, _ = recover_cgpt(recs, sp, 5)
    M11, M13 = est[(1, 1)], est[(1, 3)]
    mean = 0.5 * np.trace(M11)
    iso = max(abs(M11[0, 0] - M11[1, 1]), abs(M11[0, 1]), abs(M11[1, 0])) / mean
    c = 0.5 * (M13[0, 0] - M13[1, 1])
    pattern = (M13[0, 0] > 0 and M13[1, 1] < 0 and abs(M13[0, 0] + M13[1, 1]) <= 0.25 * c
               and max(abs(M13[0, 1]), abs(M13[1, 0])) <= 0.25 * c)
    record(9, iso < 0.02 and pattern,
           f"M11 anisotropy {iso:.2e} (< 2e-2), M13 = [[{M13[0, 0]:.3e}, {M13[0, 1]:.1e}], "
           f"[{M13[1, 0]:.1e}, {M13[1, 1]:.3e}]] pattern diag(+c, -c): {pattern}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
