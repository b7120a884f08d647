import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import ellipe

from plasmosense.errors import InvalidArgumentError
from plasmosense.geometry import (
    curve_from_nodes,
    make_circle,
    make_ellipse,
    make_fourier_shape,
    make_rounded_polygon,
    perturb_normal,
    regular_polygon,
    rotate,
    scale_translate,
    shape_from_spec,
    spectral_derivative,
    write_curve_csv,
)

coef = st.floats(-0.12, 0.12)
fourier_shapes = st.builds(
    lambda r0, c, s: make_fourier_shape(r0, np.multiply(c, r0), np.multiply(s, r0), n=128),
    st.floats(0.5, 2.0),
    st.lists(coef, min_size=0, max_size=4),
    st.lists(coef, min_size=0, max_size=4),
)


def test_ellipse_parametrization_hits_axes():
    c = make_ellipse(1, 2, n=32)
    pts = {tuple(np.round(p, 12)) for p in c.nodes}
    for p in [(1, 0), (0, 2), (-1, 0), (0, -2)]:
        assert tuple(float(v) for v in p) in {tuple(abs(x) if x == 0 else x for x in q) for q in pts}


def test_ellipse_perimeter_matches_elliptic_integral():
    # 4 b E(1 - a²/b²) is independent of the quadrature used by the curve
    ref = 4 * 2 * ellipe(1 - 1 / 4)
    assert ref == pytest.approx(9.688448220547675, rel=1e-14)
    assert make_ellipse(1, 2, n=128).perimeter == pytest.approx(ref, rel=1e-13)


def test_circle_curvature_is_one():
    np.testing.assert_allclose(make_ellipse(1, 1, n=64).curvature, 1.0, atol=1e-14)
    np.testing.assert_allclose(make_circle(1.0, n=64).curvature, 1.0, atol=1e-14)


@pytest.mark.parametrize("bad", [{"a": 0, "b": 1}, {"a": 1, "b": -2}, {"a": 1, "b": 1, "n": 33}, {"a": 1, "b": 1, "n": 16}])
def test_ellipse_rejects_bad_input(bad):
    with pytest.raises(InvalidArgumentError):
        make_ellipse(**bad)


def test_fourier_positivity_error_names_t():
    with pytest.raises(InvalidArgumentError, match="t="):
        make_fourier_shape(1.0, [0.0, 0.0, 1.5])


def test_fourier_unit_circle_and_triangle_proxy():
    c = make_fourier_shape(1.0, n=64)
    np.testing.assert_allclose(c.curvature, 1.0, atol=1e-13)
    tri = make_fourier_shape(1.0, [0, 0, 0.2], n=120)
    # threefold symmetry: rotating by 2π/3 permutes the nodes
    rot = rotate(tri, 2 * np.pi / 3)
    np.testing.assert_allclose(np.roll(rot.nodes, 40, axis=0), tri.nodes, atol=1e-13)


def _fd(f, h):
    # sixth-order central differences, periodic
    d1 = (-np.roll(f, 3, 0) + 9 * np.roll(f, 2, 0) - 45 * np.roll(f, 1, 0)
          + 45 * np.roll(f, -1, 0) - 9 * np.roll(f, -2, 0) + np.roll(f, -3, 0)) / (60 * h)
    d2 = (2 * np.roll(f, 3, 0) - 27 * np.roll(f, 2, 0) + 270 * np.roll(f, 1, 0) - 490 * f
          + 270 * np.roll(f, -1, 0) - 27 * np.roll(f, -2, 0) + 2 * np.roll(f, -3, 0)) / (180 * h**2)
    return d1, d2


@given(st.lists(coef, min_size=3, max_size=3), st.lists(coef, min_size=3, max_size=3))
def test_fourier_curvature_matches_finite_differences(cos, sin):
    c = make_fourier_shape(1.0, cos, sin, n=512)
    d1, d2 = _fd(c.nodes, 2 * np.pi / 512)
    kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / np.hypot(*d1.T) ** 3
    np.testing.assert_allclose(c.curvature, kappa, atol=1e-6)


@given(fourier_shapes)
def test_frame_invariants(c):
    np.testing.assert_allclose(np.hypot(*c.normals.T), 1.0, atol=1e-13)
    np.testing.assert_allclose(np.hypot(*c.tangents.T), 1.0, atol=1e-13)
    np.testing.assert_allclose(np.einsum("ij,ij->i", c.normals, c.tangents), 0.0, atol=1e-13)
    assert np.all(np.einsum("ij,ij->i", c.nodes - c.centroid, c.normals) > 0)


@given(fourier_shapes)
def test_gauss_bonnet(c):
    assert np.sum(c.curvature * c.weights) == pytest.approx(2 * np.pi, abs=1e-8)


def _dense_polyline_length(curve_fn):
    pts = curve_fn(20000).nodes
    return np.sum(np.hypot(*(np.roll(pts, -1, 0) - pts).T))


@pytest.mark.parametrize(
    "make",
    [
        lambda n: make_ellipse(1, 2, n=n),
        lambda n: make_fourier_shape(1, [0.1, 0.05, 0.2], [0.03, -0.1], n=n),
        lambda n: make_rounded_polygon([(0, 0), (2, 0), (2, 1), (0, 1)], 0.2, n=n),
    ],
)
def test_perimeter_matches_dense_polyline(make):
    assert make(512).perimeter == pytest.approx(_dense_polyline_length(make), rel=1e-6)


def test_rounded_square_perimeter_and_curvature():
    sq = make_rounded_polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)], 0.2, n=256)
    exact = 8 - 8 * 0.2 + 2 * np.pi * 0.2
    assert sq.meta["exact_perimeter"] == pytest.approx(exact, rel=1e-14)
    assert sq.perimeter == pytest.approx(exact, rel=1e-6)
    tri = make_rounded_polygon(regular_polygon(3), 0.1, n=256)
    assert set(np.round(tri.curvature, 12)) == {0.0, 10.0}


def test_rounded_square_area_small_scale():
    d = 0.05
    sq = make_rounded_polygon([(-d, -d), (d, -d), (d, d), (-d, d)], 0.2 * d, n=512)
    exact = d**2 * (4 - (4 - np.pi) * 0.04)
    assert sq.meta["exact_area"] == pytest.approx(exact, rel=1e-13)
    x, y = sq.nodes.T
    shoelace = 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    assert shoelace == pytest.approx(exact, rel=1e-4)
    assert sq.area == pytest.approx(exact, rel=1e-5)
    np.testing.assert_allclose(sq.center, 0.0, atol=1e-15)


def test_rounded_polygon_errors():
    with pytest.raises(InvalidArgumentError, match="overlap"):
        make_rounded_polygon([(0, 0), (1, 0), (0, 1)], 2.0)
    with pytest.raises(InvalidArgumentError, match="convex"):
        make_rounded_polygon([(0, 0), (2, 0), (1, 0.1), (2, 2), (0, 2)])


def test_rounded_polygon_is_scale_covariant():
    # node placement must not depend on the absolute size
    verts = np.array([(1, 0), (0, 1), (-1, 0), (0, -1)], float)
    a = make_rounded_polygon(0.2 * verts, n=256)
    b = make_rounded_polygon(0.22 * verts, n=256)
    np.testing.assert_allclose(a.nodes / 0.2, b.nodes / 0.22, atol=1e-13)
    np.testing.assert_array_equal(a.curvature * 0.2 > 1, b.curvature * 0.22 > 1)


def test_scale_translate():
    c = make_ellipse(1, 2, n=64)
    same = scale_translate(c, 1.0)
    np.testing.assert_array_equal(same.nodes, c.nodes)
    small = scale_translate(make_circle(1.0, n=64), 0.05)
    np.testing.assert_allclose(small.curvature, 20.0, rtol=1e-14)
    with pytest.raises(InvalidArgumentError):
        scale_translate(c, 0.0)


@given(fourier_shapes, st.floats(0.01, 10), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_scale_translate_roundtrip(c, d, shift):
    s = scale_translate(c, d, shift)
    assert s.perimeter == pytest.approx(d * c.perimeter, rel=1e-12)
    back = scale_translate(s, 1 / d, -np.asarray(shift) / d)
    np.testing.assert_allclose(back.nodes, c.nodes, atol=1e-12)


def test_spectral_derivative_of_trig():
    t = 2 * np.pi * np.arange(64) / 64
    np.testing.assert_allclose(spectral_derivative(np.sin(3 * t)), 3 * np.cos(3 * t), atol=1e-12)
    np.testing.assert_allclose(spectral_derivative(np.sin(3 * t), 2), -9 * np.sin(3 * t), atol=1e-10)


def test_curve_from_nodes_recovers_frame():
    e = make_ellipse(1, 2, n=128)
    c = curve_from_nodes(e.nodes)
    np.testing.assert_allclose(c.normals, e.normals, atol=1e-12)
    np.testing.assert_allclose(c.curvature, e.curvature, atol=1e-10)


def test_perturb_normal_is_inflation_for_constant_h():
    c = make_circle(1.0, n=64)
    p = perturb_normal(c, np.ones(64), 0.1)
    np.testing.assert_allclose(np.hypot(*p.nodes.T), 1.1, atol=1e-14)


def test_shape_from_spec_and_csv(tmp_path):
    c = shape_from_spec({"kind": "ellipse", "a": 1, "b": 2, "n": 64, "scale": 0.5, "shift": [1, 0]})
    assert c.perimeter == pytest.approx(0.5 * 9.688448220547675, rel=1e-12)
    np.testing.assert_allclose(c.center, [1, 0])
    sq = shape_from_spec({"kind": "regular_polygon", "sides": 4, "n": 64})
    np.testing.assert_allclose(sq.center, 0, atol=1e-14)
    with pytest.raises(InvalidArgumentError, match="requires"):
        shape_from_spec({"kind": "ellipse", "a": 1})
    with pytest.raises(InvalidArgumentError, match="unknown"):
        shape_from_spec({"kind": "blob"})
    path = tmp_path / "c.csv"
    write_curve_csv(c, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "t,x,y,nx,ny,curvature" and len(rows) == 65
    assert float(rows[1].split(",")[1]) == c.nodes[0, 0]


def test_curve_is_immutable():
    c = make_ellipse(1, 2, n=32)
    with pytest.raises(ValueError):
        c.nodes[0, 0] = 3.0
