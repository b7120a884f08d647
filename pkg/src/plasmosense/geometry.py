"""Discretized smooth closed curves.

All curves are sampled at N uniform parameter values t_k = 2πk/N and carry
exact (or spectrally differentiated) geometric data, which is what the
periodic Nyström rules in :mod:`plasmosense.bem` need.  Orientation is
counterclockwise, so the outward normal is the tangent rotated by -90°.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import InvalidArgumentError

MIN_NODES = 32


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_node_count(n):
    if int(n) != n or n < MIN_NODES or n % 2:
        raise InvalidArgumentError(f"node count must be an even integer >= {MIN_NODES}, got {n}")
    return int(n)


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Immutable sampled closed curve.

    ``speed`` is |x'(t)| so that ``weights = speed * 2π/N`` are the
    arclength trapezoid weights.
    """

    nodes: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    speed: np.ndarray
    curvature: np.ndarray
    center: np.ndarray
    label: str = "curve"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("nodes", "tangents", "normals", "speed", "curvature", "center"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        check_node_count(len(self.nodes))

    @property
    def n(self):
        return len(self.nodes)

    @property
    def param_period(self):
        return 2 * np.pi

    @property
    def t(self):
        return 2 * np.pi * np.arange(self.n) / self.n

    @property
    def weights(self):
        return self.speed * (2 * np.pi / self.n)

    @property
    def perimeter(self):
        return float(self.weights.sum())

    @property
    def area(self):
        return float(0.5 * np.sum(np.einsum("ij,ij->i", self.nodes, self.normals) * self.weights))

    @property
    def centroid(self):
        # ∫_D x dx = ½ ∮ |x|² ν dσ
        r2 = np.einsum("ij,ij->i", self.nodes, self.nodes)
        return 0.5 * (r2 * self.weights) @ self.normals / self.area

    @property
    def diameter(self):
        d = self.nodes[:, None, :] - self.nodes[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))

    @property
    def complex_nodes(self):
        return self.nodes[:, 0] + 1j * self.nodes[:, 1]

    def to_csv(self, path):
        write_curve_csv(self, path)


def _from_derivatives(x, dx, ddx, center, label, meta=None):
    speed = np.hypot(dx[:, 0], dx[:, 1])
    if np.any(speed <= 0):
        raise InvalidArgumentError("degenerate parametrization: zero speed")
    tang = dx / speed[:, None]
    normals = np.column_stack([tang[:, 1], -tang[:, 0]])
    curv = (dx[:, 0] * ddx[:, 1] - dx[:, 1] * ddx[:, 0]) / speed**3
    return BoundaryCurve(x, tang, normals, speed, curv, center, label, meta or {})


def make_ellipse(a, b, center=(0.0, 0.0), n=256, angle=0.0):
    """Ellipse with semi-axis ``a`` along direction ``angle`` and ``b`` across it."""
    if a <= 0 or b <= 0:
        raise InvalidArgumentError(f"semi-axes must be positive, got a={a}, b={b}")
    n = check_node_count(n)
    t = 2 * np.pi * np.arange(n) / n
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    x = np.column_stack([a * np.cos(t), b * np.sin(t)]) @ rot.T + np.asarray(center, float)
    dx = np.column_stack([-a * np.sin(t), b * np.cos(t)]) @ rot.T
    ddx = np.column_stack([-a * np.cos(t), -b * np.sin(t)]) @ rot.T
    meta = {"kind": "ellipse", "a": float(a), "b": float(b), "angle": float(angle)}
    return _from_derivatives(x, dx, ddx, center, "ellipse", meta)


def make_circle(radius=1.0, center=(0.0, 0.0), n=256):
    return make_ellipse(radius, radius, center, n)


def fourier_radius(t, r0, cos=(), sin=(), deriv=0):
    """Evaluate r(t) = r0 + Σ a_k cos kt + b_k sin kt (or its derivatives)."""
    t = np.asarray(t, float)
    r = np.full_like(t, r0 if deriv == 0 else 0.0)
    for k, ak in enumerate(cos, start=1):
        r += ak * k**deriv * np.cos(k * t + deriv * np.pi / 2)
    for k, bk in enumerate(sin, start=1):
        r += bk * k**deriv * np.sin(k * t + deriv * np.pi / 2)
    return r


def make_fourier_shape(r0, cos=(), sin=(), center=(0.0, 0.0), n=128):
    """Star-shaped curve x(t) = center + r(t)(cos t, sin t).

    ``cos[k-1]`` and ``sin[k-1]`` are the coefficients of mode k.
    """
    n = check_node_count(n)
    cos, sin = tuple(float(c) for c in cos), tuple(float(s) for s in sin)
    fine = np.linspace(0, 2 * np.pi, 64 * n, endpoint=False)
    rf = fourier_radius(fine, r0, cos, sin)
    if np.any(rf <= 0):
        bad = fine[np.argmin(rf)]
        raise InvalidArgumentError(f"radius is non-positive at t={bad:.6f} (r={rf.min():.3e})")
    t = 2 * np.pi * np.arange(n) / n
    r = fourier_radius(t, r0, cos, sin)
    dr = fourier_radius(t, r0, cos, sin, 1)
    ddr = fourier_radius(t, r0, cos, sin, 2)
    e = np.column_stack([np.cos(t), np.sin(t)])
    ep = np.column_stack([-np.sin(t), np.cos(t)])
    c0 = np.asarray(center, float)
    x = c0 + r[:, None] * e
    dx = dr[:, None] * e + r[:, None] * ep
    ddx = (ddr - r)[:, None] * e + 2 * dr[:, None] * ep
    meta = {"kind": "fourier", "r0": float(r0), "cos": list(cos), "sin": list(sin)}
    return _from_derivatives(x, dx, ddx, c0, "fourier", meta)


def spectral_derivative(f, order=1):
    """d^k f/dt^k of 2π-periodic samples (real or complex), Nyquist mode dropped."""
    n = f.shape[0]
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    fh = np.fft.fft(f, axis=0)
    mult = (1j * k) ** order
    out = np.fft.ifft(fh * mult.reshape((-1,) + (1,) * (f.ndim - 1)), axis=0)
    return out if np.iscomplexobj(f) else out.real


def curve_from_nodes(nodes, center=None, label="sampled"):
    """Build a curve from uniform-parameter samples using FFT differentiation."""
    nodes = np.asarray(nodes, float)
    dx = spectral_derivative(nodes, 1)
    ddx = spectral_derivative(nodes, 2)
    if center is None:
        center = nodes.mean(axis=0)
    return _from_derivatives(nodes, dx, ddx, center, label)


def perturb_normal(curve, h, eps):
    """Curve with nodes x + eps·h(x)·ν(x); center is kept."""
    h = np.asarray(h, float)
    pts = curve.nodes + eps * h[:, None] * curve.normals
    return curve_from_nodes(pts, center=curve.center, label=curve.label)


def scale_translate(curve, delta, shift=(0.0, 0.0)):
    """Image of ``curve`` under x ↦ δx + shift."""
    if delta <= 0:
        raise InvalidArgumentError(f"scale factor must be positive, got {delta}")
    shift = np.asarray(shift, float)
    meta = dict(curve.meta)
    meta["scale"] = meta.get("scale", 1.0) * delta
    return BoundaryCurve(
        delta * curve.nodes + shift,
        curve.tangents,
        curve.normals,
        delta * curve.speed,
        curve.curvature / delta,
        delta * curve.center + shift,
        curve.label,
        meta,
    )


def rotate(curve, angle, about=(0.0, 0.0)):
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    p = np.asarray(about, float)
    return BoundaryCurve(
        (curve.nodes - p) @ rot.T + p,
        curve.tangents @ rot.T,
        curve.normals @ rot.T,
        curve.speed,
        curve.curvature,
        (curve.center - p) @ rot.T + p,
        curve.label,
        dict(curve.meta),
    )


def recenter(curve, center=(0.0, 0.0)):
    return scale_translate(curve, 1.0, np.asarray(center, float) - curve.center)


# -- rounded polygons ---------------------------------------------------------


class _RoundedPolygonPath:
    """Arclength description of a convex polygon with circular corners."""

    def __init__(self, vertices, radius):
        v = np.asarray(vertices, float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidArgumentError("need at least three 2D vertices")
        signed = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if signed < 0:
            v = v[::-1]
        m = len(v)
        edges = np.roll(v, -1, axis=0) - v
        lens = np.hypot(edges[:, 0], edges[:, 1])
        if np.any(lens <= 0):
            raise InvalidArgumentError("repeated vertex")
        dirs = edges / lens[:, None]
        cross = dirs[:, 0] * np.roll(dirs, -1, axis=0)[:, 1] - dirs[:, 1] * np.roll(dirs, -1, axis=0)[:, 0]
        if np.any(cross <= 1e-12):
            raise InvalidArgumentError("vertex list is not strictly convex")
        if radius <= 0:
            raise InvalidArgumentError("rounding radius must be positive")
        # turning angle at vertex i+1 (between edge i and edge i+1)
        turn = np.arccos(np.clip(np.einsum("ij,ij->i", dirs, np.roll(dirs, -1, axis=0)), -1, 1))
        cut = radius * np.tan(turn / 2)  # distance from vertex to tangent point
        straight = lens - cut - np.roll(cut, 1)
        if np.any(straight < 0):
            raise InvalidArgumentError(
                f"rounding radius {radius} too large: corner arcs overlap on an edge"
            )
        self.radius = radius
        pieces = []  # (kind, length, data)
        for i in range(m):
            start = v[i] + cut[i - 1] * dirs[i]
            pieces.append(("line", straight[i], (start, dirs[i])))
            vtx = v[(i + 1) % m]
            normal_in = np.array([-dirs[i, 1], dirs[i, 0]])
            ctr = vtx - cut[i] * dirs[i] + radius * normal_in
            th0 = np.arctan2(-normal_in[1], -normal_in[0])
            pieces.append(("arc", radius * turn[i], (ctr, th0)))
        self.pieces = pieces
        self.breaks = np.concatenate([[0.0], np.cumsum([p[1] for p in pieces])])
        self.length = float(self.breaks[-1])
        self.junctions = self.breaks[:-1]
        self.vertices = v
        self.polygon_area = abs(signed)
        self.turn = turn
        self.cut = cut

    def evaluate(self, s):
        s = np.mod(np.asarray(s, float), self.length)
        idx = np.clip(np.searchsorted(self.breaks, s, side="right") - 1, 0, len(self.pieces) - 1)
        x = np.empty((len(s), 2))
        tg = np.empty((len(s), 2))
        kap = np.empty(len(s))
        for j, (kind, _, data) in enumerate(self.pieces):
            sel = idx == j
            if not np.any(sel):
                continue
            u = s[sel] - self.breaks[j]
            if kind == "line":
                p0, d = data
                x[sel] = p0 + u[:, None] * d
                tg[sel] = d
                kap[sel] = 0.0
            else:
                ctr, th0 = data
                th = th0 + u / self.radius
                x[sel] = ctr + self.radius * np.column_stack([np.cos(th), np.sin(th)])
                tg[sel] = np.column_stack([-np.sin(th), np.cos(th)])
                kap[sel] = 1.0 / self.radius
        return x, tg, kap


def make_rounded_polygon(vertices, rounding_radius=None, n=128, center=None, grading=2.0):
    """Convex polygon with corners replaced by tangent circular arcs.

    The arclength is reparametrized so that nodes cluster near the
    line/arc junctions, where curvature jumps; ``grading`` is the extra node
    density there (0 gives uniform arclength sampling).  By default the curve
    center is the area centroid.
    """
    n = check_node_count(n)
    v = np.asarray(vertices, float)
    if rounding_radius is None:
        e = np.roll(v, -1, axis=0) - v
        rounding_radius = 0.1 * np.min(np.hypot(e[:, 0], e[:, 1]))
    path = _RoundedPolygonPath(v, rounding_radius)
    L = path.length
    w = 0.5 * rounding_radius
    sk = path.junctions

    def g_int(s):
        # ∫_0^s g, with g = 1 + grading·Σ periodic Gaussian bumps at junctions
        out = np.array(s, float, copy=True)
        for img in (-L, 0.0, L):
            for c in sk + img:
                out += grading * w * np.sqrt(np.pi) / 2 * (erf((s - c) / w) - erf((0 - c) / w))
        return out

    def g(s):
        out = np.ones_like(s)
        for img in (-L, 0.0, L):
            for c in sk + img:
                out += grading * np.exp(-(((s - c) / w) ** 2))
        return out

    total = float(g_int(np.array([L]))[0])
    # half-step offset keeps every node off the curvature jumps
    target = total * (np.arange(n) + 0.5) / n
    s = target * L / total
    for _ in range(60):
        step = (g_int(s) - target) / g(s)
        s = s - step
        if np.max(np.abs(step)) < 1e-15 * L:
            break
    x, tg, kap = path.evaluate(s)
    speed = total / (2 * np.pi * g(s))
    normals = np.column_stack([tg[:, 1], -tg[:, 0]])
    area = path.polygon_area - np.sum(path.cut * rounding_radius - 0.5 * rounding_radius**2 * path.turn)
    if center is None:
        center = _polygon_like_centroid(x, normals, speed * 2 * np.pi / n, area)
    meta = {
        "kind": "rounded_polygon",
        "vertices": v.tolist(),
        "rounding_radius": float(rounding_radius),
        "exact_perimeter": L,
        "exact_area": float(area),
    }
    return BoundaryCurve(x, tg, normals, speed, kap, center, "rounded_polygon", meta)


def _polygon_like_centroid(x, normals, wts, area):
    r2 = np.einsum("ij,ij->i", x, x)
    return 0.5 * (r2 * wts) @ normals / area


def regular_polygon(m, circumradius=1.0, angle=0.0):
    th = angle + 2 * np.pi * np.arange(m) / m
    return np.column_stack([circumradius * np.cos(th), circumradius * np.sin(th)])


# -- text config / CSV --------------------------------------------------------


def shape_from_spec(spec, n=None):
    """Build a curve from a mapping such as ``{"kind": "ellipse", "a": 1, "b": 2}``.

    Recognized kinds: ``ellipse``, ``circle``, ``fourier``, ``rounded_polygon``
    and ``regular_polygon`` (rounded).  Optional ``scale`` and ``shift`` are
    applied last.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    n = spec.pop("n", n)
    scale = spec.pop("scale", 1.0)
    shift = spec.pop("shift", (0.0, 0.0))
    kw = {} if n is None else {"n": n}
    try:
        if kind == "ellipse":
            curve = make_ellipse(spec.pop("a"), spec.pop("b"), spec.pop("center", (0.0, 0.0)),
                                 angle=spec.pop("angle", 0.0), **kw)
        elif kind == "circle":
            curve = make_circle(spec.pop("radius", 1.0), spec.pop("center", (0.0, 0.0)), **kw)
        elif kind == "fourier":
            curve = make_fourier_shape(spec.pop("r0"), spec.pop("cos", ()), spec.pop("sin", ()),
                                       spec.pop("center", (0.0, 0.0)), **kw)
        elif kind == "rounded_polygon":
            curve = make_rounded_polygon(spec.pop("vertices"), spec.pop("rounding_radius", None), **kw)
        elif kind == "regular_polygon":
            verts = regular_polygon(spec.pop("sides"), spec.pop("circumradius", 1.0), spec.pop("angle", 0.0))
            curve = make_rounded_polygon(verts, spec.pop("rounding_radius", None), **kw)
            curve = recenter(curve, (0.0, 0.0)) if spec.pop("centered", True) else curve
        else:
            raise InvalidArgumentError(f"unknown shape kind {kind!r}")
    except KeyError as exc:
        raise InvalidArgumentError(f"shape kind {kind!r} requires parameter {exc.args[0]!r}") from None
    if spec:
        raise InvalidArgumentError(f"unknown parameters for shape {kind!r}: {sorted(spec)}")
    if scale != 1.0 or np.any(np.asarray(shift) != 0):
        curve = scale_translate(curve, scale, shift)
    return curve


def write_curve_csv(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "nx", "ny", "curvature"])
        for row in zip(curve.t, curve.nodes[:, 0], curve.nodes[:, 1],
                       curve.normals[:, 0], curve.normals[:, 1], curve.curvature):
            w.writerow([f"{v:.17g}" for v in row])
