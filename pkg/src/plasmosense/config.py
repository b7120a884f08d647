"""Run configuration: YAML with a schema version and line-numbered validation errors."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1

SHAPE_KINDS = {"ellipse", "circle", "fourier", "rounded_polygon", "regular_polygon"}


def _default_d1():
    return {"kind": "fourier", "r0": 1.0, "cos": [0.0, 0.0, 0.2], "n": 128}


def _default_d2():
    return {"kind": "ellipse", "a": 1.0, "b": 2.0, "n": 256}


@dataclass
class SweepSpec:
    re_min: float = None  # None: centered on λ_j with an automatic half width
    re_max: float = None
    imag: float = 1e-4
    count: int = 2001
    zoom: bool = True


@dataclass
class PositionSpec:
    radius: list = field(default_factory=lambda: [4.2, 5.5])
    count: int = 22
    offset: float = 0.1
    points: list = None  # explicit list overrides the ring


@dataclass
class DescentSpec:
    max_iters: int = 30
    checkpoints: list = field(default_factory=lambda: [0, 8, 30])
    modes: int = None  # None: K + 2
    step0: float = 0.05
    n: int = 128


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    d1: dict = field(default_factory=_default_d1)
    d2: dict = field(default_factory=_default_d2)
    lambda_d1: float = 1.0
    delta: float = 0.1
    sweep: SweepSpec = field(default_factory=SweepSpec)
    positions: PositionSpec = field(default_factory=PositionSpec)
    j: int = 1
    K: int = 5
    M_max: int = None  # None: K - 1
    series_order: int = 4
    J: int = 20
    c1: float = None  # None: half the diameter of D₂
    c2: float = None
    method: str = "sweep"  # how `measure` obtains P_j: "sweep" or "direct"
    noise: float = 0.0
    measurements: str = None
    cgpts: str = None
    descent: DescentSpec = field(default_factory=DescentSpec)
    out: str = "out"
    seed: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = copy.deepcopy(d)
        nested = {"sweep": SweepSpec, "positions": PositionSpec, "descent": DescentSpec}
        for k, typ in nested.items():
            if k in d and isinstance(d[k], dict):
                d[k] = typ(**d[k])
        return cls(**d)

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @property
    def m_max(self):
        return self.K - 1 if self.M_max is None else self.M_max


# -- loading with line information ------------------------------------------------


def _construct(node, lines, path=()):
    """Plain Python value of a YAML node; records the source line of each key path."""
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            if key in out:
                raise ConfigError(f"line {k.start_mark.line + 1}: duplicate key {key!r}")
            lines[path + (key,)] = k.start_mark.line + 1
            out[key] = _construct(v, lines, path + (key,))
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, lines, path + (i,)) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


class _Checker:
    def __init__(self, lines, source):
        self.lines = lines
        self.source = source

    def fail(self, path, msg):
        line = None
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p)
        where = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{where}: {'.'.join(map(str, path)) or '<root>'}: {msg}")

    def number(self, d, path, positive=False, allow_none=False, integer=False, minimum=None):
        v = d.get(path[-1])
        if v is None:
            if allow_none:
                return
            self.fail(path, "value required")
        ok = (isinstance(v, int) if integer else isinstance(v, (int, float))) and not isinstance(v, bool)
        if not ok:
            self.fail(path, f"expected {'an integer' if integer else 'a number'}, got {v!r}")
        if positive and not v > 0:
            self.fail(path, f"must be positive, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(path, f"must be >= {minimum}, got {v!r}")


def _check_shape(c, spec, path, optional=False):
    if spec is None:
        if optional:
            return
        c.fail(path, "shape required")
    if not isinstance(spec, dict):
        c.fail(path, "shape must be a mapping with a 'kind'")
    kind = spec.get("kind")
    if kind not in SHAPE_KINDS:
        c.fail(path + ("kind",), f"unknown shape kind {kind!r}; expected one of {sorted(SHAPE_KINDS)}")
    need = {"ellipse": ["a", "b"], "circle": [], "fourier": ["r0"],
            "rounded_polygon": ["vertices"], "regular_polygon": ["sides"]}[kind]
    for k in need:
        if k not in spec:
            c.fail(path, f"{kind} needs {k!r}")
    for k in ("a", "b", "r0", "radius", "scale"):
        if k in spec:
            c.number(spec, path + (k,), positive=True)
    if "n" in spec:
        c.number(spec, path + ("n",), integer=True, minimum=32)
        if spec["n"] % 2:
            c.fail(path + ("n",), "node count must be even")


def validate(d, lines=None, source="<config>"):
    """Validate a raw mapping; returns a RunConfig with defaults filled in."""
    c = _Checker(lines or {}, source)
    if not isinstance(d, dict):
        c.fail((), "top level must be a mapping")
    known = set(RunConfig.__dataclass_fields__)
    for k in d:
        if k not in known:
            c.fail((k,), f"unknown field; known fields are {sorted(known)}")
    ver = d.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        c.fail(("schema_version",), f"unsupported schema version {ver!r} (this build reads {SCHEMA_VERSION})")
    merged = RunConfig().to_dict()
    for k, v in d.items():
        if isinstance(merged.get(k), dict) and k not in ("d1", "d2") and isinstance(v, dict):
            sub = merged[k]
            for kk in v:
                if kk not in sub:
                    c.fail((k, kk), f"unknown field; known fields are {sorted(sub)}")
            sub.update(v)
        else:
            merged[k] = v
    m = merged
    _check_shape(c, m["d1"], ("d1",), optional=True)
    _check_shape(c, m["d2"], ("d2",))
    c.number(m, ("lambda_d1",))
    if abs(m["lambda_d1"]) <= 0.5:
        c.fail(("lambda_d1",), "contrast of D₁ must satisfy |λ| > 1/2")
    c.number(m, ("delta",), positive=True)
    for k in ("j", "K", "series_order", "J"):
        c.number(m, (k,), integer=True, minimum=1)
    if m["K"] < 2:
        c.fail(("K",), "order K must be >= 2")
    c.number(m, ("M_max",), integer=True, minimum=1, allow_none=True)
    c.number(m, ("c1",), positive=True, allow_none=True)
    c.number(m, ("c2",), positive=True, allow_none=True)
    c.number(m, ("noise",), minimum=0)
    c.number(m, ("seed",), integer=True, minimum=0)
    if m["method"] not in ("sweep", "direct"):
        c.fail(("method",), "method must be 'sweep' or 'direct'")
    s = m["sweep"]
    c.number(s, ("sweep", "imag"), positive=True)
    c.number(s, ("sweep", "count"), integer=True, minimum=5)
    c.number(s, ("sweep", "re_min"), allow_none=True)
    c.number(s, ("sweep", "re_max"), allow_none=True)
    if (s["re_min"] is None) != (s["re_max"] is None):
        c.fail(("sweep",), "give both re_min and re_max or neither")
    if s["re_min"] is not None and not s["re_min"] < s["re_max"]:
        c.fail(("sweep", "re_max"), "re_max must exceed re_min")
    p = m["positions"]
    if p["points"] is not None:
        pts = p["points"]
        if not isinstance(pts, list) or not pts:
            c.fail(("positions", "points"), "expected a non-empty list of [x, y] pairs")
        for i, z in enumerate(pts):
            if not (isinstance(z, list) and len(z) == 2
                    and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in z)):
                c.fail(("positions", "points", i), f"expected [x, y], got {z!r}")
    else:
        r = p["radius"]
        rs = r if isinstance(r, list) else [r]
        if not rs or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in rs):
            c.fail(("positions", "radius"), "ring radius must be a positive number or list of them")
        c.number(p, ("positions", "count"), integer=True, minimum=1)
        c.number(p, ("positions", "offset"))
    ds = m["descent"]
    c.number(ds, ("descent", "max_iters"), integer=True, minimum=0)
    c.number(ds, ("descent", "modes"), integer=True, minimum=2, allow_none=True)
    c.number(ds, ("descent", "step0"), positive=True)
    c.number(ds, ("descent", "n"), integer=True, minimum=32)
    if not isinstance(ds["checkpoints"], list) or not all(
        isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in ds["checkpoints"]
    ):
        c.fail(("descent", "checkpoints"), "expected a list of non-negative iteration numbers")
    for k in ("measurements", "cgpts", "out"):
        if m[k] is not None and not isinstance(m[k], str):
            c.fail((k,), "expected a path string")
    return RunConfig.from_dict(m)


def load_config(path):
    """Parse and validate a YAML run configuration."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    return parse_config(text, str(path))


def parse_config(text, source="<config>"):
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark else ""
        raise ConfigError(f"{source}{line}: YAML syntax error: {getattr(exc, 'problem', exc)}") from exc
    if node is None:
        return validate({}, {}, source)
    lines = {}
    return validate(_construct(node, lines), lines, source)
