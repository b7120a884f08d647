"""Command-line front end: ``plasmosense <command> --config run.yaml``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bem import np_spectrum
from .config import RunConfig, load_config, validate
from .errors import (
    ConfigError,
    InvalidArgumentError,
    PlasmoSenseError,
    RegimeError,
    StallError,
)
from .forward import TwoParticleSystem, check_regime, sweep_and_peak
from .geometry import recenter, scale_translate, shape_from_spec
from .gpt import CGPTSet, block_indices, cgpt_set
from .inverse import (
    MeasurementRecord,
    descend_shape,
    initial_iterate,
    load_measurements,
    multi_ring_positions,
    recover_cgpt,
    save_measurements,
    write_shape_outputs,
    write_stage_report,
    write_trajectory_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_REGIME = 0, 2, 3, 4


# -- shared context -----------------------------------------------------------------


class Context:
    """Geometry and spectra derived from a validated config (built lazily)."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._spectrum = None
        self._d1 = None

    @property
    def spectrum(self):
        if self._spectrum is None:
            try:
                d2 = recenter(shape_from_spec(self.cfg.d2), (0.0, 0.0))
            except InvalidArgumentError as exc:
                raise ConfigError(f"d2: {exc}") from exc
            self._spectrum = np_spectrum(d2, min(self.cfg.J, d2.n // 2))
        return self._spectrum

    @property
    def d1(self):
        if self._d1 is None and self.cfg.d1 is not None:
            try:
                base = recenter(shape_from_spec(self.cfg.d1), (0.0, 0.0))
            except InvalidArgumentError as exc:
                raise ConfigError(f"d1: {exc}") from exc
            self._d1 = scale_translate(base, self.cfg.delta)
        return self._d1

    def positions(self):
        p = self.cfg.positions
        if p.points is not None:
            return [tuple(map(float, z)) for z in p.points]
        r = p.radius if isinstance(p.radius, list) else [p.radius]
        return multi_ring_positions(r, p.count, p.offset)

    def c2(self):
        return np.inf if self.cfg.c2 is None else self.cfg.c2

    def check_positions(self, out=sys.stdout):
        """Regime test for every position; returns the distances dist(0, D₂)."""
        dists = []
        for i, z in enumerate(self.positions()):
            try:
                dists.append(check_regime(self.spectrum, z, (0.0, 0.0), self.cfg.c1, self.c2()))
            except RegimeError as exc:
                raise RegimeError(f"position {i}: {exc}", distance=exc.distance) from None
        lo = 0.5 * self.spectrum.curve.diameter if self.cfg.c1 is None else self.cfg.c1
        print(f"regime: dist(0, D2) in [{min(dists):.6g}, {max(dists):.6g}], "
              f"bounds [{lo:.6g}, {self.c2():.6g}]", file=out)
        return dists

    def system(self):
        return TwoParticleSystem(self.spectrum, self.d1, self.cfg.lambda_d1, self.cfg.series_order,
                                 c1=self.cfg.c1, c2=self.c2())


_worker_ctx = {}


def _context_for(cfg_dict):
    key = json.dumps(cfg_dict, sort_keys=True)
    if key not in _worker_ctx:
        _worker_ctx.clear()
        _worker_ctx[key] = Context(RunConfig.from_dict(cfg_dict))
    return _worker_ctx[key]


def _measure_one(task):
    """One position: sweep (or direct shift). Returns a plain dict, errors included."""
    cfg_dict, index, z, with_sweep = task
    ctx = _context_for(cfg_dict)
    cfg = ctx.cfg
    out = {"index": index, "z": list(z)}
    try:
        system = ctx.system()
        if with_sweep:
            s = cfg.sweep
            if s.re_min is None:
                sw = system.sweep(z, cfg.j, count=s.count, imag=s.imag)
            else:
                sw = sweep_and_peak(ctx.spectrum, system.shifts(z), cfg.j, s.re_min, s.re_max,
                                    s.count, s.imag, zoom=s.zoom)
            out.update(lambda_r=sw.lam_r, P_j=sw.shift, status="ok",
                       grid=[sw.lam.real.tolist(), sw.lam.imag.tolist()], response=sw.response.tolist())
        else:
            out.update(P_j=float(np.real(system.shift(z, cfg.j))), lambda_r=None, status="ok")
    except PlasmoSenseError as exc:
        out.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return out


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so merging is by index
        return list(pool.map(fn, tasks))


def _fmt(v):
    return f"{v:.17g}"


# -- commands -------------------------------------------------------------------


def cmd_spectrum(ctx, args):
    sp = ctx.spectrum
    d2 = ctx.cfg.d2
    analytic = None
    if d2["kind"] == "ellipse":
        a, b = d2["a"], d2["b"]
        q = (a - b) / (a + b)
        k = np.arange(1, sp.J // 2 + 2)
        vals = np.ravel(np.column_stack([-0.5 * abs(q) ** k, 0.5 * abs(q) ** k]))
        analytic = vals[: sp.J]
    elif d2["kind"] == "circle":
        analytic = np.zeros(sp.J)
    with open(os.path.join(args.out, "spectrum.json"), "w") as fh:
        fh.write(sp.to_json())
    with open(os.path.join(args.out, "eigenvalues.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "lambda", "analytic"])
        for i, lam in enumerate(sp.eigenvalues):
            ref = _fmt(analytic[i]) if analytic is not None else ""
            w.writerow([i + 1, _fmt(lam), ref])
    print(f"{'j':>3} {'lambda_j':>22} {'analytic':>22}")
    for i, lam in enumerate(sp.eigenvalues):
        ref = f"{analytic[i]:22.15g}" if analytic is not None else ""
        print(f"{i + 1:3d} {lam:22.15g} {ref}")
    return EXIT_OK


def cmd_cgpt(ctx, args):
    if ctx.d1 is None:
        raise ConfigError("cgpt needs a d1 shape in the config")
    c = cgpt_set(ctx.cfg.lambda_d1, ctx.d1, ctx.cfg.K, (0.0, 0.0))
    with open(os.path.join(args.out, "cgpt.json"), "w") as fh:
        fh.write(c.to_json(indent=1))
    for mn in block_indices(c.order):
        print(f"M_{mn[0]}{mn[1]} = {np.array2string(np.real_if_close(c[mn]), precision=6)}")
    return EXIT_OK


PLOT_SCRIPT = '''"""Plot resonance sweeps written by `plasmosense sweep` (needs matplotlib)."""
import csv
import glob
import json
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "sweep_summary.json")) as fh:
    summary = json.load(fh)
fig, ax = plt.subplots()
for path in sorted(glob.glob(os.path.join(here, "sweep_*.csv"))):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    x = [float(r["re_lambda"]) for r in rows]
    y = [float(r["abs_M11"]) for r in rows]
    ax.semilogy(x, y, lw=0.8)
for rec in summary["positions"]:
    if rec["status"] == "ok":
        ax.axvline(rec["lambda_r"], color="k", lw=0.3)
ax.set_xlabel("Re lambda_D2")
ax.set_ylabel("|M11|")
fig.savefig(os.path.join(here, "sweeps.png"), dpi=150)
'''


def cmd_sweep(ctx, args):
    ctx.check_positions()
    cfg_dict = ctx.cfg.to_dict()
    tasks = [(cfg_dict, i, z, True) for i, z in enumerate(ctx.positions())]
    results = _map(_measure_one, tasks, args.workers)
    summary = []
    failed = 0
    for r in results:
        rec = {k: r.get(k) for k in ("index", "z", "lambda_r", "P_j", "status")}
        if r["status"] == "ok":
            with open(os.path.join(args.out, f"sweep_{r['index']:03d}.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["re_lambda", "im_lambda", "abs_M11", "abs_M22"])
                for xr, xi, (m11, m22) in zip(*r["grid"], r["response"]):
                    w.writerow([_fmt(xr), _fmt(xi), _fmt(m11), _fmt(m22)])
            print(f"[{r['index']:3d}] z=({r['z'][0]:.4f}, {r['z'][1]:.4f})  "
                  f"lambda_r={r['lambda_r']:.12g}  P_j={r['P_j']:.6e}")
        else:
            failed += 1
            rec["error"] = r["error"]
            print(f"[{r['index']:3d}] z=({r['z'][0]:.4f}, {r['z'][1]:.4f})  {r['error']}", file=sys.stderr)
        summary.append(rec)
    lam_j = float(ctx.spectrum.eigenvalues[ctx.cfg.j - 1])
    with open(os.path.join(args.out, "sweep_summary.json"), "w") as fh:
        json.dump({"j": ctx.cfg.j, "lambda_j": lam_j, "positions": summary}, fh, indent=1)
    with open(os.path.join(args.out, "plot_sweeps.py"), "w") as fh:
        fh.write(PLOT_SCRIPT)
    return EXIT_NUMERICAL if failed else EXIT_OK


def cmd_measure(ctx, args):
    if ctx.d1 is None:
        raise ConfigError("measure needs a d1 shape in the config")
    ctx.check_positions()
    cfg = ctx.cfg
    cfg_dict = cfg.to_dict()
    tasks = [(cfg_dict, i, z, cfg.method == "sweep") for i, z in enumerate(ctx.positions())]
    results = _map(_measure_one, tasks, args.workers)
    bad = [r for r in results if r["status"] != "ok"]
    for r in bad:
        print(f"[{r['index']:3d}] {r['error']}", file=sys.stderr)
    if bad:
        return EXIT_NUMERICAL
    rng = np.random.default_rng(cfg.seed)
    records = []
    for r in results:
        P = r["P_j"]
        if cfg.noise:
            P *= 1 + cfg.noise * rng.standard_normal()
        records.append(MeasurementRecord(tuple(r["z"]), cfg.j, P, r["lambda_r"], cfg.noise or None))
    path = os.path.join(args.out, "measurements.json")
    save_measurements(records, path)
    print(f"wrote {len(records)} measurements to {path}")
    return EXIT_OK


def _resolve(path, out):
    if path is None:
        return None
    if os.path.exists(path):
        return path
    alt = os.path.join(out, path)
    return alt if os.path.exists(alt) else path


def cmd_recover(ctx, args):
    cfg = ctx.cfg
    path = _resolve(cfg.measurements or "measurements.json", args.out)
    try:
        records = load_measurements(path)
    except OSError as exc:
        raise ConfigError(f"measurements: cannot read {path!r} ({exc.strerror})") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"measurements: malformed file {path!r} ({exc})") from exc
    for i, r in enumerate(records):
        try:
            check_regime(ctx.spectrum, r.z, (0.0, 0.0), cfg.c1, ctx.c2())
        except RegimeError as exc:
            raise RegimeError(f"measurement {i}: {exc}", distance=exc.distance) from None
    est, states = recover_cgpt(records, ctx.spectrum, cfg.K, cfg.lambda_d1)
    truth = cgpt_set(cfg.lambda_d1, ctx.d1, cfg.K, (0.0, 0.0)) if ctx.d1 is not None else None
    with open(os.path.join(args.out, "cgpt_recovered.json"), "w") as fh:
        fh.write(est.to_json(indent=1))
    write_stage_report(states, os.path.join(args.out, "stages.csv"), truth)
    print(f"{'stage':>5} {'records':>7} {'residual':>12} {'cond':>10}" + ("  rel. error M11" if truth else ""))
    for st in states:
        line = f"{st.k:5d} {len(st.corrected):7d} {st.residual:12.4e} {st.condition:10.3e}"
        if truth is not None:
            err = np.abs(st.cgpts[(1, 1)] - truth[(1, 1)]).max() / np.abs(truth[(1, 1)]).max()
            line += f"  {err:.4e}"
        print(line)
    return EXIT_OK


def cmd_reconstruct(ctx, args):
    cfg = ctx.cfg
    path = _resolve(cfg.cgpts or "cgpt_recovered.json", args.out)
    try:
        with open(path) as fh:
            target = CGPTSet.from_json(fh.read())
    except OSError as exc:
        raise ConfigError(f"cgpts: cannot read {path!r} ({exc.strerror})") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cgpts: malformed file {path!r} ({exc})") from exc
    K = min(cfg.K, target.order)
    ds = cfg.descent
    init = initial_iterate(target, cfg.lambda_d1, K, ds.modes)
    checkpoints = set(ds.checkpoints)

    def save(it):
        if it.iteration in checkpoints:
            write_shape_outputs(it, os.path.join(args.out, f"shape_iter_{it.iteration:03d}"), ds.n)

    try:
        traj = descend_shape(target, init, K, ds.max_iters, ds.n, step0=ds.step0, callback=save)
    except StallError as exc:
        if exc.last_iterate is not None:
            write_shape_outputs(exc.last_iterate, os.path.join(args.out, "last_good_shape"), ds.n)
        raise
    write_trajectory_csv(traj, os.path.join(args.out, "trajectory.csv"))
    write_shape_outputs(traj[-1], os.path.join(args.out, "final_shape"), ds.n)
    for it in traj:
        print(f"iter {it.iteration:3d}  J_c={it.J:.6e}  step={it.step:.3e}")
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "cgpt": cmd_cgpt,
    "sweep": cmd_sweep,
    "measure": cmd_measure,
    "recover": cmd_recover,
    "reconstruct": cmd_reconstruct,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--workers", type=int, default=1, metavar="N", help="worker processes")
    common.add_argument("--seed", type=int, metavar="S", help="random seed (overrides the config)")
    p = argparse.ArgumentParser(prog="plasmosense", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "NP spectrum of D2",
        "cgpt": "CGPTs of D1 by direct quadrature",
        "sweep": "resonance sweeps and peak shifts at each position",
        "measure": "synthetic shift measurements (JSON)",
        "recover": "staged CGPT recovery from measurements",
        "reconstruct": "shape descent from (recovered) CGPTs",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else validate({})
        d = cfg.to_dict()
        if args.out is not None:
            d["out"] = args.out
        if args.seed is not None:
            d["seed"] = args.seed
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = validate(d, source=args.config or "<defaults>")
        args.out = cfg.out
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "config_resolved.yaml"), "w") as fh:
            fh.write(cfg.to_yaml())
        return COMMANDS[args.command](Context(cfg), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except PlasmoSenseError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
