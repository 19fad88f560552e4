"""Batch front-end: ``lavgap <command> [--config F] [--out DIR] [--seed N] [--refine L]``.

Configuration is plain text, one ``key = value`` per line, ``#`` starts a
comment. Every output file starts with the package version and the fully
resolved configuration, so identical configs give byte-identical files.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .errors import ConfigError, LavgapError, ParameterError

COMMANDS = ("cantor", "classify", "window", "competitor", "energy", "sweep",
            "riesz-check", "scan", "report")


def _opt_float(text):
    return None if text.lower() in ("", "none") else float(text)


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _positive(x):
    return x > 0


# key: (parser, default, range check or None, description of the range)
KEYS = {
    "model": (str, "IV", lambda x: x in ("I", "II", "III", "IV"), "one of I, II, III, IV"),
    "d": (_int, 2, lambda x: x >= 2, ">= 2"),
    "s": (float, 0.4, lambda x: 0 < x <= 1, "in (0, 1]"),
    "t": (float, 0.8, lambda x: 0 < x <= 1, "in (0, 1]"),
    "p": (float, 2.0, lambda x: 1 < x < math.inf, "in (1, inf)"),
    "q": (float, 2.0, lambda x: 1 < x < math.inf, "in (1, inf)"),
    "alpha": (float, 0.1, lambda x: 0 <= x < math.inf, ">= 0"),
    "dim": (float, 0.65, _positive, "> 0"),
    "lambda": (_opt_float, None, lambda x: x is None or 0 < x < 0.5, "in (0, 1/2)"),
    "m": (_int, 1, lambda x: 1 <= x <= 2, "1 or 2"),
    "generation": (_int, 12, lambda x: 0 <= x <= 24, "in [0, 24]"),
    "tau": (float, 4.0, _positive, "> 0"),
    "mode": (str, "mc", lambda x: x in ("mc", "tensor"), "mc or tensor"),
    "h": (_opt_float, None, lambda x: x is None or x > 0, "> 0"),
    "half_width": (float, 3.0, _positive, "> 0"),
    "samples": (_int, 40000, lambda x: x >= 1, ">= 1"),
    "bands": (_int, 12, lambda x: x >= 1, ">= 1"),
    "base": (float, 2.0, lambda x: x > 1, "> 1"),
    "crn": (_bool, True, None, ""),
    "seed": (_int, 0, lambda x: 0 <= x < 2 ** 64, "in [0, 2^64)"),
    "refine": (_int, 0, lambda x: x >= 0, ">= 0"),
    "eps_max": (float, 0.125, _positive, "> 0"),
    "eps_min": (float, 2.0 ** -9, _positive, "> 0"),
    "eps_ratio": (float, 2.0, lambda x: x > 1, "> 1"),
    "family": (str, "regularized", lambda x: x in ("regularized", "mollified"),
               "regularized or mollified"),
    "level": (_int, 8, lambda x: x >= 0, ">= 0"),
    "weight_scale": (float, 1.0, lambda x: 0 <= x < math.inf, ">= 0"),
    "extra_bands": (_int, 6, lambda x: x >= 0, ">= 0"),
    "refinements": (_int, 2, lambda x: x >= 0, ">= 0"),
    "scan_lo": (_opt_float, None, lambda x: x is None or x > 0, "> 0"),
    "scan_hi": (_opt_float, None, lambda x: x is None or x > 0, "> 0"),
    "scan_step": (float, 0.05, _positive, "> 0"),
    "riesz_count": (_int, 100, lambda x: x >= 1, ">= 1"),
    "riesz_safety": (float, 2.0, lambda x: x >= 1, ">= 1"),
    "field": (str, "competitor", lambda x: x in ("competitor", "datum", "regularized"),
              "competitor, datum or regularized"),
    "field_eps": (float, 0.01, _positive, "> 0"),
    "grid_n": (_int, 65, lambda x: 2 <= x <= 2049, "in [2, 2049]"),
    "grid_half": (float, 1.0, _positive, "> 0"),
    "necklace_level": (_int, 4, lambda x: 0 <= x <= 16, "in [0, 16]"),
}

MODEL_KEYS = ("model", "d", "s", "t", "p", "q", "alpha")


@dataclass(frozen=True)
class RunConfig:
    values: tuple
    lines: tuple = ()

    def __getitem__(self, key):
        return dict(self.values)[key]

    def get(self, key):
        return self[key]

    def with_overrides(self, **kw):
        vals = dict(self.values)
        for k, v in kw.items():
            if k not in KEYS:
                raise ConfigError(f"unknown key {k!r}")
            vals[k] = v
        cfg = RunConfig(tuple((k, vals[k]) for k in KEYS), self.lines)
        _cross_validate(cfg, {})
        return cfg

    def to_dict(self):
        return dict(self.values)

    def echo(self):
        return [f"{k} = {_fmt(v)}" for k, v in self.values]

    def model_params(self):
        from .regimes import ModelParams
        return ModelParams(*(self[k] for k in MODEL_KEYS))

    def quad(self):
        from .energy import QuadratureSpec
        spec = QuadratureSpec(mode=self["mode"], h=self["h"], half_width=self["half_width"],
                              samples=self["samples"], seed=self["seed"], bands=self["bands"],
                              base=self["base"], crn=self["crn"])
        return spec.refined(self["refine"]) if self["refine"] else spec


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _cross_validate(cfg, where):
    from .regimes import ModelParams
    try:
        ModelParams(*(cfg[k] for k in MODEL_KEYS))
    except ParameterError as exc:
        line = max((where[k] for k in MODEL_KEYS if k in where), default=None)
        raise ConfigError(str(exc), line) from None
    if cfg["eps_min"] >= cfg["eps_max"]:
        line = max((where[k] for k in ("eps_min", "eps_max") if k in where), default=None)
        raise ConfigError("eps_min must be below eps_max", line)


def parse_config(text):
    """Parse ``key = value`` text into a validated :class:`RunConfig`."""
    vals = {k: spec[1] for k, spec in KEYS.items()}
    where = {}
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", num)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", num)
        if key in where:
            raise ConfigError(f"duplicate key {key!r} (first set on line {where[key]})", num)
        conv, _, check, desc = KEYS[key]
        try:
            v = conv(value)
        except ValueError:
            raise ConfigError(f"cannot parse {key} = {value!r}", num) from None
        if isinstance(v, float) and math.isnan(v):
            raise ConfigError(f"{key} must not be NaN", num)
        if check is not None and not check(v):
            raise ConfigError(f"{key} = {value} out of range ({desc})", num)
        vals[key] = v
        where[key] = num
    cfg = RunConfig(tuple((k, vals[k]) for k in KEYS), tuple(sorted(where.items())))
    _cross_validate(cfg, where)
    return cfg


# ---------------------------------------------------------------------------
# output


def _header(cfg):
    return [f"lavgap {__version__}"] + cfg.echo()


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, cfg, header, rows):
    buf = io.StringIO()
    for line in _header(cfg):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(x) for x in r])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return x


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path, cfg, result):
    doc = {"version": __version__, "config": cfg.to_dict(), "result": result}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc))


# ---------------------------------------------------------------------------
# commands


def _geometry(cfg, params):
    from .experiments import build_geometry
    from .fractal import FractalParams
    from .regimes import SUB, classify_regime
    dim = cfg["dim"]
    if cfg["lambda"] is not None:
        m = params.d - 1 if classify_regime(params).kind == SUB else 1
        dim = FractalParams(cfg["lambda"], m).dimension
    return build_geometry(params, dim, cfg["generation"], cfg["tau"]), dim


def cmd_cantor(cfg, out, args):
    from .fractal import (CantorMeasure, FractalParams, build_generation, ball_mass_slope,
                          neighborhood_slope)
    lam = cfg["lambda"] if cfg["lambda"] is not None else 2.0 ** (-cfg["m"] / cfg["dim"])
    fp = FractalParams(lam, cfg["m"], cfg["generation"])
    if args.necklace:
        from .geometry import BarrierGeometry, necklace_enumerate
        geom = BarrierGeometry(FractalParams(lam, 1, cfg["generation"]), cfg["tau"],
                               cfg["d"], "super")
        elems = necklace_enumerate(geom, cfg["necklace_level"])
        rows = [(e.level, e.index, e.a, e.b, *e.vertex_lower, *e.vertex_upper) for e in elems]
        d = cfg["d"]
        header = (["level", "j", "a", "b"] + [f"lower_{i}" for i in range(d)]
                  + [f"upper_{i}" for i in range(d)])
        write_csv(os.path.join(out, "necklace.csv"), cfg, header, rows)
        return {"lambda": lam, "dimension": FractalParams(lam).dimension,
                "elements": len(elems)}
    gen = build_generation(FractalParams(lam, 1, cfg["generation"]))
    write_csv(os.path.join(out, "cantor.csv"), cfg, ["index", "a", "b"],
              [(i, a, b) for i, (a, b) in enumerate(gen.intervals)])
    measure = CantorMeasure(fp)
    rng = np.random.default_rng([cfg["seed"], 1])
    centers = measure.sample(rng, 5)
    slopes = []
    if fp.m <= 2:
        slopes = [ball_mass_slope(c, measure) for c in centers]
    result = {"lambda": lam, "m": fp.m, "generation": fp.generation,
              "dimension": fp.dimension, "intervals": len(gen),
              "total_mass": measure.total_mass(), "ball_mass_slopes": slopes,
              "neighborhood_slope": neighborhood_slope(fp)}
    write_json(os.path.join(out, "cantor.json"), cfg, result)
    return result


def classify_rows(cfg):
    """All four table rows for the configured ``(d, s, t, p, q, alpha)``."""
    from .regimes import ModelParams, classify_regime, gap_condition
    base = {k: cfg[k] for k in MODEL_KEYS if k != "model"}
    rows = {}
    for model in ("I", "II", "III", "IV"):
        kw = dict(base)
        if model in ("I", "III"):
            kw["s"] = 1.0
        if model in ("I", "II"):
            kw["t"] = 1.0
        try:
            params = ModelParams(model, **kw)
            regime = classify_regime(params)
            gap = gap_condition(params)
            rows[model] = {"params": params.to_dict(), "regime": regime.kind,
                           "index": regime.index, **gap.to_dict()}
        except LavgapError as exc:
            rows[model] = {"params": kw, "error": exc.kind, "message": str(exc)}
    return rows


def cmd_classify(cfg, out, args):
    result = {"rows": classify_rows(cfg)}
    write_json(os.path.join(out, "classify.json"), cfg, result)
    return result


def cmd_window(cfg, out, args):
    from .regimes import dimension_window, gap_condition, window_consistency
    params = cfg.model_params()
    win = dimension_window(params)
    result = {"window": win.to_dict(), "gap": gap_condition(params).to_dict(),
              "consistency": window_consistency(params).to_dict()}
    write_json(os.path.join(out, "window.json"), cfg, result)
    return result


def _field(cfg, params):
    from .competitor import BoundaryDatum, RegularizedCompetitor, make_competitor
    geom, dim = _geometry(cfg, params)
    comp = make_competitor(geom)
    kind = cfg["field"]
    if kind == "datum":
        return BoundaryDatum(comp), geom, dim
    if kind == "regularized":
        return BoundaryDatum(RegularizedCompetitor(comp, cfg["field_eps"])), geom, dim
    return comp, geom, dim


def cmd_competitor(cfg, out, args):
    params = cfg.model_params()
    if params.d != 2:
        raise ParameterError("grid sampling is implemented for d = 2")
    v, geom, dim = _field(cfg, params)
    n, half = cfg["grid_n"], cfg["grid_half"]
    # offset grid: the apex set is never sampled
    axis = -half + (np.arange(n) + 0.5) * (2.0 * half / n)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    vals = v(pts)
    grad = np.sqrt(np.sum(np.atleast_2d(v.gradient(pts)) ** 2, axis=1))
    write_csv(os.path.join(out, "competitor.csv"), cfg, ["x0", "x1", "value", "grad_norm"],
              [(a, b, c, g) for (a, b), c, g in zip(pts, vals, grad)])
    return {"field": cfg["field"], "regime": geom.regime, "dim": dim, "points": len(vals),
            "max_abs": float(np.max(np.abs(vals)))}


def energy_rows(cfg, params, energy):
    from .energy import shell_diagnostic
    quad = cfg.quad()
    h = quad.cell(params.d) if quad.mode == "tensor" else quad.base ** -quad.bands
    rows = []
    for phase, ev in (("first", energy.first), ("second", energy.second)):
        try:
            verdict = shell_diagnostic(ev).verdict
        except ParameterError:
            verdict = "n/a"
        rows.append((params.model, phase, params.s, params.t, params.p, params.q,
                     params.alpha, h, ev.value, ev.error, verdict))
    return rows


ENERGY_HEADER = ["model", "phase", "s", "t", "p", "q", "alpha", "h", "value", "error", "verdict"]


def cmd_energy(cfg, out, args):
    from .energy import assemble_model
    from .experiments import build_weight
    params = cfg.model_params()
    v, geom, dim = _field(cfg, params)
    weight = build_weight(params, geom, cfg["level"], cfg["weight_scale"])
    energy = assemble_model(params, v, weight, cfg.quad(), geom)
    rows = energy_rows(cfg, params, energy)
    write_csv(os.path.join(out, "energy.csv"), cfg, ENERGY_HEADER, rows)
    result = {"dim": dim, "rows": [dict(zip(ENERGY_HEADER, r)) for r in rows],
              "first": energy.first.to_dict(), "second": energy.second.to_dict()}
    write_json(os.path.join(out, "energy.json"), cfg, result)
    return {"dim": dim, "rows": result["rows"]}


def sweep_spec(cfg):
    from .experiments import SweepSpec
    params = cfg.model_params()
    eps, e = [], cfg["eps_max"]
    while e >= cfg["eps_min"] * (1 - 1e-12):
        eps.append(e)
        e /= cfg["eps_ratio"]
    _, dim = _geometry(cfg, params)
    quad = cfg.quad()
    if quad.mode != "mc":
        quad = replace(quad, mode="mc")
    return SweepSpec(params, dim, tuple(eps), quad, cfg["level"], cfg["family"],
                     cfg["weight_scale"], cfg["extra_bands"], cfg["generation"],
                     cfg["refinements"])


def cmd_sweep(cfg, out, args):
    import warnings
    from .experiments import run_gap_sweep
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = run_gap_sweep(sweep_spec(cfg))
    result = report.to_dict()
    write_json(os.path.join(out, "sweep.json"), cfg, result)
    write_csv(os.path.join(out, "sweep.csv"), cfg,
              ["eps", "first", "second", "first_error", "second_error", "first_raw",
               "second_raw"],
              [(r.eps, r.first, r.second, r.first_error, r.second_error, r.first_raw,
                r.second_raw) for r in report.rows])
    return {"certificate": report.certificate, "c0": report.c0, "nu": report.nu,
            "scope": report.scope}


def cmd_riesz(cfg, out, args):
    from .experiments import riesz_suite
    lam = cfg["lambda"] if cfg["lambda"] is not None else 1.0 / 3.0
    checks = riesz_suite(cfg["riesz_count"], cfg["seed"], lam, cfg["riesz_safety"])
    rows = [(c.name, i, r) for c in checks for i, r in enumerate(c.ratios)]
    write_csv(os.path.join(out, "riesz.csv"), cfg, ["lemma", "sample", "ratio"], rows)
    result = {"checks": [c.to_dict() for c in checks],
              "passed": all(c.passed for c in checks)}
    write_json(os.path.join(out, "riesz.json"), cfg, result)
    return result


def scan_grid(cfg, params):
    from .experiments import finiteness_threshold
    from .regimes import SUB, classify_regime
    m = params.d - 1 if classify_regime(params).kind == SUB else 1
    step = cfg["scan_step"]
    thr = finiteness_threshold(params)
    lo = cfg["scan_lo"] if cfg["scan_lo"] is not None else max(step, thr - 3.5 * step)
    hi = cfg["scan_hi"] if cfg["scan_hi"] is not None else min(m - step, thr + 3.5 * step)
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = [round(lo + i * step, 12) for i in range(count)]
    if count < 2 or grid[0] <= 0 or grid[-1] >= m:
        raise ParameterError(f"scan grid must hold two or more points inside (0, {m})")
    return grid


def cmd_scan(cfg, out, args):
    from .experiments import finiteness_scan
    params = cfg.model_params()
    quad = replace(cfg.quad(), mode="mc")
    report = finiteness_scan(params, scan_grid(cfg, params), quad)
    write_csv(os.path.join(out, "scan.csv"), cfg,
              ["dim", "lam", "value", "verdict", "ratio", "rate"],
              [(r.dim, r.lam, r.value, r.verdict, r.ratio, r.rate) for r in report.rows])
    result = report.to_dict()
    write_json(os.path.join(out, "scan.json"), cfg, result)
    return {"flip": result["flip"], "threshold": report.threshold,
            "bracketed": report.bracketed}


def cmd_report(cfg, out, args):
    from .regimes import dimension_window, gap_condition
    params = cfg.model_params()
    result = {"classify": classify_rows(cfg), "gap": gap_condition(params).to_dict()}
    try:
        result["window"] = dimension_window(params).to_dict()
    except LavgapError as exc:
        result["window"] = {"error": exc.kind, "message": str(exc)}
    result["sweep"] = cmd_sweep(cfg, out, args)
    write_json(os.path.join(out, "report.json"), cfg, result)
    return result


HANDLERS = {"cantor": cmd_cantor, "classify": cmd_classify, "window": cmd_window,
            "competitor": cmd_competitor, "energy": cmd_energy, "sweep": cmd_sweep,
            "riesz-check": cmd_riesz, "scan": cmd_scan, "report": cmd_report}


def build_parser():
    ap = argparse.ArgumentParser(prog="lavgap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"lavgap {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--out", default="lavgap_out", help="output directory")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--refine", type=int, help="extra refinement levels")
        if name == "cantor":
            sp.add_argument("--necklace", action="store_true",
                            help="dump the necklace elements instead of intervals")
    return ap


def load_config(args):
    text = ""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
        except UnicodeDecodeError:
            raise ConfigError(f"{args.config} is not UTF-8 text") from None
    cfg = parse_config(text)
    over = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must lie in [0, 2^64)")
        over["seed"] = args.seed
    if args.refine is not None:
        if args.refine < 0:
            raise ConfigError("--refine must be non-negative")
        over["refine"] = cfg["refine"] + args.refine
    return cfg.with_overrides(**over) if over else cfg


def error_json(exc):
    return dumps({"error": exc.kind, "exit_code": exc.exit_code, "message": str(exc),
                  "type": type(exc).__name__})


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        os.makedirs(args.out, exist_ok=True)
        result = HANDLERS[args.command](cfg, args.out, args)
    except LavgapError as exc:
        sys.stderr.write(error_json(exc))
        return exc.exit_code
    sys.stdout.write(dumps({"command": args.command, "result": result}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
