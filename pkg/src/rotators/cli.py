"""Scenario-driven command line front end.

    rotator simulate --config scenario.json [--out traj.csv]
    rotator analyze  --trajectory traj.csv --config scenario.json
    rotator inspect  --config scenario.json
    rotator examples --which {1,2} --out DIR [--run]
    rotator --batch DIR

Errors are reported on stderr as a single line ``error:<code>: message``
and give a nonzero exit status.  ROTATOR_LOG selects the log level.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import analytic, dynamics, mechanics
from .dynamics import GaugeFrequency, GaugeKind, IntegratorConfig, Trajectory
from .errors import ConfigError, ParseError, RotatorError, ValidationError
from .model import (STATE_TOL, FieldConfig, FieldKind, RotatorParams, RotatorState,
                    is_degenerate, to_chart)

log = logging.getLogger("rotators")

NORMALIZATION_TOL = 1e-6
# inclusive bound with room for the decimal-to-binary error of inputs like 0.999999
_NORM_LIMIT = NORMALIZATION_TOL * (1 + 1e-9)
CSV_COLUMNS = ("t", "x", "y", "z", "vx", "vy", "vz", "nx", "ny", "nz", "omega", "energy",
               "px", "py", "pz", "det_hessian", "lorentz_residual")
EXIT_ERROR = 1
EXIT_USAGE = 2


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OutputConfig:
    path: str = "trajectory.csv"
    every: int = 1
    format: str = "csv"


@dataclass(frozen=True)
class ScenarioConfig:
    params: RotatorParams
    initial: RotatorState
    field: FieldConfig
    gauge: Optional[GaugeFrequency]
    integrator: IntegratorConfig
    output: OutputConfig


_PARAM_KEYS = ("m", "ell", "c", "a1", "a2", "charge")
_FIELD_KEYS = {"none": (), "uniform_e": ("E0",), "uniform_h": ("H0",),
               "plane_wave": ("E0", "k", "phase")}
_GAUGE_KEYS = {"constant": ("omega0",), "sinusoidal": ("omega0", "amp", "freq"),
               "table": ("samples",)}


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ValidationError(key, "duplicate key")
        out[key] = value
    return out


def _reject_constant(name):
    raise ParseError(f"non-standard JSON constant {name}")


def _section(doc, path, allowed, required=()):
    if not isinstance(doc, dict):
        raise ValidationError(path, "expected an object")
    for key in doc:
        if key not in allowed:
            raise ValidationError(f"{path}.{key}" if path else key, "unknown key")
    for key in required:
        if key not in doc:
            raise ValidationError(f"{path}.{key}" if path else key, "missing required key")
    return doc


def _number(doc, key, path, default=None):
    if key not in doc:
        if default is None:
            raise ValidationError(f"{path}.{key}", "missing required key")
        return default
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(f"{path}.{key}", f"expected a finite number, got {value!r}")
    return float(value)


def _vector(doc, key, path, default=None):
    if key not in doc:
        if default is None:
            raise ValidationError(f"{path}.{key}", "missing required key")
        return np.array(default, dtype=float)
    value = doc[key]
    if not isinstance(value, list) or len(value) != 3:
        raise ValidationError(f"{path}.{key}", "expected a list of 3 numbers")
    return np.array([_number({"_": u}, "_", f"{path}.{key}") for u in value])


def _build(path, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except ValueError as exc:
        raise ValidationError(path, str(exc)) from None


def _parse_initial(doc, path="initial"):
    _section(doc, path, ("x", "v", "n", "ndot"), ("n", "ndot"))
    x = _vector(doc, "x", path, (0.0, 0.0, 0.0))
    v = _vector(doc, "v", path, (0.0, 0.0, 0.0))
    n = _vector(doc, "n", path)
    ndot = _vector(doc, "ndot", path)
    norm = float(np.linalg.norm(n))
    if abs(norm - 1.0) > _NORM_LIMIT:
        raise ValidationError(f"{path}.n", f"|n| = {norm!r} differs from 1 by more than {NORMALIZATION_TOL}")
    if abs(norm - 1.0) > STATE_TOL:
        n = n / norm
    tangency = float(n @ ndot)
    if abs(tangency) > _NORM_LIMIT * max(1.0, float(np.linalg.norm(ndot))):
        raise ValidationError(f"{path}.ndot", f"n.ndot = {tangency!r} is not small enough to project away")
    if abs(tangency) > STATE_TOL * max(1.0, float(np.linalg.norm(ndot))):
        ndot = ndot - tangency * n
    return _build(path, RotatorState, 0.0, x, v, n, ndot)


def _parse_field(doc, c, path="field"):
    if not isinstance(doc, dict):
        raise ValidationError(path, "expected an object")
    kind = doc.get("kind")
    if kind not in _FIELD_KEYS:
        raise ValidationError(f"{path}.kind", f"expected one of {sorted(_FIELD_KEYS)}, got {kind!r}")
    _section(doc, path, ("kind",) + _FIELD_KEYS[kind])
    if kind == "none":
        return FieldConfig.none(c=c)
    if kind == "uniform_e":
        return _build(path, FieldConfig.uniform_e, _vector(doc, "E0", path), c=c)
    if kind == "uniform_h":
        return _build(path, FieldConfig.uniform_h, _vector(doc, "H0", path), c=c)
    return _build(path, FieldConfig.plane_wave, _vector(doc, "E0", path), _vector(doc, "k", path),
                  _number(doc, "phase", path, 0.0), c=c)


def _parse_gauge(doc, path="gauge"):
    if not isinstance(doc, dict):
        raise ValidationError(path, "expected an object")
    kind = doc.get("kind")
    if kind not in _GAUGE_KEYS:
        raise ValidationError(f"{path}.kind", f"expected one of {sorted(_GAUGE_KEYS)}, got {kind!r}")
    _section(doc, path, ("kind",) + _GAUGE_KEYS[kind], _GAUGE_KEYS[kind])
    if kind == "constant":
        return _build(path, GaugeFrequency.constant, _number(doc, "omega0", path))
    if kind == "sinusoidal":
        return _build(path, GaugeFrequency.sinusoidal, _number(doc, "omega0", path),
                      _number(doc, "amp", path), _number(doc, "freq", path))
    samples = doc["samples"]
    if not isinstance(samples, list):
        raise ValidationError(f"{path}.samples", "expected a list of [t, omega] pairs")
    pairs = []
    for i, pair in enumerate(samples):
        where = f"{path}.samples[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ValidationError(where, "expected a [t, omega] pair")
        pairs.append((_number({"_": pair[0]}, "_", where), _number({"_": pair[1]}, "_", where)))
    return _build(path, GaugeFrequency.table, pairs)


def _parse_integrator(doc, path="integrator"):
    _section(doc, path, ("dt", "t_end", "method", "renorm_every"), ("t_end",))
    method = doc.get("method", "rk4")
    if not isinstance(method, str) or method.lower() != "rk4":
        raise ValidationError(f"{path}.method", f"unsupported method {method!r}")
    every = doc.get("renorm_every", 1)
    if isinstance(every, bool) or not isinstance(every, int) or every < 1:
        raise ValidationError(f"{path}.renorm_every", "expected a positive integer")
    return _build(path, IntegratorConfig, _number(doc, "dt", path, 1e-3),
                  _number(doc, "t_end", path), method.lower(), every)


def _parse_output(doc, path="output"):
    _section(doc, path, ("path", "every", "format"))
    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ValidationError(f"{path}.format", f"expected 'csv' or 'json', got {fmt!r}")
    out_path = doc.get("path", f"trajectory.{fmt}")
    if not isinstance(out_path, str) or not out_path:
        raise ValidationError(f"{path}.path", "expected a non-empty string")
    every = doc.get("every", 1)
    if isinstance(every, bool) or not isinstance(every, int) or every < 1:
        raise ValidationError(f"{path}.every", "expected a positive integer")
    return OutputConfig(out_path, every, fmt)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario document."""
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    _section(doc, "", ("params", "initial", "field", "gauge", "integrator", "output"),
             ("params", "initial", "field", "integrator"))
    pdoc = _section(doc["params"], "params", _PARAM_KEYS, ("a1", "a2"))
    defaults = RotatorParams()
    values = {k: _number(pdoc, k, "params", getattr(defaults, k) if k not in ("a1", "a2") else None)
              for k in _PARAM_KEYS}
    params = _build("params", RotatorParams, **values)
    initial = _parse_initial(doc["initial"])
    fld = _parse_field(doc["field"], params.c)
    gauge = _parse_gauge(doc["gauge"]) if "gauge" in doc else None
    if is_degenerate(params) and gauge is None:
        raise ValidationError("gauge", "a2 = a1**2 leaves |ndot|(t) undetermined; a gauge is required")
    if not is_degenerate(params) and gauge is not None:
        raise ValidationError("gauge", "a gauge is only allowed when a2 = a1**2")
    integrator = _parse_integrator(doc["integrator"])
    output = _parse_output(doc.get("output", {}))
    return ScenarioConfig(params, initial, fld, gauge, integrator, output)


def _floats(a):
    return [float(u) for u in a]


def config_to_dict(cfg: ScenarioConfig) -> dict:
    p = cfg.params
    fld = cfg.field
    fdoc = {"kind": fld.kind.value}
    if fld.kind is FieldKind.UNIFORM_E:
        fdoc["E0"] = _floats(fld.E0)
    elif fld.kind is FieldKind.UNIFORM_H:
        fdoc["H0"] = _floats(fld.H0)
    elif fld.kind is FieldKind.PLANE_WAVE:
        fdoc.update(E0=_floats(fld.E0), k=_floats(fld.wave_k), phase=float(fld.wave_phase))
    doc = {
        "params": {k: float(getattr(p, k)) for k in _PARAM_KEYS},
        "initial": {"x": _floats(cfg.initial.x), "v": _floats(cfg.initial.v),
                    "n": _floats(cfg.initial.n), "ndot": _floats(cfg.initial.ndot)},
        "field": fdoc,
    }
    if cfg.gauge is not None:
        g = cfg.gauge
        gdoc = {"kind": g.kind.value}
        if g.kind is GaugeKind.TABLE:
            gdoc["samples"] = [list(map(float, s)) for s in g.samples]
        else:
            gdoc["omega0"] = float(g.omega0)
            if g.kind is GaugeKind.SINUSOIDAL:
                gdoc.update(amp=float(g.amp), freq=float(g.freq))
        doc["gauge"] = gdoc
    i = cfg.integrator
    doc["integrator"] = {"dt": float(i.dt), "t_end": float(i.t_end), "method": i.method,
                         "renorm_every": int(i.renorm_every)}
    o = cfg.output
    doc["output"] = {"path": o.path, "every": int(o.every), "format": o.format}
    return doc


def serialize_config(cfg: ScenarioConfig) -> str:
    """JSON text that parses back to the same configuration."""
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


def load_config(path) -> ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# trajectory files
# ---------------------------------------------------------------------------


def _rows(traj: Trajectory, every: int):
    for i in range(0, len(traj), every):
        yield (traj.t[i], *traj.x[i], *traj.v[i], *traj.n[i], traj.omega[i], traj.energy[i],
               *traj.p[i], traj.det_hessian[i], traj.lorentz_residual[i])


def emit_trajectory(traj: Trajectory, path, format: str = "csv", every: int = 1) -> Path:
    """Write every ``every``-th sample; reals use shortest round-trip formatting."""
    if every < 1:
        raise ValueError("every must be a positive integer")
    path = Path(path)
    if format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in _rows(traj, every):
                fh.write(",".join(repr(float(u)) for u in row) + "\n")
    elif format == "json":
        records = [dict(zip(CSV_COLUMNS, map(float, row))) for row in _rows(traj, every)]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(records, fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {format!r}")
    return path


def read_trajectory_table(path) -> np.ndarray:
    """Read a CSV or JSON trajectory file into an (N, 17) array."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        try:
            records = json.loads(text)
            return np.array([[float(r[k]) for k in CSV_COLUMNS] for r in records])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed trajectory JSON ({exc})") from None
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if tuple(header or ()) != CSV_COLUMNS:
        raise ParseError(f"{path}: unexpected CSV header")
    try:
        return np.array([[float(u) for u in row] for row in reader])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_trajectory(path, params: RotatorParams, fld: FieldConfig) -> Trajectory:
    """Trajectory from a file; ndot is not stored, so it is left as None."""
    a = read_trajectory_table(path)
    if a.ndim != 2 or len(a) == 0:
        raise ParseError(f"{path}: no samples")
    return Trajectory(params, fld, a[:, 0], a[:, 1:4], a[:, 4:7], a[:, 7:10], None, a[:, 10],
                      a[:, 11], a[:, 12:15], a[:, 15], a[:, 16])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _condition_range(traj: Trajectory, max_points=200):
    if is_degenerate(traj.params):
        return None
    idx = np.unique(np.linspace(0, len(traj) - 1, min(len(traj), max_points)).round().astype(int))
    conds = [np.linalg.cond(mechanics.hessian_matrix_closed(traj.params, to_chart(traj.state(i))))
             for i in idx]
    return [float(min(conds)), float(max(conds))]


def summarize(traj: Trajectory) -> dict:
    final = traj.final_state
    return {
        "classification": "degenerate" if is_degenerate(traj.params) else "non-degenerate",
        "samples": len(traj),
        "final_state": {"t": final.t, "x": _floats(final.x), "v": _floats(final.v),
                        "n": _floats(final.n), "ndot": _floats(final.ndot)},
        "drift": {"p": float(np.max(np.linalg.norm(traj.p - traj.p[0], axis=1))),
                  "energy": float(np.max(np.abs(traj.energy - traj.energy[0]))),
                  "omega": float(np.max(np.abs(traj.omega - traj.omega[0])))},
        "max_lorentz_residual": float(np.max(np.abs(traj.lorentz_residual))),
        "hessian_condition_range": _condition_range(traj),
    }


def run_scenario(cfg: ScenarioConfig, out=None, base_dir=None) -> dict:
    """Integrate, write the trajectory and a ``.summary.json`` next to it."""
    path = Path(out) if out is not None else Path(cfg.output.path)
    if out is None and base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    log.info("integrating to t = %s with dt = %s", cfg.integrator.t_end, cfg.integrator.dt)
    traj = dynamics.integrate(cfg.params, cfg.initial, cfg.field, cfg.integrator, cfg.gauge)
    emit_trajectory(traj, path, cfg.output.format, cfg.output.every)
    summary = summarize(traj)
    summary["trajectory"] = str(path)
    summary_path = path.with_name(path.name + ".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %s and %s", path, summary_path)
    return summary


def analyze(cfg: ScenarioConfig, trajectory_path, max_points=200) -> dict:
    traj = load_trajectory(trajectory_path, cfg.params, cfg.field)
    report = dynamics.verify_solution(cfg.params, traj, cfg.field, max_points=max_points)
    return report.as_dict()


def inspect_state(cfg: ScenarioConfig) -> dict:
    """Hessian determinant, eigenvalues and kernel at the initial state."""
    params, state = cfg.params, cfg.initial
    chart = to_chart(state)
    H = mechanics.hessian_matrix_closed(params, chart)
    Hn = mechanics.hessian_numeric(params, chart, fld=cfg.field)
    kernel = mechanics.kernel_of(Hn)
    out = {
        "classification": "degenerate" if is_degenerate(params) else "non-degenerate",
        "gap": params.gap,
        "det_closed": mechanics.hessian_determinant_closed(params, chart),
        "det_numeric": float(np.linalg.det(Hn)),
        "scaled_det_numeric": mechanics.scaled_determinant(Hn),
        "eigenvalues": _floats(np.linalg.eigvalsh(H)),
        "kernel_dim": kernel.dim,
        "kernel": [_floats(v) for v in kernel.vectors],
        "chart": {"frame": [_floats(r) for r in chart.frame], "theta": chart.theta, "phi": chart.phi},
        "lorentz_residual": mechanics.lorentz_constraint_residual(state, cfg.field),
    }
    if is_degenerate(params):
        out["nullifying_direction"] = _floats(mechanics.nullifying_direction(params, chart))
    return out


def example_configs() -> dict:
    """Built-in scenario documents for the electric-field family and the helix."""
    p1 = RotatorParams(a1=-1.0, a2=1.0, charge=1.0)
    fam = analytic.example1_family(p1, 0.01, [0.0, 0.0, 0.0], [0.02, 0.01, 0.0],
                                   lambda t: 0.5 * t, lambda t: 0.5)
    s1 = fam.state(0.0)
    ex1 = ScenarioConfig(p1, s1, fam.field, GaugeFrequency.sinusoidal(0.5, 0.3, 1.0),
                         IntegratorConfig(1e-3, 20.0), OutputConfig("example1.csv", 10, "csv"))
    helix = analytic.example2_helix(RotatorParams(a1=-1.0, a2=1.0, ell=0.01), 0.5, 0.05, 1.0,
                                    [0.0, 0.0, 0.1])
    s2 = helix.state(0.0)
    ex2 = ScenarioConfig(helix.params, s2, helix.field, GaugeFrequency.constant(s2.omega),
                         IntegratorConfig(1e-3, 20.0), OutputConfig("example2.csv", 10, "csv"))
    return {"1": ex1, "2": ex2}


def _run_file(path: str):
    """Batch worker: returns (path, exit status, message)."""
    try:
        cfg = load_config(path)
        run_scenario(cfg, base_dir=Path(path).parent)
        return path, 0, "ok"
    except RotatorError as exc:
        return path, EXIT_ERROR, f"error:{exc.code}: {exc}"
    except OSError as exc:
        return path, EXIT_ERROR, f"error:io: {exc}"


def run_batch(directory, workers=None) -> int:
    files = sorted(str(p) for p in Path(directory).glob("*.json"))
    if not files:
        raise ConfigError(f"no *.json scenario files in {directory}")
    outputs = {}
    for f in files:
        cfg = load_config(f)
        target = (Path(f).parent / cfg.output.path).resolve()
        if target in outputs:
            raise ValidationError("output.path", f"{f} and {outputs[target]} write the same file")
        outputs[target] = f
    status = 0
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for path, code, msg in pool.map(_run_file, files):
            print(f"{path}: {msg}")
            status = max(status, code)
    return status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error:usage: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rotator", description="Simulate and analyse rotator dynamics.")
    parser.add_argument("--batch", metavar="DIR", help="run every *.json scenario in DIR concurrently")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sim = sub.add_parser("simulate", help="integrate a scenario")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out")
    ana = sub.add_parser("analyze", help="substitute a stored trajectory into the equations of motion")
    ana.add_argument("--trajectory", required=True)
    ana.add_argument("--config", required=True)
    ana.add_argument("--max-points", type=int, default=200)
    ins = sub.add_parser("inspect", help="Hessian diagnostics at the initial state")
    ins.add_argument("--config", required=True)
    ex = sub.add_parser("examples", help="write the built-in example scenarios")
    ex.add_argument("--which", choices=("1", "2"), required=True)
    ex.add_argument("--out", required=True)
    ex.add_argument("--run", action="store_true", help="also simulate the scenario")
    return parser


def _configure_logging():
    level = os.environ.get("ROTATOR_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"ROTATOR_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s")


def _dispatch(args) -> int:
    if args.batch:
        if args.command:
            raise ConfigError("--batch cannot be combined with a subcommand")
        return run_batch(args.batch)
    if args.command == "simulate":
        cfg = load_config(args.config)
        base = None if args.out else Path(args.config).parent
        summary = run_scenario(cfg, out=args.out, base_dir=base)
        print(json.dumps(summary, indent=2))
    elif args.command == "analyze":
        cfg = load_config(args.config)
        print(json.dumps(analyze(cfg, args.trajectory, args.max_points), indent=2))
    elif args.command == "inspect":
        print(json.dumps(inspect_state(load_config(args.config)), indent=2))
    elif args.command == "examples":
        cfg = example_configs()[args.which]
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"example{args.which}.json"
        path.write_text(serialize_config(cfg), encoding="utf-8")
        print(path)
        if args.run:
            run_scenario(cfg, base_dir=out)
    else:
        raise ConfigError("no command given (use simulate, analyze, inspect, examples or --batch)")
    return 0


def main(argv=None) -> int:
    try:
        _configure_logging()
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as exc:  # usage errors and --help
            return int(exc.code or 0)
        return _dispatch(args)
    except RotatorError as exc:
        sys.stderr.write(f"error:{exc.code}: {exc}\n")
    except OSError as exc:
        sys.stderr.write(f"error:io: {exc}\n")
    except ValueError as exc:
        sys.stderr.write(f"error:invalid: {exc}\n")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
