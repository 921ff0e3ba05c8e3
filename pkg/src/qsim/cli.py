"""Command-line front end.

``qsim <scenario> [--config FILE] [--seed N] [--threads N] [--out DIR]``

Configs are YAML mappings with four optional sections, ``model``, ``solver``,
``sweep`` and ``options``. Dimensioned keys carry their unit as a suffix
(``_GHz`` or ``_ns``); anything left out keeps its default. Sweep entries
take either an explicit list or ``{start, stop, num}``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import __version__

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

CANONICAL_UNITS = ("GHz", "ns")
_UNIT_SUFFIX = re.compile(r"_(GHz|MHz|kHz|Hz|ns|us|ms|ps|s)$")


class ConfigError(ValueError):
    """All problems found in a config, not only the first one."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    default: Any
    kind: str = "float"  # float | int | str | floats | grid | int_or_none | strs
    choices: tuple = ()
    positive: bool = False


def _unit_of(key: str) -> str | None:
    m = _UNIT_SUFFIX.search(key)
    return m.group(1) if m else None


MODEL_FIELDS: dict[str, Field] = {
    "q0_freq_GHz": Field(6.0, positive=True),
    "q1_freq_GHz": Field(5.9, positive=True),
    "coupler_freq_GHz": Field(11.35, positive=True),
    "q0_anharm_GHz": Field(-0.25),
    "q1_anharm_GHz": Field(-0.25),
    "coupler_anharm_GHz": Field(-0.20),
    "g01_GHz": Field(0.013),
    "gqc_GHz": Field(0.16),
    "coupling_ref_freq_GHz": Field(5.5, positive=True),
    "coupling_scaling": Field("sqrt_freq", "str", ("sqrt_freq", "constant")),
    "rwa": Field("rwa_corrected", "str", ("rwa_plain", "rwa_corrected")),
    "drive_freq_GHz": Field(6.1, positive=True),
    "drive_amp_GHz": Field(0.010),
    # single transmon and qubit-resonator scenarios
    "qubit_freq_GHz": Field(6.0, positive=True),
    "qubit_anharm_GHz": Field(-0.25),
    "resonator_freq_GHz": Field(5.0, positive=True),
    "resonator_g_GHz": Field(0.1),
    "kappa_GHz": Field(0.005),
}

SOLVER_FIELDS: dict[str, Field] = {
    "dt_ns": Field(None, positive=True),  # None: scenario default
    "dim": Field(5, "int"),
    "cap": Field(5, "int_or_none"),
    "readout_qubit_dim": Field(4, "int"),
    "resonator_dim": Field(15, "int"),
}


def _grid(start, stop, num):
    return {"start": start, "stop": stop, "num": num}


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    description: str
    dt: float | None
    sweep: Mapping[str, Field] = field(default_factory=dict)
    options: Mapping[str, Field] = field(default_factory=dict)


_LANDSCAPE_SWEEP = {
    "detuning_GHz": Field(_grid(-0.03, 0.03, 61), "grid"),
    "pulse_length_ns": Field(_grid(0.0, 120.0, 121), "grid"),
    "drive_amp_GHz": Field(_grid(0.0, 0.02, 41), "grid"),
}
_LANDSCAPE_OPTS = {
    "ramp_ns": Field(10.0, positive=True),
    "fixed_length_ns": Field(50.0, positive=True),
}

SCENARIOS: dict[str, ScenarioSpec] = {s.name: s for s in (
    ScenarioSpec("fig2", "TLS Rabi landscapes with square pulses (P1 vs detuning and length / amplitude)", 0.02,
                 _LANDSCAPE_SWEEP, _LANDSCAPE_OPTS),
    ScenarioSpec("fig4", "fast-adiabatic flat-top leakage vs ramp time for three anharmonicities", 0.01,
                 {"ramp_ns": Field(_grid(2.0, 30.0, 29), "grid")},
                 {"anharms_GHz": Field([-0.20, -0.25, -0.30], "floats"), "hold_ns": Field(20.0),
                  "inset_ramp_ns": Field(10.0, positive=True)}),
    ScenarioSpec("fig5", "dephasing from drive-amplitude noise: averaged rho01 and fitted T_phi", None,
                 {"sigmas": Field([0.0, 0.005, 0.01, 0.02], "floats"),
                  "drive_amps_GHz": Field([0.010, 0.020], "floats")},
                 {"n_traj": Field(500, "int"), "duration_ns": Field(10000.0, positive=True),
                  "correlation_time_ns": Field(1.0, positive=True), "record_every_ns": Field(10.0, positive=True)}),
    ScenarioSpec("fig6", "dispersive readout: integrated-quadrature samples and error vs drive", 0.01,
                 {"drive_amps_GHz": Field([0.0, 0.005, 0.010, 0.015, 0.020], "floats")},
                 {"repetitions": Field(1000, "int"), "readout_length_ns": Field(250.0, positive=True),
                  "readout_amp_GHz": Field(0.007), "readout_freq_GHz": Field(None, positive=True),
                  "record_every_ns": Field(1.0, positive=True)}),
    ScenarioSpec("fig7", "residual XY and ZZ coupling maps with cuts", None,
                 {"qubit_freq_GHz": Field(_grid(5.6, 6.2, 25), "grid"),
                  "coupler_freq_GHz": Field(_grid(10.8, 11.8, 41), "grid"),
                  "q0_freq_GHz": Field(_grid(5.7, 6.3, 25), "grid"),
                  "q1_freq_GHz": Field(_grid(5.6, 6.0, 21), "grid")}, {}),
    ScenarioSpec("fig8", "two-qubit sqrt(X) ramp-time scans and tune-ups at two coupler idle points", 0.05,
                 {"ramp_ns": Field(_grid(4.0, 20.0, 17), "grid"),
                  "coupler_idle_GHz": Field([11.35, 11.25], "floats")},
                 {"hold_ns": Field(20.0), "qubits": Field(["q0", "q1"], "strs", ("q0", "q1"))}),
    ScenarioSpec("fig9", "CZ tune-up, pulses and population traces", 0.05, {},
                 {"pulse": Field("cosine", "str", ("cosine", "fa")), "length_ns": Field(None, positive=True),
                  "ramp_ns": Field(10.0, positive=True), "hold_ns": Field(10.0), "q1_ramp_ns": Field(6.0, positive=True)}),
    ScenarioSpec("fig11", "transmon from |1>: P0 and P2 vs detuning and drive amplitude", 0.02,
                 {"detuning_GHz": Field(_grid(-0.03, 0.03, 41), "grid"),
                  "drive_amp_GHz": Field(_grid(0.0, 0.02, 21), "grid")},
                 {"ramp_ns": Field(10.0, positive=True),
                  "square_length_ns": Field(50.0, positive=True), "cosine_hold_ns": Field(50.0)}),
    ScenarioSpec("fig12", "TLS Rabi landscapes with cosine-decorated pulses (hold-time axis)", 0.02,
                 {"detuning_GHz": Field(_grid(-0.03, 0.03, 41), "grid"),
                  "hold_ns": Field(_grid(0.0, 100.0, 51), "grid"),
                  "drive_amp_GHz": Field(_grid(0.0, 0.02, 21), "grid")},
                 {"ramp_ns": Field(10.0, positive=True),
                  "fixed_length_ns": Field(50.0, positive=True)}),
    ScenarioSpec("fig13", "transmon from |1>: P0 and P2 vs detuning and pulse time", 0.02,
                 {"detuning_GHz": Field(_grid(-0.03, 0.03, 41), "grid"),
                  "pulse_length_ns": Field(_grid(0.0, 100.0, 51), "grid")},
                 {"ramp_ns": Field(10.0, positive=True)}),
    ScenarioSpec("fig14", "fast-adiabatic leakage vs ramp time at stronger drives", 0.01,
                 {"ramp_ns": Field(_grid(2.0, 30.0, 29), "grid")},
                 {"drive_amps_GHz": Field([0.015, 0.020], "floats"), "holds_ns": Field([10.0, 5.0], "floats")}),
    ScenarioSpec("fig15", "J_101-200 and J_100-001 vs coupler frequency: plain RWA, corrected RWA, no RWA", None,
                 {"coupler_freq_GHz": Field(_grid(6.5, 11.5, 51), "grid")}, {}),
    ScenarioSpec("fig16", "CZ gate error vs gate length for both pulse families", 0.05,
                 {"cosine_lengths_ns": Field([20.0, 25.0, 30.0, 35.0, 40.0, 50.0], "floats"),
                  "fa_holds_ns": Field([0.0, 10.0, 20.0, 30.0, 40.0], "floats")},
                 {"ramp_ns": Field(10.0, positive=True), "fa_ramp_ns": Field(20.7, positive=True),
                  "q1_ramp_ns": Field(6.0, positive=True)}),
)}


@dataclass(frozen=True)
class SolverSettings:
    dt: float
    dim: int
    cap: int | None
    readout_qubit_dim: int
    resonator_dim: int


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved inputs of one scenario run."""

    scenario: str
    model: Mapping[str, Any]
    sweep: Mapping[str, Any]
    options: Mapping[str, Any]
    solver: SolverSettings
    seed: int = 0
    out: str = "qsim_out"

    def echo(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "model": dict(self.model),
            "solver": dict(vars(self.solver)),
            "sweep": {k: _jsonable(v) for k, v in self.sweep.items()},
            "options": {k: _jsonable(v) for k, v in self.options.items()},
        }


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if hasattr(v, "tolist"):
        return _jsonable(v.tolist())
    if hasattr(v, "item"):
        return v.item()
    return v


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check_value(path: str, key: str, f: Field, value, errors: list[str]):
    unit = _unit_of(key)
    nonneg = unit == "ns"

    def num(x, where=path):
        if not _is_number(x):
            errors.append(f"{where}: expected a number, got {x!r}")
            return None
        if nonneg and x < 0:
            errors.append(f"{where}: negative time {x!r} not allowed")
            return None
        if f.positive and x <= 0:
            errors.append(f"{where}: must be > 0, got {x!r}")
            return None
        return float(x)

    if value is None and f.default is None:
        return None
    if f.kind == "float":
        return num(value)
    if f.kind == "int":
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            errors.append(f"{path}: expected a positive integer, got {value!r}")
            return None
        return value
    if f.kind == "int_or_none":
        if value is None:
            return None
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            errors.append(f"{path}: expected a positive integer or null, got {value!r}")
            return None
        return value
    if f.kind == "str":
        if value not in f.choices:
            errors.append(f"{path}: expected one of {list(f.choices)}, got {value!r}")
            return None
        return value
    if f.kind == "strs":
        if not isinstance(value, list) or not value or any(v not in f.choices for v in value):
            errors.append(f"{path}: expected a non-empty list drawn from {list(f.choices)}, got {value!r}")
            return None
        return list(value)
    if f.kind in ("floats", "grid"):
        if isinstance(value, Mapping) and f.kind == "grid":
            missing = {"start", "stop", "num"} - set(value)
            extra = set(value) - {"start", "stop", "num"}
            if missing or extra:
                errors.append(f"{path}: range needs exactly start, stop, num")
                return None
            a, b = num(value["start"], path + ".start"), num(value["stop"], path + ".stop")
            n = value["num"]
            if not isinstance(n, int) or isinstance(n, bool) or n < 1:
                errors.append(f"{path}.num: expected a positive integer, got {n!r}")
                return None
            if a is None or b is None:
                return None
            if b < a:
                errors.append(f"{path}: stop < start")
                return None
            return {"start": a, "stop": b, "num": n}
        if not isinstance(value, list) or not value:
            errors.append(f"{path}: expected a non-empty list" + (" or {start, stop, num}" if f.kind == "grid" else ""))
            return None
        vals = [num(x, f"{path}[{i}]") for i, x in enumerate(value)]
        return None if any(v is None for v in vals) else vals
    raise AssertionError(f.kind)


def _check_section(section: str, raw, schema: Mapping[str, Field], errors: list[str]) -> dict:
    out = {k: f.default for k, f in schema.items()}
    if raw is None:
        return out
    if not isinstance(raw, Mapping):
        errors.append(f"{section}: expected a mapping, got {type(raw).__name__}")
        return out
    stems = {_UNIT_SUFFIX.sub("", k): k for k in schema}
    for key, value in raw.items():
        path = f"{section}.{key}"
        if not isinstance(key, str):
            errors.append(f"{path}: keys must be strings")
            continue
        if key not in schema:
            unit = _unit_of(key)
            stem = _UNIT_SUFFIX.sub("", key)
            if stem in stems and unit is not None and unit not in CANONICAL_UNITS:
                errors.append(f"{path}: unit violation, {unit} given; use {stems[stem]} ({_unit_of(stems[stem])})")
            elif stem in stems and unit is None and _unit_of(stems[stem]):
                errors.append(f"{path}: missing unit suffix; use {stems[stem]}")
            else:
                errors.append(f"{path}: unknown key")
            continue
        checked = _check_value(path, key, schema[key], value, errors)
        if checked is not None or value is None:
            out[key] = checked
    return out


def validate_config(raw_text: str | None, scenario: str, *, seed: int | None = None, out: str | None = None) -> ScenarioConfig:
    """Parse and check a YAML config for ``scenario``; defaults fill every unspecified field.

    Raises :class:`ConfigError` listing every problem found.
    """
    errors: list[str] = []
    if scenario not in SCENARIOS:
        raise ConfigError([f"scenario: unknown scenario {scenario!r}; choose from {sorted(SCENARIOS, key=_fig_order)}"])
    spec = SCENARIOS[scenario]
    data: Any = {}
    if raw_text and raw_text.strip():
        try:
            data = yaml.safe_load(raw_text)
        except yaml.YAMLError as exc:
            raise ConfigError([f"syntax: {exc}"]) from None
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError([f"top level: expected a mapping, got {type(data).__name__}"])
    for key in data:
        if key not in ("scenario", "seed", "model", "solver", "sweep", "options"):
            errors.append(f"{key}: unknown section")
    if "scenario" in data and data["scenario"] != scenario:
        errors.append(f"scenario: config names {data['scenario']!r} but {scenario!r} was requested")
    cfg_seed = data.get("seed", 0)
    if not isinstance(cfg_seed, int) or isinstance(cfg_seed, bool) or cfg_seed < 0:
        errors.append(f"seed: expected a non-negative integer, got {cfg_seed!r}")
        cfg_seed = 0
    model = _check_section("model", data.get("model"), MODEL_FIELDS, errors)
    solver = _check_section("solver", data.get("solver"), SOLVER_FIELDS, errors)
    sweep = _check_section("sweep", data.get("sweep"), spec.sweep, errors)
    options = _check_section("options", data.get("options"), spec.options, errors)
    for k in ("q0_anharm_GHz", "q1_anharm_GHz", "coupler_anharm_GHz", "qubit_anharm_GHz"):
        if model.get(k) is not None and model[k] >= 0:
            errors.append(f"model.{k}: transmon anharmonicity must be negative")
    for k in ("drive_amp_GHz", "g01_GHz", "gqc_GHz", "resonator_g_GHz", "kappa_GHz"):
        if model.get(k) is not None and model[k] < 0:
            errors.append(f"model.{k}: must be >= 0")
    for k in ("dim", "readout_qubit_dim", "resonator_dim"):
        if solver.get(k) is not None and solver[k] < 2:
            errors.append(f"solver.{k}: truncation must be >= 2")
    if errors:
        raise ConfigError(errors)
    dt = solver["dt_ns"] if solver["dt_ns"] is not None else (spec.dt or 0.01)
    settings = SolverSettings(dt, solver["dim"], solver["cap"], solver["readout_qubit_dim"], solver["resonator_dim"])
    return ScenarioConfig(
        scenario, model, sweep, options, settings,
        seed=cfg_seed if seed is None else seed, out=out or f"qsim_out/{scenario}",
    )


def _fig_order(name: str) -> int:
    return int(name[3:])


# ---------------------------------------------------------------------------
# Artifacts and manifest
# ---------------------------------------------------------------------------

def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    artifacts: list[dict]
    wall_clock_s: float
    version: str = __version__
    status: str = "ok"
    error: str | None = None
    environment: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": self.version, "status": self.status, "error": self.error,
            "config": self.config, "artifacts": self.artifacts,
            "wall_clock_s": round(self.wall_clock_s, 3), "environment": self.environment,
        }

    def write(self, out_dir: str | Path) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _environment() -> dict:
    import numpy
    import scipy

    return {"python": platform.python_version(), "numpy": numpy.__version__, "scipy": scipy.__version__}


def run_scenario(cfg: ScenarioConfig) -> RunManifest:
    """Execute ``cfg.scenario``; writes artifacts, ``summary.json`` and ``manifest.json`` under ``cfg.out``.

    Numerical failures propagate after a failed manifest has been written.
    """
    from .scenarios import ArtifactWriter, RUNNERS

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    writer = ArtifactWriter(out)
    t0 = time.perf_counter()
    status, err = "ok", None
    try:
        summary = RUNNERS[cfg.scenario](cfg, writer)
        writer.json("summary.json", {"scenario": cfg.scenario, "version": __version__, **summary})
    except Exception as exc:  # recorded, then re-raised for the exit code
        status, err = "failed", f"{type(exc).__name__}: {exc}"
        raise
    finally:
        manifest = RunManifest(cfg.echo(), writer.listing(), time.perf_counter() - t0,
                               status=status, error=err, environment=_environment())
        manifest.write(out)
    return manifest


def _set_threads(n: int | None):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)


NUMERICAL_ERRORS: tuple[type[BaseException], ...] = (ArithmeticError, RuntimeError)


def _numerical_errors() -> tuple[type[BaseException], ...]:
    import numpy as np

    from .device import ConfigurationError, SingularityError
    from .dynamics import StepSizeError
    from .gates import NoPrecessionError, TuneupError
    from .pulses import ConstraintError, OptimizationError
    from .readout import DegenerateReadoutError
    from .spectrum import CrossingNotFoundError, LabelingError

    return (np.linalg.LinAlgError, StepSizeError, TuneupError, NoPrecessionError, OptimizationError,
            ConstraintError, DegenerateReadoutError, CrossingNotFoundError, LabelingError,
            SingularityError, ConfigurationError) + NUMERICAL_ERRORS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsim", description="Run a named simulation scenario and write CSV/JSON artifacts.")
    p.add_argument("scenario", choices=sorted(SCENARIOS, key=_fig_order), metavar="scenario",
                   help="one of: " + ", ".join(sorted(SCENARIOS, key=_fig_order)))
    p.add_argument("--config", type=Path, help="YAML config file")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    p.add_argument("--threads", type=int, help="cap on BLAS/OpenMP threads")
    p.add_argument("--out", help="output directory (default qsim_out/<scenario>)")
    p.add_argument("--pulse", choices=("cosine", "fa"), help="CZ pulse family (fig9 only)")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("qsim: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None and args.seed < 0:
        print("qsim: --seed must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    if args.pulse and args.scenario != "fig9":
        print("qsim: --pulse only applies to fig9", file=sys.stderr)
        return EXIT_USAGE
    _set_threads(args.threads)
    try:
        text = args.config.read_text() if args.config else None
    except OSError as exc:
        print(f"qsim: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = validate_config(text, args.scenario, seed=args.seed, out=args.out)
    except ConfigError as exc:
        print("qsim: invalid config:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.pulse:
        cfg = ScenarioConfig(cfg.scenario, cfg.model, cfg.sweep, dict(cfg.options, pulse=args.pulse),
                             cfg.solver, cfg.seed, cfg.out)
    try:
        manifest = run_scenario(cfg)
    except _numerical_errors() as exc:
        print(f"qsim: numerical failure in {cfg.scenario}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{cfg.scenario}: {len(manifest.artifacts)} artifacts in {cfg.out} ({manifest.wall_clock_s:.1f} s)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
