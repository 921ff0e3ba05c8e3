"""Pipelines behind the CLI scenario names. Each runner writes its CSVs and returns the summary dict."""

from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .cli import ScenarioConfig, _jsonable
from .device import (
    CouplingSpec,
    DriveParams,
    ResonatorParams,
    SystemModel,
    TransmonParams,
    ac_stark_shift,
    build_two_qubit_system,
    overshoot_detuning,
    rabi_population,
)
from .dynamics import NoiseModel, fit_exponential_decay, monte_carlo_dephasing, write_rho01_csv, write_record_csv
from .gates import (
    COMP_STATES,
    RabiLandscape,
    _half_crossings,
    cz_controls,
    fa_flat_top_offsets,
    idle_spectrum,
    population_traces,
    ramp_leakage_scan,
    scan_rabi_landscape,
    sqrt_x_ramp_scan,
    tune_cz,
    tune_sqrt_x,
)
from .pulses import sample
from .readout import (
    ReadoutConfig,
    dispersive_shift_estimate,
    dressed_resonator_freqs,
    readout_error_vs_drive,
    readout_frequency,
    write_mean_records_csv,
    write_samples_csv,
)
from .spectrum import coupling_vs_coupler, sweep_map, xy_coupling, zz_coupling


class ArtifactWriter:
    """Writes files under one directory and remembers them for the manifest."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.names: list[str] = []

    def path(self, name: str) -> Path:
        if name not in self.names:
            self.names.append(name)
        return self.root / name

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        p = self.path(name)
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
        return p

    def json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
        return p

    def listing(self) -> list[dict]:
        from .cli import sha256_file

        out = []
        for name in sorted(self.names):
            p = self.root / name
            if p.exists():
                out.append({"path": name, "sha256": sha256_file(p), "bytes": p.stat().st_size})
        return out


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return x


def values(spec) -> np.ndarray:
    """Sweep entry (list or {start, stop, num}) as an array."""
    if isinstance(spec, Mapping):
        return np.linspace(spec["start"], spec["stop"], spec["num"])
    return np.asarray(spec, dtype=float)


# ---------------------------------------------------------------------------
# models from config
# ---------------------------------------------------------------------------

def two_qubit_model(m: Mapping, *, rwa: str | None = None, frame: str = "drive_rotating") -> SystemModel:
    spec = lambda g: CouplingSpec(g, m["coupling_ref_freq_GHz"], m["coupling_scaling"])  # noqa: E731
    return SystemModel(
        kind="two_qubit_coupler",
        qubits={
            "q0": TransmonParams(m["q0_freq_GHz"], m["q0_anharm_GHz"]),
            "c": TransmonParams(m["coupler_freq_GHz"], m["coupler_anharm_GHz"]),
            "q1": TransmonParams(m["q1_freq_GHz"], m["q1_anharm_GHz"]),
        },
        couplings={("q0", "q1"): spec(m["g01_GHz"]), ("q0", "c"): spec(m["gqc_GHz"]), ("q1", "c"): spec(m["gqc_GHz"])},
        drive=DriveParams(m["drive_freq_GHz"], m["drive_amp_GHz"]),
        frame=frame,
        rwa=rwa or m["rwa"],
    )


def readout_model(m: Mapping) -> SystemModel:
    return SystemModel(
        kind="qubit_resonator",
        qubits={"q": TransmonParams(m["qubit_freq_GHz"], m["qubit_anharm_GHz"])},
        drive=DriveParams(m["drive_freq_GHz"], m["drive_amp_GHz"]),
        resonator=ResonatorParams(m["resonator_freq_GHz"], m["kappa_GHz"], m["resonator_g_GHz"]),
        rwa="rwa_plain",
    )


def _idle_detuning(m: Mapping) -> float:
    return m["qubit_freq_GHz"] - m["drive_freq_GHz"]


# ---------------------------------------------------------------------------
# Rabi landscapes (fig2, fig11, fig12, fig13)
# ---------------------------------------------------------------------------

def _write_landscape(w: ArtifactWriter, name: str, land: RabiLandscape, second_col: str) -> dict:
    keys = list(land.populations)
    rows = (
        (land.second_values[i], land.detunings[j], *(land.populations[k][i, j] for k in keys))
        for i in range(land.second_values.size) for j in range(land.detunings.size)
    )
    w.csv(f"{name}.csv", [second_col, "detuning_GHz", *keys], rows)
    w.csv(f"{name}_sqrtx_contour.csv", [second_col, "detuning_GHz"], land.sqrt_x_contour)
    d, s = land.x_point
    return {"x_point": {"detuning_GHz": d, second_col: s, land.target: float(np.max(land.populations[land.target]))},
            "n_contour_points": len(land.sqrt_x_contour)}


def _tls_analytic_contour(det, second, axis, amp, length) -> list[tuple[float, float]]:
    out = []
    for s in second:
        if axis == "pulse_length":
            row = np.array([rabi_population(s, d, amp) for d in det])
        else:
            row = np.array([rabi_population(length, d, s) for d in det])
        out += [(float(s), x) for x in _half_crossings(np.asarray(det), row)]
    return out


def _tls_panels(cfg: ScenarioConfig, w: ArtifactWriter, pulse_kind: str, name: str, length_key: str) -> dict:
    m, sw, op = cfg.model, cfg.sweep, cfg.options
    det = values(sw["detuning_GHz"])
    lengths, amps = values(sw[length_key]), values(sw["drive_amp_GHz"])
    common = dict(idle_detuning=_idle_detuning(m), drive_amp=m["drive_amp_GHz"], ramp=op["ramp_ns"],
                  pulse_length=op["fixed_length_ns"], dt=cfg.solver.dt)
    a = scan_rabi_landscape("TLS", det, "pulse_length", lengths, pulse_kind, **common)
    b = scan_rabi_landscape("TLS", det, "drive_amp", amps, pulse_kind, **common)
    col = "pulse_length_ns" if pulse_kind == "square" else "hold_ns"
    summary = {"a": _write_landscape(w, f"{name}a_P1", a, col), "b": _write_landscape(w, f"{name}b_P1", b, "drive_amp_GHz")}
    if pulse_kind == "square":
        w.csv(f"{name}a_sqrtx_analytic.csv", [col, "detuning_GHz"],
              _tls_analytic_contour(det, lengths, "pulse_length", m["drive_amp_GHz"], None))
        w.csv(f"{name}b_sqrtx_analytic.csv", ["drive_amp_GHz", "detuning_GHz"],
              _tls_analytic_contour(det, amps, "drive_amp", None, op["fixed_length_ns"]))
    summary["overshoot_estimate_GHz"] = overshoot_detuning(_idle_detuning(m), m["drive_amp_GHz"])
    return summary


def run_fig2(cfg, w):
    return _tls_panels(cfg, w, "square", "fig2", "pulse_length_ns")


def run_fig12(cfg, w):
    return _tls_panels(cfg, w, "cosine", "fig12", "hold_ns")


def _transmon_common(cfg) -> dict:
    m = cfg.model
    return dict(idle_detuning=_idle_detuning(m), drive_amp=m["drive_amp_GHz"], anharm=m["qubit_anharm_GHz"],
                drive_freq=m["drive_freq_GHz"], ramp=cfg.options["ramp_ns"], dim=cfg.solver.dim, dt=cfg.solver.dt)


def _leak_summary(land: RabiLandscape) -> dict:
    """Largest |2> population along the numerical sqrt(X) contour."""
    p2 = land.populations["P2"]
    worst = 0.0
    for s, d in land.sqrt_x_contour:
        i = int(np.argmin(np.abs(land.second_values - s)))
        j = int(np.argmin(np.abs(land.detunings - d)))
        worst = max(worst, float(p2[i, j]))
    return {"max_P2_on_sqrtx_contour": worst, "max_P2": float(p2.max())}


def run_fig11(cfg, w):
    det, amps = values(cfg.sweep["detuning_GHz"]), values(cfg.sweep["drive_amp_GHz"])
    op, kw = cfg.options, _transmon_common(cfg)
    sq = scan_rabi_landscape("transmon", det, "drive_amp", amps, "square", pulse_length=op["square_length_ns"], **kw)
    co = scan_rabi_landscape("transmon", det, "drive_amp", amps, "cosine",
                             pulse_length=op["cosine_hold_ns"] + op["ramp_ns"], **kw)
    out = {}
    for tag, land in (("a_square", sq), ("b_cosine", co)):
        out[tag] = {**_write_landscape(w, f"fig11{tag[0]}_populations", land, "drive_amp_GHz"), **_leak_summary(land)}
    return out


def run_fig13(cfg, w):
    det, lengths = values(cfg.sweep["detuning_GHz"]), values(cfg.sweep["pulse_length_ns"])
    kw = _transmon_common(cfg)
    sq = scan_rabi_landscape("transmon", det, "pulse_length", lengths, "square", **kw)
    co = scan_rabi_landscape("transmon", det, "pulse_length", lengths, "cosine", **kw)
    out = {}
    for tag, land, col in (("a_square", sq, "pulse_length_ns"), ("b_cosine", co, "hold_ns")):
        out[tag] = {**_write_landscape(w, f"fig13{tag[0]}_populations", land, col), **_leak_summary(land)}
    return out


# ---------------------------------------------------------------------------
# Leakage vs ramp (fig4, fig14)
# ---------------------------------------------------------------------------

def _ramp_rows_summary(rows) -> dict:
    leak = np.array([r.leak_to_2 for r in rows])
    ramps = np.array([r.ramp for r in rows])
    k = int(np.argmin(leak))
    out = {"best_ramp_ns": float(ramps[k]), "best_leakage": float(leak[k])}
    for cut in (10.0, 12.0):
        sel = ramps > cut if cut == 10.0 else ramps >= cut
        out[f"max_leakage_ramp_{'gt' if cut == 10.0 else 'ge'}_{cut:g}ns"] = float(leak[sel].max()) if sel.any() else None
    return out


def run_fig4(cfg, w):
    m, op = cfg.model, cfg.options
    ramps = values(cfg.sweep["ramp_ns"])
    kw = dict(hold=op["hold_ns"], drive_amp=m["drive_amp_GHz"], drive_freq=m["drive_freq_GHz"],
              idle_detuning=_idle_detuning(m), dim=cfg.solver.dim, dt=cfg.solver.dt)
    table, summary = [], {}
    for alpha in op["anharms_GHz"]:
        rows = ramp_leakage_scan(ramps, anharm=alpha, **kw)
        table += [(alpha, r.ramp, r.leak_to_2, r.p0, r.p1) for r in rows]
        summary[f"anharm_{alpha:g}GHz"] = _ramp_rows_summary(rows)
    w.csv("fig4_leakage.csv", ["anharm_GHz", "ramp_ns", "leakage_P2", "P0", "P1"], table)
    shape = fa_flat_top_offsets(m["qubit_freq_GHz"], m["drive_freq_GHz"], m["drive_freq_GHz"], m["drive_amp_GHz"],
                                m["qubit_anharm_GHz"], op["inset_ramp_ns"], op["hold_ns"])
    t, v = sample(shape, 0.1)
    w.csv("fig4_inset_pulse.csv", ["t_ns", "qubit_freq_GHz"], zip(t, v + m["qubit_freq_GHz"]))
    return summary


def run_fig14(cfg, w):
    m, op = cfg.model, cfg.options
    if len(op["drive_amps_GHz"]) != len(op["holds_ns"]):
        raise ValueError("options.drive_amps_GHz and options.holds_ns must have equal length")
    ramps = values(cfg.sweep["ramp_ns"])
    table, summary = [], {}
    for amp, hold in zip(op["drive_amps_GHz"], op["holds_ns"]):
        rows = ramp_leakage_scan(ramps, hold=hold, anharm=m["qubit_anharm_GHz"], drive_amp=amp,
                                 drive_freq=m["drive_freq_GHz"], idle_detuning=_idle_detuning(m),
                                 dim=cfg.solver.dim, dt=cfg.solver.dt)
        table += [(amp, hold, r.ramp, r.leak_to_2, r.p0, r.p1) for r in rows]
        summary[f"drive_{amp * 1e3:g}MHz_hold_{hold:g}ns"] = _ramp_rows_summary(rows)
    w.csv("fig14_leakage.csv", ["drive_amp_GHz", "hold_ns", "ramp_ns", "leakage_P2", "P0", "P1"], table)
    return summary


# ---------------------------------------------------------------------------
# Dephasing (fig5)
# ---------------------------------------------------------------------------

def run_fig5(cfg, w):
    m, op = cfg.model, cfg.options
    base = SystemModel("single_transmon", {"q": TransmonParams(m["qubit_freq_GHz"], m["qubit_anharm_GHz"])},
                       DriveParams(m["drive_freq_GHz"], m["drive_amp_GHz"]), rwa="rwa_plain")
    table, summary = [], {}
    for amp in cfg.sweep["drive_amps_GHz"]:
        for sigma in cfg.sweep["sigmas"]:
            res = monte_carlo_dephasing(base.with_drive(amp=amp), NoiseModel(sigma, op["correlation_time_ns"], cfg.seed),
                                        op["n_traj"], op["duration_ns"], dim=cfg.solver.dim,
                                        record_every=op["record_every_ns"])
            fit = fit_exponential_decay(res.times, res.coherence)
            name = f"fig5_rho01_drive{amp * 1e3:g}MHz_sigma{sigma:g}.csv"
            write_rho01_csv(res, w.path(name))
            table.append((amp, sigma, fit.t_phi, fit.residual, res.coherence[-1]))
            summary[f"drive_{amp * 1e3:g}MHz_sigma_{sigma:g}"] = {"t_phi_ns": fit.t_phi if fit.decaying else None,
                                                                 "final_abs_rho01": float(res.coherence[-1])}
    w.csv("fig5_tphi.csv", ["drive_amp_GHz", "sigma", "t_phi_ns", "fit_residual", "final_abs_rho01"],
          [(a, s, "inf" if not math.isfinite(t) else t, r, f) for a, s, t, r, f in table])
    summary["ac_stark_shift_GHz"] = ac_stark_shift(_idle_detuning(m), m["drive_amp_GHz"], m["qubit_anharm_GHz"])
    return summary


# ---------------------------------------------------------------------------
# Readout (fig6)
# ---------------------------------------------------------------------------

def run_fig6(cfg, w):
    m, op = cfg.model, cfg.options
    model = readout_model(m)
    dims = (cfg.solver.readout_qubit_dim, cfg.solver.resonator_dim)
    undriven = model.with_drive(amp=0.0)
    freq = op["readout_freq_GHz"] or readout_frequency(undriven, dims)
    rcfg = ReadoutConfig(op["readout_length_ns"], freq, op["readout_amp_GHz"], op["repetitions"], cfg.seed,
                         cfg.solver.dt, op["record_every_ns"], dims)
    points = readout_error_vs_drive(model, rcfg, cfg.sweep["drive_amps_GHz"])
    r0, r1 = dressed_resonator_freqs(undriven, dims)
    table, per_point = [], {}
    for pt in points:
        tag = f"drive{pt.drive_amp * 1e3:g}MHz"
        if pt.outcome is None:
            table.append((pt.drive_amp, None, None, None, None, None, None))
            per_point[tag] = {"failure": pt.failure}
            continue
        o = pt.outcome
        write_samples_csv(o, w.path(f"fig6_samples_{tag}.csv"))
        write_mean_records_csv(pt.records, w.path(f"fig6_mean_records_{tag}.csv"))
        for state in (0, 1):
            write_record_csv(pt.records.times, pt.records.records[state][0], w.path(f"fig6_trajectory_{tag}_state{state}.csv"))
        per_point[tag] = o.summary()
        table.append((pt.drive_amp, pt.error, pt.stderr, o.fidelity, o.p0_given_1, o.p1_given_0, o.separation))
    w.csv("fig6_error_vs_drive.csv",
          ["drive_amp_GHz", "readout_error", "stderr", "fidelity", "P(0|1)", "P(1|0)", "separation_sigma"], table)
    errs = [p.error for p in points]
    summary = {
        "readout_freq_GHz": freq, "dressed_resonator_GHz": {"r0": r0, "r1": r1},
        "chi_GHz": 0.5 * (r0 - r1), "chi_dispersive_estimate_GHz": dispersive_shift_estimate(undriven),
        "points": per_point, "repetitions": op["repetitions"],
    }
    if errs[0] is not None and errs[-1] is not None:
        summary["error_increase"] = errs[-1] - errs[0]
    return summary


# ---------------------------------------------------------------------------
# Couplings (fig7, fig15)
# ---------------------------------------------------------------------------

def run_fig7(cfg, w):
    model = two_qubit_model(cfg.model)
    sv, kw = cfg.sweep, dict(dim=cfg.solver.dim, cap=cfg.solver.cap)
    qf, cf = values(sv["qubit_freq_GHz"]), values(sv["coupler_freq_GHz"])
    q0f, q1f = values(sv["q0_freq_GHz"]), values(sv["q1_freq_GHz"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        xy = sweep_map(model, ("qubits", qf), ("c", cf), "xy", **kw)
        zz = sweep_map(model, ("q0", q0f), ("q1", q1f), "zz", **kw)
        nc, n0 = model.qubits["c"].freq, model.qubits["q0"].freq
        xy_cut = [xy_coupling(model, f, f, nc, **kw) for f in np.sort(qf)]
        zz_cut1 = [zz_coupling(model, {"q1": f}, **kw) for f in np.sort(q1f)]
        zz_cut0 = [zz_coupling(model, {"q0": f}, **kw) for f in np.sort(q0f)]
        idle_zz = zz_coupling(model, **kw)
        xy_a = xy_coupling(model, n0, n0, 11.35, **kw)
        xy_b = xy_coupling(model, n0, n0, 11.25, **kw)

    def grid_rows(a, b, g):
        return ((x, y, g[i, j]) for i, x in enumerate(np.sort(a)) for j, y in enumerate(np.sort(b)))

    w.csv("fig7a_xy_map.csv", ["qubit_freq_GHz", "coupler_freq_GHz", "xy_GHz"], grid_rows(qf, cf, xy))
    w.csv("fig7a_xy_cut.csv", ["qubit_freq_GHz", "xy_GHz"], zip(np.sort(qf), xy_cut))
    w.csv("fig7b_zz_map.csv", ["q0_freq_GHz", "q1_freq_GHz", "zz_GHz"], grid_rows(q0f, q1f, zz))
    w.csv("fig7b_zz_cut_q1.csv", ["q1_freq_GHz", "zz_GHz"], zip(np.sort(q1f), zz_cut1))
    w.csv("fig7b_zz_cut_q0.csv", ["q0_freq_GHz", "zz_GHz"], zip(np.sort(q0f), zz_cut0))
    band = (np.sort(q1f) >= 5.7) & (np.sort(q1f) <= 6.0)
    return {
        "idle_zz_GHz": idle_zz,
        "xy_resonant_GHz": {"coupler_11.35": xy_a, "coupler_11.25": xy_b},
        "max_abs_zz_q1_cut_5.7_6.0_GHz": float(np.nanmax(np.abs(np.array(zz_cut1)[band]))) if band.any() else None,
        "nan_points": {"xy": int(np.isnan(xy).sum()), "zz": int(np.isnan(zz).sum())},
    }


RWA_VARIANTS = (("plain", "rwa_plain", "drive_rotating"), ("corrected", "rwa_corrected", "drive_rotating"),
                ("non_rwa", "non_rwa", "lab"))


def coupling_table(model_cfg: Mapping, coupler_freqs, dim=5, cap=5) -> dict[str, dict[str, np.ndarray]]:
    out = {}
    for pair in ("J_101_200", "J_100_001"):
        out[pair] = {}
        for tag, rwa, frame in RWA_VARIANTS:
            model = two_qubit_model(model_cfg, rwa=rwa, frame=frame)
            out[pair][tag] = coupling_vs_coupler(model, coupler_freqs, pair, dim=dim, cap=cap)
    return out


def rwa_deviation_summary(table) -> dict:
    out = {}
    for pair, cols in table.items():
        plain = float(np.max(np.abs(cols["plain"] - cols["non_rwa"])))
        corr = float(np.max(np.abs(cols["corrected"] - cols["non_rwa"])))
        out[pair] = {"max_dev_plain_GHz": plain, "max_dev_corrected_GHz": corr,
                     "improvement_factor": plain / corr if corr > 0 else None}
    return out


def run_fig15(cfg, w):
    nc = values(cfg.sweep["coupler_freq_GHz"])
    table = coupling_table(cfg.model, nc, cfg.solver.dim, cfg.solver.cap)
    header, cols = ["coupler_freq_GHz"], [nc]
    for pair, variants in table.items():
        for tag, v in variants.items():
            header.append(f"{pair}_{tag}_GHz")
            cols.append(v)
    w.csv("fig15_couplings.csv", header, zip(*cols))
    return rwa_deviation_summary(table)


# ---------------------------------------------------------------------------
# Gates (fig8, fig9, fig16)
# ---------------------------------------------------------------------------

def run_fig8(cfg, w):
    base = two_qubit_model(cfg.model)
    ramps = values(cfg.sweep["ramp_ns"])
    hold, s = cfg.options["hold_ns"], cfg.solver
    table, summary = [], {}
    for nc in cfg.sweep["coupler_idle_GHz"]:
        model = base.with_freqs(c=nc)
        for q in cfg.options["qubits"]:
            rows = sqrt_x_ramp_scan(model, q, ramps, hold, dt=s.dt, dim=s.dim, cap=s.cap)
            table += [(nc, q, r.ramp, r.fidelity, r.leakage, r.leak_to_2, r.leak_to_other, r.p0, r.p1) for r in rows]
            res = tune_sqrt_x(model, q, hold=hold, dt=s.dt, dim=s.dim, cap=s.cap)
            res.save(w.path(f"fig8_tuneup_{q}_coupler{nc:g}.json"))
            summary[f"{q}_coupler_{nc:g}"] = {"fidelity": res.fidelity, "leakage": res.leakage,
                                              "gate_time_ns": res.gate_time, "ramp_ns": res.params["ramp_ns"],
                                              **res.diagnostics}
    w.csv("fig8_ramp_scan.csv", ["coupler_idle_GHz", "qubit", "ramp_ns", "fidelity", "leakage", "leak_1_to_2",
                                 "leak_to_other_qubit", "P0_from_1", "P1_from_1"], table)
    return summary


CZ_KIND = {"cosine": "cosine", "fa": "fast_adiabatic"}


def _cz_timing(op: Mapping, kind: str, length: float | None) -> dict:
    if length is None:
        length = 30.0 if kind == "cosine" else 30.7
    return dict(length=length, ramp=op.get("ramp_ns", 10.0), hold=op.get("hold_ns", 10.0), q1_ramp=op.get("q1_ramp_ns", 6.0))


def run_fig9(cfg, w):
    model = two_qubit_model(cfg.model)
    kind = CZ_KIND[cfg.options["pulse"]]
    timing = _cz_timing(cfg.options, kind, cfg.options["length_ns"])
    s = cfg.solver
    res = tune_cz(model, kind, dt=s.dt, dim=s.dim, cap=s.cap, **timing)
    res.save(w.path(f"fig9_tuneup_{cfg.options['pulse']}.json"))
    nu1, nc = res.params["q1_work_GHz"], res.params["coupler_work_GHz"]
    controls, length = cz_controls(model, kind, nu1, nc, **timing)
    t, _ = sample(controls["q1"], 0.05)
    w.csv(f"fig9_pulse_{cfg.options['pulse']}.csv", ["t_ns", "q1_freq_GHz", "coupler_freq_GHz"],
          zip(t, controls["q1"](t) + model.qubits["q1"].freq, controls["c"](t) + model.qubits["c"].freq))
    gen = build_two_qubit_system(model, s.dim, s.cap)
    comp = COMP_STATES["cz"]
    watch = comp + ((2, 0, 0),)
    times, pops = population_traces(gen, controls, length, comp, watch, dt=s.dt, record_every=0.1,
                                    spectrum=idle_spectrum(gen))
    names = {(0, 0, 0): "P00", (0, 0, 1): "P01", (1, 0, 0): "P10", (1, 0, 1): "P11"}
    cols = [pops[o][:, watch.index(o)] for o in comp]
    w.csv(f"fig9_populations_{cfg.options['pulse']}.csv",
          ["t_ns", *(names[o] for o in comp), "P200_from_101", "P001_from_100", "P100_from_001"],
          zip(times, *cols, pops[(1, 0, 1)][:, watch.index((2, 0, 0))], pops[(1, 0, 0)][:, watch.index((0, 0, 1))],
              pops[(0, 0, 1)][:, watch.index((1, 0, 0))]))
    return {"pulse": cfg.options["pulse"], "fidelity": res.fidelity, "leakage": res.leakage,
            "gate_time_ns": res.gate_time, "params": dict(res.params), **res.diagnostics}


def run_fig16(cfg, w):
    model = two_qubit_model(cfg.model)
    op, s = cfg.options, cfg.solver
    rows, summary = [], {"cosine": {}, "fa": {}}
    start = None
    for length in cfg.sweep["cosine_lengths_ns"]:
        res = tune_cz(model, "cosine", length=length, ramp=op["ramp_ns"], start=start, dt=s.dt, dim=s.dim, cap=s.cap)
        start = (res.params["q1_work_GHz"], res.params["coupler_work_GHz"])
        rows.append(("cosine", length, math.nan, 1 - res.fidelity, res.leakage, res.diagnostics["swap"], *start))
        summary["cosine"][f"{length:g}ns"] = 1 - res.fidelity
    start = None
    for hold in cfg.sweep["fa_holds_ns"]:
        length = op["fa_ramp_ns"] + hold
        res = tune_cz(model, "fast_adiabatic", length=length, hold=hold, q1_ramp=op["q1_ramp_ns"], start=start,
                      dt=s.dt, dim=s.dim, cap=s.cap)
        start = (res.params["q1_work_GHz"], res.params["coupler_work_GHz"])
        rows.append(("fa", length, hold, 1 - res.fidelity, res.leakage, res.diagnostics["swap"], *start))
        summary["fa"][f"{length:g}ns"] = 1 - res.fidelity
    w.csv("fig16_gate_error.csv", ["pulse", "length_ns", "hold_ns", "gate_error", "leakage", "swap",
                                   "q1_work_GHz", "coupler_work_GHz"], rows)
    return summary


RUNNERS: dict[str, Callable[[ScenarioConfig, ArtifactWriter], dict]] = {
    "fig2": run_fig2, "fig4": run_fig4, "fig5": run_fig5, "fig6": run_fig6, "fig7": run_fig7,
    "fig8": run_fig8, "fig9": run_fig9, "fig11": run_fig11, "fig12": run_fig12, "fig13": run_fig13,
    "fig14": run_fig14, "fig15": run_fig15, "fig16": run_fig16,
}
