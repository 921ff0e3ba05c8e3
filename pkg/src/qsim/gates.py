"""Gate metrics and tune-up: fidelity with free Z phases, delay-Z, sqrt(X) and CZ calibration."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .device import (
    DriveParams,
    HamiltonianGenerator,
    SystemModel,
    TWO_PI,
    TransmonParams,
    build_single_transmon,
    build_tls,
    build_two_qubit_system,
)
from .dynamics import PropagationConfig, dressed_basis, propagate_unitary, unitarity_error, _evolve
from .pulses import (
    PulseShape,
    cosine_decorated_square,
    fast_adiabatic_flat_top,
    fast_adiabatic_ramp,
    optimize_slepian,
    slepian_angle,
)
from .spectrum import DressedSpectrum, diagonalize_matrix, effective_exchange


class TuneupError(RuntimeError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class NoPrecessionError(ZeroDivisionError):
    pass


# ---------------------------------------------------------------------------
# Ideal gates
# ---------------------------------------------------------------------------

SQRT_X = np.array([[1, -1j], [-1j, 1]], dtype=complex) / math.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def z_gate(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * phi)]).astype(complex)


@dataclass(frozen=True)
class GateSpec:
    target: str
    qubits: tuple[str, ...]
    ideal: np.ndarray = field(compare=False)

    def __post_init__(self):
        u = self.ideal
        if u.shape not in ((2, 2), (4, 4)) or unitarity_error(u) > 1e-12:
            raise ValueError("ideal gate must be a 2x2 or 4x4 unitary")

    @classmethod
    def sqrt_x(cls, qubit: str = "q0") -> "GateSpec":
        return cls("sqrt_x", (qubit,), SQRT_X)

    @classmethod
    def x(cls, qubit: str = "q0") -> "GateSpec":
        return cls("x", (qubit,), X)

    @classmethod
    def z(cls, phi: float, qubit: str = "q0") -> "GateSpec":
        return cls(f"z({phi:g})", (qubit,), z_gate(phi))

    @classmethod
    def cz(cls) -> "GateSpec":
        return cls("cz", ("q0", "q1"), CZ)


# ---------------------------------------------------------------------------
# Fidelity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FidelityResult:
    fidelity: float
    leakage: float
    phases: tuple[float, float] = (0.0, 0.0)
    raw_fidelity: float | None = None


def _phase_coeffs(m: np.ndarray, ideal: np.ndarray) -> np.ndarray:
    """c[j, k] such that Tr(ideal_phased^dag M) = sum_jk c[j,k] e^{-i(j x + k y)}, j,k in {0,1}."""
    d = m.shape[0]
    c = np.zeros((2, 2), dtype=complex)
    if d == 2:
        # ideal_phased = Z(y) ideal Z(x): x on the input index, y on the output index
        for row in range(2):
            for col in range(2):
                c[col, row] += np.conj(ideal[row, col]) * m[row, col]
        return c
    if not np.allclose(ideal, np.diag(np.diag(ideal))):
        raise ValueError("Z-phase optimization for d=4 needs a diagonal ideal gate")
    diag = np.conj(np.diag(ideal)) * np.diag(m)
    for k, v in enumerate(diag):
        c[k >> 1, k & 1] += v  # k = 2*n_q0 + n_q1
    return c


def _best_phase_trace(c: np.ndarray, n_grid: int = 720) -> tuple[float, float, float]:
    """max over (x, y) of |c00 + c01 e^{-iy} + c10 e^{-ix} + c11 e^{-i(x+y)}|."""

    def profile(y):
        a = c[0, 0] + c[0, 1] * np.exp(-1j * y)
        b = c[1, 0] + c[1, 1] * np.exp(-1j * y)
        return np.abs(a) + np.abs(b), a, b

    ys = np.linspace(0, 2 * np.pi, n_grid, endpoint=False)
    vals, _, _ = profile(ys)
    k = int(np.argmax(vals))
    step = ys[1] - ys[0]
    res = minimize_scalar(
        lambda y: -profile(y)[0], bounds=(ys[k] - step, ys[k] + step), method="bounded",
        options={"xatol": 1e-10},
    )
    y = float(res.x) if -res.fun >= vals[k] else float(ys[k])
    best, a, b = profile(y)
    # |a + e^{-ix} b| reaches |a| + |b| at x = arg b - arg a
    x = float(np.angle(b) - np.angle(a)) if abs(b) > 0 else 0.0
    return float(best), x % (2 * np.pi), y % (2 * np.pi)


def average_gate_fidelity(
    u_sim: np.ndarray,
    u_ideal: np.ndarray,
    comp_subspace: np.ndarray | Sequence[int] | None = None,
    optimize_z_phases: bool = False,
) -> FidelityResult:
    """State-averaged fidelity F = [Tr(M M^dag) + |Tr M|^2] / (d(d+1)) with M = U_ideal^dag P U P.

    ``comp_subspace`` is either a list of indices into ``u_sim`` or an isometry
    whose columns span the computational states; ``None`` means ``u_sim`` is
    already d x d. With ``optimize_z_phases`` single-qubit Z phases are
    maximized over: pre and post for d = 2, per qubit for a diagonal d = 4 ideal.
    """
    u_ideal = np.asarray(u_ideal, dtype=complex)
    d = u_ideal.shape[0]
    u = np.asarray(u_sim, dtype=complex)
    if comp_subspace is None:
        sub = u
    else:
        cs = np.asarray(comp_subspace)
        if cs.ndim == 1:
            sub = u[np.ix_(cs, cs)]
        else:
            sub = cs.conj().T @ (u @ cs) if u.shape[0] == cs.shape[0] and u.shape[1] == cs.shape[0] else cs.conj().T @ u
    if sub.shape != (d, d):
        raise ValueError(f"projected operator has shape {sub.shape}, expected {(d, d)}")
    m = u_ideal.conj().T @ sub
    tr_mm = float(np.real(np.trace(m @ m.conj().T)))
    leakage = max(0.0, 1.0 - tr_mm / d)
    raw = (tr_mm + abs(np.trace(m)) ** 2) / (d * (d + 1))
    if not optimize_z_phases:
        return FidelityResult(float(raw), leakage, (0.0, 0.0), float(raw))
    best, x, y = _best_phase_trace(_phase_coeffs(sub, u_ideal))
    fid = (tr_mm + best**2) / (d * (d + 1))
    return FidelityResult(float(max(fid, raw)), leakage, (x, y), float(raw))


def phased_ideal(u_ideal: np.ndarray, phases: tuple[float, float]) -> np.ndarray:
    """Ideal gate dressed with the Z phases returned by :func:`average_gate_fidelity`."""
    x, y = phases
    if u_ideal.shape[0] == 2:
        return z_gate(y) @ u_ideal @ z_gate(x)
    return np.diag(np.exp(1j * np.array([0, y, x, x + y]))) @ u_ideal


def state_average_bruteforce(u_sim: np.ndarray, u_ideal: np.ndarray) -> float:
    """Mean |<psi|U_ideal^dag U|psi>|^2 over the six single-qubit axis states (d = 2)."""
    s = 1 / math.sqrt(2)
    states = [
        np.array([1, 0]), np.array([0, 1]),
        np.array([s, s]), np.array([s, -s]),
        np.array([s, 1j * s]), np.array([s, -1j * s]),
    ]
    m = u_ideal.conj().T @ u_sim
    return float(np.mean([abs(np.vdot(p, m @ p)) ** 2 for p in states]))


# ---------------------------------------------------------------------------
# Z by delay, phase ledger
# ---------------------------------------------------------------------------

def delay_z(splitting: float, phi: float) -> float:
    """Smallest tau >= 0 with 2 pi * splitting * tau = phi (mod 2 pi)."""
    if splitting == 0:
        raise NoPrecessionError("zero splitting: delays cannot implement Z rotations")
    period = 1.0 / abs(splitting)
    tau = (phi / (TWO_PI * splitting)) % period
    return 0.0 if math.isclose(tau, period, rel_tol=1e-12) else float(tau)


@dataclass(frozen=True)
class PhaseLedger:
    phases: Mapping[str, float] = field(default_factory=dict)
    cursor: float = 0.0

    def phase(self, qubit: str) -> float:
        return self.phases.get(qubit, 0.0)


def track_idle_phase(ledger: PhaseLedger, interval: float, splitting) -> PhaseLedger:
    """Advance each tracked qubit frame by 2 pi * splitting * interval, wrapped to [0, 2 pi)."""
    if interval < 0:
        raise ValueError("interval must be >= 0")
    rates = splitting if isinstance(splitting, Mapping) else {q: splitting for q in (ledger.phases or {"q0": 0.0})}
    phases = dict(ledger.phases)
    for q, rate in rates.items():
        phases[q] = (phases.get(q, 0.0) + TWO_PI * rate * interval) % TWO_PI
    return PhaseLedger(phases, ledger.cursor + interval)


# ---------------------------------------------------------------------------
# Rabi landscapes
# ---------------------------------------------------------------------------

@dataclass
class RabiLandscape:
    detunings: np.ndarray
    second_axis: str
    second_values: np.ndarray
    populations: dict[str, np.ndarray]  # grid[i_second, j_detuning]
    sqrt_x_contour: list[tuple[float, float]]  # (second value, detuning) with P = 1/2
    x_point: tuple[float, float]  # (detuning, second value) of maximal transfer
    target: str


def _half_crossings(det: np.ndarray, row: np.ndarray) -> list[float]:
    s = row - 0.5
    out = []
    for j in range(det.size - 1):
        if s[j] == 0:
            out.append(float(det[j]))
        elif s[j] * s[j + 1] < 0:
            out.append(float(det[j] - s[j] * (det[j + 1] - det[j]) / (s[j + 1] - s[j])))
    return out


def _piece_unitary(gen: HamiltonianGenerator, shape: PulseShape, t0: float, t1: float, dt: float) -> np.ndarray:
    """Propagator over [t0, t1] with the control shifted to start at t0."""
    if t1 <= t0:
        return np.eye(gen.space.size, dtype=complex)
    g = gen.with_controls(q=lambda t: shape(t + t0))
    return propagate_unitary(g, t1 - t0, PropagationConfig(dt, "magnus4"))


def scan_rabi_landscape(
    kind: str,
    detunings: Sequence[float],
    second_axis: str,
    second_values: Sequence[float],
    pulse_kind: str = "square",
    *,
    idle_detuning: float = -0.1,
    drive_amp: float = 0.010,
    anharm: float = -0.25,
    drive_freq: float = 6.1,
    ramp: float = 10.0,
    pulse_length: float = 50.0,
    dim: int = 5,
    dt: float = 0.02,
) -> RabiLandscape:
    """End-of-pulse populations vs working detuning and a second axis.

    ``kind`` is "TLS" (start in dressed |0>, report P1) or "transmon" (start in
    dressed |1>, report P0 and P2). For square pulses the pulse length is the
    second axis when ``second_axis == "pulse_length"``; for cosine pulses that
    axis is the hold time, with ramps of ``ramp`` ns on top. ``drive_amp`` as
    second axis uses the fixed ``pulse_length``.
    """
    det = np.sort(np.asarray(detunings, dtype=float))
    sec = np.asarray(second_values, dtype=float)
    if second_axis not in ("pulse_length", "drive_amp"):
        raise ValueError("second_axis must be pulse_length or drive_amp")
    if pulse_kind not in ("square", "cosine"):
        raise ValueError("pulse_kind must be square or cosine")
    amps = sec if second_axis == "drive_amp" else np.array([drive_amp])
    names = ("P1",) if kind == "TLS" else ("P0", "P2")
    grids = {n: np.zeros((sec.size, det.size)) for n in names}

    def generator(amp):
        if kind == "TLS":
            return build_tls(idle_detuning, amp)
        return build_single_transmon(TransmonParams(drive_freq + idle_detuning, anharm), DriveParams(drive_freq, amp), dim)

    for ia, amp in enumerate(amps):
        gen = generator(amp)
        w0, v0 = np.linalg.eigh(gen.static_part)
        order = np.argmax(np.abs(v0), axis=0).argsort()
        v0 = v0[:, order]
        psi0 = v0[:, 0] if kind == "TLS" else v0[:, 1]
        for j, d in enumerate(det):
            idle_key = "q"
            offset = d - idle_detuning
            h_work = gen.at_freqs(**{idle_key: gen.idle_freqs[idle_key] + offset})
            wk, vk = np.linalg.eigh(h_work)
            if pulse_kind == "square":
                lengths = sec if second_axis == "pulse_length" else np.array([pulse_length])
                phases = np.exp(-1j * np.outer(lengths, wk))  # (n_len, dim)
                amps_t = (vk.conj().T @ psi0)[None, :] * phases
                finals = amps_t @ vk.T
            else:
                shape_r = cosine_decorated_square(offset, ramp, ramp)
                u_rise = _piece_unitary(gen, shape_r, 0.0, ramp / 2, dt)
                u_fall = _piece_unitary(gen, shape_r, ramp / 2, ramp, dt)
                holds = sec if second_axis == "pulse_length" else np.array([pulse_length - ramp])
                mid = vk.conj().T @ (u_rise @ psi0)
                finals = ((mid[None, :] * np.exp(-1j * np.outer(holds, wk))) @ vk.T) @ u_fall.T
            pops = np.abs(finals @ v0.conj()) ** 2  # dressed-basis populations
            rows = slice(None) if second_axis == "pulse_length" else slice(ia, ia + 1)
            if kind == "TLS":
                grids["P1"][rows, j] = pops[:, 1]
            else:
                grids["P0"][rows, j] = pops[:, 0]
                grids["P2"][rows, j] = pops[:, 2]
    key = "P1" if kind == "TLS" else "P0"
    contour = [(float(s), x) for i, s in enumerate(sec) for x in _half_crossings(det, grids[key][i])]
    i, j = np.unravel_index(np.argmax(grids[key]), grids[key].shape)
    return RabiLandscape(det, second_axis, sec, grids, contour, (float(det[j]), float(sec[i])), key)


# ---------------------------------------------------------------------------
# Two-qubit gate simulation
# ---------------------------------------------------------------------------

COMP_STATES = {
    "q0": ((0, 0, 0), (1, 0, 0)),
    "q1": ((0, 0, 0), (0, 0, 1)),
    "cz": ((0, 0, 0), (0, 0, 1), (1, 0, 0), (1, 0, 1)),
}


@dataclass
class GateRun:
    fidelity: FidelityResult
    populations: dict[str, np.ndarray]  # initial label -> final dressed populations (labels order)
    unitarity_error: float
    projected: np.ndarray
    labels: tuple[tuple[int, ...], ...]


def idle_spectrum(gen: HamiltonianGenerator) -> DressedSpectrum:
    return diagonalize_matrix(gen.static_part, gen.space.basis)


def run_gate(
    gen: HamiltonianGenerator,
    controls: Mapping[str, PulseShape],
    length: float,
    comp_states: Sequence[tuple[int, ...]],
    ideal: np.ndarray,
    *,
    dt: float = 0.02,
    method: str = "magnus4",
    spectrum: DressedSpectrum | None = None,
) -> GateRun:
    """Propagate the dressed computational states under ``controls`` and score against ``ideal``."""
    spec = spectrum or idle_spectrum(gen)
    basis = spec.frame(comp_states)
    g = gen.with_controls(**controls) if controls else gen
    cfg = PropagationConfig(dt, method)
    y, _ = _evolve(g, basis, length, cfg, None, False)
    proj_all = spec.states.conj().T @ y  # amplitudes in the full dressed basis
    sub = basis.conj().T @ y
    fid = average_gate_fidelity(sub, ideal, None, optimize_z_phases=True)
    unit = float(np.linalg.norm(y.conj().T @ y - np.eye(y.shape[1]), 2))
    pops = {}
    inv = {j: occ for occ, j in spec.labels.items()}
    labels = tuple(inv[j] for j in range(spec.states.shape[1]))
    for k, occ in enumerate(comp_states):
        pops[occ] = np.abs(proj_all[:, k]) ** 2
    return GateRun(fid, pops, unit, sub, labels)


def population_of(run: GateRun, initial: tuple[int, ...], final: tuple[int, ...]) -> float:
    return float(run.populations[initial][run.labels.index(final)])


def population_traces(
    gen: HamiltonianGenerator,
    controls: Mapping[str, PulseShape],
    length: float,
    initial_states: Sequence[tuple[int, ...]],
    watch: Sequence[tuple[int, ...]] | None = None,
    *,
    dt: float = 0.02,
    record_every: float = 0.5,
    spectrum: DressedSpectrum | None = None,
) -> tuple[np.ndarray, dict[tuple[int, ...], np.ndarray]]:
    """Dressed populations of ``watch`` states along the pulse, one (t, n_watch) array per initial state."""
    spec = spectrum or idle_spectrum(gen)
    watch = tuple(watch or initial_states)
    g = gen.with_controls(**controls) if controls else gen
    _, res = _evolve(g, spec.frame(initial_states), length, PropagationConfig(dt, "magnus4", record_every), None, True)
    amps = np.einsum("ia,tib->tab", spec.frame(watch).conj(), res.states)  # (t, watch, initial)
    pops = np.abs(amps) ** 2
    return res.times, {occ: pops[:, :, k] for k, occ in enumerate(initial_states)}


def dressed_qubit_freq(model: SystemModel, qubit: str, bare_freq: float, dim=5, cap=5) -> float:
    """Undriven dressed 0-1 frequency (GHz) of ``qubit`` when its bare frequency is ``bare_freq``."""
    m = model.with_freqs(**{qubit: bare_freq}).with_drive(amp=0.0)
    gen = build_two_qubit_system(m, dim, cap)
    spec = diagonalize_matrix(gen.static_part, gen.space.basis, warn=False)
    one = (1, 0, 0) if qubit == "q0" else (0, 0, 1)
    shift = model.drive.freq if model.frame == "drive_rotating" else 0.0
    return spec.energy(one) - spec.energy((0, 0, 0)) + shift


def calibrate_working_freq(model: SystemModel, qubit: str, target: float | None = None, dim=5, cap=5) -> float:
    """Bare frequency that puts the dressed qubit at ``target`` (default: the drive frequency)."""
    target = model.drive.freq if target is None else target
    return float(
        brentq(lambda f: dressed_qubit_freq(model, qubit, f, dim, cap) - target, target - 0.2, target + 0.2, xtol=1e-12)
    )


@functools.lru_cache(maxsize=64)
def _slepian_coeffs(length: float, n_terms: int, cutoff: float | None) -> tuple[float, ...]:
    return optimize_slepian(0.0, 1.0, length, n_terms, cutoff).coeffs


def fa_flat_top_offsets(
    idle_freq: float, work_freq: float, drive_freq: float, drive_amp: float, anharm: float,
    ramp: float, hold: float, n_terms: int = 3, cutoff: float | None = None,
) -> PulseShape:
    coeffs = _slepian_coeffs(float(ramp), n_terms, cutoff)
    r = fast_adiabatic_ramp(idle_freq - drive_freq, work_freq - drive_freq, drive_amp, anharm, ramp, coeffs)
    return fast_adiabatic_flat_top(r, hold)


@dataclass(frozen=True)
class TuneupResult:
    gate: str
    params: Mapping[str, float]
    fidelity: float
    leakage: float
    gate_time: float
    diagnostics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.fidelity + self.leakage > 1 + 1e-6:
            raise ValueError("fidelity + leakage exceeds 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=float)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n")
        return path


def sqrt_x_run(
    model: SystemModel, qubit: str, ramp: float, hold: float = 20.0, *,
    work_offset: float = 0.0, work_freq: float | None = None, dt: float = 0.02,
    dim: int = 5, cap: int | None = 5, gen: HamiltonianGenerator | None = None,
    spectrum: DressedSpectrum | None = None,
) -> GateRun:
    gen = gen or build_two_qubit_system(model, dim, cap)
    wf = calibrate_working_freq(model, qubit, dim=dim, cap=cap) if work_freq is None else work_freq
    idle = model.qubits[qubit].freq
    shape = fa_flat_top_offsets(idle, wf + work_offset, model.drive.freq, model.drive.amp,
                                model.qubits[qubit].anharm, ramp, hold)
    return run_gate(gen, {qubit: shape}, shape.length, COMP_STATES[qubit], SQRT_X, dt=dt, spectrum=spectrum)


def tune_sqrt_x(
    model: SystemModel,
    qubit: str = "q0",
    ramp_family: str = "fast_adiabatic",
    hold: float = 20.0,
    *,
    ramp_range: tuple[float, float] = (6.0, 14.0),
    n_coarse: int = 17,
    tune_offset: bool = False,
    dt: float = 0.02,
    dim: int = 5,
    cap: int | None = 5,
) -> TuneupResult:
    """Scan then refine the ramp time at fixed hold for the best sqrt(X) fidelity."""
    if ramp_family != "fast_adiabatic":
        raise ValueError("only the fast_adiabatic ramp family is tuned here")
    gen = build_two_qubit_system(model, dim, cap)
    spec = idle_spectrum(gen)
    wf = calibrate_working_freq(model, qubit, dim=dim, cap=cap)
    kw = dict(hold=hold, work_freq=wf, dt=dt, dim=dim, cap=cap, gen=gen, spectrum=spec)

    def infid(tr, off=0.0):
        return 1.0 - sqrt_x_run(model, qubit, tr, work_offset=off, **kw).fidelity.fidelity

    grid = np.linspace(*ramp_range, n_coarse)
    vals = np.array([infid(t) for t in grid])
    k = int(np.argmin(vals))
    if 1 - vals[k] < 0.99:
        raise TuneupError(f"sqrt(X) fidelity stays below 0.99 (best {1 - vals[k]:.4f})", float(grid[k]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, n_coarse - 1)]
    res = minimize_scalar(infid, bounds=(lo, hi), method="bounded", options={"xatol": 1e-4})
    tr, off = float(res.x), 0.0
    if tune_offset:
        r2 = minimize_scalar(lambda o: infid(tr, o), bounds=(-0.002, 0.002), method="bounded", options={"xatol": 1e-6})
        off = float(r2.x)
    run = sqrt_x_run(model, qubit, tr, work_offset=off, **kw)
    other = "q1" if qubit == "q0" else "q0"
    one = COMP_STATES[qubit][1]
    two = (2, 0, 0) if qubit == "q0" else (0, 0, 2)
    spect = (0, 0, 1) if qubit == "q0" else (1, 0, 0)
    return TuneupResult(
        "sqrt_x",
        {"qubit_is_q1": float(qubit == "q1"), "ramp_ns": tr, "hold_ns": hold, "work_freq_GHz": wf + off,
         "work_offset_GHz": off, "coupler_GHz": model.qubits["c"].freq},
        run.fidelity.fidelity,
        run.fidelity.leakage,
        tr + hold,
        {"leak_to_2_from_1": population_of(run, one, two),
         f"leak_to_{other}_from_1": population_of(run, one, spect),
         "unitarity_error": run.unitarity_error,
         "raw_fidelity": run.fidelity.raw_fidelity},
    )


@dataclass(frozen=True)
class RampScanRow:
    ramp: float
    leak_to_2: float
    p0: float  # final population of |0> starting from |1>
    p1: float
    leak_to_other: float = float("nan")
    fidelity: float = float("nan")
    leakage: float = float("nan")


def ramp_leakage_scan(
    ramps: Sequence[float],
    *,
    hold: float = 20.0,
    anharm: float = -0.25,
    drive_amp: float = 0.010,
    drive_freq: float = 6.1,
    idle_detuning: float = -0.1,
    work_detuning: float = 0.0,
    dim: int = 5,
    dt: float = 0.01,
) -> list[RampScanRow]:
    """Single driven transmon: fast-adiabatic flat-top from dressed |1>, dressed populations at the end."""
    q = TransmonParams(drive_freq + idle_detuning, anharm)
    gen = build_single_transmon(q, DriveParams(drive_freq, drive_amp), dim)
    _, v = dressed_basis(gen.static_part)
    rows = []
    for tr in ramps:
        shape = fa_flat_top_offsets(q.freq, drive_freq + work_detuning, drive_freq, drive_amp, anharm, float(tr), hold)
        y, _ = _evolve(gen.with_controls(q=shape), v[:, 1], shape.length, PropagationConfig(dt, "magnus4"), None, False)
        p = np.abs(v.conj().T @ y) ** 2
        rows.append(RampScanRow(float(tr), float(p[2]), float(p[0]), float(p[1])))
    return rows


def sqrt_x_ramp_scan(
    model: SystemModel, qubit: str, ramps: Sequence[float], hold: float = 20.0, *,
    dt: float = 0.02, dim: int = 5, cap: int | None = 5,
) -> list[RampScanRow]:
    """Two-qubit sqrt(X) vs ramp time: leakage of |1> to |2> and to the other qubit, plus gate metrics."""
    gen = build_two_qubit_system(model, dim, cap)
    spec = idle_spectrum(gen)
    wf = calibrate_working_freq(model, qubit, dim=dim, cap=cap)
    zero, one = COMP_STATES[qubit]
    two = (2, 0, 0) if qubit == "q0" else (0, 0, 2)
    other = (0, 0, 1) if qubit == "q0" else (1, 0, 0)
    rows = []
    for tr in ramps:
        run = sqrt_x_run(model, qubit, float(tr), hold, work_freq=wf, dt=dt, dim=dim, cap=cap, gen=gen, spectrum=spec)
        rows.append(RampScanRow(
            float(tr), population_of(run, one, two), population_of(run, one, zero), population_of(run, one, one),
            population_of(run, one, other), run.fidelity.fidelity, run.fidelity.leakage,
        ))
    return rows


# ---------------------------------------------------------------------------
# CZ
# ---------------------------------------------------------------------------

def coupler_angle_map(model: SystemModel, nu0: float, nu1: float, lo: float, hi: float, n: int = 4001):
    """theta(nu_c) = arctan(2 J(nu_c) / (nu0 - nu1)) on a grid, with J the dispersive exchange."""
    nc = np.linspace(lo, hi, n)
    j = np.array([effective_exchange(model, nu0, nu1, x) for x in nc])
    theta = np.arctan2(2 * j, nu0 - nu1)
    if not (np.all(np.diff(theta) > 0) or np.all(np.diff(theta) < 0)):
        raise ValueError("coupler angle is not monotone over the requested range")
    return nc, theta


def coupler_fa_offsets(
    model: SystemModel, nu1_work: float, nc_work: float, ramp: float, hold: float, n_terms: int = 3
) -> PulseShape:
    """Coupler flat-top whose ramps follow a Slepian trajectory in the exchange angle."""
    nc_idle = model.qubits["c"].freq
    nu0 = model.qubits["q0"].freq
    lo, hi = min(nc_work, nc_idle), max(nc_work, nc_idle)
    nc, theta = coupler_angle_map(model, nu0, nu1_work, lo - 1e-6, hi + 1e-6)
    order = np.argsort(theta)
    th_sorted, nc_sorted = theta[order], nc[order]
    th_i = float(np.interp(nc_idle, nc, theta))
    th_f = float(np.interp(nc_work, nc, theta))
    coeffs = _slepian_coeffs(float(ramp), n_terms, None)

    def ramp_fn(t):
        th = slepian_angle(t, th_i, th_f, ramp, coeffs)
        return np.interp(th, th_sorted, nc_sorted) - nc_idle

    r = PulseShape("slepian_ramp", ramp, {"theta_i": th_i, "theta_f": th_f, "coeffs": coeffs}, ramp_fn)
    return fast_adiabatic_flat_top(r, hold)


def cz_controls(
    model: SystemModel, pulse_kind: str, nu1_work: float, nc_work: float, *,
    length: float = 30.0, ramp: float = 10.0, hold: float = 10.0, q1_ramp: float = 6.0,
) -> tuple[dict[str, PulseShape], float]:
    d1 = nu1_work - model.qubits["q1"].freq
    dc = nc_work - model.qubits["c"].freq
    if pulse_kind == "cosine":
        return {"q1": cosine_decorated_square(d1, ramp, length), "c": cosine_decorated_square(dc, ramp, length)}, length
    if pulse_kind == "fast_adiabatic":
        c = coupler_fa_offsets(model, nu1_work, nc_work, length - hold, hold)
        return {"q1": cosine_decorated_square(d1, q1_ramp, length), "c": c}, length
    raise ValueError(f"unknown CZ pulse kind {pulse_kind!r}")


def cz_run(model, pulse_kind, nu1_work, nc_work, *, gen=None, spectrum=None, dt=0.02, dim=5, cap=5, **timing) -> GateRun:
    gen = gen or build_two_qubit_system(model, dim, cap)
    controls, length = cz_controls(model, pulse_kind, nu1_work, nc_work, **timing)
    return run_gate(gen, controls, length, COMP_STATES["cz"], CZ, dt=dt, spectrum=spectrum)


def cz_swap_error(run: GateRun) -> float:
    """Worst residual population exchange between |100> and |001>."""
    return max(population_of(run, (1, 0, 0), (0, 0, 1)), population_of(run, (0, 0, 1), (1, 0, 0)))


def tune_cz(
    model: SystemModel,
    pulse_kind: str = "cosine",
    *,
    length: float = 30.0,
    ramp: float = 10.0,
    hold: float = 10.0,
    q1_ramp: float = 6.0,
    start: tuple[float, float] | None = None,
    coarse: tuple[Sequence[float], Sequence[float]] | None = None,
    dt: float = 0.02,
    dim: int = 5,
    cap: int | None = 5,
    maxiter: int = 120,
) -> TuneupResult:
    """Optimize (nu1, nu_c) working points for the CZ ideal up to single-qubit Z phases.

    A coarse grid around the |101>/|200> resonance seeds a Nelder-Mead refinement.
    """
    gen = build_two_qubit_system(model, dim, cap)
    spec = idle_spectrum(gen)
    timing = dict(length=length, ramp=ramp, hold=hold, q1_ramp=q1_ramp)

    def infid(p):
        try:
            run = cz_run(model, pulse_kind, p[0], p[1], gen=gen, spectrum=spec, dt=dt, **timing)
        except ValueError:
            return 1.0
        return 1.0 - run.fidelity.fidelity

    res_freq = model.qubits["q0"].freq + model.qubits["q0"].anharm
    if coarse is None:
        coarse = (np.linspace(res_freq - 0.06, res_freq + 0.02, 9), np.linspace(6.7, 7.5, 9))
    if start is None:
        best = None
        for nu1 in coarse[0]:
            for nc in coarse[1]:
                v = infid((nu1, nc))
                if best is None or v < best[0]:
                    best = (v, nu1, nc)
        start = (best[1], best[2])
    res = minimize(
        infid, np.array(start, dtype=float), method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": maxiter, "initial_simplex":
                 np.array(start) + np.array([[0, 0], [0.004, 0], [0, 0.02]])},
    )
    nu1, nc = (float(x) for x in res.x)
    run = cz_run(model, pulse_kind, nu1, nc, gen=gen, spectrum=spec, dt=dt, **timing)
    if run.fidelity.fidelity < 0.9:
        raise TuneupError(f"CZ oscillation incomplete (best F {run.fidelity.fidelity:.4f})", (nu1, nc))
    params = {"q1_work_GHz": nu1, "coupler_work_GHz": nc, "length_ns": length}
    if pulse_kind == "cosine":
        params["ramp_ns"] = ramp
    else:
        params.update(coupler_ramp_ns=length - hold, hold_ns=hold, q1_ramp_ns=q1_ramp)
    return TuneupResult(
        f"cz_{pulse_kind}", params, run.fidelity.fidelity, run.fidelity.leakage, length,
        {"swap": cz_swap_error(run), "unitarity_error": run.unitarity_error,
         "phase_q0": run.fidelity.phases[0], "phase_q1": run.fidelity.phases[1]},
    )
