"""Device parameters and Hamiltonian assembly.

Units: every stored frequency is an ordinary frequency in GHz and time is in
ns. Assembled Hamiltonians are angular (rad/ns), i.e. multiplied by 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .hilbert import (
    ModeSpec,
    ProductSpace,
    annihilation_op,
    embed_op,
    embed_product,
    excitation_capped_basis,
)

TWO_PI = 2.0 * math.pi

FRAMES = ("lab", "drive_rotating")
RWA_MODES = ("rwa_plain", "rwa_corrected", "non_rwa")
KINDS = ("TLS", "single_transmon", "two_qubit_coupler", "qubit_resonator")


class ConfigurationError(ValueError):
    pass


class SingularityError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class TransmonParams:
    freq: float
    anharm: float

    def __post_init__(self):
        if self.anharm >= 0:
            raise ValueError(f"transmon anharmonicity must be negative, got {self.anharm}")


@dataclass(frozen=True)
class DriveParams:
    freq: float
    amp: float

    def __post_init__(self):
        if self.amp < 0:
            raise ValueError("drive amplitude must be >= 0")


@dataclass(frozen=True)
class CouplingSpec:
    g_ref: float
    ref_freq: float = 5.5
    scaling: str = "sqrt_freq"

    def __post_init__(self):
        if self.g_ref < 0 or self.ref_freq <= 0:
            raise ValueError("coupling needs g_ref >= 0 and ref_freq > 0")
        if self.scaling not in ("constant", "sqrt_freq"):
            raise ValueError(f"unknown coupling scaling {self.scaling!r}")


@dataclass(frozen=True)
class ResonatorParams:
    freq: float
    kappa: float
    g: float


@dataclass(frozen=True)
class SystemModel:
    """Device description from which Hamiltonians are assembled.

    For ``two_qubit_coupler`` the modes are ordered (Q0, Qc, Q1) with labels
    ``q0``, ``c``, ``q1`` so occupation tuples read |Q0 Qc Q1>. Couplings are
    keyed by label pairs.
    """

    kind: str
    qubits: Mapping[str, TransmonParams]
    drive: DriveParams
    couplings: Mapping[tuple[str, str], CouplingSpec] = field(default_factory=dict)
    resonator: ResonatorParams | None = None
    frame: str = "drive_rotating"
    rwa: str = "rwa_corrected"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}")
        if self.frame not in FRAMES:
            raise ConfigurationError(f"unknown frame {self.frame!r}")
        if self.rwa not in RWA_MODES:
            raise ConfigurationError(f"unknown rwa mode {self.rwa!r}")
        if self.rwa == "non_rwa" and self.frame != "lab":
            raise ConfigurationError("non_rwa Hamiltonians are only defined in the lab frame")
        if self.kind == "qubit_resonator" and self.resonator is None:
            raise ConfigurationError("qubit_resonator model needs resonator parameters")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.qubits)

    def freqs(self) -> dict[str, float]:
        return {k: q.freq for k, q in self.qubits.items()}

    def with_freqs(self, **freqs: float) -> "SystemModel":
        qubits = dict(self.qubits)
        for k, v in freqs.items():
            qubits[k] = replace(qubits[k], freq=float(v))
        return replace(self, qubits=qubits)

    def with_drive(self, *, freq: float | None = None, amp: float | None = None) -> "SystemModel":
        d = self.drive
        return replace(
            self,
            drive=DriveParams(d.freq if freq is None else freq, d.amp if amp is None else amp),
        )

    def with_options(self, **kwargs) -> "SystemModel":
        return replace(self, **kwargs)


def default_two_qubit_model(
    *,
    freqs: tuple[float, float, float] = (6.0, 11.35, 5.9),
    drive_amp: float = 0.010,
    drive_freq: float = 6.1,
    scaling: str = "sqrt_freq",
    rwa: str = "rwa_corrected",
    frame: str = "drive_rotating",
) -> SystemModel:
    """Two transmons plus tunable coupler at the idle point used throughout the gate studies."""
    f0, fc, f1 = freqs
    return SystemModel(
        kind="two_qubit_coupler",
        qubits={
            "q0": TransmonParams(f0, -0.250),
            "c": TransmonParams(fc, -0.200),
            "q1": TransmonParams(f1, -0.250),
        },
        couplings={
            ("q0", "q1"): CouplingSpec(0.013, 5.5, scaling),
            ("q0", "c"): CouplingSpec(0.160, 5.5, scaling),
            ("q1", "c"): CouplingSpec(0.160, 5.5, scaling),
        },
        drive=DriveParams(drive_freq, drive_amp),
        frame=frame,
        rwa=rwa,
    )


def default_readout_model(drive_amp: float = 0.0) -> SystemModel:
    return SystemModel(
        kind="qubit_resonator",
        qubits={"q": TransmonParams(6.0, -0.250)},
        drive=DriveParams(6.1, drive_amp),
        resonator=ResonatorParams(freq=5.0, kappa=0.005, g=0.100),
        frame="drive_rotating",
        rwa="rwa_plain",
    )


# ---------------------------------------------------------------------------
# Hamiltonian generator
# ---------------------------------------------------------------------------

TimeTerm = tuple[np.ndarray, Callable[[float], complex]]


@dataclass(frozen=True)
class HamiltonianGenerator:
    """H(t) = assemble(idle + control offsets(t)) + sum_k f_k(t) A_k.

    ``assemble`` maps mode frequencies (GHz) to the static matrix and is the
    hook through which pulses modulate mode frequencies. ``controls`` holds
    per-mode frequency offsets (GHz) as functions of time.
    """

    space: ProductSpace
    static_part: np.ndarray
    time_terms: tuple[TimeTerm, ...] = ()
    assemble: Callable[[Mapping[str, float]], np.ndarray] | None = field(default=None, repr=False)
    idle_freqs: Mapping[str, float] = field(default_factory=dict)
    controls: Mapping[str, Callable[[float], float]] = field(default_factory=dict, repr=False)

    @property
    def is_static(self) -> bool:
        return not self.time_terms and not self.controls

    def freqs_at(self, t: float) -> dict[str, float]:
        freqs = dict(self.idle_freqs)
        for label, offset in self.controls.items():
            freqs[label] = freqs[label] + float(offset(t))
        return freqs

    def __call__(self, t: float) -> np.ndarray:
        if self.controls:
            h = self.assemble(self.freqs_at(t))
        else:
            h = self.static_part
        if self.time_terms:
            h = h + sum(f(t) * op for op, f in self.time_terms)
        return h

    def at_freqs(self, **freqs: float) -> np.ndarray:
        """Static matrix with some mode frequencies overridden (time terms dropped)."""
        if self.assemble is None:
            raise ConfigurationError("generator exposes no frequency hook")
        merged = dict(self.idle_freqs)
        merged.update(freqs)
        return self.assemble(merged)

    def with_controls(self, **offsets: Callable[[float], float]) -> "HamiltonianGenerator":
        if self.assemble is None:
            raise ConfigurationError("generator exposes no frequency hook")
        unknown = set(offsets) - set(self.idle_freqs)
        if unknown:
            raise KeyError(f"no controllable mode(s) {sorted(unknown)}")
        merged = dict(self.controls)
        merged.update(offsets)
        return replace(self, controls=merged)

    def static(self) -> "HamiltonianGenerator":
        return replace(self, controls={}, time_terms=())


def _ladder(space: ProductSpace, label: str):
    i = space.mode_index(label)
    a = annihilation_op(space.modes[i].dim)
    return i, a


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_tls(drive_detuning: float, drive_amp: float) -> HamiltonianGenerator:
    """Two-level system in the drive frame, H = pi*D*sz + pi*W*sx.

    Here sz = |1><1| - |0><0|, so E(|1>) - E(|0>) = 2*pi*D matches the
    transmon convention. The controllable "frequency" of mode ``q`` is the
    detuning itself.
    """
    space = excitation_capped_basis([ModeSpec("q", 2)])
    sz = np.diag([-1.0, 1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)

    def assemble(freqs):
        return math.pi * freqs["q"] * sz + math.pi * drive_amp * sx

    idle = {"q": float(drive_detuning)}
    return HamiltonianGenerator(space, assemble(idle), assemble=assemble, idle_freqs=idle)


def build_single_transmon(q: TransmonParams, d: DriveParams, dim: int = 5) -> HamiltonianGenerator:
    if dim < 3:
        raise ValueError("single transmon needs dim >= 3 to expose the leakage level")
    space = excitation_capped_basis([ModeSpec("q", dim)])
    a = annihilation_op(dim)
    n = a.conj().T @ a
    kerr = a.conj().T @ a.conj().T @ a @ a
    x = a + a.conj().T

    def assemble(freqs):
        return TWO_PI * ((freqs["q"] - d.freq) * n + 0.5 * q.anharm * kerr + 0.5 * d.amp * x)

    idle = {"q": q.freq}
    return HamiltonianGenerator(space, assemble(idle), assemble=assemble, idle_freqs=idle)


def coupling_at(spec: CouplingSpec, freq_j: float, freq_k: float) -> float:
    if freq_j <= 0 or freq_k <= 0:
        raise ValueError("frequencies must be positive")
    if spec.scaling == "constant":
        return spec.g_ref
    return spec.g_ref * math.sqrt(freq_j * freq_k) / spec.ref_freq


def _pair_couplings(model: SystemModel, freqs: Mapping[str, float]) -> dict[tuple[str, str], float]:
    return {
        (j, k): coupling_at(spec, freqs[j], freqs[k]) for (j, k), spec in model.couplings.items()
    }


def rwa_corrected_params(
    model: SystemModel, freqs: Mapping[str, float] | None = None
) -> dict[str, float]:
    """Second-order counter-rotating corrections for the qubit-coupler-qubit system.

    Returns renormalized bare frequencies for ``q0``, ``q1``, ``c`` and the
    effective direct coupling ``g01``. Pair couplings are evaluated at the
    uncorrected frequencies.
    """
    if model.kind != "two_qubit_coupler":
        raise ConfigurationError("RWA corrections apply to the two_qubit_coupler model")
    f = dict(model.freqs()) if freqs is None else dict(freqs)
    g = _pair_couplings(model, f)
    g01 = g.get(("q0", "q1"), 0.0)
    g0c = g.get(("q0", "c"), 0.0)
    g1c = g.get(("q1", "c"), 0.0)

    def sigma(j, k):
        return f[j] + f[k]

    return {
        "q0": f["q0"] - g01**2 / sigma("q0", "q1") - g0c**2 / sigma("q0", "c"),
        "q1": f["q1"] - g01**2 / sigma("q0", "q1") - g1c**2 / sigma("q1", "c"),
        "c": f["c"] - g0c**2 / sigma("q0", "c") - g1c**2 / sigma("q1", "c"),
        "g01": g01 - 0.5 * g0c * g1c * (1.0 / sigma("q0", "c") + 1.0 / sigma("q1", "c")),
    }


def two_qubit_space(dim: int = 5, cap: int | None = 5) -> ProductSpace:
    return excitation_capped_basis([ModeSpec("q0", dim), ModeSpec("c", dim), ModeSpec("q1", dim)], cap)


def build_two_qubit_system(model: SystemModel, dim: int = 5, cap: int | None = 5) -> HamiltonianGenerator:
    if model.kind != "two_qubit_coupler":
        raise ConfigurationError("build_two_qubit_system needs a two_qubit_coupler model")
    space = two_qubit_space(dim, cap)
    labels = ("q0", "c", "q1")
    ops = {}
    for lab in labels:
        i, a = _ladder(space, lab)
        ad = a.conj().T
        ops[lab] = {
            "n": embed_op(space, i, ad @ a),
            "kerr": embed_op(space, i, ad @ ad @ a @ a),
            "x": embed_op(space, i, a + ad),
            "a": embed_op(space, i, a),
        }
    hop = {}
    counter = {}
    for j, k in model.couplings:
        ij, aj = _ladder(space, j)
        ik, ak = _ladder(space, k)
        ajk = embed_product(space, {ij: aj, ik: ak.conj().T})
        hop[(j, k)] = ajk + ajk.conj().T
        both = embed_product(space, {ij: aj, ik: ak})
        counter[(j, k)] = both + both.conj().T

    rotating = model.frame == "drive_rotating"
    shift = model.drive.freq if rotating else 0.0
    anh = {lab: model.qubits[lab].anharm for lab in labels}
    drive_x = ops["q0"]["x"] + ops["q1"]["x"]

    def assemble(freqs):
        g = _pair_couplings(model, freqs)
        mode_freqs = dict(freqs)
        if model.rwa == "rwa_corrected":
            corr = rwa_corrected_params(model, freqs)
            mode_freqs = {lab: corr[lab] for lab in labels}
            g[("q0", "q1")] = corr["g01"]
        h = np.zeros((space.size, space.size), dtype=complex)
        for lab in labels:
            h += (mode_freqs[lab] - shift) * ops[lab]["n"] + 0.5 * anh[lab] * ops[lab]["kerr"]
        for pair, op in hop.items():
            h += g.get(pair, 0.0) * op
        if model.rwa == "non_rwa":
            for pair, op in counter.items():
                h += g.get(pair, 0.0) * op
        if rotating:
            h += 0.5 * model.drive.amp * drive_x
        return TWO_PI * h

    time_terms: tuple = ()
    if not rotating and model.drive.amp > 0:
        wd = TWO_PI * model.drive.freq
        lower = ops["q0"]["a"] + ops["q1"]["a"]
        amp = TWO_PI * 0.5 * model.drive.amp
        time_terms = (
            (amp * lower.conj().T, lambda t: np.exp(-1j * wd * t)),
            (amp * lower, lambda t: np.exp(1j * wd * t)),
        )
    idle = {lab: model.qubits[lab].freq for lab in labels}
    return HamiltonianGenerator(
        space, assemble(idle), time_terms=time_terms, assemble=assemble, idle_freqs=idle
    )


@dataclass(frozen=True)
class ReadoutDrive:
    freq: float
    amp: float


def qubit_resonator_space(dims: tuple[int, int] = (4, 15)) -> ProductSpace:
    return excitation_capped_basis([ModeSpec("q", dims[0]), ModeSpec("r", dims[1])])


def build_qubit_resonator(
    model: SystemModel, readout: ReadoutDrive, dims: tuple[int, int] = (4, 15)
) -> HamiltonianGenerator:
    """Doubly rotating frame: qubit at the shared-drive frequency, resonator at the readout frequency.

    The exchange term keeps an explicit phase exp(+-i 2pi (f_d - f) t).
    """
    if model.kind != "qubit_resonator":
        raise ConfigurationError("build_qubit_resonator needs a qubit_resonator model")
    space = qubit_resonator_space(dims)
    iq, aq = _ladder(space, "q")
    ir, ar = _ladder(space, "r")
    q = model.qubits["q"]
    res = model.resonator
    nq = embed_op(space, iq, aq.conj().T @ aq)
    kerr = embed_op(space, iq, aq.conj().T @ aq.conj().T @ aq @ aq)
    xq = embed_op(space, iq, aq + aq.conj().T)
    nr = embed_op(space, ir, ar.conj().T @ ar)
    xr = embed_op(space, ir, ar + ar.conj().T)
    raise_q = TWO_PI * res.g * embed_product(space, {iq: aq.conj().T, ir: ar})

    def assemble(freqs):
        return TWO_PI * (
            (freqs["q"] - model.drive.freq) * nq
            + 0.5 * q.anharm * kerr
            + 0.5 * model.drive.amp * xq
            + (freqs["r"] - readout.freq) * nr
            + 0.5 * readout.amp * xr
        )

    delta = TWO_PI * (model.drive.freq - readout.freq)
    time_terms = (
        (raise_q, lambda t: np.exp(1j * delta * t)),
        (raise_q.conj().T, lambda t: np.exp(-1j * delta * t)),
    )
    idle = {"q": q.freq, "r": res.freq}
    return HamiltonianGenerator(
        space, assemble(idle), time_terms=time_terms, assemble=assemble, idle_freqs=idle
    )


def qubit_resonator_lab_static(model: SystemModel, dims: tuple[int, int] = (4, 15)) -> tuple[ProductSpace, np.ndarray]:
    """Undriven qubit-resonator Hamiltonian in the lab frame (RWA exchange)."""
    space = qubit_resonator_space(dims)
    iq, aq = _ladder(space, "q")
    ir, ar = _ladder(space, "r")
    q = model.qubits["q"]
    res = model.resonator
    ex = embed_product(space, {iq: aq.conj().T, ir: ar})
    h = (
        q.freq * embed_op(space, iq, aq.conj().T @ aq)
        + 0.5 * q.anharm * embed_op(space, iq, aq.conj().T @ aq.conj().T @ aq @ aq)
        + res.freq * embed_op(space, ir, ar.conj().T @ ar)
        + res.g * (ex + ex.conj().T)
    )
    return space, TWO_PI * h


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def ac_stark_shift(drive_detuning: float, drive_amp: float, anharm: float) -> float:
    """Drive-induced shift of the transmon 0-1 transition (GHz)."""
    if drive_detuning == 0 or drive_detuning + anharm == 0:
        raise SingularityError("ac-Stark shift diverges at drive_detuning in {0, -anharm}")
    return anharm * drive_amp**2 / (2.0 * drive_detuning * (drive_detuning + anharm))


def rabi_population(t, drive_detuning: float, drive_amp: float):
    """Excited-state population of a driven TLS started in |0> (t in ns, rates in GHz)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    w2 = drive_amp**2 + drive_detuning**2
    if w2 == 0:
        return np.zeros_like(t)[()]
    return (drive_amp**2 / w2 * np.sin(math.pi * t * math.sqrt(w2)) ** 2)[()]


def tilt_angle(drive_detuning: float, drive_amp: float) -> float:
    if drive_detuning == 0:
        return math.copysign(math.pi / 2, drive_amp) if drive_amp else 0.0
    return math.atan(drive_amp / drive_detuning)


def dressed_splitting(drive_detuning: float, drive_amp: float) -> float:
    return math.hypot(drive_detuning, drive_amp)


def overshoot_detuning(drive_detuning: float, drive_amp: float) -> float:
    if drive_detuning == 0:
        raise SingularityError("overshoot undefined at zero idle detuning")
    return drive_amp**2 / abs(drive_detuning)


def transmon_ladder_model(
    freq: float = 6.0, anharm: float = -0.250, drive_freq: float = 6.1, drive_amp: float = 0.010
) -> SystemModel:
    return SystemModel(
        kind="single_transmon",
        qubits={"q": TransmonParams(freq, anharm)},
        drive=DriveParams(drive_freq, drive_amp),
        rwa="rwa_plain",
    )


def build(model: SystemModel, **kwargs) -> HamiltonianGenerator:
    """Dispatch on ``model.kind``."""
    if model.kind == "single_transmon":
        return build_single_transmon(model.qubits["q"], model.drive, kwargs.get("dim", 5))
    if model.kind == "TLS":
        q = model.qubits["q"]
        return build_tls(q.freq - model.drive.freq, model.drive.amp)
    if model.kind == "two_qubit_coupler":
        return build_two_qubit_system(model, kwargs.get("dim", 5), kwargs.get("cap", 5))
    if model.kind == "qubit_resonator":
        return build_qubit_resonator(model, kwargs["readout"], kwargs.get("dims", (4, 15)))
    raise ConfigurationError(model.kind)


def hermiticity_error(h: np.ndarray) -> float:
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0

