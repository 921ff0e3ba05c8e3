"""Dispersive readout: resonator pull, homodyne ensembles, weighted integration, threshold scoring."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .device import (
    ConfigurationError,
    ReadoutDrive,
    SystemModel,
    TWO_PI,
    build_qubit_resonator,
    build_single_transmon,
    qubit_resonator_lab_static,
)
from .dynamics import PropagationConfig, dressed_basis, homodyne_ensemble
from .hilbert import annihilation_op, embed_op
from .spectrum import diagonalize_matrix


class DegenerateReadoutError(ValueError):
    pass


@dataclass(frozen=True)
class ReadoutConfig:
    length: float = 250.0
    freq: float | None = None  # None: midpoint of the dressed resonator frequencies
    amp: float = 0.007
    repetitions: int = 1000
    seed: int = 0
    dt: float = 0.01
    record_every: float = 1.0
    dims: tuple[int, int] = (4, 15)

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("readout length must be > 0")
        if self.repetitions < 2:
            raise ValueError("need at least two repetitions per state")


@dataclass(frozen=True)
class ReadoutOutcome:
    samples: Mapping[int, np.ndarray] = field(repr=False)
    means: tuple[float, float]
    stds: tuple[float, float]
    threshold: float
    p0_given_1: float
    p1_given_0: float

    @property
    def fidelity(self) -> float:
        return 1.0 - (self.p0_given_1 + self.p1_given_0) / 2.0

    @property
    def error(self) -> float:
        return 1.0 - self.fidelity

    @property
    def stderr(self) -> float:
        """Binomial standard error of the readout error."""
        n0, n1 = len(self.samples[0]), len(self.samples[1])
        p, q = self.p1_given_0, self.p0_given_1
        return 0.5 * math.sqrt(p * (1 - p) / n0 + q * (1 - q) / n1)

    @property
    def separation(self) -> float:
        """Mean distance in units of the wider Gaussian."""
        return abs(self.means[1] - self.means[0]) / max(self.stds)

    def summary(self) -> dict:
        return {
            "mean_0": self.means[0], "mean_1": self.means[1],
            "std_0": self.stds[0], "std_1": self.stds[1],
            "threshold": self.threshold, "fidelity": self.fidelity,
            "P(0|1)": self.p0_given_1, "P(1|0)": self.p1_given_0,
            "error": self.error, "stderr": self.stderr, "separation_sigma": self.separation,
        }


def dressed_resonator_freqs(model: SystemModel, dims: tuple[int, int] = (4, 15)) -> tuple[float, float]:
    """(nu_r0, nu_r1) from the labeled undriven lab-frame spectrum (GHz)."""
    if model.kind != "qubit_resonator":
        raise ConfigurationError("dressed_resonator_freqs needs a qubit_resonator model")
    space, h = qubit_resonator_lab_static(model, dims)
    spec = diagonalize_matrix(h, space.basis, warn=False)
    r0 = spec.energy((0, 1)) - spec.energy((0, 0))
    r1 = spec.energy((1, 1)) - spec.energy((1, 0))
    return r0, r1


def dispersive_shift_estimate(model: SystemModel) -> float:
    """g^2 alpha / (D (D + alpha)) with D = nu_q - nu_r (GHz)."""
    q, r = model.qubits["q"], model.resonator
    d = q.freq - r.freq
    return r.g**2 * q.anharm / (d * (d + q.anharm))


def readout_frequency(model: SystemModel, dims=(4, 15)) -> float:
    r0, r1 = dressed_resonator_freqs(model, dims)
    return 0.5 * (r0 + r1)


def prepared_state(model: SystemModel, level: int, dims: tuple[int, int]) -> np.ndarray:
    """Drive-dressed qubit level ``level`` times resonator vacuum, on the capped-free product space."""
    q_gen = build_single_transmon(model.qubits["q"], model.drive, dims[0])
    _, v = dressed_basis(q_gen.static_part)
    vac = np.zeros(dims[1])
    vac[0] = 1.0
    return np.kron(v[:, level], vac)


@dataclass
class ReadoutRecords:
    times: np.ndarray
    records: dict[int, np.ndarray]  # state -> (repetitions, n_bins)
    readout_freq: float
    bin_width: float


def simulate_readout_ensemble(
    model: SystemModel, cfg: ReadoutConfig, prepared: Sequence[int] = (0, 1), *, readout_freq: float | None = None
) -> ReadoutRecords:
    """Homodyne records for each prepared qubit level; trajectory (state, k) uses seed (cfg.seed, state, k)."""
    freq = readout_freq or cfg.freq or readout_frequency(model.with_drive(amp=0.0), cfg.dims)
    gen = build_qubit_resonator(model, ReadoutDrive(freq, cfg.amp), cfg.dims)
    space = gen.space
    ir = space.mode_index("r")
    c_op = math.sqrt(TWO_PI * model.resonator.kappa) * embed_op(space, ir, annihilation_op(cfg.dims[1]))
    pcfg = PropagationConfig(cfg.dt, "euler_maruyama_sme", cfg.record_every)
    # all prepared states share one batch, hence one coherent step per time step
    n = cfg.repetitions
    psi0 = np.concatenate([np.tile(prepared_state(model, s, cfg.dims), (n, 1)) for s in prepared])
    seeds = [(cfg.seed, int(s), k) for s in prepared for k in range(n)]
    rec = homodyne_ensemble(gen, c_op, psi0, cfg.length, pcfg, seeds)
    out = {int(s): rec.records[i * n:(i + 1) * n] for i, s in enumerate(prepared)}
    return ReadoutRecords(rec.times, out, freq, cfg.record_every)


def optimal_weights(records_0: np.ndarray, records_1: np.ndarray, dt: float) -> np.ndarray:
    """W_t proportional to |<I1> - <I0>|, normalized so sum(W^2) dt = 1."""
    r0, r1 = np.atleast_2d(records_0), np.atleast_2d(records_1)
    if r0.shape[1] != r1.shape[1]:
        raise ValueError("records must share a sampling grid")
    diff = np.abs(r1.mean(axis=0) - r0.mean(axis=0))
    norm = math.sqrt(float(np.sum(diff**2) * dt))
    if norm == 0:
        raise DegenerateReadoutError("identical mean records give no weight function")
    return diff / norm


def integrate_quadrature(records: np.ndarray, weights: np.ndarray, mean_ref_0: np.ndarray, dt: float, k: float = 1.0):
    """sqrt(k) * trapezoid of W (I - <I0>) over the record grid; rows are independent records."""
    r = np.asarray(records, dtype=float)
    if r.shape[-1] != weights.shape[-1] or np.shape(mean_ref_0)[-1] != weights.shape[-1]:
        raise ValueError("record, weights and reference must share a grid")
    return math.sqrt(k) * np.trapezoid(weights * (r - mean_ref_0), dx=dt, axis=-1)


def gaussian_threshold(m0: float, s0: float, m1: float, s1: float) -> float:
    """Intersection of two Gaussian pdfs lying between the means.

    Nearly identical fits can cross just outside that interval; the crossing
    closest to the midpoint is used then.
    """
    if m0 == m1:
        raise DegenerateReadoutError("identical means: fitted distributions do not separate")
    if math.isclose(s0, s1, rel_tol=1e-12):
        return 0.5 * (m0 + m1)
    # log N(x; m0, s0) = log N(x; m1, s1) -> a x^2 + b x + c = 0
    a = 1 / (2 * s1**2) - 1 / (2 * s0**2)
    b = m0 / s0**2 - m1 / s1**2
    c = m1**2 / (2 * s1**2) - m0**2 / (2 * s0**2) + math.log(s1 / s0)
    roots = np.roots([a, b, c])
    lo, hi = min(m0, m1), max(m0, m1)
    real = [float(r.real) for r in roots if abs(r.imag) < 1e-12]
    if not real:
        raise DegenerateReadoutError("fitted Gaussians do not intersect")
    inside = [r for r in real if lo <= r <= hi]
    if inside:
        return inside[0]
    mid = 0.5 * (m0 + m1)
    return min(real, key=lambda r: abs(r - mid))


def classify_and_score(samples_0, samples_1) -> ReadoutOutcome:
    s0, s1 = np.asarray(samples_0, float), np.asarray(samples_1, float)
    if s0.size < 2 or s1.size < 2:
        raise ValueError("need at least two samples per state")
    m0, m1 = float(s0.mean()), float(s1.mean())
    d0, d1 = float(s0.std()), float(s1.std())
    thr = gaussian_threshold(m0, d0, m1, d1)
    if m1 > m0:
        p10, p01 = float(np.mean(s0 > thr)), float(np.mean(s1 <= thr))
    else:
        p10, p01 = float(np.mean(s0 < thr)), float(np.mean(s1 >= thr))
    return ReadoutOutcome({0: s0, 1: s1}, (m0, m1), (d0, d1), thr, p01, p10)


def score_records(recs: ReadoutRecords) -> ReadoutOutcome:
    r0, r1 = recs.records[0], recs.records[1]
    w = optimal_weights(r0, r1, recs.bin_width)
    ref = r0.mean(axis=0)
    i0 = integrate_quadrature(r0, w, ref, recs.bin_width)
    i1 = integrate_quadrature(r1, w, ref, recs.bin_width)
    return classify_and_score(i0, i1)


@dataclass
class DriveSweepPoint:
    drive_amp: float
    error: float | None
    stderr: float | None
    outcome: ReadoutOutcome | None = field(default=None, repr=False)
    failure: str | None = None
    records: ReadoutRecords | None = field(default=None, repr=False)


def readout_error_vs_drive(
    model: SystemModel, cfg: ReadoutConfig, drive_amps: Sequence[float]
) -> list[DriveSweepPoint]:
    """1 - F per always-on drive amplitude; every point reuses the same seeds and readout tone."""
    freq = cfg.freq or readout_frequency(model.with_drive(amp=0.0), cfg.dims)
    out = []
    for amp in drive_amps:
        try:
            recs = simulate_readout_ensemble(model.with_drive(amp=float(amp)), cfg, readout_freq=freq)
            res = score_records(recs)
            out.append(DriveSweepPoint(float(amp), res.error, res.stderr, res, records=recs))
        except (DegenerateReadoutError, FloatingPointError, np.linalg.LinAlgError) as exc:
            out.append(DriveSweepPoint(float(amp), None, None, None, str(exc)))
    return out


def write_samples_csv(outcome: ReadoutOutcome, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "integrated_I_arb"])
        for s in (0, 1):
            for v in outcome.samples[s]:
                w.writerow([s, f"{v:.10e}"])
    return path


def write_summary_json(outcome: ReadoutOutcome, path: str | Path, **extra) -> Path:
    path = Path(path)
    path.write_text(json.dumps(dict(outcome.summary(), **extra), indent=2, sort_keys=True) + "\n")
    return path


def write_mean_records_csv(recs: ReadoutRecords, path: str | Path) -> Path:
    path = Path(path)
    m0, m1 = recs.records[0].mean(axis=0), recs.records[1].mean(axis=0)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "mean_I_state0", "mean_I_state1"])
        for t, a, b in zip(recs.times, m0, m1):
            w.writerow([f"{t:.4f}", f"{a:.10e}", f"{b:.10e}"])
    return path
