"""Control waveforms for baseband frequency control.

A :class:`PulseShape` is a vectorized function of time on ``[0, length]``.
Detuning-type shapes return frequency offsets from the idle point (GHz);
``slepian_ramp`` returns the control angle (radians).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

KINDS = ("square", "cosine_square", "slepian_ramp", "fa_flat_top", "delay")


class InvalidShapeError(ValueError):
    pass


class ConstraintError(ValueError):
    pass


class OptimizationError(RuntimeError):
    def __init__(self, message: str, best_coeffs):
        super().__init__(message)
        self.best_coeffs = best_coeffs


@dataclass(frozen=True)
class PulseShape:
    kind: str
    length: float
    params: dict = field(default_factory=dict, compare=False)
    _fn: Callable[[np.ndarray], np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidShapeError(f"unknown pulse kind {self.kind!r}")
        if self.length < 0:
            raise InvalidShapeError("pulse length must be >= 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self._fn(np.clip(t, 0.0, self.length))
        return out[()] if out.ndim == 0 else out

    def value(self, t):
        return self(t)

    def scaled(self, factor: float) -> "PulseShape":
        fn = self._fn
        return PulseShape(self.kind, self.length, dict(self.params, scale=factor), lambda t: factor * fn(t))

    def mapped(self, func: Callable[[np.ndarray], np.ndarray], **params) -> "PulseShape":
        fn = self._fn
        return PulseShape(self.kind, self.length, dict(self.params, **params), lambda t: func(fn(t)))


def delay(length: float) -> PulseShape:
    return PulseShape("delay", length, {}, lambda t: np.zeros_like(t))


def square(amplitude: float, length: float) -> PulseShape:
    return PulseShape("square", length, {"amplitude": amplitude}, lambda t: np.full_like(t, amplitude))


def cosine_decorated_square(amplitude: float, ramp: float, length: float) -> PulseShape:
    """Flat top of height ``amplitude`` with half-cosine edges of ``ramp / 2`` each."""
    if not 0 < ramp <= length:
        raise InvalidShapeError(f"need 0 < ramp <= length, got ramp={ramp}, length={length}")

    def fn(t):
        rise = amplitude * (1 - np.cos(2 * np.pi * t / ramp)) / 2
        fall = amplitude * (1 - np.cos(2 * np.pi * (length - t) / ramp)) / 2
        return np.where(t < ramp / 2, rise, np.where(t > length - ramp / 2, fall, amplitude))

    return PulseShape("cosine_square", length, {"amplitude": amplitude, "ramp": ramp}, fn)


def _check_coeffs(coeffs: Sequence[float]) -> np.ndarray:
    lam = np.asarray(coeffs, dtype=float)
    odd_sum = lam[0::2].sum()  # n = 1, 3, 5, ...
    if abs(odd_sum - 1.0) > 1e-10:
        raise ConstraintError(f"odd Fourier coefficients must sum to 1, got {odd_sum:.12g}")
    return lam


def slepian_angle(t, theta_i: float, theta_f: float, length: float, coeffs: Sequence[float]):
    lam = np.asarray(coeffs, dtype=float)
    t = np.asarray(t, dtype=float)
    n = np.arange(1, lam.size + 1)
    terms = 1 - np.cos(2 * np.pi * np.multiply.outer(t, n) / length)
    return theta_i + 0.5 * (theta_f - theta_i) * (terms @ lam)


def slepian_angle_rate(t, theta_i, theta_f, length, coeffs):
    lam = np.asarray(coeffs, dtype=float)
    n = np.arange(1, lam.size + 1)
    w = 2 * np.pi * n / length
    return 0.5 * (theta_f - theta_i) * (np.sin(np.multiply.outer(np.asarray(t, float), w)) @ (lam * w))


def slepian_ramp(theta_i: float, theta_f: float, length: float, coeffs: Sequence[float]) -> PulseShape:
    """Control-angle trajectory theta_i -> theta_f (at length/2) -> theta_i."""
    lam = _check_coeffs(coeffs)
    return PulseShape(
        "slepian_ramp",
        length,
        {"theta_i": theta_i, "theta_f": theta_f, "coeffs": tuple(lam)},
        lambda t: slepian_angle(t, theta_i, theta_f, length, lam),
    )


def leakage_angle(detuning, drive_amp: float, anharm: float):
    """Control angle of the {|1>,|2>} subspace, arctan(sqrt2*W/(D + alpha))."""
    return np.arctan(math.sqrt(2) * drive_amp / (np.asarray(detuning, float) + anharm))


def angle_to_detuning(theta, drive_amp: float, anharm: float):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta == 0):
        raise ZeroDivisionError("control angle 0 maps to infinite detuning")
    return (math.sqrt(2) * drive_amp / np.tan(theta) - anharm)[()]


@dataclass(frozen=True)
class SlepianSpec:
    n_terms: int
    cutoff_freq: float
    coeffs: tuple[float, ...]
    objective: float


def _full_coeffs(free: np.ndarray, n_terms: int) -> np.ndarray:
    lam = np.zeros(n_terms)
    idx = [i for i in range(n_terms) if i != 0]
    lam[idx] = free
    lam[0] = 1.0 - lam[2::2].sum()
    return lam


def spectral_weight_above(
    coeffs: Sequence[float], length: float, cutoff_freq: float, *, dt: float = 0.01, pad: int = 16
) -> float:
    """Energy of the angular-velocity spectrum above ``cutoff_freq`` (unit angle swing)."""
    n = int(round(length / dt))
    t = np.arange(n + 1) * (length / n)
    rate = slepian_angle_rate(t, 0.0, 1.0, length, coeffs)
    nfft = 1 << int(math.ceil(math.log2(pad * (n + 1))))
    spec = np.fft.rfft(rate, nfft) * (length / n)
    freqs = np.fft.rfftfreq(nfft, d=length / n)
    df = freqs[1] - freqs[0]
    return float(2.0 * np.sum(np.abs(spec[freqs > cutoff_freq]) ** 2) * df)


def optimize_slepian(
    theta_i: float,
    theta_f: float,
    length: float,
    n_terms: int = 3,
    cutoff_freq: float | None = None,
    *,
    tol: float = 1e-10,
) -> SlepianSpec:
    """Fourier coefficients minimizing spectral weight above the cutoff (default 2/length).

    The objective does not depend on the angle endpoints; they are accepted so
    call sites read like the ramp they describe.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    fc = 2.0 / length if cutoff_freq is None else cutoff_freq
    if n_terms == 1:
        coeffs = (1.0,)
        return SlepianSpec(1, fc, coeffs, spectral_weight_above(coeffs, length, fc))

    def objective(free):
        return spectral_weight_above(_full_coeffs(free, n_terms), length, fc)

    res = minimize(
        objective,
        np.zeros(n_terms - 1),
        method="Nelder-Mead",
        options={"xatol": tol, "fatol": tol * 1e-3, "maxiter": 4000 * n_terms},
    )
    lam = _full_coeffs(res.x, n_terms)
    if not res.success:
        raise OptimizationError(f"Slepian optimization did not converge: {res.message}", tuple(lam))
    return SlepianSpec(n_terms, fc, tuple(float(x) for x in lam), float(res.fun))


def fast_adiabatic_ramp(
    idle_detuning: float,
    work_detuning: float,
    drive_amp: float,
    anharm: float,
    length: float,
    coeffs: Sequence[float],
) -> PulseShape:
    """Detuning-offset trajectory (GHz above idle) of a Slepian ramp in the leakage angle."""
    th_i = float(leakage_angle(idle_detuning, drive_amp, anharm))
    th_f = float(leakage_angle(work_detuning, drive_amp, anharm))
    angle = slepian_ramp(th_i, th_f, length, coeffs)

    def to_offset(theta):
        return angle_to_detuning(theta, drive_amp, anharm) - idle_detuning

    return angle.mapped(to_offset, idle_detuning=idle_detuning, work_detuning=work_detuning)


def fast_adiabatic_flat_top(ramp: PulseShape, hold: float) -> PulseShape:
    """Split a ramp at its midpoint and hold the midpoint value for ``hold`` ns."""
    if ramp.kind not in ("slepian_ramp", "fa_flat_top"):
        raise InvalidShapeError("flat-top insertion expects a Slepian-derived ramp")
    if hold < 0:
        raise InvalidShapeError("hold time must be >= 0")
    half = ramp.length / 2
    peak = float(ramp(half))

    def fn(t):
        if hold == 0:
            return ramp(t)
        return np.where(t <= half, ramp(t), np.where(t >= half + hold, ramp(t - hold), peak))

    return PulseShape(
        "fa_flat_top", ramp.length + hold, dict(ramp.params, hold=hold, ramp=ramp.length), fn
    )


def sample(shape: PulseShape, dt: float) -> tuple[np.ndarray, np.ndarray]:
    if dt <= 0:
        raise ValueError("dt must be > 0")
    n = int(math.floor(shape.length / dt + 1e-9))
    t = np.arange(n + 1) * dt
    if shape.length - t[-1] > 1e-9 * max(1.0, shape.length):
        t = np.append(t, shape.length)
    else:
        t[-1] = shape.length
    return t, np.asarray(shape(t), dtype=float)


def export_csv(shape: PulseShape, dt: float, path: str | Path) -> Path:
    t, v = sample(shape, dt)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "value_GHz"])
        for ti, vi in zip(t, v):
            w.writerow([f"{ti:.6f}", f"{vi:.12e}"])
    return path
