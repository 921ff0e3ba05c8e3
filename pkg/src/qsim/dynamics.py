"""Time propagation: coherent evolution, amplitude-noise ensembles, homodyne trajectories.

Methods
-------
``rk4_state`` / ``rk4_unitary``
    Classical fourth-order Runge-Kutta on i dpsi/dt = H(t) psi.
``magnus4``
    Fourth-order commutator-free exponential integrator (two Hermitian
    exponentials per step). Unitary to round-off, so it is the default for
    the coupler system whose rotating-frame spectrum spans tens of GHz.
``euler_maruyama_sme``
    Homodyne unraveling; coherent part uses the midpoint exponential, the
    measurement back-action an Euler-Maruyama step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .device import HamiltonianGenerator, SystemModel, build_single_transmon

METHODS = ("rk4_state", "rk4_unitary", "magnus4", "euler_maruyama_sme")

_SQ3 = math.sqrt(3.0)
_CF4_C = (0.5 - _SQ3 / 6, 0.5 + _SQ3 / 6)
_CF4_A = ((3 - 2 * _SQ3) / 12, (3 + 2 * _SQ3) / 12)


class StepSizeError(RuntimeError):
    pass


@dataclass(frozen=True)
class PropagationConfig:
    dt: float = 0.01
    method: str = "rk4_state"
    record_every: float | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class PropagationResult:
    times: np.ndarray
    final_state: np.ndarray | None = None
    final_unitary: np.ndarray | None = None
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    states: np.ndarray | None = None
    norm_drift: float = 0.0


def _grid(T: float, dt: float) -> tuple[int, float]:
    if T < 0:
        raise ValueError("T must be >= 0")
    n = max(int(math.ceil(T / dt - 1e-9)), 1 if T > 0 else 0)
    return n, (T / n if n else 0.0)


def expm_hermitian(h: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i h tau) for Hermitian h."""
    if np.iscomplexobj(h) and not h.imag.any():
        h = h.real  # real symmetric solver is about twice as fast
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * tau * w)) @ v.conj().T


def _rk4_step(gen, t, y, h):
    k1 = -1j * (gen(t) @ y)
    hm = gen(t + h / 2)
    k2 = -1j * (hm @ (y + 0.5 * h * k1))
    k3 = -1j * (hm @ (y + 0.5 * h * k2))
    k4 = -1j * (gen(t + h) @ (y + h * k3))
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _cf4_step_op(gen, t, h):
    h1 = gen(t + _CF4_C[0] * h)
    h2 = gen(t + _CF4_C[1] * h)
    a1, a2 = _CF4_A
    first = expm_hermitian(a2 * h1 + a1 * h2, h)
    second = expm_hermitian(a1 * h1 + a2 * h2, h)
    return second @ first


def _evolve(gen, y0, T, cfg, observables, keep_states):
    n, h = _grid(T, cfg.dt)
    every = None
    if cfg.record_every:
        every = max(int(round(cfg.record_every / h)), 1) if n else 1
    y = np.array(y0, dtype=complex)
    rec_t, rec_y = [], []

    def record(k):
        rec_t.append(k * h)
        rec_y.append(y.copy())

    if every:
        record(0)
    static_u = None
    if cfg.method == "magnus4" and gen.is_static and n:
        static_u = expm_hermitian(gen(0.0), h)
    for k in range(n):
        t = k * h
        if cfg.method == "magnus4":
            u = static_u if static_u is not None else _cf4_step_op(gen, t, h)
            y = u @ y
        else:
            y = _rk4_step(gen, t, y, h)
        if every and ((k + 1) % every == 0 or k == n - 1):
            record(k + 1)
    res = PropagationResult(times=np.array(rec_t))
    if rec_y and (observables or keep_states):
        stack = np.array(rec_y)
        if keep_states:
            res.states = stack
        for name, op in (observables or {}).items():
            if stack.ndim == 2:
                res.observables[name] = np.einsum("ti,ij,tj->t", stack.conj(), op, stack).real
            else:
                res.observables[name] = np.einsum("tia,ij,tja->ta", stack.conj(), op, stack).real
    return y, res


def propagate_state(
    gen: HamiltonianGenerator,
    psi0: np.ndarray,
    T: float,
    cfg: PropagationConfig = PropagationConfig(),
    observables: Mapping[str, np.ndarray] | None = None,
    *,
    keep_states: bool = False,
) -> PropagationResult:
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-9:
        raise ValueError("initial state must be normalized")
    method = cfg
    if cfg.method in ("rk4_unitary", "euler_maruyama_sme"):
        method = PropagationConfig(cfg.dt, "rk4_state", cfg.record_every)
    psi, res = _evolve(gen, psi0, T, method, observables, keep_states)
    res.final_state = psi
    res.norm_drift = float(abs(np.linalg.norm(psi) - 1))
    if res.norm_drift > 1e-6:
        raise StepSizeError(f"norm drift {res.norm_drift:.2e} exceeds 1e-6; reduce dt")
    return res


def propagate_unitary(
    gen: HamiltonianGenerator,
    T: float,
    cfg: PropagationConfig = PropagationConfig(method="rk4_unitary"),
    *,
    columns: Sequence[int] | None = None,
) -> np.ndarray:
    """Propagator U(T, 0); ``columns`` restricts to selected initial basis states."""
    d = gen.space.size
    eye = np.eye(d, dtype=complex)
    y0 = eye if columns is None else eye[:, list(columns)]
    method = cfg
    if cfg.method == "rk4_state":
        method = PropagationConfig(cfg.dt, "rk4_unitary", None)
    u, _ = _evolve(gen, y0, T, PropagationConfig(method.dt, method.method, None), None, False)
    drift = float(np.max(np.abs(np.linalg.norm(u, axis=0) - 1))) if u.size else 0.0
    if drift > 1e-6:
        raise StepSizeError(f"norm drift {drift:.2e} exceeds 1e-6; reduce dt")
    return u


def unitarity_error(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1]), 2))


# ---------------------------------------------------------------------------
# Amplitude-noise dephasing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Relative drive-amplitude noise, piecewise constant over ``correlation_time`` ns."""

    sigma: float
    correlation_time: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0 or self.correlation_time <= 0:
            raise ValueError("need sigma >= 0 and correlation_time > 0")


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per (seed, trajectory index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


@dataclass
class DephasingResult:
    times: np.ndarray
    rho01: np.ndarray
    stderr: np.ndarray
    n_traj: int

    @property
    def coherence(self) -> np.ndarray:
        return np.abs(self.rho01)


def dressed_basis(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs ordered by maximum overlap with the bare basis (no crossings assumed)."""
    w, v = np.linalg.eigh(h)
    order = np.argmax(np.abs(v), axis=1)
    if len(set(order)) != len(order):
        order = np.argsort(np.argmax(np.abs(v), axis=0))
        return w[order], v[:, order]
    return w[order], v[:, order]


def monte_carlo_dephasing(
    model: SystemModel,
    noise: NoiseModel,
    n_traj: int,
    T: float,
    *,
    dim: int = 4,
    record_every: float = 10.0,
    chunk: int = 500,
) -> DephasingResult:
    """Average rho_01(t) of the dressed qubit under multiplicative drive-amplitude noise.

    Each trajectory sees amplitude W(1 + xi_k) with xi_k ~ N(0, sigma) redrawn every
    ``correlation_time``; the Hamiltonian is piecewise constant, so each segment
    is propagated exactly.
    """
    q = model.qubits["q"]
    gen0 = build_single_transmon(q, model.drive, dim)
    h0 = gen0.static_part
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    vd = 2 * math.pi * 0.5 * model.drive.amp * (a + a.T).astype(complex)
    _, v = dressed_basis(h0)
    psi0 = (v[:, 0] + v[:, 1]) / math.sqrt(2)

    tau_c = noise.correlation_time
    step = min(tau_c, record_every)
    n_steps = int(round(T / step))
    if abs(n_steps * step - T) > 1e-9 * T:
        raise ValueError("T must be a multiple of min(correlation_time, record_every)")
    rec_stride = int(round(record_every / step))
    noise_stride = int(round(tau_c / step)) if tau_c < T else n_steps
    for stride, what in ((rec_stride, record_every), (noise_stride, tau_c if tau_c < T else T)):
        if abs(stride * step - what) > 1e-9 * what:
            raise ValueError("correlation_time and record_every must be commensurate")
    n_noise = int(math.ceil(n_steps / noise_stride))

    sums = np.zeros(n_steps // rec_stride + 1, dtype=complex)
    sq = np.zeros_like(sums, dtype=float)
    for start in range(0, n_traj, chunk):
        idx = range(start, min(start + chunk, n_traj))
        xi = noise.sigma * np.array([trajectory_rng(noise.seed, k).standard_normal(n_noise) for k in idx])
        psi = np.tile(psi0, (len(idx), 1))
        rows = [psi @ v.conj()]
        u = None
        for s in range(n_steps):
            if s % noise_stride == 0:
                hk = h0[None] + xi[:, s // noise_stride, None, None] * vd[None]
                w, vk = np.linalg.eigh(hk)
                u = np.einsum("nij,nj,nkj->nik", vk, np.exp(-1j * step * w), vk.conj())
            psi = np.einsum("nij,nj->ni", u, psi)
            if (s + 1) % rec_stride == 0:
                rows.append(psi @ v.conj())
        amps = np.array(rows)  # (t, traj, dressed level)
        rho = amps[:, :, 0] * amps[:, :, 1].conj()
        sums += rho.sum(axis=1)
        sq += (np.abs(rho) ** 2).sum(axis=1)
    mean = sums / n_traj
    var = np.maximum(sq / n_traj - np.abs(mean) ** 2, 0.0)
    times = np.arange(len(sums)) * record_every
    return DephasingResult(times, mean, np.sqrt(var / n_traj), n_traj)


@dataclass(frozen=True)
class DecayFit:
    t_phi: float
    residual: float

    @property
    def decaying(self) -> bool:
        return math.isfinite(self.t_phi)


def fit_exponential_decay(times, values, amplitude: float = 0.5, *, rtol: float = 1e-9) -> DecayFit:
    """Least-squares fit of values to amplitude*exp(-t/T); T = inf when no decay is resolved."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if np.any(y <= 0):
        raise ValueError("decay fit needs a positive series")
    mask = t > 0
    logs = np.log(y[mask] / amplitude)
    gamma0 = -np.sum(t[mask] * logs) / np.sum(t[mask] ** 2) if mask.any() else 0.0
    if gamma0 * t.max() <= rtol:
        return DecayFit(math.inf, float(np.sqrt(np.mean((y - amplitude) ** 2))))
    (gamma,), _ = curve_fit(
        lambda tt, g: amplitude * np.exp(-g * tt), t, y, p0=[gamma0], xtol=1e-14, ftol=1e-14
    )
    if gamma * t.max() <= rtol:
        return DecayFit(math.inf, float(np.sqrt(np.mean((y - amplitude) ** 2))))
    resid = float(np.sqrt(np.mean((y - amplitude * np.exp(-gamma * t)) ** 2)))
    return DecayFit(1.0 / gamma, resid)


# ---------------------------------------------------------------------------
# Homodyne trajectories
# ---------------------------------------------------------------------------

@dataclass
class HomodyneRecord:
    times: np.ndarray  # bin start times (ns)
    records: np.ndarray  # (n_traj, n_bins) bin-averaged record, estimates <c + c^dag>/sqrt(kappa)
    trace_drift: float = 0.0

    @property
    def mean(self) -> np.ndarray:
        return self.records.mean(axis=0)


def homodyne_ensemble(
    gen: HamiltonianGenerator,
    collapse_op: np.ndarray,
    psi0: np.ndarray,
    T: float,
    cfg: PropagationConfig,
    seeds: Sequence[tuple[int, ...]],
    *,
    time_chunk: int = 1000,
) -> HomodyneRecord:
    """Unit-efficiency homodyne trajectories of pure states, batched over ``seeds``.

    ``psi0`` is one shared state or one row per trajectory. Per step the
    coherent part is the midpoint exponential (shared by the batch), then an
    Euler-Maruyama step of the diffusive unraveling with x = <c + c^dag>::

        dpsi = [-(c^dag c - x c + x^2/4)/2 dt + (c - x/2) dW] psi

    The record dr = x dt + dW is bin-averaged over ``cfg.record_every`` and
    divided by sqrt(kappa), so it estimates <a + a^dag> for c = sqrt(kappa) a.
    """
    n_traj = len(seeds)
    psi = np.array(np.broadcast_to(psi0, (n_traj, gen.space.size)), dtype=complex)
    n, h = _grid(T, cfg.dt)
    every = max(int(round((cfg.record_every or T) / h)), 1)
    n_bins = n // every
    c = np.asarray(collapse_op, dtype=complex)
    cdc = c.conj().T @ c
    kappa = _collapse_rate(c)
    rngs = [np.random.default_rng(np.random.SeedSequence(list(s))) for s in seeds]
    records = np.zeros((n_traj, n_bins))
    acc = np.zeros(n_traj)
    sqrt_h = math.sqrt(h)
    static_u = expm_hermitian(gen(0.0), h) if gen.is_static else None
    apply_c, apply_cdc = _operator_action(c), _operator_action(cdc)
    for c0 in range(0, n, time_chunk):
        steps = min(time_chunk, n - c0)
        dw = sqrt_h * np.stack([g.standard_normal(steps) for g in rngs])
        for j in range(steps):
            k = c0 + j
            u = static_u if static_u is not None else expm_hermitian(gen((k + 0.5) * h), h)
            psi = psi @ u.T
            cpsi = apply_c(psi)
            x = 2.0 * np.einsum("ni,ni->n", psi.conj(), cpsi).real
            w = dw[:, j]
            psi = psi + (
                -0.5 * (apply_cdc(psi) - x[:, None] * cpsi + 0.25 * (x**2)[:, None] * psi) * h
                + (cpsi - 0.5 * x[:, None] * psi) * w[:, None]
            )
            psi /= np.linalg.norm(psi, axis=1, keepdims=True)
            acc += x * h + w
            if (k + 1) % every == 0 and (k + 1) // every <= n_bins:
                records[:, (k + 1) // every - 1] = acc / (math.sqrt(kappa) * every * h)
                acc[:] = 0.0
    return HomodyneRecord(np.arange(n_bins) * every * h, records)


def _operator_action(op: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Row-batched psi -> (op psi) exploiting diagonal or single-entry-per-row structure."""
    if np.count_nonzero(op - np.diag(np.diag(op))) == 0:
        d = np.diag(op).copy()
        return lambda psi: psi * d
    rows, cols = np.nonzero(op)
    if np.unique(rows).size == rows.size:
        vals = op[rows, cols]

        def act(psi):
            out = np.zeros_like(psi)
            out[:, rows] = psi[:, cols] * vals
            return out

        return act
    opt = op.T.copy()
    return lambda psi: psi @ opt


def _collapse_rate(c: np.ndarray) -> float:
    """kappa for c = sqrt(kappa) a: the smallest nonzero |element|^2 is the 1 -> 0 step."""
    nz = np.abs(c[np.nonzero(c)])
    if nz.size == 0:
        return 1.0  # no measurement channel; the record is pure noise
    return float(nz.min() ** 2)


def sme_homodyne_trajectory(
    gen: HamiltonianGenerator,
    collapse_op: np.ndarray,
    initial: np.ndarray,
    T: float,
    cfg: PropagationConfig = PropagationConfig(dt=0.01, method="euler_maruyama_sme", record_every=1.0),
    seed: int | Sequence[int] = 0,
) -> HomodyneRecord:
    """One homodyne trajectory; vector input uses the pure-state unraveling, matrix input the SME."""
    seed_t = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    initial = np.asarray(initial, dtype=complex)
    if initial.ndim == 1:
        return homodyne_ensemble(gen, collapse_op, initial, T, cfg, [seed_t])
    return _sme_density(gen, collapse_op, initial, T, cfg, seed_t)


def _sme_density(gen, c, rho0, T, cfg, seed_t) -> HomodyneRecord:
    n, h = _grid(T, cfg.dt)
    every = max(int(round((cfg.record_every or T) / h)), 1)
    n_bins = n // every
    kappa = _collapse_rate(c)
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_t)))
    dw = math.sqrt(h) * rng.standard_normal(n)
    cd = c.conj().T
    cdc = cd @ c
    rho = rho0.copy()
    rec = np.zeros(n_bins)
    acc = 0.0
    drift = 0.0
    for k in range(n):
        u = expm_hermitian(gen((k + 0.5) * h), h)
        rho = u @ rho @ u.conj().T
        x = float(np.trace((c + cd) @ rho).real)
        diss = c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
        meas = c @ rho + rho @ cd - x * rho
        rho = rho + diss * h + meas * dw[k]
        tr = float(np.trace(rho).real)
        drift = max(drift, abs(tr - 1))
        if abs(tr - 1) > 1e-3:
            raise StepSizeError(f"SME trace drift {tr - 1:.2e}; reduce dt")
        rho = 0.5 * (rho + rho.conj().T) / tr
        acc += x * h + dw[k]
        if (k + 1) % every == 0 and (k + 1) // every <= n_bins:
            rec[(k + 1) // every - 1] = acc / (math.sqrt(kappa) * every * h)
            acc = 0.0
    return HomodyneRecord(np.arange(n_bins) * every * h, rec[None, :], drift)


def lindblad_expectation(
    gen: HamiltonianGenerator,
    c_ops: Sequence[np.ndarray],
    rho0: np.ndarray,
    T: float,
    observable: np.ndarray,
    *,
    dt: float = 0.005,
    record_every: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic master-equation oracle (RK4 on rho); returns (times, <observable>)."""
    n, h = _grid(T, dt)
    every = max(int(round(record_every / h)), 1)
    c_ops = [np.asarray(c) for c in c_ops]
    cdcs = [c.conj().T @ c for c in c_ops]

    def rhs(t, rho):
        hh = gen(t)
        out = -1j * (hh @ rho - rho @ hh)
        for c, cdc in zip(c_ops, cdcs):
            out += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
        return out

    rho = np.array(rho0, dtype=complex)
    ts, vals = [0.0], [float(np.trace(observable @ rho).real)]
    for k in range(n):
        t = k * h
        k1 = rhs(t, rho)
        k2 = rhs(t + h / 2, rho + 0.5 * h * k1)
        k3 = rhs(t + h / 2, rho + 0.5 * h * k2)
        k4 = rhs(t + h, rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % every == 0:
            ts.append((k + 1) * h)
            vals.append(float(np.trace(observable @ rho).real))
    return np.array(ts), np.array(vals)


def write_rho01_csv(result: DephasingResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "re_rho01", "im_rho01", "abs_rho01", "stderr_abs"])
        for t, r, e in zip(result.times, result.rho01, result.stderr):
            w.writerow([f"{t:.6g}", f"{r.real:.12e}", f"{r.imag:.12e}", f"{abs(r):.12e}", f"{e:.6e}"])
    return path


def write_record_csv(times, record, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "I_t"])
        for t, x in zip(times, record):
            w.writerow([f"{t:.6g}", f"{x:.12e}"])
    return path
