"""End-to-end acceptance criteria; each test prints one PASS/FAIL line with its measured values."""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from qsim.cli import validate_config
from qsim.device import (
    DriveParams,
    TransmonParams,
    ac_stark_shift,
    build_single_transmon,
    build_tls,
    build_two_qubit_system,
    default_readout_model,
    default_two_qubit_model,
    rabi_population,
    transmon_ladder_model,
)
from qsim.dynamics import (
    NoiseModel,
    PropagationConfig,
    dressed_basis,
    fit_exponential_decay,
    monte_carlo_dephasing,
    propagate_state,
    propagate_unitary,
)
from qsim.gates import (
    calibrate_working_freq,
    cz_run,
    idle_spectrum,
    ramp_leakage_scan,
    sqrt_x_run,
    tune_cz,
    tune_sqrt_x,
)
from qsim.readout import ReadoutConfig, readout_error_vs_drive
from qsim.scenarios import coupling_table, rwa_deviation_summary
from qsim.spectrum import xy_coupling, zz_coupling

MHZ, KHZ = 1e-3, 1e-6


def report(n: int, ok: bool, detail: str, elapsed: float, budget: float):
    in_time = elapsed < budget
    line = f"CRITERION {n}: {'PASS' if ok and in_time else 'FAIL'}  {detail}  [{elapsed:.1f} s / {budget:.0f} s]"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
    assert in_time, line


def test_criterion_01_rabi_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        det, amp, t = rng.uniform(-0.05, 0.05), rng.uniform(0.002, 0.05), rng.uniform(0, 50)
        psi = propagate_state(build_tls(det, amp), np.array([1, 0], complex), t, PropagationConfig(0.01, "magnus4")).final_state
        worst = max(worst, abs(abs(psi[1]) ** 2 - rabi_population(t, det, amp)))
    report(1, worst < 1e-8, f"max |dP1| = {worst:.2e} (< 1e-8)", time.perf_counter() - t0, 1)


def test_criterion_02_ac_stark():
    t0 = time.perf_counter()
    q = TransmonParams(6.0, -0.25)
    w_on, _ = dressed_basis(build_single_transmon(q, DriveParams(6.1, 0.01), 6).static_part)
    w_off, _ = dressed_basis(build_single_transmon(q, DriveParams(6.1, 0.0), 6).static_part)
    shift = ((w_on[1] - w_on[0]) - (w_off[1] - w_off[0])) / (2 * math.pi)
    ref = -0.36 * MHZ
    ok = abs(shift - ref) < 0.1 * abs(ref)
    detail = (f"numerical {shift / MHZ:.4f} MHz vs -0.36 MHz (closed form {ac_stark_shift(-0.1, 0.01, -0.25) / MHZ:.4f}),"
              f" tol 10%")
    report(2, ok, detail, time.perf_counter() - t0, 1)


def test_criterion_03_fa_flat_top_leakage():
    t0 = time.perf_counter()
    ramps = np.arange(12.0, 30.1, 2.0)
    parts, ok = [], True
    for alpha in (-0.20, -0.25, -0.30):
        leak = np.array([r.leak_to_2 for r in ramp_leakage_scan(ramps, anharm=alpha, hold=20.0, dt=0.01)])
        ok &= bool(leak.max() < 1e-5 and leak.min() < 1e-6)
        parts.append(f"a={alpha * 1e3:.0f}MHz max {leak.max():.1e} best {leak.min():.1e}")
    report(3, ok, "; ".join(parts) + " (max < 1e-5, best < 1e-6)", time.perf_counter() - t0, 60)


def test_criterion_04_sqrt_x_two_qubit():
    t0 = time.perf_counter()
    m = default_two_qubit_model()
    ok, parts = True, []
    for q in ("q0", "q1"):
        r = tune_sqrt_x(m, q, hold=20.0, dt=0.05)
        at10 = sqrt_x_run(m, q, 10.0, 20.0, dt=0.05)
        ok &= r.fidelity >= 0.99990 and 28 <= r.gate_time <= 32 and at10.fidelity.leakage < 5e-5
        parts.append(f"{q} F={r.fidelity:.6f} t_g={r.gate_time:.2f}ns leak(t_r=10)={at10.fidelity.leakage:.1e}")
    report(4, ok, "; ".join(parts) + " (F >= 0.9999, 28-32 ns, leak < 5e-5)", time.perf_counter() - t0, 600)


def test_criterion_05_cz():
    t0 = time.perf_counter()
    m = default_two_qubit_model()
    cos = tune_cz(m, "cosine", length=30.0, ramp=10.0, dt=0.05)
    fa = tune_cz(m, "fast_adiabatic", length=30.7, hold=10.0, dt=0.05)
    ok = abs(cos.fidelity - 0.9982) <= 0.0010 and fa.fidelity >= 0.9990 and 30 <= fa.gate_time <= 32 \
        and fa.diagnostics["swap"] < 1e-3
    detail = (f"cosine F={cos.fidelity:.5f} (0.9982 +- 0.001); FA F={fa.fidelity:.5f} at {fa.gate_time} ns,"
              f" swap={fa.diagnostics['swap']:.1e} (F >= 0.999, swap < 1e-3)")
    report(5, ok, detail, time.perf_counter() - t0, 900)


def test_criterion_06_couplings():
    t0 = time.perf_counter()
    m = default_two_qubit_model()
    zz = zz_coupling(m)
    xy35 = abs(xy_coupling(m, 6.0, 6.0, 11.35))
    xy25 = abs(xy_coupling(m, 6.0, 6.0, 11.25))
    ok = abs(zz) < 10 * KHZ and 0.05 * MHZ <= xy35 <= 0.2 * MHZ and xy25 < 0.02 * MHZ
    detail = (f"|zz|={abs(zz) / KHZ:.2f} kHz (< 10); XY(11.35)={xy35 / MHZ:.4f} MHz (0.1, x2);"
              f" XY(11.25)={xy25 / MHZ:.4f} MHz (< 0.01, x2)")
    report(6, ok, detail, time.perf_counter() - t0, 60)


def test_criterion_07_rwa_correction():
    t0 = time.perf_counter()
    model_cfg = validate_config("", "fig15").model
    summary = rwa_deviation_summary(coupling_table(model_cfg, np.linspace(6.5, 11.5, 11)))
    ok = all(v["max_dev_plain_GHz"] >= 5 * v["max_dev_corrected_GHz"] for v in summary.values())
    detail = "; ".join(f"{k}: plain {v['max_dev_plain_GHz'] / MHZ:.4f} MHz, corrected "
                       f"{v['max_dev_corrected_GHz'] / MHZ:.5f} MHz" for k, v in summary.items())
    report(7, ok, detail + " (ratio >= 5)", time.perf_counter() - t0, 300)


def test_criterion_08_dephasing():
    t0 = time.perf_counter()

    def t_phi(amp, sigma):
        res = monte_carlo_dephasing(transmon_ladder_model(6.0, -0.25, 6.1, amp), NoiseModel(sigma, 1.0, seed=0),
                                    500, 10_000.0, record_every=50.0)
        return fit_exponential_decay(res.times, res.coherence).t_phi

    t10 = [t_phi(0.010, s) for s in (0.005, 0.01, 0.02)]
    t20 = t_phi(0.020, 0.01)
    t0_ = t_phi(0.010, 0.0)
    ok = all(math.isfinite(t) for t in t10) and t10[0] > t10[1] > t10[2] and t20 < t10[1] and math.isinf(t0_)
    detail = (f"T_phi(10 MHz; 0.5/1/2%) = {t10[0]:.3g}/{t10[1]:.3g}/{t10[2]:.3g} ns; T_phi(20 MHz, 1%) = {t20:.3g} ns;"
              f" sigma=0 -> {t0_}")
    report(8, ok, detail, time.perf_counter() - t0, 1200)


def test_criterion_09_readout():
    t0 = time.perf_counter()
    pts = readout_error_vs_drive(default_readout_model(), ReadoutConfig(repetitions=1000, seed=0), [0.0, 0.020])
    base, driven = pts[0], pts[1]
    inc = driven.error - base.error
    se = math.hypot(base.stderr, driven.stderr)
    sep = base.outcome.separation
    ok = inc < 0.01 + 2 * se and sep > 3
    detail = (f"1-F: {base.error:.4f} -> {driven.error:.4f}, increase {inc:+.4f} (< 0.01 + 2*{se:.4f});"
              f" separation {sep:.2f} sigma (> 3)")
    report(9, ok, detail, time.perf_counter() - t0, 3600)


def test_criterion_10_numerical_hygiene():
    t0 = time.perf_counter()
    m = default_two_qubit_model()
    gen = build_two_qubit_system(m, 5, 5)
    spec = idle_spectrum(gen)
    wf = calibrate_working_freq(m, "q0")
    ramp = 10.5746
    runs = [sqrt_x_run(m, "q0", ramp, work_freq=wf, dt=0.05, gen=gen, spectrum=spec),
            sqrt_x_run(m, "q1", ramp, work_freq=calibrate_working_freq(m, "q1"), dt=0.05, gen=gen, spectrum=spec),
            cz_run(m, "cosine", 5.754993, 7.044634, gen=gen, spectrum=spec, dt=0.05, length=30.0, ramp=10.0)]
    unit = max(r.unitarity_error for r in runs)

    small = build_single_transmon(TransmonParams(6.0, -0.25), DriveParams(6.1, 0.01), 4)
    exact = propagate_unitary(small, 10.0, PropagationConfig(0.001, "magnus4"))
    errs = [np.max(np.abs(propagate_unitary(small, 10.0, PropagationConfig(dt, "rk4_unitary")) - exact))
            for dt in (0.01, 0.005)]
    ratio = errs[0] / errs[1]

    base = 1 - runs[0].fidelity.fidelity
    changes = []
    for dim, cap in ((6, 5), (5, 6)):
        w = calibrate_working_freq(m, "q0", dim=dim, cap=cap)
        r = sqrt_x_run(m, "q0", ramp, work_freq=w, dt=0.05, dim=dim, cap=cap)
        changes.append(abs((1 - r.fidelity.fidelity) - base))
    ok = unit < 1e-8 and 12 <= ratio <= 20 and max(changes) < 1e-6
    detail = (f"max unitarity {unit:.1e} (< 1e-8); RK4 ratio {ratio:.2f} (16 +- 4);"
              f" gate-error change dim5->6 {changes[0]:.1e}, cap5->6 {changes[1]:.1e} (< 1e-6)")
    report(10, ok, detail, time.perf_counter() - t0, 600)
