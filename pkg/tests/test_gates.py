import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize_scalar
from scipy.stats import unitary_group

from qsim.device import build_tls, build_two_qubit_system, default_two_qubit_model, rabi_population
from qsim.dynamics import PropagationConfig, propagate_unitary
from qsim.gates import (
    CZ,
    SQRT_X,
    GateSpec,
    NoPrecessionError,
    PhaseLedger,
    TuneupResult,
    average_gate_fidelity,
    calibrate_working_freq,
    cz_run,
    cz_swap_error,
    delay_z,
    dressed_qubit_freq,
    idle_spectrum,
    phased_ideal,
    ramp_leakage_scan,
    scan_rabi_landscape,
    sqrt_x_run,
    state_average_bruteforce,
    track_idle_phase,
    z_gate,
)

unitaries2 = st.integers(0, 2**32 - 1).map(lambda s: unitary_group.rvs(2, random_state=s))
unitaries4 = st.integers(0, 2**32 - 1).map(lambda s: unitary_group.rvs(4, random_state=s))


def test_gate_spec_validation():
    assert GateSpec.cz().ideal.shape == (4, 4)
    with pytest.raises(ValueError):
        GateSpec("bad", ("q0",), np.ones((2, 2)))


@settings(max_examples=30, deadline=None)
@given(unitaries4)
def test_self_fidelity_is_one(u):
    r = average_gate_fidelity(u, u)
    assert r.fidelity == pytest.approx(1.0, abs=1e-12) and r.leakage < 1e-12


@settings(max_examples=30, deadline=None)
@given(unitaries2, unitaries2, st.floats(0, 2 * np.pi))
def test_fidelity_matches_axis_state_average(u, v, phase):
    f = average_gate_fidelity(u, v).fidelity
    assert f == pytest.approx(state_average_bruteforce(u, v), abs=1e-10)
    # global phase invariance
    assert average_gate_fidelity(np.exp(1j * phase) * u, v).fidelity == pytest.approx(f, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(unitaries2, unitaries4)
def test_phase_optimization_never_decreases(u2, u4):
    for u, ideal in ((u2, SQRT_X), (u4, CZ)):
        raw = average_gate_fidelity(u, ideal).fidelity
        assert average_gate_fidelity(u, ideal, optimize_z_phases=True).fidelity >= raw - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_phase_optimization_recovers_local_z(a, b):
    u = z_gate(a) @ SQRT_X @ z_gate(b)
    r = average_gate_fidelity(u, SQRT_X, optimize_z_phases=True)
    assert r.fidelity == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(np.abs(np.trace(phased_ideal(SQRT_X, r.phases).conj().T @ u)), 2, atol=1e-6)
    u4 = np.diag(np.exp(1j * np.array([0, a, b, a + b]))) @ CZ
    assert average_gate_fidelity(u4, CZ, optimize_z_phases=True).fidelity == pytest.approx(1.0, abs=1e-9)


def test_leakage_equals_mean_survival_loss():
    u = unitary_group.rvs(5, random_state=3)
    comp = [0, 2]
    r = average_gate_fidelity(u, np.eye(2), comp)
    survival = np.mean([np.sum(np.abs(u[comp, j]) ** 2) for j in comp])
    assert r.leakage == pytest.approx(1 - survival, abs=1e-12)
    assert r.fidelity + r.leakage <= 1 + 1e-12


def test_projection_shape_checked():
    with pytest.raises(ValueError):
        average_gate_fidelity(np.eye(3), np.eye(2))


def test_delay_z_values():
    assert delay_z(0.1, 0.0) == 0.0
    assert delay_z(0.1, math.pi) == pytest.approx(5.0)
    assert delay_z(-0.1, math.pi) == pytest.approx(5.0)
    with pytest.raises(NoPrecessionError):
        delay_z(0.0, 1.0)


@pytest.mark.parametrize("phi", [0.3, math.pi, 5.0])
def test_delay_implements_dressed_z(phi):
    gen = build_tls(-0.1, 0.01)
    w, v = np.linalg.eigh(gen.static_part)
    splitting = (w[1] - w[0]) / (2 * np.pi)
    # dressed |0> is the lower level at this idle point
    tau = delay_z(splitting, phi)
    u = v.conj().T @ propagate_unitary(gen, tau, PropagationConfig(0.001, "rk4_unitary")) @ v
    u = u / u[0, 0]
    np.testing.assert_allclose(u, np.diag([1, np.exp(-1j * phi)]), atol=1e-6)


def test_phase_ledger():
    led = PhaseLedger({"q0": 1.0})
    assert track_idle_phase(led, 0.0, 0.1).phase("q0") == 1.0
    led = track_idle_phase(PhaseLedger({"q0": 0.0}), 10.0, 0.1)
    assert led.phase("q0") == pytest.approx(0.0, abs=1e-12) or led.phase("q0") == pytest.approx(2 * np.pi)
    assert led.cursor == 10.0
    with pytest.raises(ValueError):
        track_idle_phase(led, -1.0, 0.1)


def test_ledger_virtual_z_matches_phase_optimum():
    """sqrt(X) followed by an idle delay: undoing the tracked phase equals the Z-optimized score."""
    err = np.array([[math.cos(0.01), -1j * math.sin(0.01)], [-1j * math.sin(0.01), math.cos(0.01)]])
    u = err @ SQRT_X
    splitting, tau = 0.1, 3.7
    led = track_idle_phase(PhaseLedger({"q0": 0.0}), tau, splitting)
    total = z_gate(-led.phase("q0")) @ u
    corrected = z_gate(led.phase("q0")) @ total
    best = average_gate_fidelity(total, SQRT_X, optimize_z_phases=True).fidelity
    assert average_gate_fidelity(corrected, SQRT_X).fidelity == pytest.approx(best, abs=1e-9)


def test_tuneup_result_invariant(tmp_path):
    with pytest.raises(ValueError):
        TuneupResult("x", {}, 0.9, 0.2, 10.0)
    r = TuneupResult("x", {"a": 1.0}, 0.99, 0.001, 10.0)
    assert '"gate": "x"' in r.save(tmp_path / "t.json").read_text()


# --- landscapes ------------------------------------------------------------

def test_tls_half_contour_matches_rabi_locus():
    land = scan_rabi_landscape("TLS", np.linspace(-0.03, 0.03, 601), "pulse_length", [30.0, 40.0],
                               idle_detuning=-10.0)
    assert len(land.sqrt_x_contour) == 4
    for length, det in land.sqrt_x_contour:
        lo, hi = sorted((0.0, det + math.copysign(0.01, det)))
        exact = brentq(lambda d: rabi_population(length, d, 0.01) - 0.5, lo, hi)
        assert det == pytest.approx(exact, abs=1e-4)


def test_tls_x_point_with_overshoot():
    land = scan_rabi_landscape("TLS", np.linspace(-0.004, 0.006, 21), "pulse_length", np.linspace(46, 54, 9))
    det, length = land.x_point
    assert length == 50.0
    assert det == pytest.approx(0.001, abs=5e-4)  # overshoot W^2 / |D_idle|
    assert land.populations["P1"].max() > 0.9999


def test_transmon_landscape_leakage_square_vs_cosine():
    det = np.linspace(-0.02, 0.02, 41)
    amps = [0.01]
    sq = scan_rabi_landscape("transmon", det, "drive_amp", amps, "square", pulse_length=25.0)
    co = scan_rabi_landscape("transmon", det, "drive_amp", amps, "cosine", pulse_length=35.0, ramp=10.0, dt=0.05)
    assert np.max(co.populations["P2"]) < 1e-4
    assert np.max(sq.populations["P2"]) > 3 * np.max(co.populations["P2"])
    with pytest.raises(ValueError):
        scan_rabi_landscape("TLS", det, "time", amps)


def test_single_transmon_ramp_scan_suppresses_leakage():
    rows = ramp_leakage_scan([4.0, 12.0], dt=0.02)
    assert rows[1].leak_to_2 < 1e-5 < rows[0].leak_to_2
    for r in rows:
        assert r.p0 + r.p1 + r.leak_to_2 <= 1 + 1e-9


# --- two-qubit gates -------------------------------------------------------

@pytest.fixture(scope="module")
def two_qubit():
    m = default_two_qubit_model()
    gen = build_two_qubit_system(m, 5, 5)
    return m, gen, idle_spectrum(gen)


def test_working_point_calibration_hits_drive(two_qubit):
    m, _, _ = two_qubit
    wf = calibrate_working_freq(m, "q0")
    assert dressed_qubit_freq(m, "q0", wf) == pytest.approx(6.1, abs=1e-9)


def test_sqrt_x_four_times_is_identity(two_qubit):
    m, gen, spec = two_qubit
    wf = calibrate_working_freq(m, "q0")

    def run(tr):
        return sqrt_x_run(m, "q0", tr, work_freq=wf, dt=0.05, gen=gen, spectrum=spec)

    best = minimize_scalar(lambda t: 1 - run(t).fidelity.fidelity, bounds=(10.2, 11.0), method="bounded",
                           options={"xatol": 1e-4})
    r = run(best.x)
    assert r.unitarity_error < 1e-8
    x, y = r.fidelity.phases
    v = z_gate(y).conj().T @ r.projected @ z_gate(x).conj().T
    f4 = average_gate_fidelity(np.linalg.matrix_power(v, 4), np.eye(2)).fidelity
    assert f4 > 1 - 4 * (1 - r.fidelity.fidelity) - 1e-6


def test_cz_at_known_working_point(two_qubit):
    m, gen, spec = two_qubit
    r = cz_run(m, "cosine", 5.754993, 7.044634, gen=gen, spectrum=spec, dt=0.05, length=30.0, ramp=10.0)
    assert r.fidelity.fidelity > 0.998
    assert cz_swap_error(r) < 1e-2
    with pytest.raises(ValueError):
        cz_run(m, "gaussian", 5.75, 7.0, gen=gen, spectrum=spec)
