import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsim.device import ResonatorParams, default_readout_model
from qsim.readout import (
    DegenerateReadoutError,
    ReadoutConfig,
    classify_and_score,
    dispersive_shift_estimate,
    dressed_resonator_freqs,
    integrate_quadrature,
    optimal_weights,
    readout_error_vs_drive,
    readout_frequency,
    score_records,
    simulate_readout_ensemble,
    write_mean_records_csv,
    write_samples_csv,
    write_summary_json,
)


def test_config_validation():
    with pytest.raises(ValueError):
        ReadoutConfig(length=0)
    with pytest.raises(ValueError):
        ReadoutConfig(repetitions=1)


def test_uncoupled_resonator_frequencies():
    m = default_readout_model().with_options(resonator=ResonatorParams(5.0, 0.005, 0.0))
    r0, r1 = dressed_resonator_freqs(m)
    assert r0 == pytest.approx(5.0, abs=1e-12) and r1 == pytest.approx(5.0, abs=1e-12)


def test_dispersive_shift_magnitude():
    m = default_readout_model()
    r0, r1 = dressed_resonator_freqs(m)
    chi = (r0 - r1) / 2
    assert r0 != r1
    assert abs(chi) == pytest.approx(abs(dispersive_shift_estimate(m)), rel=0.3)
    assert readout_frequency(m) == pytest.approx((r0 + r1) / 2)


def test_resonator_truncation_converged():
    m = default_readout_model()
    a = dressed_resonator_freqs(m, (4, 15))
    b = dressed_resonator_freqs(m, (4, 20))
    np.testing.assert_allclose(a, b, atol=1e-9)


# --- weights and integration ------------------------------------------------

def test_constant_difference_gives_flat_weights():
    t_i, dt = 250.0, 1.0
    n = int(t_i / dt)
    w = optimal_weights(np.zeros((3, n)), np.full((3, n), 0.7), dt)
    np.testing.assert_allclose(w, 1 / math.sqrt(t_i), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 5.0))
def test_weights_normalized(seed, dt):
    rng = np.random.default_rng(seed)
    w = optimal_weights(rng.normal(size=(4, 30)), rng.normal(size=(5, 30)), dt)
    assert np.sum(w**2) * dt == pytest.approx(1.0, abs=1e-9)


def test_degenerate_weights():
    r = np.ones((2, 10))
    with pytest.raises(DegenerateReadoutError):
        optimal_weights(r, r, 1.0)
    with pytest.raises(ValueError):
        optimal_weights(np.ones((2, 10)), np.ones((2, 9)), 1.0)


def test_integration_reference_and_linearity():
    rng = np.random.default_rng(1)
    w = np.abs(rng.normal(size=20))
    ref = rng.normal(size=20)
    assert integrate_quadrature(ref, w, ref, 0.5) == pytest.approx(0.0, abs=1e-14)
    r1, r2 = rng.normal(size=20), rng.normal(size=20)
    a, b = 1.7, -0.4
    lhs = integrate_quadrature(a * r1 + b * r2 + (1 - a - b) * ref, w, ref, 0.5)
    rhs = a * integrate_quadrature(r1, w, ref, 0.5) + b * integrate_quadrature(r2, w, ref, 0.5)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    with pytest.raises(ValueError):
        integrate_quadrature(r1[:-1], w, ref, 0.5)


# --- classification ----------------------------------------------------------

def test_separated_gaussians_score_perfectly():
    rng = np.random.default_rng(2)
    out = classify_and_score(rng.normal(-10, 1, 2000), rng.normal(10, 1, 2000))
    assert out.fidelity == 1.0
    assert abs(out.threshold) < 0.2


def test_same_distribution_is_chance_level():
    rng = np.random.default_rng(3)
    out = classify_and_score(rng.normal(0, 1, 20000), rng.normal(0, 1, 20000))
    assert out.fidelity == pytest.approx(0.5, abs=0.02)


def test_identical_samples_are_degenerate():
    s = np.arange(10.0)
    with pytest.raises(DegenerateReadoutError):
        classify_and_score(s, s)


def test_fidelity_from_components_bit_exact():
    rng = np.random.default_rng(4)
    out = classify_and_score(rng.normal(0, 1, 500), rng.normal(2.5, 1.3, 500))
    assert out.fidelity == 1.0 - (out.p0_given_1 + out.p1_given_0) / 2.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100), st.floats(-50, 50), st.integers(0, 1000))
def test_classifier_affine_invariant(scale, shift, seed):
    rng = np.random.default_rng(seed)
    s0, s1 = rng.normal(0, 1, 300), rng.normal(3, 1.2, 300)
    a = classify_and_score(s0, s1)
    b = classify_and_score(scale * s0 + shift, scale * s1 + shift)
    assert a.fidelity == b.fidelity


def test_swapped_polarity():
    rng = np.random.default_rng(5)
    out = classify_and_score(rng.normal(5, 1, 1000), rng.normal(-5, 1, 1000))
    assert out.fidelity == 1.0


# --- trajectories ------------------------------------------------------------

def test_no_readout_tone_gives_noise_only():
    recs = simulate_readout_ensemble(default_readout_model(), ReadoutConfig(length=40.0, amp=0.0, repetitions=40))
    for s in (0, 1):
        se = recs.records[s].std() / math.sqrt(recs.records[s].size)
        assert abs(recs.records[s].mean()) < 4 * se


def test_ensemble_deterministic_per_seed():
    cfg = ReadoutConfig(length=20.0, repetitions=3, seed=11)
    a = simulate_readout_ensemble(default_readout_model(), cfg)
    b = simulate_readout_ensemble(default_readout_model(), cfg)
    for s in (0, 1):
        np.testing.assert_array_equal(a.records[s], b.records[s])
    # trajectory (state, k) does not depend on how many others run alongside
    c = simulate_readout_ensemble(default_readout_model(), ReadoutConfig(length=20.0, repetitions=2, seed=11))
    np.testing.assert_allclose(c.records[1], a.records[1][:2], atol=1e-12)


def test_drive_sweep_zero_baseline_equals_pipeline():
    m = default_readout_model()
    cfg = ReadoutConfig(length=60.0, repetitions=20, seed=2)
    (pt,) = readout_error_vs_drive(m, cfg, [0.0])
    direct = score_records(simulate_readout_ensemble(m, cfg))
    assert pt.error == direct.error


@pytest.fixture(scope="module")
def desk_run():
    m = default_readout_model()
    cfg = ReadoutConfig(repetitions=500, seed=0)
    recs = simulate_readout_ensemble(m, cfg)
    return recs, score_records(recs)


def test_desk_scale_separation(desk_run):
    _, out = desk_run
    assert out.separation > 2.0


def test_means_diverge_after_ring_up(desk_run):
    recs, _ = desk_run
    diff = np.abs(recs.records[1].mean(axis=0) - recs.records[0].mean(axis=0))
    ring_up = 1 / (2 * math.pi * 0.005)  # 1/kappa in ns
    early = diff[recs.times < 0.2 * ring_up].mean()
    late = diff[recs.times > 2 * ring_up].mean()
    assert late > 5 * early


def test_weights_grow_after_ring_up(desk_run):
    recs, _ = desk_run
    w = optimal_weights(recs.records[0], recs.records[1], recs.bin_width)
    assert w[:5].mean() < w[-50:].mean()


def test_integrated_means(desk_run):
    _, out = desk_run
    assert abs(out.means[0]) < 1e-12
    assert out.means[1] > 0


def test_bootstrap_error_bar_scaling(desk_run):
    _, out = desk_run
    rng = np.random.default_rng(0)
    s0, s1 = out.samples[0], out.samples[1]

    def spread(n):
        errs = []
        for _ in range(300):
            i0, i1 = rng.integers(0, s0.size, n), rng.integers(0, s1.size, n)
            errs.append(classify_and_score(s0[i0], s1[i1]).error)
        return np.std(errs)

    assert spread(250) / spread(500) == pytest.approx(math.sqrt(2), rel=0.3)


def test_outputs(desk_run, tmp_path):
    recs, out = desk_run
    assert len(write_samples_csv(out, tmp_path / "s.csv").read_text().splitlines()) == 1001
    assert '"fidelity"' in write_summary_json(out, tmp_path / "s.json", drive_amp=0.0).read_text()
    assert write_mean_records_csv(recs, tmp_path / "m.csv").read_text().startswith("t_ns,mean_I_state0")
