"""Echo synthesis: attenuation, delay/Doppler structure, noise, combining."""

import numpy as np
import pytest

from ofdmsense.array import ls_beamformer, rx_manifold, rx_steering
from ofdmsense.channel import (
    attenuation_of,
    beamform_combine,
    read_raw_capture,
    synthesize_rx,
    target_gain,
    write_raw_capture,
)
from ofdmsense.numerology import (
    NoiseSpec,
    OfdmNumerology,
    Scenario,
    Target,
    doppler_shift,
    round_trip_delay,
    sample_offsets,
)
from ofdmsense.waveform import ofdm_modulate, random_qam16_grid

SMALL = OfdmNumerology(nc=256, m_symbols=8)


def small_scenario(targets, sigma2=1e-12, pt_dbm=46.0):
    return Scenario(numerology=SMALL, targets=targets, pt_dbm=pt_dbm,
                    noise=NoiseSpec(sigma2=sigma2), seed=0)


class TestAttenuation:
    def test_doubling_range_quarters_amplitude(self):
        sc = Scenario()
        a1 = attenuation_of(Target(range_m=200.0), sc)
        a2 = attenuation_of(Target(range_m=400.0), sc)
        assert abs(a1.complex_gain) / abs(a2.complex_gain) == pytest.approx(4.0)

    def test_link_budget_regression(self):
        # Independent budget: Pt Gt Gr / Nt * rcs^2 * lambda^2 / ((4 pi)^3 d^4)
        # at 46 dBm, 32 dB gains, 16 tx elements, 10 m^2, 500 m, 28 GHz.
        sc = Scenario()
        a = attenuation_of(Target(range_m=500.0, rcs=10.0), sc)
        pt = 10 ** (46 / 10) / 1000
        g = 10 ** 3.2
        lam = 3e8 / 28e9
        oracle = (pt * g * g / 16) * 100 * lam ** 2 / ((4 * np.pi) ** 3 * 500.0 ** 4)
        assert abs(a.complex_gain) ** 2 == pytest.approx(oracle, rel=1e-12)
        assert abs(a.complex_gain) ** 2 == pytest.approx(5.7849e-10, rel=1e-4)

    def test_phase_factor_unit_modulus(self):
        sc = Scenario()
        a = attenuation_of(Target(range_m=500.0), sc)
        assert abs(a.phase) == pytest.approx(1.0, abs=1e-12)
        tau = round_trip_delay(500.0)
        assert a.phase == pytest.approx(np.exp(-2j * np.pi * 28e9 * tau))

    def test_components_compose(self):
        sc = Scenario()
        a = attenuation_of(Target(range_m=314.0, rcs=3.0), sc)
        assert a.complex_gain == pytest.approx(
            a.power_scale * a.rcs * a.path_loss * a.phase)


class TestSynthesis:
    def test_single_target_zero_delay_structure(self):
        # Delay below one sample and no motion: each antenna carries the
        # transmit frame scaled by gain * b_r(theta).
        tgt = Target(range_m=0.1, velocity=0.0, angle_deg=11.0, rcs=1.0)
        sc = small_scenario((tgt,))
        grid = random_qam16_grid(SMALL, np.random.default_rng(0))
        tx = ofdm_modulate(grid, SMALL)
        rx = synthesize_rx(tx, sc, include_noise=False)
        gain = target_gain(tgt, sc)
        b = rx_steering(11.0, sc.geometry).elements
        n = tx.samples.size
        for r in (0, 7, 15):
            np.testing.assert_allclose(rx.samples[r, :n], gain * b[r] * tx.samples,
                                       rtol=1e-9)
        np.testing.assert_allclose(rx.samples[:, n:], 0.0, atol=1e-15)

    def test_two_targets_span_manifold_columns(self):
        targets = (Target(range_m=120.0, velocity=5.0, angle_deg=-6.0),
                   Target(range_m=150.0, velocity=-9.0, angle_deg=4.0))
        sc = small_scenario(targets)
        grid = random_qam16_grid(SMALL, np.random.default_rng(1))
        rx = synthesize_rx(ofdm_modulate(grid, SMALL), sc, include_noise=False)
        b = rx_manifold([-6.0, 4.0], sc.geometry).columns
        proj = b @ np.linalg.solve(b.conj().T @ b, b.conj().T)
        residual = rx.samples - proj @ rx.samples
        rel = np.linalg.norm(residual) / np.linalg.norm(rx.samples)
        assert rel < 1e-9

    def test_delay_places_echo_at_ns_samples(self):
        tgt = Target(range_m=140.0, velocity=0.0, angle_deg=0.0)
        sc = small_scenario((tgt,))
        _, ns = sample_offsets(round_trip_delay(140.0), SMALL)
        grid = random_qam16_grid(SMALL, np.random.default_rng(2))
        tx = ofdm_modulate(grid, SMALL)
        rx = synthesize_rx(tx, sc, include_noise=False)
        assert ns > 0
        np.testing.assert_allclose(rx.samples[:, :ns], 0.0, atol=1e-15)
        assert abs(rx.samples[0, ns]) > 0

    def test_doppler_phase_advances_per_sample(self):
        tgt = Target(range_m=0.1, velocity=42.0, angle_deg=0.0)
        sc = small_scenario((tgt,))
        fd = doppler_shift(42.0, SMALL.fc)
        tx_samples = np.ones(1000, dtype=complex)
        from ofdmsense.waveform import TimeSignal
        tx = TimeSignal(samples=tx_samples, sample_rate=SMALL.bandwidth)
        rx = synthesize_rx(tx, sc, include_noise=False, capture_samples=1000)
        phases = np.angle(rx.samples[0, 1:] / rx.samples[0, :-1])
        np.testing.assert_allclose(phases, 2 * np.pi * fd * SMALL.ts, rtol=1e-6)

    def test_linearity_of_superposition(self):
        # The beam steers at targets[0], so keep a vanishing-RCS anchor in
        # the single-target scenes to hold the beam fixed.
        t1 = Target(range_m=120.0, velocity=10.0, angle_deg=-3.0)
        t2 = Target(range_m=180.0, velocity=-20.0, angle_deg=5.0)
        anchor = Target(range_m=120.0, velocity=10.0, angle_deg=-3.0, rcs=1e-30)
        grid = random_qam16_grid(SMALL, np.random.default_rng(3))
        tx = ofdm_modulate(grid, SMALL)
        both = synthesize_rx(tx, small_scenario((t1, t2)), include_noise=False)
        one = synthesize_rx(tx, small_scenario((t1,)), include_noise=False)
        two = synthesize_rx(tx, small_scenario((anchor, t2)), include_noise=False)
        scale = np.abs(both.samples).max()
        np.testing.assert_allclose(both.samples, one.samples + two.samples,
                                   rtol=0, atol=1e-10 * scale)

    def test_noise_only_variance(self):
        sc = small_scenario((Target(range_m=100.0),), sigma2=4e-9)
        tx = ofdm_modulate(np.zeros((SMALL.nc, SMALL.m_symbols), dtype=complex), SMALL)
        rx = synthesize_rx(tx, sc, rng=np.random.default_rng(42))
        samples = rx.samples.ravel()
        n = samples.size
        var = np.mean(np.abs(samples) ** 2)
        # var estimate of |z|^2 over n samples has std sigma2/sqrt(n)
        assert var == pytest.approx(4e-9, abs=3 * 4e-9 / np.sqrt(n))

    def test_deterministic_given_generator_seed(self):
        sc = small_scenario((Target(range_m=100.0, velocity=3.0),), sigma2=1e-10)
        grid = random_qam16_grid(SMALL, np.random.default_rng(4))
        tx = ofdm_modulate(grid, SMALL)
        a = synthesize_rx(tx, sc, rng=np.random.default_rng(9))
        b = synthesize_rx(tx, sc, rng=np.random.default_rng(9))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_frame_energy_of_single_echo(self):
        tgt = Target(range_m=130.0, velocity=17.0, angle_deg=8.0)
        sc = small_scenario((tgt,))
        grid = random_qam16_grid(SMALL, np.random.default_rng(5))
        tx = ofdm_modulate(grid, SMALL)
        rx = synthesize_rx(tx, sc, include_noise=False)
        gain = target_gain(tgt, sc)
        tx_energy = np.sum(np.abs(tx.samples) ** 2)
        # Unit-modulus steering: each antenna carries |gain|^2 x tx energy.
        expected = sc.geometry.nr * abs(gain) ** 2 * tx_energy
        assert np.sum(np.abs(rx.samples) ** 2) == pytest.approx(expected, rel=1e-9)


class TestCombining:
    def test_unity_gain_toward_steered_target(self):
        sc = small_scenario((Target(range_m=100.0, angle_deg=7.0),))
        w = ls_beamformer(7.0, sc.geometry, side="rx")
        b = rx_steering(7.0, sc.geometry).elements
        assert w @ b == pytest.approx(1.0, abs=1e-12)

    def test_combined_noise_variance_scales_with_weight_norm(self):
        rng = np.random.default_rng(6)
        sc = small_scenario((Target(range_m=100.0),), sigma2=2e-9)
        tx = ofdm_modulate(np.zeros((SMALL.nc, SMALL.m_symbols), dtype=complex), SMALL)
        rx = synthesize_rx(tx, sc, rng=rng)
        w = ls_beamformer(0.0, sc.geometry, side="rx")
        y = beamform_combine(rx, w)
        expected = float(np.sum(np.abs(w) ** 2)) * 2e-9
        var = np.mean(np.abs(y) ** 2)
        assert var == pytest.approx(expected, abs=4 * expected / np.sqrt(y.size))

    def test_off_beam_leakage_scale(self):
        sc = small_scenario((Target(range_m=100.0, angle_deg=0.0),
                             Target(range_m=100.5, angle_deg=4.0)))
        w = ls_beamformer(0.0, sc.geometry, side="rx")
        b1 = rx_steering(4.0, sc.geometry).elements
        leak = abs(w @ b1)
        assert 0.0 < leak < 1.0

    def test_weight_length_checked(self):
        sc = small_scenario((Target(range_m=100.0),))
        rx = synthesize_rx(ofdm_modulate(
            np.zeros((SMALL.nc, SMALL.m_symbols), dtype=complex), SMALL), sc)
        with pytest.raises(ValueError):
            beamform_combine(rx, np.ones(3, dtype=complex))


class TestRawCapture:
    def test_roundtrip(self, tmp_path):
        sc = small_scenario((Target(range_m=90.0, velocity=2.0),), sigma2=1e-10)
        grid = random_qam16_grid(SMALL, np.random.default_rng(7), dtype=np.complex64)
        rx = synthesize_rx(ofdm_modulate(grid, SMALL), sc, rng=np.random.default_rng(8))
        path = tmp_path / "capture.c64"
        write_raw_capture(path, rx)
        back = read_raw_capture(path)
        assert back.nr == rx.nr
        assert back.sample_rate == rx.sample_rate
        np.testing.assert_allclose(back.samples, rx.samples.astype(np.complex64))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTAFILE" + b"\x00" * 64)
        with pytest.raises(ValueError):
            read_raw_capture(path)
