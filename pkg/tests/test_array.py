"""Steering vectors, beamformer weights, and the separation operator."""

import numpy as np
import pytest

from ofdmsense.array import (
    IllConditionedManifoldError,
    beam_gain,
    build_separator,
    half_power_beamwidth_deg,
    ls_beamformer,
    rx_manifold,
    rx_steering,
    tx_steering,
)
from ofdmsense.numerology import ArrayGeometry

GEOM = ArrayGeometry.for_carrier(28e9)


class TestSteering:
    def test_broadside_is_all_ones(self):
        v = tx_steering(0.0, GEOM).elements
        np.testing.assert_allclose(v, np.ones(16), atol=1e-15)

    def test_element_one_at_30deg_half_wavelength(self):
        # exp(-j pi sin 30deg) = exp(-j pi / 2) = -j.
        v = tx_steering(30.0, GEOM).elements
        assert v[1] == pytest.approx(-1j, abs=1e-12)

    def test_unit_modulus_and_first_element(self):
        v = rx_steering(-42.5, GEOM).elements
        assert v[0] == pytest.approx(1.0)
        np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-12)

    def test_conjugate_symmetry(self):
        for theta in (7.0, 33.3, 61.0):
            plus = rx_steering(theta, GEOM).elements
            minus = rx_steering(-theta, GEOM).elements
            np.testing.assert_allclose(minus, plus.conj(), atol=1e-12)

    def test_angle_bounds(self):
        with pytest.raises(ValueError):
            tx_steering(90.0, GEOM)


class TestBeamformer:
    def test_unity_gain_at_steer_angle(self):
        for theta in (0.0, 12.0, -37.0):
            w = ls_beamformer(theta, GEOM, side="tx")
            assert beam_gain(theta, w, GEOM, side="tx") == pytest.approx(1.0, abs=1e-12)

    def test_broadside_weights_are_uniform(self):
        w = ls_beamformer(0.0, GEOM, side="tx")
        np.testing.assert_allclose(w, np.full(16, 1 / 16), atol=1e-15)

    def test_half_power_point_near_3p18deg(self):
        w = ls_beamformer(0.0, GEOM, side="tx")
        hpbw = half_power_beamwidth_deg(GEOM.nt, GEOM.dt, GEOM.wavelength)
        assert hpbw == pytest.approx(6.36, abs=0.02)
        edge = abs(beam_gain(hpbw / 2, w, GEOM, side="tx"))
        assert edge == pytest.approx(np.sqrt(0.5), abs=0.005)


class TestSeparator:
    def test_pinv_times_manifold_is_identity(self):
        sep = build_separator([0.0, 2.0], GEOM)
        b = rx_manifold([0.0, 2.0], GEOM).columns
        np.testing.assert_allclose(sep.pinv @ b, np.eye(2), atol=1e-9)

    def test_single_target_lambda_is_inverse_nr(self):
        sep = build_separator([5.0], GEOM)
        assert sep.lam[0] == pytest.approx(1.0 / GEOM.nr, rel=1e-12)

    def test_orthogonal_columns_lambda(self):
        # sin(theta) = 1/8 makes b(0) and b(theta) exactly orthogonal for
        # a 16-element half-wavelength ULA.
        theta = np.degrees(np.arcsin(1.0 / 8.0))
        sep = build_separator([0.0, theta], GEOM)
        gram = rx_manifold([0.0, theta], GEOM).columns
        assert abs(np.vdot(gram[:, 0], gram[:, 1])) < 1e-10
        np.testing.assert_allclose(sep.lam, 1.0 / GEOM.nr, rtol=1e-9)

    def test_lambda_never_below_inverse_nr(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            angles = np.sort(rng.uniform(-40, 40, size=3))
            if np.min(np.diff(angles)) < 1.0:
                continue
            sep = build_separator(angles, GEOM)
            assert np.all(sep.lam >= 1.0 / GEOM.nr - 1e-12)

    def test_noiseless_mixture_separates_exactly(self):
        rng = np.random.default_rng(1)
        angles = [-4.0, 1.5, 9.0]
        b = rx_manifold(angles, GEOM).columns
        x = rng.standard_normal((3, 500)) + 1j * rng.standard_normal((3, 500))
        y = b @ x
        sep = build_separator(angles, GEOM)
        np.testing.assert_allclose(sep.pinv @ y, x, atol=1e-10)

    def test_close_angles_rejected(self):
        with pytest.raises(IllConditionedManifoldError):
            build_separator([0.0, 0.0005], GEOM)

    def test_duplicate_angles_rejected(self):
        with pytest.raises(ValueError):
            build_separator([1.0, 1.0], GEOM)

    def test_too_many_targets_rejected(self):
        angles = np.linspace(-40, 40, GEOM.nr + 1)
        with pytest.raises(ValueError):
            build_separator(angles, GEOM)
