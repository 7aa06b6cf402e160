"""Tests for the dPV recurrence engine and the boundary series."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from powerspec.dpv import (
    DpvDiagnostics,
    diagnose,
    dpv_advance,
    dpv_values,
    endpoint_window,
    initial_state,
    initial_weights,
    phi_auto,
    phi_dpv,
    phi_series,
    precision_divergence,
)
from powerspec.errors import AccuracyError, DomainError, EndpointError, SingularStepError
from powerspec.oracles import mean_count, toeplitz_values

OMEGAS = (0.3, 1.0, 2.5)
PHIS = np.array([0.5, 1.7, np.pi, 4.1, 5.0])


def _zeta(omega: float) -> complex:
    return complex(1.0 - np.exp(1j * omega))


class TestRecurrence:
    @pytest.mark.parametrize("omega", OMEGAS)
    def test_first_step_is_half_weight(self, omega):
        zeta = _zeta(omega)
        values, _ = dpv_values(1, PHIS, zeta)
        w0, _, _ = initial_weights(PHIS, zeta)
        np.testing.assert_allclose(values, np.asarray(w0) / 2, atol=1e-13)

    @pytest.mark.parametrize("n", [2, 8, 32, 64])
    @pytest.mark.parametrize("omega", OMEGAS)
    def test_matches_toeplitz(self, n, omega):
        zeta = _zeta(omega)
        values, derivs = dpv_values(n, PHIS, zeta, derivative=True)
        exact, exact_derivs = toeplitz_values(n, PHIS, zeta, derivative=True)
        np.testing.assert_allclose(values, exact, atol=1e-10)
        np.testing.assert_allclose(derivs, exact_derivs, rtol=1e-8, atol=1e-10)

    def test_double_precision_agrees_at_moderate_n(self):
        zeta = _zeta(1.0)
        high, _ = dpv_values(16, PHIS, zeta, precision="extended")
        low, _ = dpv_values(16, PHIS, zeta, precision="double")
        np.testing.assert_allclose(low, high, atol=1e-9)

    @pytest.mark.parametrize("n", [64, 512])
    @pytest.mark.parametrize("omega", OMEGAS)
    def test_reflection_symmetry(self, n, omega):
        zeta = _zeta(omega)
        forward, _ = dpv_values(n, PHIS, zeta)
        mirrored, _ = dpv_values(n, 2 * np.pi - PHIS, zeta)
        np.testing.assert_allclose(mirrored, (1.0 - zeta) ** n * np.conj(forward), atol=1e-12)

    def test_bounded_on_unit_circle(self, caplog):
        values, _ = dpv_values(128, np.linspace(0.2, 6.0, 30), _zeta(2.0))
        assert np.all(np.abs(values) <= 1.0 + 1e-9)
        assert "|Phi_N| > 1" not in caplog.text

    def test_zero_deformation(self):
        values, derivs = dpv_values(10, PHIS, 0.0, derivative=True)
        np.testing.assert_array_equal(values, 1.0)
        np.testing.assert_allclose(derivs, -mean_count(10, PHIS))

    def test_single_point(self):
        point = phi_dpv(12, 2.0, _zeta(0.7), want_derivative=True)
        exact, exact_derivs = toeplitz_values(12, 2.0, _zeta(0.7), derivative=True)
        assert point.value == pytest.approx(exact[0], abs=1e-10)
        assert point.dvalue == pytest.approx(exact_derivs[0], rel=1e-7)

    def test_inside_endpoint_window(self):
        n = 50
        with pytest.raises(EndpointError):
            dpv_values(n, [0.5 * endpoint_window(n)], _zeta(1.0))
        with pytest.raises(EndpointError):
            dpv_values(n, [2 * np.pi - 0.5 * endpoint_window(n)], _zeta(1.0))

    def test_initial_weights_need_interior_angle(self):
        with pytest.raises(EndpointError):
            initial_weights(0.0, 0.5)

    def test_unknown_precision(self):
        with pytest.raises(DomainError):
            initial_state(PHIS, _zeta(1.0), precision="quad")

    def test_singular_step(self):
        state = initial_state(PHIS[:1], _zeta(1.0), precision="double")
        broken = dataclasses.replace(state, g=np.ones(1, dtype=complex))
        with pytest.raises(SingularStepError) as excinfo:
            dpv_advance(broken)
        assert excinfo.value.n == 1
        assert excinfo.value.exit_code == 5


class TestDiagnostics:
    def test_precision_divergence_quiet_at_small_n(self):
        assert precision_divergence(16, PHIS, _zeta(1.0)) == [None] * PHIS.size

    def test_diagnose(self):
        diag = diagnose(20, PHIS, _zeta(0.5))
        assert isinstance(diag, DpvDiagnostics)
        data = diag.to_dict()
        assert data["n"] == 20
        assert data["nodes"] == PHIS.size
        assert len(data["max_abs_phi"]) == 20
        assert data["bound_violations"] == 0
        assert len(data["divergence"]) == PHIS.size


class TestBoundarySeries:
    @pytest.mark.parametrize("omega", OMEGAS)
    def test_near_zero(self, omega):
        zeta = _zeta(omega)
        point = phi_series(32, 0.002, zeta)
        exact, _ = toeplitz_values(32, 0.002, zeta)
        assert point.value == pytest.approx(exact[0], abs=1e-10)

    @pytest.mark.parametrize("omega", OMEGAS)
    def test_near_full_circle(self, omega):
        zeta = _zeta(omega)
        point = phi_series(32, 2 * np.pi - 0.002, zeta)
        exact, _ = toeplitz_values(32, 2 * np.pi - 0.002, zeta)
        assert point.value == pytest.approx(exact[0], abs=1e-10)

    def test_derivative(self):
        zeta = _zeta(1.3)
        point = phi_series(32, 0.003, zeta, want_derivative=True)
        _, exact = toeplitz_values(32, 0.003, zeta, derivative=True)
        assert point.dvalue == pytest.approx(exact[0], rel=1e-4, abs=1e-12)

    def test_outside_radius(self):
        with pytest.raises(AccuracyError) as excinfo:
            phi_series(512, 0.8, _zeta(1.0))
        assert excinfo.value.estimate > 1e-10

    def test_reflection_needs_zeta_not_one(self):
        with pytest.raises(DomainError):
            phi_series(8, 2 * np.pi - 1e-3, 1.0)

    def test_auto_routes_endpoints(self):
        n, zeta = 32, _zeta(1.0)
        phis = np.array([0.002, 1.0, 3.5, 2 * np.pi - 0.002])
        values, derivs = phi_auto(n, phis, zeta, derivative=True)
        exact, exact_derivs = toeplitz_values(n, phis, zeta, derivative=True)
        np.testing.assert_allclose(values, exact, atol=1e-10)
        np.testing.assert_allclose(derivs[1:3], exact_derivs[1:3], rtol=1e-8)

    def test_auto_falls_back_to_toeplitz_at_small_n(self):
        zeta = _zeta(np.pi)
        phis = np.array([0.19, 2.0, 2 * np.pi - 0.19])
        with pytest.raises(AccuracyError):
            phi_series(1, 0.19, zeta)
        values, _ = phi_auto(1, phis, zeta)
        exact, _ = toeplitz_values(1, phis, zeta)
        np.testing.assert_allclose(values, exact, atol=1e-12)

    def test_auto_reraises_beyond_toeplitz_limit(self, mocker):
        mocker.patch("powerspec.dpv.phi_series", side_effect=AccuracyError("radius", estimate=1.0))
        with pytest.raises(AccuracyError):
            phi_auto(300, [1e-5], _zeta(1.0))
