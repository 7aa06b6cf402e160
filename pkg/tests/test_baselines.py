"""Tests for the uncorrelated-spacings closed forms."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from powerspec.baselines import (
    BUILTINS,
    Regime,
    char_fn,
    custom_distribution,
    form_factor_exact,
    form_factor_scaling,
    get_distribution,
    ordered_level_covariance,
    s_discrete_uncorrelated,
    s_scaling,
    s_uncorrelated_double_sum,
    s_uncorrelated_exact,
)
from powerspec.errors import DomainError
from powerspec.spectra import discrete_frequencies

SAMPLED = ("exp", "erlang", "inverse-gaussian", "uniform")


class TestPowerSpectrum:
    def test_value_at_pi(self):
        assert s_uncorrelated_exact(4, np.pi, 1.0) == pytest.approx(0.5)

    def test_single_level_at_pi(self):
        assert s_uncorrelated_exact(1, np.pi, 2.5) == pytest.approx(2.5)

    @pytest.mark.parametrize("n", [2, 5, 16, 64])
    def test_reduces_on_discrete_grid(self, n):
        omegas = discrete_frequencies(n)
        np.testing.assert_allclose(
            s_uncorrelated_exact(n, omegas, 1.0 / 3.0),
            s_discrete_uncorrelated(omegas, 1.0 / 3.0),
            rtol=1e-11,
        )

    @pytest.mark.parametrize("n", [1, 3, 8, 32])
    @pytest.mark.parametrize("omega", [0.2, 1.3, np.pi])
    def test_matches_covariance_double_sum(self, n, omega):
        assert s_uncorrelated_double_sum(n, omega, 1.0) == pytest.approx(
            s_uncorrelated_exact(n, omega, 1.0), rel=1e-10
        )

    def test_zero_frequency(self):
        with pytest.raises(DomainError):
            s_uncorrelated_exact(8, 0.0, 1.0)

    def test_infrared_limit(self):
        n = 10**6
        for big_omega in (0.1, 1.0, 10.0):
            omega = big_omega / n
            scaled = omega**2 * s_uncorrelated_exact(n, omega, 1.0)
            assert scaled == pytest.approx(s_scaling(Regime.INFRARED, big_omega, 1.0), rel=1e-4)


class TestScaling:
    def test_infrared_small_argument(self):
        # 2σ²(1 − sinΩ/Ω) ≈ σ²Ω²/3
        assert s_scaling("infrared", 1e-3, 1.0) == pytest.approx(1e-6 / 3.0, rel=1e-4)

    def test_infrared_at_pi(self):
        assert s_scaling("infrared", np.pi, 0.5) == pytest.approx(1.0)

    def test_fixed_small_frequency(self):
        assert s_scaling("fixed", 1e-4, 1.0) == pytest.approx(2.0, rel=1e-6)

    def test_intermediate_is_constant(self):
        np.testing.assert_allclose(s_scaling("intermediate", [0.1, 5.0], 0.25), 0.5)

    def test_non_positive_argument(self):
        with pytest.raises(DomainError):
            s_scaling("fixed", 0.0, 1.0)


class TestCharacteristicFunctions:
    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_normalized(self, name):
        assert char_fn(get_distribution(name), 0.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_bounded(self, name):
        taus = np.linspace(-3.0, 3.0, 121)
        assert np.all(np.abs(char_fn(get_distribution(name), taus)) <= 1.0 + 1e-12)

    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_slope_gives_mean(self, name):
        h = 1e-6
        dist = get_distribution(name)
        slope = (char_fn(dist, h) - char_fn(dist, -h)) / (2.0 * h)
        assert slope == pytest.approx(2j * np.pi * dist.mean, rel=1e-6)

    def test_uniform_closed_form(self):
        tau = 0.37
        expected = (np.exp(4j * np.pi * tau) - 1.0) / (4j * np.pi * tau)
        assert char_fn(get_distribution("uniform"), tau) == pytest.approx(expected)

    def test_erlang_closed_form(self):
        tau = 0.8
        expected = (1.0 - 2j * np.pi * tau / 3.0) ** -3
        assert char_fn(get_distribution("erlang"), tau) == pytest.approx(expected)

    @pytest.mark.parametrize("name", SAMPLED)
    @pytest.mark.parametrize("tau", [0.15, 0.6])
    def test_matches_density_quadrature(self, name, tau):
        dist = get_distribution(name)
        upper = 2.0 if name == "uniform" else 40.0
        re, _ = integrate.quad(lambda s: dist.density(s) * np.cos(2 * np.pi * tau * s), 0, upper,
                               limit=400, epsabs=1e-12)
        im, _ = integrate.quad(lambda s: dist.density(s) * np.sin(2 * np.pi * tau * s), 0, upper,
                               limit=400, epsabs=1e-12)
        assert char_fn(dist, tau) == pytest.approx(re + 1j * im, abs=1e-8)

    @pytest.mark.parametrize("name", SAMPLED)
    def test_sampler_variance(self, name, rng):
        dist = get_distribution(name)
        samples = dist.sampler(rng, 200_000)
        assert samples.mean() == pytest.approx(dist.mean, abs=0.01)
        assert samples.var() == pytest.approx(dist.variance, rel=0.03)

    def test_unknown_name(self):
        with pytest.raises(DomainError):
            get_distribution("cauchy")

    def test_custom_distribution(self):
        dist = custom_distribution(1.0, 1.0, lambda t: 1.0 / (1.0 - 2j * np.pi * t))
        assert form_factor_exact(4, 0.3, dist) == pytest.approx(
            form_factor_exact(4, 0.3, get_distribution("exp"))
        )


def _form_factor_direct(n: int, tau: float, dist) -> float:
    """K_N from ⟨e^{2πiτ(ε_ℓ−ε_m)}⟩ = Ψ^{ℓ−m} and ⟨e^{2πiτε_ℓ}⟩ = Ψ^ℓ."""
    psi = char_fn(dist, tau)
    ell = np.arange(1, n + 1)
    diff = ell[:, None] - ell[None, :]
    pair = np.where(diff >= 0, psi ** np.abs(diff), np.conj(psi) ** np.abs(diff))
    single = np.sum(psi**ell)
    return float(np.real(pair.sum() - abs(single) ** 2) / n)


class TestFormFactor:
    @pytest.mark.parametrize("name", SAMPLED)
    @pytest.mark.parametrize("tau", [0.05, 0.4, 1.7])
    def test_matches_direct_sum(self, name, tau):
        dist = get_distribution(name)
        assert form_factor_exact(5, tau, dist) == pytest.approx(
            _form_factor_direct(5, tau, dist), rel=1e-10
        )

    def test_single_level(self):
        dist = get_distribution("uniform")
        psi = char_fn(dist, 0.3)
        assert form_factor_exact(1, 0.3, dist) == pytest.approx(1.0 - abs(psi) ** 2)

    def test_zero_time(self):
        with pytest.raises(DomainError):
            form_factor_exact(10, 0.0, get_distribution("exp"))

    @pytest.mark.parametrize("name", ["exp", "erlang"])
    def test_large_time(self, name):
        value = form_factor_exact(2048, 1e3, get_distribution(name))
        assert value == pytest.approx(1.0, abs=1e-6)

    def test_fixed_regime_exp_is_one(self):
        taus = np.array([0.1, 0.5, 3.0])
        np.testing.assert_allclose(
            form_factor_scaling(Regime.FIXED, taus, get_distribution("exp")), 1.0, atol=1e-12
        )

    @pytest.mark.parametrize("name", ["erlang", "inverse-gaussian", "uniform"])
    def test_regimes_glue(self, name):
        dist = get_distribution(name)
        infrared = form_factor_scaling(Regime.INFRARED, 1e6 + 0.25, dist)
        intermediate = form_factor_scaling(Regime.INTERMEDIATE, 1e-6, dist)
        assert infrared == pytest.approx(2.0 * dist.variance, rel=1e-5)
        assert intermediate == pytest.approx(2.0 * dist.variance, rel=1e-6)

    def test_intermediate_large_argument(self):
        dist = get_distribution("erlang")
        assert form_factor_scaling("intermediate", 1e3, dist) == pytest.approx(
            dist.variance, rel=1e-6
        )


class TestCovariance:
    def test_values(self):
        assert ordered_level_covariance(1, 1, 1.0) == 1.0
        assert ordered_level_covariance(3, 5, 2.0) == 6.0

    def test_indices_start_at_one(self):
        with pytest.raises(DomainError):
            ordered_level_covariance(0, 2, 1.0)
