"""Tests for the closed-form parameter analysis."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fhnwaves.model import (
    CubicNonlinearity,
    HypothesisError,
    ModelParams,
    RegimeError,
    classify_regime,
    derive_constants,
    energy_level,
    front_constants,
    reversed_transform,
    solve_beta0,
    spectral_data,
)

P_CANON = ModelParams(0.45, 50.0, 1e-5)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.6, 50.0, 1e-5)
    with pytest.raises(ValueError):
        ModelParams(0.45, -1.0, 1e-5)
    with pytest.raises(ValueError):
        ModelParams(0.45, 50.0, 0.0)


def test_canonical_cubic_matches_factored_form():
    beta = 0.37
    f = CubicNonlinearity.canonical(beta)
    assert f.coefficients() == (-1.0, 1.0 + beta, -beta, 0.0)
    for u in np.linspace(-2, 2, 41):
        assert f(u) == pytest.approx(u * (u - beta) * (1.0 - u), abs=1e-14)
        # potential term by term: xi^4/4 - (1+beta) xi^3/3 + beta xi^2/2
        expect = u**4 / 4 - (1 + beta) * u**3 / 3 + beta * u**2 / 2
        assert f.potential(u) == pytest.approx(expect, abs=1e-14)


class TestDerivedConstants:
    def test_equilibria(self):
        dc = derive_constants(P_CANON)
        # independent oracle: the quadratic mu^2 - (1+beta) mu + beta + 1/gamma
        beta, gamma = 0.45, 50.0
        for mu in (dc.mu2, dc.mu3):
            assert mu * mu - (1 + beta) * mu + beta + 1 / gamma == pytest.approx(0.0, abs=1e-12)
        f = CubicNonlinearity.canonical(beta)
        assert abs(f(dc.mu2) - dc.mu2 / gamma) <= 1e-12
        assert abs(f(dc.mu3) - dc.mu3 / gamma) <= 1e-12
        assert dc.mu3 == pytest.approx(0.960849, abs=1e-6)
        assert dc.mu2 == pytest.approx(0.489151, abs=1e-6)
        assert dc.mu2 + dc.mu3 == pytest.approx(1.45, abs=1e-12)
        assert 0 < beta < dc.mu2 < (1 + beta) / 2 < dc.mu3 < 1

    def test_closed_forms_beta_045(self):
        dc = derive_constants(P_CANON)
        assert dc.delta0 == pytest.approx(0.005, abs=1e-15)
        assert dc.gamma_star == pytest.approx(9.0 / (0.1 * 1.55), abs=1e-12)
        assert dc.mu3_star == pytest.approx(29.0 / 30.0, abs=1e-12)
        assert dc.mu2_star == pytest.approx(dc.mu3_star / 2, abs=1e-15)
        # beta1 oracle: positive root of xi^2 - (4(1+beta)/3) xi + 2 beta
        b = 4.0 * 1.45 / 3.0
        beta1 = (b - math.sqrt(b * b - 4 * 0.9)) / 2.0
        assert dc.beta1 == pytest.approx(beta1, abs=1e-10)
        assert dc.beta1 == pytest.approx(0.781074, abs=1e-6)
        assert dc.c_lower == pytest.approx(math.sqrt(240.0), abs=1e-12)
        assert dc.b0 == pytest.approx(-2.0 * math.log(0.45 / math.sqrt(2.0)), abs=1e-14)
        assert dc.b0 == pytest.approx(2.290, abs=1e-3)

    def test_potential_zeros(self):
        dc = derive_constants(P_CANON)
        f = CubicNonlinearity.canonical(0.45)
        assert abs(f.potential(dc.beta1)) <= 1e-12
        assert abs(f.potential(dc.beta_tilde2)) <= 1e-12
        assert 0.45 < dc.beta1 < 1 < dc.beta2 < min(dc.beta_tilde2, 1 + 0.45 / 2)

    def test_beta0(self):
        b0 = solve_beta0()
        assert abs(b0 - 0.073) <= 1e-3
        # oracle: the defining balance equation
        assert 2 * b0 * (1 + b0) / 3 == pytest.approx((1 - 2 * b0) ** 2 * (2 - b0) / 27, abs=1e-12)

    def test_mu3_at_balanced_gamma(self):
        dc = derive_constants(P_CANON)
        dc_star = derive_constants(ModelParams(0.45, dc.gamma_star, 1e-5))
        assert abs(dc_star.mu3 - dc.mu3_star) <= 1e-10

    def test_truncation_constants(self):
        dc = derive_constants(P_CANON)
        f = CubicNonlinearity.canonical(0.45)
        assert abs(f(-dc.M_gamma) - 1.0 / 50.0) <= 1e-12
        assert abs(f(-dc.M_gamma - dc.theta2) - (1 + dc.theta1) / 50.0) <= 1e-12
        assert dc.M1 == pytest.approx(dc.M_gamma + dc.theta2, abs=1e-15)
        assert dc.beta2 == pytest.approx(1 + dc.theta1, abs=1e-15)
        assert dc.gamma_tilde1 < dc.gamma_tilde2 < dc.gamma_star

    def test_no_three_equilibria_is_an_error(self):
        with pytest.raises(RegimeError):
            derive_constants(ModelParams(0.45, 10.0, 1e-5))


class TestEnergyLevel:
    def test_zero(self):
        assert energy_level(0.0, P_CANON) == 0.0

    def test_balanced_level_vanishes(self):
        dc = derive_constants(P_CANON)
        p = ModelParams(0.45, dc.gamma_star, 1e-5)
        assert abs(energy_level(dc.mu3_star, p)) <= 1e-10

    def test_quadrature_oracle(self):
        dc = derive_constants(P_CANON)
        f = CubicNonlinearity.canonical(0.45)
        val, _ = quad(lambda xi: xi / 50.0 - f(xi), 0.0, dc.mu3, epsabs=1e-13)
        lv = energy_level(dc.mu3, P_CANON)
        assert lv == pytest.approx(val, abs=1e-11)
        assert lv == pytest.approx(0.001290, abs=2e-6)


class TestRegime:
    def test_canonical_subcritical(self):
        rep = classify_regime(P_CANON)
        assert rep.h1_holds and rep.h2_holds and rep.truncation_holds
        assert rep.regime == "subcritical"
        assert rep.energy_order == "mu2>mu3>zero"
        dc = derive_constants(P_CANON)
        f = CubicNonlinearity.canonical(0.45)
        assert -f.deriv(dc.mu3) == pytest.approx(0.43323, abs=1e-5)
        assert -f.deriv(dc.mu3) > 50.0 * 1e-5
        lhs = f(dc.mu3) - f.deriv(dc.mu3) * (dc.M_gamma + dc.mu3)
        assert lhs == pytest.approx(0.4526, abs=1e-4)
        assert lhs > 1.0 / 50.0

    def test_large_d_breaks_h2(self):
        rep = classify_regime(ModelParams(0.45, 50.0, 1.0))
        assert not rep.h2_holds

    def test_small_gamma_outside(self):
        rep = classify_regime(ModelParams(0.45, 10.0, 1e-5))
        assert rep.regime == "outside"
        assert not rep.n1_holds
        dc = derive_constants(P_CANON)
        assert dc.gamma_tilde1 == pytest.approx(13.63, abs=5e-3)

    def test_supercritical(self):
        rep = classify_regime(ModelParams(0.45, 70.0, 1e-5))
        assert rep.regime == "supercritical"
        assert rep.energy_order == "mu2>zero>mu3"
        l2, l0, l3 = rep.energy_levels
        assert l2 > l0 > l3

    def test_energy_order_random_gammas(self):
        rng = np.random.default_rng(7)
        dc = derive_constants(P_CANON)
        for _ in range(200):
            g_lo = rng.uniform(dc.gamma_tilde1 * 1.001, dc.gamma_star * 0.999)
            p = ModelParams(0.45, g_lo, 1e-5)
            levels = (energy_level(derive_constants(p).mu2, p), 0.0,
                      energy_level(derive_constants(p).mu3, p))
            assert levels[0] > levels[2] > levels[1]
        for _ in range(200):
            g_hi = rng.uniform(dc.gamma_star * 1.001, dc.gamma_star * 3)
            p = ModelParams(0.45, g_hi, 1e-5)
            d2 = derive_constants(p)
            assert energy_level(d2.mu2, p) > 0.0 > energy_level(d2.mu3, p)


class TestSpectralData:
    def test_example_eigenvalues(self):
        sd = spectral_data(ModelParams(0.45, 28.0, 0.001), 2.0, "origin")
        assert sd.lambda1 == pytest.approx(30.383, abs=1e-3)
        assert sd.lambda2 == pytest.approx(447.617, abs=1e-3)
        assert sd.eta1 == pytest.approx(419.617, abs=1e-3)
        assert sd.eta2 == pytest.approx(2.383, abs=1e-3)
        assert 28.0 < sd.lambda1 < 0.5 * (28.0 + 450.0) < sd.lambda2 < 450.0

    def test_example_kernel_exponents(self):
        sd = spectral_data(ModelParams(0.45, 8.0, 0.001), 2.0, "origin")
        assert sd.r1 == pytest.approx(-2.0, abs=1e-12)
        assert sd.r2 == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_discriminant_raises(self):
        # (beta - d gamma)^2 - 4d < 0
        with pytest.raises(HypothesisError):
            spectral_data(ModelParams(0.45, 1.0, 0.2), 2.0, "origin")

    def test_orderings_random(self):
        rng = np.random.default_rng(11)
        count = 0
        while count < 1000:
            beta = rng.uniform(0.05, 0.49)
            gamma = rng.uniform(0.5, 100.0)
            d = 10.0 ** rng.uniform(-8, -1)
            c = 10.0 ** rng.uniform(-1, 2)
            if not ((beta - d * gamma) ** 2 - 4 * d > 0 and beta > d * gamma):
                continue
            count += 1
            p = ModelParams(beta, gamma, d)
            sd = spectral_data(p, c, "origin")
            for lam in (sd.lambda1, sd.lambda2):
                resid = d * lam**2 - (beta + d * gamma) * lam + 1 + gamma * beta
                assert abs(resid) <= 1e-10 * (1 + lam**2)
            assert 0 < gamma < sd.lambda1 < 0.5 * (gamma + beta / d) < sd.lambda2 < beta / d
            assert sd.eta1 > sd.eta2 > 0
            assert sd.eta1 - sd.eta2 == pytest.approx(sd.lambda2 - sd.lambda1, rel=1e-10)
            assert sd.s1 < sd.s2 < -1 < 0 < sd.s3 < sd.s4
            assert sd.s1 < sd.s2 < sd.r1 < -1
            assert sd.r1 * sd.r2 == pytest.approx(-gamma / c**2, rel=1e-10)
            assert sd.r1 + sd.r2 == pytest.approx(-1.0, abs=1e-10)


class TestReversedTransform:
    def test_fixed_points(self):
        ft = reversed_transform(P_CANON)
        dc = derive_constants(P_CANON)
        f = CubicNonlinearity.canonical(0.45)
        assert ft(0.0) == pytest.approx(0.0, abs=1e-14)
        assert ft(dc.mu3) == pytest.approx(dc.mu3 / 50.0, abs=1e-12)
        assert f(dc.mu3) - f(dc.mu3 - 0.3) == pytest.approx(ft(0.3), abs=1e-13)

    def test_equilibria_roots(self):
        ft = reversed_transform(P_CANON)
        dc = derive_constants(P_CANON)
        roots = ft.shifted_equilibria(50.0)
        expect = np.array([0.0, dc.mu3 - dc.mu2, dc.mu3])
        assert np.allclose(roots, expect, atol=1e-10)
        assert roots[1] == pytest.approx(0.471699, abs=1e-6)
        assert roots[2] == pytest.approx(0.960849, abs=1e-6)

    def test_involution(self):
        from fhnwaves.model import reflect_cubic
        ft = reversed_transform(P_CANON)
        dc = derive_constants(P_CANON)
        back = reflect_cubic(ft, dc.mu3)
        f = CubicNonlinearity.canonical(0.45)
        for a, b in zip(back.coefficients(), f.coefficients()):
            assert a == pytest.approx(b, abs=1e-12)

    def test_front_constants_for_reversed_cubic(self):
        ft = reversed_transform(P_CANON)
        fc = front_constants(ft, 50.0)
        assert 0 < fc.mid < fc.top
        assert fc.top > 2 * fc.mid
        assert abs(ft.potential(fc.beta1)) <= 1e-12
        assert fc.delta0 == pytest.approx((fc.top - 2 * fc.mid) ** 2 / 2, abs=1e-14)
