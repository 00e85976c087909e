"""Tests for the scalar half-line problems and their functionals."""

import math

import numpy as np
import pytest

from fhnwaves.model import CubicNonlinearity, ModelParams, derive_constants
from fhnwaves.scalar_waves import (
    Heteroclinic,
    NoConnectionError,
    ScalarWaveProblem,
    analytic_front,
    evaluate_half_line_functional,
    intersections,
    mechanical_energy,
    reflection_competitor,
    scalar_residual,
    shoot_heteroclinic,
)
from fhnwaves.weighted_space import Profile, WeightedGrid

BETA = 0.45
PARAMS = ModelParams(BETA, 50.0, 1e-5)
DC = derive_constants(PARAMS)
CUB = CubicNonlinearity.canonical(BETA)


class TestAnalyticFront:
    def test_boundary_value_and_limits(self):
        a_star, H = analytic_front(BETA)
        assert H(0.0) == pytest.approx(DC.beta1, abs=1e-12)
        assert H(-60.0) == pytest.approx(1.0, abs=1e-12)
        assert H(60.0) == pytest.approx(0.0, abs=1e-12)
        assert a_star == pytest.approx(-2 * (1 - 2 * BETA) * math.atanh(1 - 2 * DC.beta1),
                                       abs=1e-12)

    def test_monotone_decreasing(self):
        _, H = analytic_front(BETA)
        x = np.linspace(-10, 10, 2001)
        vals = H(x)
        assert np.all(np.diff(vals) <= 0)
        core = np.linspace(-3, 3, 601)           # away from float saturation
        assert np.all(np.diff(H(core)) < 0)

    def test_discretized_residual(self):
        _, H = analytic_front(BETA)
        g = WeightedGrid(-25.0, 0.0, 6001)
        res = scalar_residual(Profile(g, H(g.nodes)), DC.delta0, 0.0, CUB)
        assert res <= 1e-8


class TestShooting:
    def test_reproduces_analytic_front(self):
        prob = ScalarWaveProblem(delta=DC.delta0, level=0.0, nonlinearity=CUB,
                                 boundary_value=DC.beta1, target_equilibrium=1.0)
        het = shoot_heteroclinic(prob)
        _, H = analytic_front(BETA)
        sup = np.max(np.abs(het.profile.values - H(het.profile.grid.nodes)))
        assert sup <= 1e-6
        assert het.residual <= 1e-8
        assert abs(het.profile.values[0] - 1.0) <= 1e-8
        assert het.profile.values[-1] == pytest.approx(DC.beta1, abs=1e-9)

    def test_connection_to_mu3_boundary(self):
        # trial pinned at mu3 relaxes to 1, strictly decreasing
        prob = ScalarWaveProblem(delta=0.8 * DC.delta0, level=0.0, nonlinearity=CUB,
                                 boundary_value=DC.mu3, target_equilibrium=1.0)
        het = shoot_heteroclinic(prob)
        w = het.profile.values
        assert abs(w[0] - 1.0) <= 1e-8
        noise = np.abs(w - 1.0)[:-1] > 1e-12
        assert np.all(np.diff(w)[noise] < 0)
        assert het.residual <= 1e-8

    def test_increasing_cut_connection(self):
        nu = 0.5 * (DC.mu3 + DC.mu3_star)
        tri = intersections(nu, CUB)
        prob = ScalarWaveProblem(delta=DC.delta0, level=CUB(nu), nonlinearity=CUB,
                                 boundary_value=nu, target_equilibrium=tri.rho1)
        het = shoot_heteroclinic(prob)
        w = het.profile.values
        assert abs(w[0] - tri.rho1) <= 1e-8
        noise = np.abs(w - tri.rho1)[:-1] > 1e-12
        assert np.all(np.diff(w)[noise] > 0)

    def test_no_connection_reports_failure_mode(self):
        # under heavy damping the downhill branch spirals into the middle
        # sink and never reaches a negative boundary value
        prob = ScalarWaveProblem(delta=5.0, level=0.0, nonlinearity=CUB,
                                 boundary_value=-0.5, target_equilibrium=1.0)
        with pytest.raises(NoConnectionError, match="undershoot|overshoot"):
            shoot_heteroclinic(prob, eps_list=(1e-8, 1e-6))

    def test_source_must_be_saddle(self):
        prob = ScalarWaveProblem(delta=DC.delta0, level=0.0, nonlinearity=CUB,
                                 boundary_value=0.5, target_equilibrium=BETA)
        with pytest.raises(NoConnectionError, match="saddle"):
            shoot_heteroclinic(prob)

    def test_energy_forces_endpoint_one(self):
        # the half-line minimizer pinned at beta1 must come from the zero of
        # the cubic with negative potential, which is 1 alone
        assert CUB.potential(1.0) < 0
        assert CUB.potential(0.0) == 0.0
        assert CUB.potential(BETA) > 0


class TestIntersections:
    def test_balanced_cut(self):
        tri = intersections(DC.mu3_star, CUB)
        assert tri.rho1 == pytest.approx(-1.0 / 30.0, abs=1e-9)
        assert tri.rho2 == pytest.approx(0.516667, abs=1e-6)
        assert tri.rho3 == pytest.approx(29.0 / 30.0, abs=1e-9)
        # Vieta: the three roots sum to 1 + beta
        assert tri.rho1 + tri.rho2 + tri.rho3 == pytest.approx(1 + BETA, abs=1e-9)

    def test_tangency_flagged(self):
        with pytest.raises(ValueError, match="tangency|intersects"):
            intersections(2.0, CUB)  # level above the local max

    def test_ordering_random(self):
        rng = np.random.default_rng(51)
        for _ in range(100):
            nu = rng.uniform(DC.rho_hat + 1e-6, DC.mu3_star)
            tri = intersections(nu, CUB)
            assert tri.rho1 < 0 < DC.mu2_star < tri.rho2 < DC.rho_hat < nu
            assert nu <= DC.mu3_star < 1
            assert tri.rho3 == pytest.approx(nu, abs=1e-8)


class TestHalfLineFunctionals:
    def test_constant_competitor_closed_form(self):
        nu = 0.5 * (DC.mu3 + DC.mu3_star)
        g = WeightedGrid(-25.0, 0.0, 50001)
        k = evaluate_half_line_functional(Profile(g, np.full(g.n, nu)),
                                          "K_nu", DC.delta0, nu, CUB)
        assert k == pytest.approx(CUB.potential(nu) + nu * CUB(nu), abs=1e-9)

    def test_zero_profile(self):
        g = WeightedGrid(-25.0, 0.0, 2001)
        z = evaluate_half_line_functional(Profile(g, np.zeros(g.n)),
                                          "I_star", DC.delta0, None, CUB)
        assert z == 0.0

    def test_chain_for_ten_cut_levels(self):
        tri_star = intersections(DC.mu3_star, CUB)
        for nu in np.linspace(DC.mu3 + 1e-4, DC.mu3_star - 1e-4, 10):
            tri = intersections(nu, CUB)
            wn = shoot_heteroclinic(ScalarWaveProblem(
                DC.delta0, CUB(nu), CUB, nu, tri.rho1))
            H = shoot_heteroclinic(ScalarWaveProblem(
                DC.delta0, CUB(DC.mu3_star), CUB, nu, tri_star.rho1))
            k_w = evaluate_half_line_functional(wn.profile, "K_nu", DC.delta0, nu, CUB)
            k_h = evaluate_half_line_functional(H.profile, "K_nu", DC.delta0, nu, CUB)
            k_c = CUB.potential(nu) + nu * CUB(nu)
            assert k_w < k_h < k_c

    def test_dissipation_identity(self):
        nu = 0.5 * (DC.mu3 + DC.mu3_star)
        tri = intersections(nu, CUB)
        het = shoot_heteroclinic(ScalarWaveProblem(
            DC.delta0, CUB(nu), CUB, nu, tri.rho1))
        q = mechanical_energy(het.profile, DC.delta0, CUB(nu), CUB)
        h = het.profile.grid.h
        dq = np.diff(q) / h
        du = np.diff(het.profile.values) / h
        dumid = 0.5 * (du[:-1] + du[1:])
        assert np.max(np.abs(dq + DC.delta0 * dumid**2)) <= 1e-6
        assert np.all(np.diff(q) <= 1e-12)

    def test_reflection_competitor_improves_wrong_trial(self):
        # a trial pinned at mu3 that wrongly relaxes to 0 loses to its fold
        g = WeightedGrid(-25.0, 0.0, 5001)
        wrong = Profile(g, DC.mu3 * np.exp(0.6 * g.nodes))
        folded = reflection_competitor(wrong, DC.mu3, top=1.0)
        i_wrong = evaluate_half_line_functional(wrong, "I_delta", DC.delta0, None, CUB)
        i_fold = evaluate_half_line_functional(folded, "I_delta", DC.delta0, None, CUB)
        assert i_fold < i_wrong
        assert folded.values[-1] == pytest.approx(DC.mu3, abs=1e-12)

    def test_reflect_potential_inequality(self):
        # F(mu3 + a) < F(mu3 - a) on 0 < a < 1 - mu3
        for a in np.linspace(1e-4, 1.0 - DC.mu3 - 1e-9, 50):
            assert CUB.potential(DC.mu3 + a) < CUB.potential(DC.mu3 - a)
