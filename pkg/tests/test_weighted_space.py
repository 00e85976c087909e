"""Tests for the weighted-space discretization: norms, operators, projection."""

import math

import numpy as np
import pytest

from fhnwaves.model import CubicNonlinearity
from fhnwaves.weighted_space import (
    AdmissibleSpec,
    NonlocalOperator,
    Profile,
    WeightedGrid,
    apply_nonlocal,
    apply_nonlocal_green,
    evaluate_J,
    evaluate_J_terms,
    gradient_J,
    load_profile_csv,
    normalized_J,
    project_admissible,
    save_profile_csv,
    seminorm,
    weighted_norms,
)

GRID = WeightedGrid(-20.0, 20.0, 4001)
FINE = WeightedGrid(-16.0, 16.0, 160001)


def bump(grid, center=0.0, width=1.0, amp=1.0):
    return Profile(grid, amp * np.exp(-(((grid.nodes - center) / width) ** 2)))


def random_bumps(grid, rng, k=3, span=4.0):
    z = grid.nodes
    vals = np.zeros(grid.n)
    for _ in range(k):
        vals += rng.uniform(-1, 1) * np.exp(-(((z - rng.uniform(-span, span))
                                               / rng.uniform(0.5, 2.0)) ** 2))
    return Profile(grid, vals)


class TestGridAndNorms:
    def test_grid_invariants(self):
        g = WeightedGrid(-3.0, 2.0, 51)
        assert g.h == pytest.approx(0.1)
        w = g.weights
        assert np.all(w > 0) and np.all(np.diff(w) > 0)
        assert g.index_of(0.0) == 30
        with pytest.raises(ValueError):
            WeightedGrid(1.0, 2.0, 51)

    def test_zero_profile(self):
        p = Profile(GRID, np.zeros(GRID.n))
        assert weighted_norms(p) == (0.0, 0.0, 0.0)

    def test_norm_composition(self):
        rng = np.random.default_rng(3)
        p = random_bumps(GRID, rng)
        l2, nsq, h1 = weighted_norms(p)
        assert h1**2 == pytest.approx(l2**2 + nsq, rel=1e-12)

    def test_ramp_derivative_energy(self):
        # w = (e^{-z} - e^{-a})/(1 - e^{-a}) on (0, a), 1 left, 0 right:
        # the derivative energy is exactly 1/(1 - e^{-a}).
        a = 0.5
        g = WeightedGrid(-15.0, 1.0, 16001)
        z = g.nodes
        vals = np.where(z <= 0, 1.0,
                        np.where(z < a, (np.exp(-z) - math.exp(-a)) / (1 - math.exp(-a)), 0.0))
        n = seminorm(Profile(g, vals))
        exact = 1.0 / (1.0 - math.exp(-a))
        assert abs(n - exact) / exact < 40 * g.h**2 + 1e-6

    def test_poincare_inequality(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            p = random_bumps(GRID, rng)
            l2, nsq, _ = weighted_norms(p)
            assert 0.25 * l2**2 <= nsq * (1 + 1e-12)


class TestNonlocalOperator:
    def test_zero(self):
        p = Profile(GRID, np.zeros(GRID.n))
        assert np.all(apply_nonlocal(p, 2.0, 50.0).values == 0.0)
        assert np.all(apply_nonlocal_green(p, 2.0, 50.0).values == 0.0)

    def test_constant_rule(self):
        p = Profile(GRID, np.ones(GRID.n))
        v = apply_nonlocal(p, 2.0, 50.0, left_value=1.0, right_value=1.0).values
        assert np.max(np.abs(v - 1.0 / 50.0)) <= 1e-8

    def test_oracle_agreement(self):
        rng = np.random.default_rng(2)
        for c, gamma in [(0.5, 1.0), (2.0, 50.0), (20.0, 50.0)]:
            p = random_bumps(FINE, rng)
            v1 = apply_nonlocal(p, c, gamma).values
            v2 = apply_nonlocal_green(p, c, gamma).values
            assert np.max(np.abs(v1 - v2)) <= 1e-8

    def test_green_hat_kernel_value(self):
        # a narrow unit-mass hat at 0 sees the kernel diagonal 1/(c sqrt(c^2+4g))
        g = WeightedGrid(-10.0, 10.0, 80001)
        z = g.nodes
        w = 0.01
        vals = np.clip(1.0 - np.abs(z) / w, 0.0, None) / w
        v = apply_nonlocal_green(Profile(g, vals), 1.0, 1.0).values
        expect = 1.0 / math.sqrt(5.0)
        assert v[g.index_of(0.0)] == pytest.approx(expect, rel=5e-3)

    def test_self_adjoint_and_positive(self):
        rng = np.random.default_rng(9)
        op = NonlocalOperator(GRID, 2.0, 50.0)
        w = GRID.weights * GRID.trap_weights
        for _ in range(20):
            a = random_bumps(GRID, rng).values
            b = random_bumps(GRID, rng).values
            lhs = float(np.sum(w * a * op.apply(b)))
            rhs = float(np.sum(w * b * op.apply(a)))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
            quad = float(np.sum(w * a * op.apply(a)))
            assert quad >= -1e-12

    def test_norm_bounds(self):
        rng = np.random.default_rng(13)
        for c in (0.5, 2.0, 20.0):
            for _ in range(10):
                p = random_bumps(GRID, rng)
                v = apply_nonlocal(p, c, 50.0)
                lu, _, _ = weighted_norms(p)
                lv, nv, _ = weighted_norms(v)
                assert lv <= 4.0 / c**2 * lu * (1 + 1e-9)
                assert math.sqrt(nv) <= 2.0 / c**2 * lu * (1 + 1e-9)

    def test_energy_identity(self):
        # integral e^z (c^2 v'^2 + gamma v^2) = integral e^z u v for interior u
        c, gamma = 2.0, 50.0
        g = GRID
        p = bump(g, 0.0, 1.0)
        op = NonlocalOperator(g, c, gamma)
        v = op.apply(p.values)
        w = g.weights * g.trap_weights
        dv = np.diff(v) / g.h
        lhs = float(np.sum(g.mid_weights * c**2 * dv * dv * g.h)) + float(np.sum(w * gamma * v * v))
        rhs = float(np.sum(w * p.values * v))
        assert abs(lhs - rhs) <= 1e-8 * abs(rhs)

    def test_monotone_bound(self):
        # C1 <= u <= C2 implies C1/gamma <= v <= C2/gamma for the far-field form
        rng = np.random.default_rng(17)
        c1, c2 = -0.3, 0.8
        z = GRID.nodes
        s = 0.5 * (1 + np.tanh(z / 3.0)) + 0.1 * np.sin(z) * np.exp(-0.01 * z**2)
        s = (s - s.min()) / (s.max() - s.min())
        u = c1 + (c2 - c1) * s
        v = apply_nonlocal(Profile(GRID, u), 2.0, 50.0,
                           left_value=u[0], right_value=u[-1]).values
        assert np.all(v >= c1 / 50.0 - 1e-8)
        assert np.all(v <= c2 / 50.0 + 1e-8)


class TestFunctional:
    CUB = CubicNonlinearity.canonical(0.45)

    def test_zero(self):
        p = Profile(GRID, np.zeros(GRID.n))
        assert evaluate_J(p, 2.0, 0.004, self.CUB, gamma=50.0) == 0.0

    def test_nonlocal_term_nonnegative(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            p = random_bumps(GRID, rng)
            _, nl, _ = evaluate_J_terms(p, 2.0, 0.004, self.CUB, 50.0)
            assert nl >= -1e-14

    def test_step_competitor_goes_negative_at_tiny_d(self):
        # The sharp interface competitor (plateau 1, exponential ramp of width
        # sqrt(d), then 0) makes the functional negative once d is small
        # enough that the derivative term d*c^2/(2(1-e^-a)) is beaten by the
        # potential well.  At beta=0.45, gamma=50 this requires d ~ 1e-9.
        beta, gamma, d = 0.45, 50.0, 1e-9
        cub = self.CUB
        c = math.sqrt(24.0 / (1.0 - 2 * beta))
        a = math.sqrt(d)
        g = WeightedGrid(-18.0, 2 * a, 6_000_001)
        z = g.nodes
        vals = np.where(z <= 0, 1.0,
                        np.where(z < a, (np.exp(-z) - math.exp(-a)) / (1 - math.exp(-a)), 0.0))
        p = Profile(g, vals)
        j = evaluate_J(p, c, d * c * c, cub, gamma=gamma)
        nj = normalized_J(p, c, d * c * c, cub, gamma=gamma)
        assert j < 0.0
        assert nj < 0.0
        # sign agreement between raw and translation-normalized values
        assert (j < 0) == (nj < 0)

    def test_normalized_equals_raw_at_constraint(self):
        rng = np.random.default_rng(27)
        p = random_bumps(GRID, rng)
        n = seminorm(p)
        scaled = p.with_values(p.values * math.sqrt(2.0 / n))
        j = evaluate_J(scaled, 2.0, 0.004, self.CUB, gamma=50.0)
        nj = normalized_J(scaled, 2.0, 0.004, self.CUB, gamma=50.0)
        assert nj == pytest.approx(j, rel=1e-12)

    def test_translation_invariance_of_normalized_value(self):
        # shifting the window (same values, weights e^{z-a}) multiplies J and
        # the constraint integral by the same factor
        rng = np.random.default_rng(29)
        vals = random_bumps(GRID, rng).values
        a = 1.7
        g2 = WeightedGrid(GRID.z_left - a, GRID.z_right - a + 1e-14, GRID.n)
        p1, p2 = Profile(GRID, vals), Profile(g2, vals)
        n1 = normalized_J(p1, 2.0, 0.004, self.CUB, gamma=50.0)
        n2 = normalized_J(p2, 2.0, 0.004, self.CUB, gamma=50.0)
        assert n2 == pytest.approx(n1, rel=1e-10)

    def test_degenerate_profile_raises(self):
        p = Profile(GRID, np.full(GRID.n, 0.0))
        with pytest.raises(ValueError):
            normalized_J(p, 2.0, 0.004, self.CUB, gamma=50.0)


class TestGradient:
    CUB = CubicNonlinearity.canonical(0.45)

    def test_zero_is_critical(self):
        p = Profile(GRID, np.zeros(GRID.n))
        g = gradient_J(p, 2.0, 0.004, self.CUB, gamma=50.0)
        assert np.max(np.abs(g.values)) == 0.0

    def test_finite_difference_agreement(self):
        rng = np.random.default_rng(31)
        g = WeightedGrid(-10.0, 10.0, 801)
        u = random_bumps(g, rng)
        direction = random_bumps(g, rng).values
        grad = gradient_J(u, 2.0, 0.004, self.CUB, gamma=50.0).values
        w = g.weights * g.trap_weights
        inner = float(np.sum(w * grad * direction))
        eps = 1e-6
        jp = evaluate_J(u.with_values(u.values + eps * direction), 2.0, 0.004, self.CUB, gamma=50.0)
        jm = evaluate_J(u.with_values(u.values - eps * direction), 2.0, 0.004, self.CUB, gamma=50.0)
        fd = (jp - jm) / (2 * eps)
        assert abs(fd - inner) <= 1e-6 * max(1.0, abs(fd))


class TestProjection:
    SPEC_F = AdmissibleSpec("front", -0.4, 1.01, mu3=0.6)
    SPEC_P = AdmissibleSpec("pulse", -0.4, 1.01)

    @staticmethod
    def _brute(vals, w, segments):
        """Exhaustive minimum over all crossing pairs of clamp segments."""
        n = len(vals)
        best, best_cost = None, np.inf
        for k1 in range(n + 1):
            for k2 in range(k1, n + 1):
                out = np.concatenate([
                    np.clip(vals[:k1], *segments[0]),
                    np.clip(vals[k1:k2], *segments[1]),
                    np.clip(vals[k2:], *segments[2]),
                ])
                cost = float(np.sum(w * (vals - out) ** 2))
                if cost < best_cost - 1e-18:
                    best, best_cost = out, cost
        return best

    def test_admissible_input_unchanged(self):
        g = WeightedGrid(-5.0, 5.0, 101)
        z = g.nodes
        vals = np.where(z < 0, 0.8, np.where(z < 2, 0.3, -0.2))
        out = project_admissible(Profile(g, vals), self.SPEC_F).values
        assert np.array_equal(out, vals)

    def test_all_positive_pulse(self):
        g = WeightedGrid(-5.0, 5.0, 101)
        vals = 0.5 + 0.3 * np.sin(g.nodes)
        out = project_admissible(Profile(g, vals), self.SPEC_P).values
        assert np.array_equal(out, np.clip(vals, 0.0, 1.01))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(37)
        g = WeightedGrid(-1.0, 1.0, 11)
        w = g.weights * g.trap_weights
        for _ in range(60):
            vals = rng.normal(scale=0.8, size=g.n)
            out_f = project_admissible(Profile(g, vals), self.SPEC_F).values
            ref_f = self._brute(vals, w, [(0.6, 1.01), (0.0, 0.6), (-0.4, 0.0)])
            assert np.allclose(out_f, ref_f, atol=0)
            out_p = project_admissible(Profile(g, vals), self.SPEC_P).values
            ref_p = self._brute(vals, w, [(-0.4, 0.0), (0.0, 1.01), (-0.4, 0.0)])
            assert np.allclose(out_p, ref_p, atol=0)

    def test_sine_small_grid(self):
        g = WeightedGrid(-1.0, 1.0, 11)
        vals = np.sin(g.nodes * 3.0)
        w = g.weights * g.trap_weights
        out = project_admissible(Profile(g, vals), self.SPEC_F).values
        ref = self._brute(vals, w, [(0.6, 1.01), (0.0, 0.6), (-0.4, 0.0)])
        assert np.allclose(out, ref, atol=0)

    def test_idempotent_and_nonexpansive(self):
        rng = np.random.default_rng(41)
        g = WeightedGrid(-5.0, 5.0, 201)
        w = g.weights * g.trap_weights
        for spec in (self.SPEC_F, self.SPEC_P):
            for _ in range(20):
                a = rng.normal(scale=0.7, size=g.n)
                b = rng.normal(scale=0.7, size=g.n)
                pa = project_admissible(Profile(g, a), spec).values
                pb = project_admissible(Profile(g, b), spec).values
                again = project_admissible(Profile(g, pa), spec).values
                assert np.array_equal(pa, again)
                dist_out = float(np.sum(w * (pa - pb) ** 2))
                dist_in = float(np.sum(w * (a - b) ** 2))
                assert dist_out <= dist_in * (1 + 1e-12)


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(43)
    z = GRID.nodes
    u = rng.normal(size=GRID.n)
    v = rng.normal(size=GRID.n)
    path = tmp_path / "profile.csv"
    save_profile_csv(path, z, u, v)
    header, cols = load_profile_csv(path)
    assert header == ["z", "u", "v"]
    assert np.array_equal(cols[0], z)
    assert np.array_equal(cols[1], u)
    assert np.array_equal(cols[2], v)
