"""Scalar auxiliary problems: damped bistable connections on the half line.

The traveling wave machinery repeatedly needs solutions of

    delta w'' + delta w' + p(w) - level = 0

on (-inf, 0] that leave a saddle equilibrium at -inf and reach a prescribed
boundary value at 0.  Such solutions are unstable-manifold orbits of the
saddle and are computed here by shooting; the weighted half-line functionals
they minimize are evaluated for independent cross-checks.

At the critical effective diffusion delta0 = (top - 2 mid)^2 / 2 the full
connection from ``top`` to 0 has the closed tanh form, which serves as the
exact oracle for the shooting machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .model import CubicNonlinearity
from .weighted_space import Profile, WeightedGrid, _xsum

__all__ = [
    "ScalarWaveProblem",
    "Heteroclinic",
    "NoConnectionError",
    "analytic_front",
    "tanh_front",
    "shoot_heteroclinic",
    "intersections",
    "evaluate_half_line_functional",
    "mechanical_energy",
    "reflection_competitor",
    "scalar_residual",
]


class NoConnectionError(RuntimeError):
    """Shooting could not establish the requested connection."""


@dataclass(frozen=True)
class ScalarWaveProblem:
    """One damped scalar problem delta w'' + delta w' + p(w) - level = 0.

    ``target_equilibrium`` is the equilibrium approached as x -> -inf (it
    must be a saddle of the shifted cubic); ``boundary_value`` is the value
    pinned at x = 0.  ``level`` is the constant subtracted from the cubic:
    0 for the plain bistable problem, p(nu) for the half-line problems whose
    competitors sit at a horizontal cut through the cubic.
    """

    delta: float
    level: float
    nonlinearity: CubicNonlinearity
    boundary_value: float
    target_equilibrium: float

    def __post_init__(self):
        # level must be realized on the shifted cubic at the equilibrium
        if abs(self.nonlinearity(self.target_equilibrium) - self.level) > 1e-9:
            raise ValueError("target_equilibrium is not a zero of p - level")


@dataclass(frozen=True)
class Heteroclinic:
    """A computed connection: samples, endpoints and shooting diagnostics."""

    profile: Profile
    source: float
    target: float
    shoot_parameter: float
    residual: float


def tanh_front(cubic: CubicNonlinearity):
    """Closed-form connection top -> 0 at the critical effective diffusion.

    For a bistable cubic with zeros 0 < mid < top the problem
    delta0 w'' + delta0 w' + p(w) = 0 with delta0 = (top-2*mid)^2/2 has the
    exact solution

        H(x) = (top/2) (1 - tanh(k (x - a_star))),  k = top / (2 (top-2*mid)),

    pinned so that H(0) is the nontrivial zero of the potential.  Returns
    (a_star, H, delta0).
    """
    zeros = cubic.zeros()
    if len(zeros) != 3:
        raise ValueError("cubic must have three real zeros")
    _, mid, top = zeros
    if top <= 2.0 * mid:
        raise ValueError("potential not biased toward the far zero")
    delta0 = (top - 2.0 * mid) ** 2 / 2.0
    k = top / (2.0 * (top - 2.0 * mid))
    # H(0) = beta1, the zero of the potential between mid and top
    from .model import bisect
    beta1 = bisect(cubic.potential, mid, top)
    a_star = -math.atanh(1.0 - 2.0 * beta1 / top) / k

    def evaluator(x):
        return 0.5 * top * (1.0 - np.tanh(k * (np.asarray(x, dtype=float) - a_star)))

    return a_star, evaluator, delta0


def analytic_front(beta: float):
    """(a_star, evaluator) of the explicit tanh connection 1 -> 0.

    a_star = -2 (1-2 beta) atanh(1 - 2 beta1) and
    H(x) = 1/2 - 1/2 tanh((x - a_star) / (2 (1-2 beta))), so H(0) = beta1.
    """
    a_star, evaluator, _ = tanh_front(CubicNonlinearity.canonical(beta))
    return a_star, evaluator


def _unstable_eigenvalue(delta: float, slope: float) -> float:
    """Positive root of delta L^2 + delta L + slope = 0 (slope < 0 at a saddle)."""
    disc = 1.0 - 4.0 * slope / delta
    if disc <= 1.0:
        raise NoConnectionError(
            f"equilibrium is not a saddle: p'(source) = {slope} >= 0")
    return 0.5 * (-1.0 + math.sqrt(disc))


def shoot_heteroclinic(problem: ScalarWaveProblem, window_left: float = -25.0,
                       h: float = 1e-3, eps_list=(1e-8, 1e-7, 1e-6, 1e-5, 1e-4),
                       rtol: float = 1e-12, atol: float = 1e-14) -> Heteroclinic:
    """Follow the saddle's unstable manifold until it crosses boundary_value.

    Integrates from source + eps * (unstable eigenvector) and stops at the
    first crossing of the boundary value; the crossing is translated to
    x = 0 and the pre-integration tail is filled with the exact linear mode
    source + eps e^{lam x}.  The epsilon offset is scanned for robustness;
    failures report whether the trajectory fell short of the boundary value
    (undershoot) or ran out of the integration span (overshoot).
    """
    p = problem.nonlinearity
    delta, level = problem.delta, problem.level
    source, bval = problem.target_equilibrium, problem.boundary_value
    lam = _unstable_eigenvalue(delta, p.deriv(source))
    direction = 1.0 if bval > source else -1.0

    def rhs(x, y):
        return [y[1], -y[1] - (p(y[0]) - level) / delta]

    def crossing(x, y):
        return y[0] - bval
    crossing.terminal = True
    crossing.direction = direction

    failure = "undershoot"
    for eps in eps_list:
        y0 = [source + direction * eps, direction * eps * lam]
        t_max = (math.log(4.0 * (abs(bval - source) + 1.0) / eps) / lam + 50.0)
        sol = solve_ivp(rhs, (0.0, t_max), y0, events=crossing, method="DOP853",
                        rtol=rtol, atol=atol, dense_output=True, max_step=0.5)
        if sol.t_events[0].size:
            t_star = float(sol.t_events[0][0])
            return _sample_connection(problem, sol, t_star, eps, lam,
                                      direction, window_left, h)
        reach = np.max(direction * (sol.y[0] - source))
        failure = "undershoot" if reach < direction * (bval - source) else "overshoot"
    raise NoConnectionError(
        f"no crossing of {bval} from source {source} for any epsilon offset "
        f"({failure}: trajectory {'turned back' if failure == 'undershoot' else 'left the span'})"
    )


def _sample_connection(problem, sol, t_star, eps, lam, direction, window_left, h):
    n = int(round(-window_left / h)) + 1
    grid = WeightedGrid(window_left, 0.0, n)
    x = grid.nodes
    t = x + t_star                       # integration time of each sample
    vals = np.empty(grid.n)
    inside = t >= 0.0
    if inside.any():
        vals[inside] = sol.sol(t[inside])[0]
    # before the integration start the orbit is the pure linear mode
    vals[~inside] = problem.target_equilibrium + direction * eps * np.exp(lam * t[~inside])
    prof = Profile(grid, vals)
    resid = scalar_residual(prof, problem.delta, problem.level, problem.nonlinearity)
    return Heteroclinic(profile=prof, source=problem.target_equilibrium,
                        target=problem.boundary_value, shoot_parameter=eps,
                        residual=resid)


def scalar_residual(w: Profile, delta: float, level: float,
                    nonlinearity: CubicNonlinearity) -> float:
    """Sup-norm of delta(w'' + w') + p(w) - level by 4th-order differences.

    Fourth order is needed for the oracle checks: the tanh connection varies
    on the sqrt(delta) scale, so 2nd-order stencils cannot reach 1e-8 at
    practical resolutions.
    """
    u = w.values
    h = w.grid.h
    d1 = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
    d2 = (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1] - u[4:]) / (12 * h * h)
    res = delta * (d2 + d1) + nonlinearity(u[2:-2]) - level
    return float(np.max(np.abs(res)))


class Intersections(NamedTuple):
    rho1: float
    rho2: float
    rho3: float


def intersections(nu: float, nonlinearity: CubicNonlinearity) -> Intersections:
    """The three solutions of p(xi) = p(nu), ascending.

    Raises if the horizontal line misses a branch (fewer than three real
    roots); a tangency at the local maximum shows up as rho2 == rho3 merging
    toward the critical point and is reported in the error message.
    """
    a3, a2, a1, a0 = nonlinearity.coefficients()
    roots = np.roots([a3, a2, a1, a0 - nonlinearity(nu)])
    real = np.sort(roots[np.abs(roots.imag) < 1e-7].real)
    if len(real) < 3:
        raise ValueError(
            f"the level p({nu}) intersects the cubic at {len(real)} points; "
            "nu is outside the three-branch window (tangency or beyond)")
    return Intersections(float(real[0]), float(real[1]), float(real[2]))


def evaluate_half_line_functional(w: Profile, kind: str, delta: float,
                                  nu: float | None,
                                  nonlinearity: CubicNonlinearity) -> float:
    """Weighted integral of the stated scalar energy density over the window.

    kind "I_star":  e^x { delta/2 w'^2 + F(w) }           (full or half line)
    kind "I_delta": the same with the supplied effective diffusion
    kind "K_nu":    e^x { delta/2 w'^2 + F(w) + p(nu) w }  on (-inf, 0]
    """
    if kind not in ("I_star", "I_delta", "K_nu"):
        raise ValueError(f"unknown functional kind {kind!r}")
    g = w.grid
    u = w.values
    du = np.diff(u) / g.h
    grad = _xsum(g.mid_weights * (0.5 * delta) * du * du * g.h)
    dens = nonlinearity.potential(u)
    if kind == "K_nu":
        if nu is None:
            raise ValueError("K_nu needs the cut level nu")
        dens = dens + nonlinearity(nu) * u
    return grad + _xsum(g.weights * dens * g.trap_weights)


def mechanical_energy(w: Profile, delta: float, level: float,
                      nonlinearity: CubicNonlinearity) -> np.ndarray:
    """Q = delta/2 w'^2 - F(w) - level w, which dissipates at rate delta w'^2.

    Computed at cell midpoints (derivative by forward difference, value by
    cell average) so that successive differences approximate dQ/dx cleanly.
    """
    u = w.values
    h = w.grid.h
    du = np.diff(u) / h
    umid = 0.5 * (u[:-1] + u[1:])
    return (0.5 * delta * du * du - nonlinearity.potential(umid) - level * umid)


def reflection_competitor(w: Profile, mu3: float, top: float = 1.0) -> Profile:
    """Fold a half-line trial about mu3, capping at the far zero.

    Used as a regression check: if a trial solution pinned at mu3 wrongly
    relaxes to 0 instead of the far zero, its folded version
    (2 mu3 - w where 2 mu3 - top <= w <= mu3, top where w < 2 mu3 - top)
    has strictly smaller half-line energy.
    """
    u = w.values
    out = np.where(u > mu3, u,
                   np.where(u >= 2.0 * mu3 - top, 2.0 * mu3 - u, top))
    return w.with_values(out)
