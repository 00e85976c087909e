"""Closed-form parameter analysis for the FitzHugh-Nagumo traveling wave problem.

The reaction term is the cubic f(u) = u(u-beta)(1-u) with 0 < beta < 1/2,
coupled to a linear recovery variable through gamma > 0 and a diffusion
ratio d > 0.  Everything in this module is scalar arithmetic: equilibria,
energy levels of the constant states, regime classification, truncation
constants for the admissible boxes, and the linearization spectra that
supply decay exponents and boundary conditions to the solvers.

All root finding is bracketed bisection (brackets come from sign analysis,
never from a guess), so results are deterministic to ~1e-13.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "CubicNonlinearity",
    "DerivedConstants",
    "RegimeReport",
    "SpectralData",
    "FrontConstants",
    "RegimeError",
    "HypothesisError",
    "derive_constants",
    "classify_regime",
    "energy_level",
    "spectral_data",
    "reversed_transform",
    "front_constants",
    "solve_beta0",
]

_BISECT_TOL = 1e-13


class RegimeError(ValueError):
    """Parameters outside the regime where the requested quantity exists."""


class HypothesisError(ValueError):
    """A spectral hypothesis (discriminant / sign condition) fails."""


def bisect(func, lo, hi, tol=_BISECT_TOL, max_iter=200):
    """Bracketed bisection for func(lo)*func(hi) < 0, to absolute tol."""
    flo = func(lo)
    fhi = func(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise RegimeError(f"root bracketing failed on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = func(mid)
        if fmid == 0.0 or (hi - lo) < tol:
            return mid
        if flo * fmid < 0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless parameters (beta, gamma, d) of the two-component model."""

    beta: float
    gamma: float
    d: float

    def __post_init__(self):
        if not 0.0 < self.beta < 0.5:
            raise ValueError(f"beta must satisfy 0 < beta < 1/2, got {self.beta}")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.d <= 0.0:
            raise ValueError(f"d must be positive, got {self.d}")

    @property
    def cubic(self) -> "CubicNonlinearity":
        return CubicNonlinearity.canonical(self.beta)


@dataclass(frozen=True)
class CubicNonlinearity:
    """General cubic p(u) = a3 u^3 + a2 u^2 + a1 u + a0 and its potential.

    The potential is P(xi) = -integral_0^xi p, so for the canonical cubic
    p(u) = -u^3 + (1+beta) u^2 - beta u one gets
    P(xi) = xi^4/4 - (1+beta) xi^3/3 + beta xi^2/2 term by term.
    """

    a3: float
    a2: float
    a1: float
    a0: float

    @classmethod
    def canonical(cls, beta: float) -> "CubicNonlinearity":
        """u(u-beta)(1-u) = -u^3 + (1+beta)u^2 - beta u."""
        return cls(-1.0, 1.0 + beta, -beta, 0.0)

    def __call__(self, u):
        # Horner form; works on scalars and arrays.
        return ((self.a3 * u + self.a2) * u + self.a1) * u + self.a0

    def deriv(self, u):
        return (3.0 * self.a3 * u + 2.0 * self.a2) * u + self.a1

    def potential(self, xi):
        """P(xi) = -integral_0^xi p(eta) d eta."""
        return -(((self.a3 / 4.0 * xi + self.a2 / 3.0) * xi + self.a1 / 2.0) * xi
                 + self.a0) * xi

    def coefficients(self):
        return (self.a3, self.a2, self.a1, self.a0)

    def zeros(self):
        """Real zeros, ascending."""
        roots = np.roots([self.a3, self.a2, self.a1, self.a0])
        real = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
        return real

    def shifted_equilibria(self, gamma: float):
        """Real roots of p(u) - u/gamma, ascending (the constant states)."""
        roots = np.roots([self.a3, self.a2, self.a1 - 1.0 / gamma, self.a0])
        real = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
        return real


@dataclass(frozen=True)
class DerivedConstants:
    """Every closed-form scalar the pipeline needs, for one (beta, gamma)."""

    mu2: float
    mu3: float
    rho_hat: float
    gamma_tilde1: float
    gamma_star: float
    mu2_star: float
    mu3_star: float
    beta1: float
    beta_tilde2: float
    delta0: float
    beta0: float
    gamma_tilde2: float
    M_gamma: float
    theta1: float
    theta2: float
    M1: float
    beta2: float
    c_lower: float
    b0: float


@dataclass(frozen=True)
class FrontConstants:
    """Constants of the front pipeline for a general bistable cubic.

    ``top`` is the largest zero of the cubic (1 in the canonical case) and
    ``mid`` the middle one (beta canonically).  The same construction covers
    the reversed-front cubic produced by :func:`reversed_transform`.
    """

    cubic: CubicNonlinearity
    gamma: float
    mu2: float
    mu3: float
    mid: float
    top: float
    beta1: float
    beta_tilde2: float
    beta2: float
    theta1: float
    theta2: float
    M_gamma: float
    M1: float
    delta0: float
    c_lower: float
    b0: float
    tangent_ok: bool = True


def energy_level(mu: float, params: ModelParams) -> float:
    """Energy of the constant state (mu, mu/gamma): mu^2/(2 gamma) + F(mu)."""
    f = CubicNonlinearity.canonical(params.beta)
    return mu * mu / (2.0 * params.gamma) + f.potential(mu)


def solve_beta0() -> float:
    """Root of 2 b (1+b)/3 = (1-2b)^2 (2-b)/27 in (0, 1/2).

    Below this value of beta the tangent-line truncation fails arbitrarily
    close to the balanced coupling, so the subcritical construction needs
    beta above it.
    """
    def eq(b):
        return 2.0 * b * (1.0 + b) / 3.0 - (1.0 - 2.0 * b) ** 2 * (2.0 - b) / 27.0

    return bisect(eq, 1e-9, 0.5 - 1e-9)


def _truncation_margin(beta: float, gamma: float) -> float:
    """LHS - RHS of the tangent-line condition at the far negative box corner.

    Positive margin means f(mu3) - f'(mu3) (M_gamma + mu3) > 1/gamma.
    """
    f = CubicNonlinearity.canonical(beta)
    mu3 = _mu23(beta, gamma)[1]
    m_gamma = _solve_negative_level(f, 1.0 / gamma)
    return f(mu3) - f.deriv(mu3) * (m_gamma + mu3) - 1.0 / gamma


def _mu23(beta: float, gamma: float):
    """The nonzero equilibria: roots of mu^2 - (1+beta) mu + beta + 1/gamma."""
    disc = (1.0 + beta) ** 2 - 4.0 * (beta + 1.0 / gamma)
    if disc <= 0.0:
        raise RegimeError(
            f"no three equilibria: gamma={gamma} <= 4/(1-beta)^2="
            f"{4.0 / (1.0 - beta) ** 2}"
        )
    mu2 = 0.5 * ((1.0 + beta) - math.sqrt(disc))
    mu3 = 0.5 * ((1.0 + beta) + math.sqrt(disc))
    return mu2, mu3


def _solve_negative_level(cubic: CubicNonlinearity, level: float) -> float:
    """Unique M > 0 with cubic(-M) = level (level > 0).

    For a bistable cubic with negative leading coefficient, cubic(-M) is
    strictly increasing in M > 0, so doubling finds a bracket.
    """
    hi = 1.0
    while cubic(-hi) < level:
        hi *= 2.0
        if hi > 1e8:
            raise RegimeError("no negative-level crossing found")
    return bisect(lambda m: cubic(-m) - level, 0.0, hi)


def _tangent_gap_ok(cubic, mu3, lo, hi, n=10_000) -> bool:
    """Tangent line at mu3 stays above the cubic on [lo, hi] (grid check)."""
    xi = np.linspace(lo, hi, n)
    tangent = cubic(mu3) + cubic.deriv(mu3) * (xi - mu3)
    return bool(np.all(tangent - cubic(xi) >= -1e-14))


def front_constants(cubic: CubicNonlinearity, gamma: float,
                    require_tangent: bool = False) -> FrontConstants:
    """Derive the box bounds and scales of the front problem for any cubic.

    Requires a bistable cubic with zeros 0 < mid < top, negative leading
    coefficient, top > 2*mid (so the potential well at ``top`` is the deep
    one) and three constant states for the given gamma.
    """
    zeros = cubic.zeros()
    if len(zeros) != 3:
        raise RegimeError("cubic must have three real zeros")
    z0, mid, top = zeros
    if abs(z0) > 1e-10 or not (0.0 < mid < top) or cubic.a3 >= 0:
        raise RegimeError("cubic must have zeros 0 < mid < top with a3 < 0")
    if top <= 2.0 * mid:
        raise RegimeError("potential is not biased toward the far zero (top <= 2*mid)")

    eq = cubic.shifted_equilibria(gamma)
    if len(eq) != 3:
        raise RegimeError("fewer than three constant states at this gamma")
    mu2, mu3 = eq[1], eq[2]

    F = cubic.potential
    if not F(top) < 0.0:
        raise RegimeError("potential at the far zero is not negative")
    beta1 = bisect(F, mid, top)
    # F increases for xi > top; bracket the second zero by doubling.
    hi = top * 1.0001
    while F(hi) < 0.0:
        hi *= 1.5
    beta_tilde2 = bisect(F, top, hi)

    delta0 = (top - 2.0 * mid) ** 2 / 2.0
    c_lower = math.sqrt(2.0 / (-F(top)))
    b0 = -2.0 * math.log(mid / math.sqrt(2.0))

    theta1 = min(0.01 * top, (min(beta_tilde2, top + mid / 2.0) - top) / 2.0)
    tangent_ok = False
    for _ in range(60):
        beta2 = top + theta1
        m_gamma = _solve_negative_level(cubic, top / gamma)
        theta2 = _solve_negative_level(cubic, beta2 / gamma) - m_gamma
        m1 = m_gamma + theta2
        if _tangent_gap_ok(cubic, mu3, -m1, beta2):
            tangent_ok = True
            break
        theta1 *= 0.5
    if not tangent_ok and require_tangent:
        raise RegimeError(
            "tangent-line truncation fails for every tested theta1 "
            "(gamma below the admissible coupling range)"
        )

    return FrontConstants(
        cubic=cubic, gamma=gamma, mu2=mu2, mu3=mu3, mid=mid, top=top,
        beta1=beta1, beta_tilde2=beta_tilde2, beta2=beta2, theta1=theta1,
        theta2=theta2, M_gamma=m_gamma, M1=m1, delta0=delta0,
        c_lower=c_lower, b0=b0, tangent_ok=tangent_ok,
    )


def derive_constants(params: ModelParams) -> DerivedConstants:
    """All scalar constants for the canonical cubic at (beta, gamma)."""
    beta, gamma = params.beta, params.gamma
    mu2, mu3 = _mu23(beta, gamma)

    rho_hat = (1.0 + beta + math.sqrt(beta * beta - beta + 1.0)) / 3.0
    f = CubicNonlinearity.canonical(beta)
    gamma_tilde1 = rho_hat / f(rho_hat)
    gamma_star = 9.0 / ((1.0 - 2.0 * beta) * (2.0 - beta))
    mu3_star = 2.0 * (1.0 + beta) / 3.0
    mu2_star = mu3_star / 2.0
    delta0 = (1.0 - 2.0 * beta) ** 2 / 2.0
    beta0 = solve_beta0()

    fc = front_constants(f, gamma)

    # Smallest gamma in (gamma_tilde1, gamma_star) from which the truncation
    # condition holds. The margin is sampled first; if it changes sign more
    # than once, the smallest passing gamma on the sample grid is reported.
    gamma_tilde2 = math.nan
    if beta > beta0:
        lo = gamma_tilde1 * (1.0 + 1e-9)
        hi = gamma_star * (1.0 - 1e-12)
        samples = np.linspace(lo, hi, 1000)
        margins = np.array([_truncation_margin(beta, g) for g in samples])
        ok = margins > 0.0
        if ok.all():
            gamma_tilde2 = lo
        elif ok.any():
            flips = np.count_nonzero(ok[1:] != ok[:-1])
            first_pass = int(np.argmax(ok))
            if flips > 1:
                # Non-monotone margin: report the smallest passing sample.
                gamma_tilde2 = float(samples[first_pass])
            else:
                gamma_tilde2 = bisect(
                    lambda g: _truncation_margin(beta, g),
                    float(samples[first_pass - 1]), float(samples[first_pass]),
                    tol=1e-8,
                )

    return DerivedConstants(
        mu2=mu2, mu3=mu3, rho_hat=rho_hat, gamma_tilde1=gamma_tilde1,
        gamma_star=gamma_star, mu2_star=mu2_star, mu3_star=mu3_star,
        beta1=fc.beta1, beta_tilde2=fc.beta_tilde2, delta0=delta0,
        beta0=beta0, gamma_tilde2=gamma_tilde2, M_gamma=fc.M_gamma,
        theta1=fc.theta1, theta2=fc.theta2, M1=fc.M1, beta2=fc.beta2,
        c_lower=math.sqrt(24.0 / (1.0 - 2.0 * beta)), b0=fc.b0,
    )


@dataclass(frozen=True)
class RegimeReport:
    n1_holds: bool
    n2_holds: bool
    regime: str            # "subcritical" | "critical" | "supercritical" | "outside"
    h1_holds: bool
    h2_holds: bool
    truncation_holds: bool
    energy_levels: tuple   # (L(mu2), L(0), L(mu3))
    energy_order: str      # "mu2>mu3>zero" | "mu2>zero>mu3" | "degenerate"


def classify_regime(params: ModelParams,
                    constants: DerivedConstants | None = None) -> RegimeReport:
    """Evaluate the nullcline facts, both spectral hypotheses and the regime."""
    beta, gamma, d = params.beta, params.gamma, params.d
    n1 = gamma > 4.0 / (1.0 - beta) ** 2
    if not n1:
        return RegimeReport(
            n1_holds=False, n2_holds=False, regime="outside",
            h1_holds=False,
            h2_holds=(beta - d * gamma) ** 2 - 4.0 * d > 0 and beta > d * gamma,
            truncation_holds=False,
            energy_levels=(math.nan, 0.0, math.nan),
            energy_order="degenerate",
        )
    if constants is None:
        constants = derive_constants(params)
    n2 = gamma > constants.gamma_tilde1

    f = CubicNonlinearity.canonical(beta)
    slope3 = -f.deriv(constants.mu3)
    h1 = (slope3 - d * gamma) ** 2 - 4.0 * d > 0 and slope3 > d * gamma
    h2 = (beta - d * gamma) ** 2 - 4.0 * d > 0 and beta > d * gamma
    trunc = _truncation_margin(beta, gamma) > 0

    # Cross implications between the two hypotheses, split at the balanced
    # coupling where the two linearization slopes coincide.
    rel = gamma / constants.gamma_star
    if constants.gamma_tilde1 < gamma <= constants.gamma_star and h1 and not h2:
        raise RuntimeError("internal inconsistency: H1 without H2 below gamma_star")
    if gamma >= constants.gamma_star and h2 and not h1:
        raise RuntimeError("internal inconsistency: H2 without H1 above gamma_star")

    levels = (
        energy_level(constants.mu2, params),
        0.0,
        energy_level(constants.mu3, params),
    )
    if abs(rel - 1.0) <= 1e-12:
        regime = "critical"
        order = "degenerate"
    elif gamma > constants.gamma_star:
        regime = "supercritical"
        order = "mu2>zero>mu3" if levels[0] > 0.0 > levels[2] else "degenerate"
    elif n2 and not math.isnan(constants.gamma_tilde2) and gamma > constants.gamma_tilde2:
        regime = "subcritical"
        order = "mu2>mu3>zero" if levels[0] > levels[2] > 0.0 else "degenerate"
    else:
        regime = "outside"
        order = "mu2>mu3>zero" if levels[0] > levels[2] > 0.0 else "degenerate"

    return RegimeReport(
        n1_holds=n1, n2_holds=n2, regime=regime, h1_holds=h1, h2_holds=h2,
        truncation_holds=trunc, energy_levels=levels, energy_order=order,
    )


@dataclass(frozen=True)
class SpectralData:
    """Linearization data at a constant state, for a given wave speed c.

    lambda1 < lambda2 solve d*l^2 - (slope + d*gamma) l + 1 + gamma*slope = 0.
    The spatial exponents s solve c^2 s^2 + c^2 s = lambda_i (s2, s3 from
    lambda1; s1, s4 from lambda2) and r1 < -1 < 0 < r2 are the kernel
    exponents of the recovery operator, solving c^2 r^2 + c^2 r = gamma.
    """

    equilibrium: str
    slope: float
    lambda1: float
    lambda2: float
    eta1: float
    eta2: float
    s1: float
    s2: float
    s3: float
    s4: float
    r1: float
    r2: float


def _lambda_pair(slope: float, gamma: float, d: float):
    disc = (slope - d * gamma) ** 2 - 4.0 * d
    if disc <= 0.0 or slope <= d * gamma:
        raise HypothesisError(
            f"linearization hypothesis fails: need (slope - d*gamma)^2 - 4d > 0 "
            f"and slope > d*gamma; got slope={slope}, d*gamma={d * gamma}, "
            f"discriminant={disc}"
        )
    tr = slope + d * gamma
    lam1 = (tr - math.sqrt(disc)) / (2.0 * d)
    lam2 = (tr + math.sqrt(disc)) / (2.0 * d)
    return lam1, lam2


def _s_pair(lam: float, c: float):
    """Roots of c^2 s^2 + c^2 s - lam = 0, (negative, positive)."""
    root = math.sqrt(1.0 + 4.0 * lam / (c * c))
    return (-1.0 - root) / 2.0, (-1.0 + root) / 2.0


def kernel_exponents(c: float, gamma: float):
    """r = (-c +- sqrt(c^2 + 4 gamma)) / (2c), ordered r1 < -1 < 0 < r2."""
    root = math.sqrt(c * c + 4.0 * gamma)
    return (-c - root) / (2.0 * c), (-c + root) / (2.0 * c)


def spectral_data(params: ModelParams, c: float, equilibrium: str = "origin",
                  cubic: CubicNonlinearity | None = None) -> SpectralData:
    """Eigenvalues, left-eigenvector slopes and decay exponents at a state.

    ``equilibrium`` is "origin" (slope beta) or "mu3" (slope -f'(mu3)).
    Passing a non-canonical ``cubic`` evaluates the same formulas for that
    cubic's origin / largest equilibrium.
    """
    if c <= 0.0:
        raise ValueError("spatial exponents require c > 0")
    f = cubic if cubic is not None else CubicNonlinearity.canonical(params.beta)
    if equilibrium == "origin":
        slope = -f.deriv(0.0)
    elif equilibrium == "mu3":
        mu3 = f.shifted_equilibria(params.gamma)[-1]
        slope = -f.deriv(mu3)
    else:
        raise ValueError(f"unknown equilibrium {equilibrium!r}")

    lam1, lam2 = _lambda_pair(slope, params.gamma, params.d)
    eta1 = slope / params.d - lam1
    eta2 = slope / params.d - lam2
    s2, s3 = _s_pair(lam1, c)
    s1, s4 = _s_pair(lam2, c)
    r1, r2 = kernel_exponents(c, params.gamma)
    return SpectralData(
        equilibrium=equilibrium, slope=slope, lambda1=lam1, lambda2=lam2,
        eta1=eta1, eta2=eta2, s1=s1, s2=s2, s3=s3, s4=s4, r1=r1, r2=r2,
    )


def reversed_transform(params: ModelParams) -> CubicNonlinearity:
    """Cubic of the reflected system under U = mu3 - u, V = mu3/gamma - v.

    Returns ft with ft(U) = f(mu3) - f(mu3 - U).  The constant states of the
    reflected system are {0, mu3 - mu2, mu3}; applying the same reflection to
    ft about its own largest equilibrium recovers f exactly.
    """
    f = CubicNonlinearity.canonical(params.beta)
    _, mu3 = _mu23(params.beta, params.gamma)
    return reflect_cubic(f, mu3)


def reflect_cubic(cubic: CubicNonlinearity, pivot: float) -> CubicNonlinearity:
    """p~(U) = p(pivot) - p(pivot - U), expanded in coefficients."""
    a3, a2, a1, a0 = cubic.coefficients()
    p = np.polynomial.Polynomial((a0, a1, a2, a3))
    # p(pivot - U) as a polynomial in U
    comp = p(np.polynomial.Polynomial((pivot, -1.0)))
    out = -comp
    out.coef[0] += cubic(pivot)
    c = np.zeros(4)
    c[: len(out.coef)] = out.coef
    return CubicNonlinearity(a3=c[3], a2=c[2], a1=c[1], a0=c[0])
