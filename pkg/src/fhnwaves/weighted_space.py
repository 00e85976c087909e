"""Discretization of the exponentially weighted space on a finite window.

Functions live on a uniform grid in the moving-frame coordinate z with
weight e^z.  This module provides the weighted norms, two independent
realizations of the recovery operator v = L_c u (a symmetric tridiagonal
solve and an exact piecewise-linear convolution against the exponential
kernel), the energy functional

    J_c(w) = integral e^z { kappa/2 w'^2 + 1/2 w L_c w + F(w) } dz,

its exact discrete gradient, and the weighted-L2 projection onto the
sign-class admissible sets used by the wave solvers.

Quadrature conventions, used consistently so that gradients are the exact
derivatives of the discrete functional:

* derivative terms use per-cell midpoint weights e^{(z_i + z_{i+1})/2} with
  forward differences;
* pointwise terms use the trapezoid rule with node weights e^{z_i};
* accumulation is in extended precision because the weights span many
  orders of magnitude.

All functions are pure; grids and profiles are immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .model import CubicNonlinearity, kernel_exponents

__all__ = [
    "WeightedGrid",
    "Profile",
    "AdmissibleSpec",
    "NonlocalOperator",
    "weighted_norms",
    "apply_nonlocal",
    "apply_nonlocal_green",
    "evaluate_J",
    "evaluate_J_terms",
    "gradient_J",
    "gradient_N",
    "project_admissible",
    "normalized_J",
    "save_profile_csv",
    "load_profile_csv",
]


def _xsum(values) -> float:
    """Sum in extended precision (weights span ~e^60)."""
    return float(np.sum(values, dtype=np.longdouble))


@dataclass(frozen=True)
class WeightedGrid:
    """Uniform grid on [z_left, z_right] with weight e^z."""

    z_left: float
    z_right: float
    n: int

    def __post_init__(self):
        # z_right == 0 is allowed for half-line profiles ending at the origin.
        if not self.z_left < 0.0 <= self.z_right:
            raise ValueError("window must satisfy z_left < 0 <= z_right")
        if self.n < 3:
            raise ValueError("need at least 3 nodes")

    @property
    def h(self) -> float:
        return (self.z_right - self.z_left) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.z_left, self.z_right, self.n)

    @property
    def log_weights(self) -> np.ndarray:
        return self.nodes

    @property
    def weights(self) -> np.ndarray:
        """e^{z_i}, strictly positive and increasing."""
        return np.exp(self.nodes)

    @property
    def mid_weights(self) -> np.ndarray:
        """e^{(z_i + z_{i+1})/2} for the n-1 cells."""
        z = self.nodes
        return np.exp(0.5 * (z[:-1] + z[1:]))

    @property
    def trap_weights(self) -> np.ndarray:
        """Trapezoid node factors: h at interior nodes, h/2 at the ends."""
        w = np.full(self.n, self.h)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def index_of(self, z: float) -> int:
        i = int(round((z - self.z_left) / self.h))
        if not 0 <= i < self.n or abs(self.nodes[i] - z) > 1e-9 * max(1.0, abs(z)):
            raise ValueError(f"z={z} is not a grid node")
        return i


@dataclass(frozen=True)
class Profile:
    """A real function sampled on a weighted grid."""

    grid: WeightedGrid
    values: np.ndarray
    frame: str = "moving_z"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.grid.n,):
            raise ValueError("values length must equal grid size")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile values must be finite")

    def with_values(self, values) -> "Profile":
        return replace(self, values=np.asarray(values, dtype=float))


@dataclass(frozen=True)
class AdmissibleSpec:
    """Box bounds and sign-change pattern of an admissible class.

    kind "front":  nonnegative then nonpositive, with the crossing through
    mu3 occurring no later than the crossing through 0; box [lower, upper]
    with the segment bounds [mu3, upper] / [0, mu3] / [lower, 0].
    kind "pulse":  nonpositive / nonnegative / nonpositive.
    kind "single_sign_change":  nonnegative then nonpositive, no mu3 split.
    """

    kind: str
    lower: float
    upper: float
    mu3: float | None = None

    def __post_init__(self):
        if self.kind not in ("front", "pulse", "single_sign_change"):
            raise ValueError(f"unknown admissible kind {self.kind!r}")
        if self.kind == "front":
            if self.mu3 is None or not self.lower < 0.0 < self.mu3 < self.upper:
                raise ValueError("front class needs lower < 0 < mu3 < upper")
        else:
            if not self.lower < 0.0 < self.upper:
                raise ValueError("need lower < 0 < upper")


def weighted_norms(w: Profile):
    """(l2ex, seminorm_n, h1ex): weighted L2 norm, derivative energy, full norm.

    seminorm_n is the constraint integral integral e^z w_z^2 dz itself (not
    its square root), so h1ex^2 = l2ex^2 + seminorm_n.
    """
    if w.frame != "moving_z":
        raise ValueError("weighted norms are defined in the moving frame")
    g = w.grid
    u = w.values
    l2sq = _xsum(g.weights * u * u * g.trap_weights)
    du = np.diff(u) / g.h
    nsq = _xsum(g.mid_weights * du * du * g.h)
    return math.sqrt(l2sq), nsq, math.sqrt(l2sq + nsq)


def seminorm(w: Profile) -> float:
    """The derivative energy integral e^z w_z^2 dz alone."""
    g = w.grid
    du = np.diff(w.values) / g.h
    return _xsum(g.mid_weights * du * du * g.h)


class NonlocalOperator:
    """Symmetric tridiagonal realization of v = L_c u on the window.

    The operator solves c^2 v'' + c^2 v' + u - gamma v = 0 discretized in
    conservation form from the weighted quadratic form, so the discrete
    solution map is self-adjoint in the weighted inner product.  The
    boundary rows carry the exact tail energies of the decaying kernel
    modes e^{r2 z} (left) and e^{r1 z} (right); far-field values of u may
    be supplied so that v approaches far_field/gamma instead of 0.

    The factorization is cached, so one instance can apply the operator to
    many right-hand sides at the same (grid, c, gamma).
    """

    def __init__(self, grid: WeightedGrid, c: float, gamma: float):
        if c <= 0.0:
            raise ValueError("nonlocal operator requires c > 0")
        self.grid = grid
        self.c = c
        self.gamma = gamma
        self.r1, self.r2 = kernel_exponents(c, gamma)

        n = grid.n
        h = grid.h
        wmid = grid.mid_weights
        wnode = grid.weights
        tw = grid.trap_weights
        c2 = c * c

        # rho_* are the boundary stiffnesses of the half-infinite tails:
        # integrating e^z (c^2 v'^2 + gamma v^2)/2 over the tail with the
        # decaying kernel mode gives rho/2 * (v_end - far_field/gamma)^2.
        self.rho_left = wnode[0] * (c2 * self.r2 ** 2 + gamma) / (1.0 + 2.0 * self.r2)
        self.rho_right = wnode[-1] * (c2 * self.r1 ** 2 + gamma) / (-(1.0 + 2.0 * self.r1))

        off = -c2 * wmid / h
        diag = gamma * wnode * tw
        diag[:-1] += c2 * wmid / h
        diag[1:] += c2 * wmid / h
        diag[0] += self.rho_left
        diag[-1] += self.rho_right

        ab = np.zeros((3, n))
        ab[0, 1:] = off
        ab[1, :] = diag
        ab[2, :-1] = off
        self._ab = ab
        self._mass = wnode * tw

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return solve_banded((1, 1), self._ab, rhs)

    def apply(self, u_values: np.ndarray, left_value: float = 0.0,
              right_value: float = 0.0) -> np.ndarray:
        rhs = self._mass * u_values
        if left_value != 0.0:
            rhs = rhs.copy()
            rhs[0] += self.rho_left * left_value / self.gamma
        if right_value != 0.0:
            if left_value == 0.0:
                rhs = rhs.copy()
            rhs[-1] += self.rho_right * right_value / self.gamma
        return self.solve(rhs)

    def boundary_response(self, left_value: float, right_value: float = 0.0) -> np.ndarray:
        """Solution component driven by the far-field forcing alone."""
        rhs = np.zeros(self.grid.n)
        rhs[0] = self.rho_left * left_value / self.gamma
        rhs[-1] = self.rho_right * right_value / self.gamma
        return self.solve(rhs)


def apply_nonlocal(u: Profile, c: float, gamma: float, left_value: float = 0.0,
                   right_value: float = 0.0) -> Profile:
    """v = L_c u by the tridiagonal solve with exact decay boundary rows."""
    op = NonlocalOperator(u.grid, c, gamma)
    return u.with_values(op.apply(u.values, left_value, right_value))


def apply_nonlocal_green(u: Profile, c: float, gamma: float,
                         left_value: float = 0.0,
                         right_value: float = 0.0) -> Profile:
    """v = L_c u by the explicit exponential kernel; the independent oracle.

    u is treated as piecewise linear on the window and extended by the
    constants left_value / right_value outside (zero by default); the two
    one-sided convolutions are accumulated by exact per-cell integrals of
    (linear) * e^{-r s}.  Rescaled running integrals keep every factor
    bounded, so arbitrary windows and speeds are safe.
    """
    from scipy.signal import lfilter

    g = u.grid
    r1, r2 = kernel_exponents(c, gamma)
    norm = c * math.sqrt(c * c + 4.0 * gamma)
    h = g.h
    vals = u.values
    n = g.n

    # A_i = integral_{-inf}^{z_i} e^{-r1 (s - z_i)} u(s) ds.  The recursion
    # A_{i+1} = e^{r1 h} A_i + (cell integral) is a stable first-order filter
    # since r1 < 0; rescaling per step keeps all factors bounded.
    e1 = math.exp(r1 * h)
    i1a, i1b = _cell_kernel(-r1, h)  # weights of u_i, u_{i+1} for -r1
    fa = np.zeros(n)
    fa[1:] = i1a * vals[:-1] + i1b * vals[1:]
    a = lfilter([1.0], [1.0, -e1], fa)
    a += left_value / (-r1) * np.exp(r1 * (g.nodes - g.nodes[0]))

    # B_i = integral_{z_i}^{inf} e^{-r2 (s - z_i)} u(s) ds, backward.
    e2 = math.exp(-r2 * h)
    i2b, i2a = _cell_kernel(r2, h)   # weights of u_{i+1}, u_i (mirrored cell)
    fb = np.zeros(n)
    fb[:-1] = i2a * vals[:-1] + i2b * vals[1:]
    b = lfilter([1.0], [1.0, -e2], fb[::-1])[::-1]
    b += right_value / r2 * np.exp(r2 * (g.nodes - g.nodes[-1]))

    return u.with_values((a + b) / norm)


def _cell_kernel(q: float, h: float):
    """Exact integrals over one cell of the two linear hat pieces vs e^{q(t-h)}.

    Returns (w0, w1) with
        w0 = integral_0^h (1 - t/h) e^{q (t - h)} dt,
        w1 = integral_0^h (t/h) e^{q (t - h)} dt,
    evaluated stably for small and large q h via expm1.
    """
    x = q * h
    if abs(x) < 1e-8:
        # series to O(x^2)
        w0 = h * (0.5 - x / 3.0 + x * x / 8.0)
        w1 = h * (0.5 - x / 6.0 + x * x / 24.0)
        return w0, w1
    em = math.exp(-x)
    # integral e^{q(t-h)} dt = (1 - e^{-x})/q ; integral (t/h) e^{q(t-h)} dt
    total = -math.expm1(-x) / q
    w1 = (1.0 - total / h) / q
    w0 = total - w1
    return w0, w1


def evaluate_J_terms(u: Profile, c: float, kappa: float,
                     nonlinearity: CubicNonlinearity, gamma: float,
                     left_value: float = 0.0, right_value: float = 0.0,
                     operator: NonlocalOperator | None = None):
    """(gradient term, nonlocal term, potential integral) of the functional."""
    g = u.grid
    vals = u.values
    grad_term = 0.5 * kappa * seminorm(u)
    op = operator if operator is not None else NonlocalOperator(g, c, gamma)
    v = op.apply(vals, left_value, right_value)
    nl_term = 0.5 * _xsum(g.weights * vals * v * g.trap_weights)
    f_term = _xsum(g.weights * nonlinearity.potential(vals) * g.trap_weights)
    return grad_term, nl_term, f_term


def evaluate_J(u: Profile, c: float, kappa: float, nonlinearity: CubicNonlinearity,
               gamma: float | None = None, left_value: float = 0.0,
               right_value: float = 0.0) -> float:
    """J_c(u) with the gradient coefficient kappa = d c^2 supplied explicitly."""
    if gamma is None:
        raise TypeError("evaluate_J requires gamma for the nonlocal operator")
    return sum(evaluate_J_terms(u, c, kappa, nonlinearity, gamma,
                                left_value, right_value))


def gradient_N(u: Profile) -> np.ndarray:
    """Weighted-metric gradient of N(u) = integral e^z u_z^2 dz.

    Exact derivative of the discrete quadrature: the conservation-form
    stencil -2 e^{-z} (e^z u')' with one-sided boundary rows.
    """
    g = u.grid
    h = g.h
    du = np.diff(u.values) / h      # cell slopes
    flux = g.mid_weights * du       # e^{mid} u' per cell
    dn = np.zeros(g.n)
    dn[:-1] -= flux
    dn[1:] += flux
    return 2.0 * dn / (g.weights * g.trap_weights)


def gradient_J(u: Profile, c: float, kappa: float, nonlinearity: CubicNonlinearity,
               gamma: float | None = None) -> Profile:
    """Weighted-metric gradient of the discrete J_c.

    In the interior this is -kappa e^{-z} (e^z u')' + L_c u - f(u); the
    boundary rows are the exact derivatives of the discrete quadrature, so
    central finite differences of J match the returned gradient to roundoff.
    """
    if gamma is None:
        raise TypeError("gradient_J requires gamma for the nonlocal operator")
    op = NonlocalOperator(u.grid, c, gamma)
    v = op.apply(u.values)
    grad = 0.5 * kappa * gradient_N(u) + v - nonlinearity(u.values)
    return u.with_values(grad)


def normalized_J(u: Profile, c: float, kappa: float, nonlinearity: CubicNonlinearity,
                 gamma: float | None = None, left_value: float = 0.0,
                 right_value: float = 0.0) -> float:
    """(2 / N(u)) * J(u): the value of J at the translate with N = 2.

    Translating a profile by a scales both J and N by e^a, so this ratio is
    exactly the functional value of the constraint-satisfying translate; in
    particular its sign always equals the sign of J(u).
    """
    n = seminorm(u)
    if n < 1e-14:
        raise ValueError("degenerate profile: derivative energy below 1e-14")
    j = evaluate_J(u, c, kappa, nonlinearity, gamma=gamma,
                   left_value=left_value, right_value=right_value)
    return 2.0 * j / n


# ---------------------------------------------------------------------------
# Projection onto the sign-class admissible sets
# ---------------------------------------------------------------------------

def _clamp_cost(u, w, lo, hi):
    """Per-node weighted squared distance to the box [lo, hi]."""
    clipped = np.clip(u, lo, hi)
    return w * (u - clipped) ** 2, clipped


def project_admissible(u: Profile, spec: AdmissibleSpec) -> Profile:
    """Exact weighted-L2 projection onto the admissible set.

    The set is a union of box products over crossing indices; for each
    segment layout the projection is nodewise clamping, so the optimal
    crossing pair is found by prefix/suffix sums of clamp penalties and a
    running minimum, in O(n).  The projection is idempotent.
    """
    g = u.grid
    w = g.weights * g.trap_weights
    vals = u.values

    if spec.kind == "front":
        cost_hi, clip_hi = _clamp_cost(vals, w, spec.mu3, spec.upper)
        cost_mid, clip_mid = _clamp_cost(vals, w, 0.0, spec.mu3)
        cost_lo, clip_lo = _clamp_cost(vals, w, spec.lower, 0.0)
        k_mu, k0 = _best_pair(cost_hi, cost_mid, cost_lo)
        out = np.concatenate([clip_hi[:k_mu], clip_mid[k_mu:k0], clip_lo[k0:]])
    elif spec.kind == "pulse":
        cost_a, clip_a = _clamp_cost(vals, w, spec.lower, 0.0)
        cost_b, clip_b = _clamp_cost(vals, w, 0.0, spec.upper)
        cost_c, clip_c = _clamp_cost(vals, w, spec.lower, 0.0)
        k1, k2 = _best_pair(cost_a, cost_b, cost_c)
        out = np.concatenate([clip_a[:k1], clip_b[k1:k2], clip_c[k2:]])
    else:  # single sign change
        cost_b, clip_b = _clamp_cost(vals, w, 0.0, spec.upper)
        cost_c, clip_c = _clamp_cost(vals, w, spec.lower, 0.0)
        pre = np.concatenate([[0.0], np.cumsum(cost_b)])
        suf = np.concatenate([np.cumsum(cost_c[::-1])[::-1], [0.0]])
        k = int(np.argmin(pre + suf))
        out = np.concatenate([clip_b[:k], clip_c[k:]])
    return u.with_values(out)


def _best_pair(cost_left, cost_mid, cost_right):
    """argmin over k1 <= k2 of sum(left[:k1]) + sum(mid[k1:k2]) + sum(right[k2:]).

    With A, B prefix sums of the left/middle penalties and C the suffix sum
    of the right penalty, the cost is (A - B)[k1] + (B + C)[k2]; a running
    minimum over k1 <= k2 gives the lexicographically smallest optimum.
    """
    n = len(cost_left)
    a = np.concatenate([[0.0], np.cumsum(cost_left)])          # A[k] = sum left[:k]
    b = np.concatenate([[0.0], np.cumsum(cost_mid)])           # B[k] = sum mid[:k]
    c = np.concatenate([np.cumsum(cost_right[::-1])[::-1], [0.0]])  # C[k] = sum right[k:]

    head = a - b                       # indexed by k1
    run_min = np.minimum.accumulate(head)
    total = run_min + b + c            # best over k1 <= k2, indexed by k2
    k2 = int(np.argmin(total))
    k1 = int(np.argmax(head[: k2 + 1] == run_min[k2]))
    return k1, k2


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_profile_csv(path, z, u, v=None):
    """Write `z,value` or `z,u,v` rows at full round-trip precision."""
    cols = [np.asarray(z, dtype=float), np.asarray(u, dtype=float)]
    header = "z,u,v" if v is not None else "z,value"
    if v is not None:
        cols.append(np.asarray(v, dtype=float))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_profile_csv(path):
    """Read a profile CSV back; returns (header_fields, columns)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(tok) for tok in line.split(",")]
                         for line in fh if line.strip()])
    return header, [data[:, i] for i in range(data.shape[1])]
