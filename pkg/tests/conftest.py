"""Shared test oracles: finite differences, bracketed scalar maximization,
and small closed-form objectives.  These stay independent of the code paths
they are used to check."""

import math

import numpy as np
import pytest

from gscfw import GscSpec, Objective
from gscfw.sets import VertexSet
from gscfw.stepsize import PsiParams, psi


def golden_section_max(fn, lo, hi, iters=200):
    """Derivative-free maximizer of a unimodal function on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        # ties (e.g. both probes at -inf past the domain) keep the left segment
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _psi_slope(params: PsiParams, t):
    """Branch-wise derivative of psi, derived independently of the closed-form
    maximizer (which inverts this expression analytically)."""
    dl, xi, nu = params.delta, params.xi, params.nu
    if dl == 0.0:
        return 1.0 - xi * t  # psi = t - xi t^2 / 2
    if params.branch == 2:
        try:
            return 1.0 - (xi / dl) * math.expm1(t * dl)
        except OverflowError:
            return -math.inf
    if params.branch == 3:
        return 1.0 + (xi / dl) * (1.0 - 1.0 / (1.0 - t * dl))
    coef = (nu - 2.0) / (4.0 - nu)
    power = -(4.0 - nu) / (nu - 2.0)
    try:
        grown = math.exp(power * math.log1p(-t * dl))
    except OverflowError:
        return -math.inf
    return 1.0 + (xi / dl) * coef * (1.0 - grown)


def numeric_psi_max(params: PsiParams):
    """Independent bracketed maximizer of psi (never uses the closed forms).

    Golden section localizes the peak; value comparisons bottom out at the
    sqrt(eps) noise floor, so a sign bisection on the independently coded
    derivative refines the answer to full float accuracy.
    """
    if params.branch == 2 or params.delta == 0.0:
        hi = 50.0 / params.xi if params.xi > 0 else 1e6
    else:
        hi = 0.999999 / params.delta
    rough = golden_section_max(lambda t: psi(params, t), 0.0, hi)
    lo, up = 0.0, hi
    if _psi_slope(params, up) > 0.0:
        return up
    for _ in range(200):
        mid = 0.5 * (lo + up)
        if _psi_slope(params, mid) > 0.0:
            lo = mid
        else:
            up = mid
    refined = 0.5 * (lo + up)
    # the two stages must agree to within golden section's noise radius
    assert abs(refined - rough) <= 1e-5 * (1.0 + refined)
    return refined


def fd_gradient_check(obj, x, rel_tol=1e-5):
    """Central finite differences of value against gradient, coordinatewise
    for vectors and along random symmetric directions for matrices."""
    x = np.asarray(x, dtype=float)
    grad = np.asarray(obj.gradient(x), dtype=float)
    if x.ndim == 1:
        approx = np.empty_like(x)
        for i in range(x.size):
            h = 1e-6 * (1.0 + abs(x[i]))
            e = np.zeros_like(x)
            e[i] = h
            approx[i] = (obj.value(x + e) - obj.value(x - e)) / (2.0 * h)
        scale = np.maximum(np.abs(grad), np.max(np.abs(grad)) * 1e-3 + 1e-12)
        assert np.max(np.abs(approx - grad) / scale) < rel_tol
    else:
        rng = np.random.default_rng(42)
        for _ in range(6):
            v = rng.standard_normal(x.shape)
            v = (v + v.T) / 2.0
            h = 1e-6 * (1.0 + float(np.max(np.abs(x))))
            d_num = (obj.value(x + h * v) - obj.value(x - h * v)) / (2.0 * h)
            d_ana = float(np.sum(grad * v))
            assert abs(d_num - d_ana) <= rel_tol * (1.0 + abs(d_ana))


def fd_hess_vec_check(obj, x, v, rel_tol=1e-5):
    """Finite differences of gradient against hess_vec along v."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = 1e-6 / (1.0 + float(np.max(np.abs(v))))
    num = (np.asarray(obj.gradient(x + h * v)) - np.asarray(obj.gradient(x - h * v))) / (2.0 * h)
    ana = np.asarray(obj.hess_vec(x, v))
    denom = 1.0 + float(np.max(np.abs(ana)))
    assert float(np.max(np.abs(num - ana))) / denom < rel_tol


class QuadraticObjective(Objective):
    """f(x) = (L/2)||x||^2: exactly quadratic, GSC with constant 0."""

    name = "quadratic"

    def __init__(self, n, curvature=1.0, nu=3.0):
        self.dimension = n
        self.curvature = curvature
        self.spec = GscSpec(0.0, nu)

    def value(self, x):
        return 0.5 * self.curvature * float(np.dot(x, x))

    def gradient(self, x):
        return self.curvature * np.asarray(x, dtype=float)

    def hess_vec(self, x, v):
        return self.curvature * np.asarray(v, dtype=float)

    def in_domain(self, x):
        return True


class ShiftedQuadratic(Objective):
    """f(x) = (L/2)||x - center||^2."""

    name = "shifted-quadratic"

    def __init__(self, center, curvature=1.0, nu=3.0):
        self.center = np.asarray(center, dtype=float)
        self.dimension = self.center.size
        self.curvature = curvature
        self.spec = GscSpec(0.0, nu)

    def value(self, x):
        d = np.asarray(x) - self.center
        return 0.5 * self.curvature * float(np.dot(d, d))

    def gradient(self, x):
        return self.curvature * (np.asarray(x, dtype=float) - self.center)

    def hess_vec(self, x, v):
        return self.curvature * np.asarray(v, dtype=float)

    def in_domain(self, x):
        return True


class NegLogObjective(Objective):
    """f(x) = -sum log(x_i): the canonical (2, 3) barrier."""

    name = "neg-log"

    def __init__(self, n):
        self.dimension = n
        self.spec = GscSpec(2.0, 3.0)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            return math.inf
        return -float(np.sum(np.log(x)))

    def gradient(self, x):
        return -1.0 / np.asarray(x, dtype=float)

    def hess_vec(self, x, v):
        x = np.asarray(x, dtype=float)
        return np.asarray(v, dtype=float) / (x * x)

    def in_domain(self, x):
        return bool(np.all(np.asarray(x) > 0))


class IntervalSet(VertexSet):
    """One-dimensional segment [lo, hi]; vertices carry ids 0 and 1."""

    def __init__(self, lo, hi):
        self.lo, self.hi = float(lo), float(hi)
        self.dimension = 1
        self.diameter = self.hi - self.lo

    def lmo_indexed(self, c):
        c = np.asarray(c, dtype=float)
        if c[0] >= 0:
            return 0, np.array([self.lo])
        return 1, np.array([self.hi])

    def contains(self, x, tol=1e-9):
        val = float(np.asarray(x).ravel()[0])
        return self.lo - tol <= val <= self.hi + tol


@pytest.fixture(scope="session")
def portfolio_toy():
    from gscfw import portfolio_generator, portfolio_problem
    returns = portfolio_generator(20, 10, seed=5)
    return portfolio_problem(returns)
