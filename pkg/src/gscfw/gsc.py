"""Generalized self-concordance kernels, local geometry, and constant calculus.

A convex C^3 function f is (M, nu)-generalized self-concordant (GSC) when its
third derivative along any direction is controlled by the power nu/2 of the
second.  Everything downstream (step sizes, descent bounds, feasibility
safeguards) is driven by the scalar kernel ``omega`` and the distance-like
quantities ``d_nu`` / ``delta_nu`` implemented here.
"""

from __future__ import annotations

import functools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

# Branch snapping: interior-branch exponents blow up at the endpoints.
NU_BRANCH_TOL = 1e-9

_LN2 = math.log(2.0)


def inner(a, b) -> float:
    """Inner product that works for vector and (symmetric) matrix variables.

    For matrices this is the Frobenius inner product, which matches tr(AB)
    on symmetric pairs.
    """
    return float(np.dot(np.ravel(a), np.ravel(b)))


def l2_norm(a) -> float:
    return float(np.linalg.norm(np.ravel(a)))


def nu_branch(nu: float) -> int:
    """Classify nu as 2 (exactly-2 branch), 3 (exactly-3), or 0 (interior)."""
    if abs(nu - 2.0) < NU_BRANCH_TOL:
        return 2
    if abs(nu - 3.0) < NU_BRANCH_TOL:
        return 3
    if 2.0 < nu < 3.0:
        return 0
    raise ValueError(f"nu must lie in [2, 3], got {nu}")


@dataclass(frozen=True)
class GscSpec:
    """The pair (M, nu) classifying a generalized self-concordant objective."""

    m: float
    nu: float

    def __post_init__(self):
        if not self.m >= 0.0:
            raise ValueError(f"GSC constant must be nonnegative, got {self.m}")
        nu_branch(self.nu)  # validates the range

    @property
    def branch(self) -> int:
        return nu_branch(self.nu)


# ---------------------------------------------------------------------------
# The kernel omega_nu
# ---------------------------------------------------------------------------

def _omega_taylor_coeffs(nu: float, branch: int):
    # omega(t) = 1/2 + c1 t + c2 t^2 + c3 t^3 + O(t^4) around 0.
    if branch == 2:
        return 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0
    if branch == 3:
        return 1.0 / 3.0, 1.0 / 4.0, 1.0 / 5.0
    m = 2.0 / (2.0 - nu)  # negative
    return -m / 6.0, m * (m - 1.0) / 24.0, -m * (m - 1.0) * (m - 2.0) / 120.0


def omega(nu: float, t: float) -> float:
    """The GSC curvature weight omega_nu(t); continuous at 0 with value 1/2.

    Branches: (e^t - t - 1)/t^2 for nu = 2, (-t - ln(1-t))/t^2 for nu = 3,
    and a power form for interior nu.  For nu > 2 the argument must satisfy
    t < 1.  Near t = 0 the raw expressions lose all precision, so a cubic
    Taylor expansion takes over inside a branch-scaled radius.
    """
    branch = nu_branch(nu)
    t = float(t)
    if branch != 2 and t >= 1.0:
        raise ValueError(f"omega with nu={nu} requires t < 1, got {t}")

    if branch == 0:
        m = 2.0 / (2.0 - nu)
        near_zero = abs(t * m) < 1e-4
    else:
        near_zero = abs(t) < 1e-4
    if near_zero:
        c1, c2, c3 = _omega_taylor_coeffs(nu, branch)
        return 0.5 + t * (c1 + t * (c2 + t * c3))

    if branch == 2:
        try:
            return (math.expm1(t) - t) / (t * t)
        except OverflowError:
            return math.inf
    if branch == 3:
        return (-t - math.log1p(-t)) / (t * t)
    c_out = (nu - 2.0) / (4.0 - nu)
    d_in = (nu - 2.0) / (2.0 * (3.0 - nu))
    p_exp = 2.0 * (3.0 - nu) / (2.0 - nu)  # negative
    try:
        grown = math.expm1(p_exp * math.log1p(-t))  # (1-t)^p - 1, stable
    except OverflowError:
        # the power term exceeds float range (nu near 2 with t not small)
        return math.inf
    return (c_out / t) * ((d_in / t) * grown - 1.0)


@functools.lru_cache(maxsize=None)
def omega_slope_at_zero(nu: float) -> float:
    """Richardson-extrapolated numeric derivative of omega_nu at 0 (cached).

    Kept as an independent check on the Taylor coefficients used by
    ``omega`` near the origin.
    """
    h = 1e-2

    def central(step):
        return (omega(nu, step) - omega(nu, -step)) / (2.0 * step)

    return (4.0 * central(h / 2.0) - central(h)) / 3.0


# ---------------------------------------------------------------------------
# Distance-like quantities
# ---------------------------------------------------------------------------

def d_nu(spec: GscSpec, step_euclid: float, step_local: float) -> float:
    """Distance-like function of the displacement: M*||y-x||_2 for nu = 2,
    ((nu-2)/2) * M * ||y-x||_2^(3-nu) * ||y-x||_x^(nu-2) otherwise.

    A zero displacement in either norm yields 0 (avoids 0^negative).
    """
    if step_euclid < 0 or step_local < 0:
        raise ValueError("norms must be nonnegative")
    branch = spec.branch
    if branch == 2:
        return spec.m * step_euclid
    if step_euclid == 0.0 or step_local == 0.0:
        return 0.0
    if branch == 3:
        return 0.5 * spec.m * step_local
    nu = spec.nu
    return 0.5 * (nu - 2.0) * spec.m * step_euclid ** (3.0 - nu) * step_local ** (nu - 2.0)


def delta_nu(spec: GscSpec, beta: float, e: float) -> float:
    """Direction shape factor: beta for nu = 2, ((nu-2)/2) beta^(3-nu) e^(nu-2)
    for nu > 2.  Satisfies d_nu(x, x + t*v) = t * M * delta_nu(x)."""
    if beta < 0 or e < 0:
        raise ValueError("norms must be nonnegative")
    branch = spec.branch
    if branch == 2:
        return beta
    if beta == 0.0 or e == 0.0:
        return 0.0
    if branch == 3:
        return 0.5 * e
    nu = spec.nu
    return 0.5 * (nu - 2.0) * beta ** (3.0 - nu) * e ** (nu - 2.0)


# ---------------------------------------------------------------------------
# Objective contract and per-iterate geometry
# ---------------------------------------------------------------------------

class Objective(ABC):
    """Evaluation contract for a GSC objective.

    Hessian access is matrix-vector product only; no factorization of the
    Hessian is ever required by the solvers.  Implementations must be
    immutable after construction so that concurrent read-only evaluation
    from several solver instances is safe.
    """

    spec: GscSpec
    dimension: int
    name: str = "objective"

    @abstractmethod
    def value(self, x) -> float:
        """f(x); +inf outside the effective domain."""

    @abstractmethod
    def gradient(self, x):
        ...

    @abstractmethod
    def hess_vec(self, x, v):
        """The product (grad^2 f(x)) v."""

    @abstractmethod
    def in_domain(self, x) -> bool:
        ...

    def max_step(self, x, v):
        """Exact sup{t in (0,1] : x + t v in dom f} when cheaply available.

        Return None to fall back on the generic bisection oracle.
        """
        return None


@dataclass(frozen=True)
class LocalGeometry:
    """Per-iterate quantities feeding the step-size formulas.

    beta = ||v||_2, e = ||v||_x = sqrt(<hess_vec(x, v), v>), delta is the
    direction shape factor, and gap the merit value for the direction.
    """

    beta: float
    e: float
    delta: float
    gap: float

    @classmethod
    def from_direction(cls, obj: Objective, x, v, gap: float) -> "LocalGeometry":
        beta = l2_norm(v)
        e2 = inner(obj.hess_vec(x, v), v)
        e = math.sqrt(max(e2, 0.0))
        return cls(beta=beta, e=e, delta=delta_nu(obj.spec, beta, e), gap=gap)


def descent_bounds(f: Objective, x, y):
    """Local sandwich on f(y) from the expansion at x.

    Returns (lower, upper); the upper bound is None when nu > 2 and
    d_nu(x, y) >= 1, where the model is no longer valid.
    """
    v = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    local2 = max(inner(f.hess_vec(x, v), v), 0.0)
    local = math.sqrt(local2)
    d = d_nu(f.spec, l2_norm(v), local)
    base = f.value(x) + inner(f.gradient(x), v)
    lower = base + omega(f.spec.nu, -d) * local2
    if f.spec.branch != 2 and d >= 1.0:
        return lower, None
    return lower, base + omega(f.spec.nu, d) * local2


# ---------------------------------------------------------------------------
# GSC-constant calculus
# ---------------------------------------------------------------------------

def gsc_sum_constant(terms, nu: float) -> float:
    """Constant of a weighted sum sum_i w_i f_i: max_i w_i^(1 - nu/2) M_i."""
    terms = list(terms)
    if not terms:
        raise ValueError("need at least one term")
    exponent = 1.0 - nu / 2.0
    best = -math.inf
    for w, m in terms:
        if not w > 0:
            raise ValueError(f"weights must be positive, got {w}")
        best = max(best, w ** exponent * m)
    return best


def gsc_affine_constant(m: float, nu: float, operator_norm: float,
                        min_singular_sq=None) -> float:
    """Constant of f(Ax + b): M * ||A||^(3 - nu) for nu in [2, 3]."""
    nu_branch(nu)  # rejects nu outside [2, 3]
    if min_singular_sq is not None:
        raise ValueError("min_singular_sq applies only to orders above 3")
    return m * operator_norm ** (3.0 - nu)


def gsc_finite_sum_constant(phis, nu: float, lambda_min_q: float) -> float:
    """Constant (of order 3) for sum_i phi_i(<a_i, x> + b_i) + quadratic term:
    lambda_min(Q)^((nu-3)/2) * max_i M_i ||a_i||^(3-nu), where nu is the
    common order of the phi_i.
    """
    phis = list(phis)
    if not phis:
        raise ValueError("need at least one term")
    if not 0.0 < nu <= 3.0 + NU_BRANCH_TOL:
        raise ValueError(f"nu must be in (0, 3], got {nu}")
    at_three = abs(nu - 3.0) < NU_BRANCH_TOL
    if not at_three and not lambda_min_q > 0.0:
        raise ValueError("lambda_min(Q) must be positive for nu < 3")
    best = max(m * a ** (3.0 - nu) for m, a in phis)
    if at_three:
        return best
    return lambda_min_q ** ((nu - 3.0) / 2.0) * best
