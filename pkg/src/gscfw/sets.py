"""Feasible sets and their linear minimization oracles.

Every set exposes ``lmo`` (vertex output, lowest-index tie-breaking), a
membership test, and its diameter.  Polytope sets additionally return a
stable hashable vertex id with each oracle answer, which the away-step
solver needs for its active-set bookkeeping.  All sets are immutable and
their oracles are pure, so concurrent queries are safe.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from .gsc import Objective, inner, l2_norm


class OracleViolation(RuntimeError):
    """A linear oracle returned a certifiably non-optimal answer."""


def gap(grad, x, s) -> float:
    """Dual merit <grad, x - s> with s = lmo(grad); nonnegative at feasible x.

    Rounding-level negativity (relative to the inner products involved) is
    clamped to 0; anything larger indicates a broken oracle.
    """
    value = inner(grad, x) - inner(grad, s)
    if value >= 0.0:
        return value
    scale = max(1.0, abs(inner(grad, x)), abs(inner(grad, s)))
    if value >= -1e-12 * scale:
        return 0.0
    raise OracleViolation(f"negative gap {value} exceeds rounding tolerance")


class FeasibleSet(ABC):
    """Convex compact set accessed through a linear minimization oracle."""

    dimension: int
    diameter: float

    @abstractmethod
    def lmo(self, c):
        """A minimizer of <c, .> over the set (an extreme point)."""

    @abstractmethod
    def contains(self, x, tol: float = 1e-9) -> bool:
        ...


class VertexSet(FeasibleSet):
    """Polytope whose oracle also reports a stable vertex identifier."""

    @abstractmethod
    def lmo_indexed(self, c):
        """Return (vertex_id, vertex); ids are hashable and orderable."""

    def lmo(self, c):
        return self.lmo_indexed(c)[1]


# ---------------------------------------------------------------------------
# Elementary oracles (functional forms)
# ---------------------------------------------------------------------------

def simplex_lmo(c):
    """Vertex e_i of the unit simplex with i = argmin_j c_j (lowest index wins)."""
    c = np.asarray(c, dtype=float)
    out = np.zeros_like(c)
    out[int(np.argmin(c))] = 1.0
    return out


def l1ball_lmo(c, radius: float):
    """Vertex -radius * sign(c_i) * e_i, i = argmax |c_j|; sign(0) taken as +1."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    c = np.asarray(c, dtype=float)
    i = int(np.argmax(np.abs(c)))
    out = np.zeros_like(c)
    out[i] = -radius if c[i] >= 0 else radius
    return out


def sym_l1_lmo(grad_matrix, radius: float):
    """Symmetric-matrix analogue of the l1-ball oracle.

    Picks the entry of largest magnitude; a diagonal hit returns
    -R*sign(g_ii)*E_ii, an off-diagonal hit splits the l1 budget over the
    symmetric pair.  The output always has entrywise l1 norm exactly R.
    """
    g = np.asarray(grad_matrix, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(g))) if g.size else 1.0)
    if float(np.max(np.abs(g - g.T))) > 1e-10 * scale:
        raise ValueError("gradient matrix is not symmetric")
    i, j = np.unravel_index(int(np.argmax(np.abs(g))), g.shape)
    out = np.zeros_like(g)
    sign = 1.0 if g[i, j] >= 0 else -1.0
    if i == j:
        out[i, i] = -radius * sign
    else:
        out[i, j] = out[j, i] = -0.5 * radius * sign
    return out


def product_lmo(blocks, c):
    """Concatenation of per-block oracle answers over a product set."""
    c = np.asarray(c, dtype=float)
    total = sum(b.dimension for b in blocks)
    if total != c.shape[0]:
        raise ValueError(f"dimension mismatch: blocks sum to {total}, c has {c.shape[0]}")
    pieces = []
    offset = 0
    for b in blocks:
        pieces.append(b.lmo(c[offset:offset + b.dimension]))
        offset += b.dimension
    return np.concatenate(pieces)


# ---------------------------------------------------------------------------
# Set classes
# ---------------------------------------------------------------------------

class UnitSimplex(VertexSet):
    """{x >= 0, sum x = 1}; vertices are the coordinate basis, ids are ints."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("dimension must be positive")
        self.dimension = n
        self.diameter = math.sqrt(2.0) if n > 1 else 0.0

    def lmo_indexed(self, c):
        c = np.asarray(c, dtype=float)
        i = int(np.argmin(c))
        return i, self.vertex(i)

    def vertex(self, i: int):
        out = np.zeros(self.dimension)
        out[i] = 1.0
        return out

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= -tol) and abs(float(np.sum(x)) - 1.0) <= tol * max(1.0, self.dimension ** 0.5))


class L1Ball(VertexSet):
    """{||x||_1 <= R}; vertices +-R e_i, ids are (index, sign) pairs."""

    def __init__(self, n: int, radius: float):
        if n < 1 or not radius > 0:
            raise ValueError("need positive dimension and radius")
        self.dimension = n
        self.radius = float(radius)
        self.diameter = 2.0 * self.radius

    def lmo_indexed(self, c):
        v = l1ball_lmo(c, self.radius)
        i = int(np.argmax(np.abs(v)))
        sign = 1 if v[i] > 0 else -1
        return (i, sign), v

    def vertex(self, vid):
        i, sign = vid
        out = np.zeros(self.dimension)
        out[i] = sign * self.radius
        return out

    def contains(self, x, tol: float = 1e-9) -> bool:
        return float(np.sum(np.abs(x))) <= self.radius * (1.0 + tol) + tol


class SymmetricL1Ball(VertexSet):
    """Symmetric p x p matrices with entrywise l1 norm at most R.

    Vertices are +-R E_ii and +-(R/2)(E_ij + E_ji); ids are (i, j, sign)
    with i <= j.
    """

    def __init__(self, p: int, radius: float):
        if p < 1 or not radius > 0:
            raise ValueError("need positive dimension and radius")
        self.p = p
        self.dimension = p * p
        self.radius = float(radius)
        self.diameter = 2.0 * self.radius

    def lmo_indexed(self, c):
        v = sym_l1_lmo(c, self.radius)
        flat = int(np.argmax(np.abs(v)))
        i, j = divmod(flat, self.p)
        if i > j:
            i, j = j, i
        sign = 1 if v[i, j] > 0 else -1
        return (i, j, sign), v

    def vertex(self, vid):
        i, j, sign = vid
        out = np.zeros((self.p, self.p))
        if i == j:
            out[i, i] = sign * self.radius
        else:
            out[i, j] = out[j, i] = sign * 0.5 * self.radius
        return out

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p, self.p):
            return False
        scale = max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
        if float(np.max(np.abs(x - x.T))) > 1e-8 * scale:
            return False
        return float(np.sum(np.abs(x))) <= self.radius * (1.0 + tol) + tol


class EuclideanBall(FeasibleSet):
    """{||x||_2 <= r}; the oracle returns the boundary point -r c/||c||."""

    def __init__(self, n: int, radius: float):
        self.dimension = n
        self.radius = float(radius)
        self.diameter = 2.0 * self.radius

    def lmo(self, c):
        c = np.asarray(c, dtype=float)
        norm = l2_norm(c)
        if norm == 0.0:
            out = np.zeros(self.dimension)
            out[0] = self.radius
            return out
        return -self.radius / norm * c

    def contains(self, x, tol: float = 1e-9) -> bool:
        return l2_norm(x) <= self.radius * (1.0 + tol) + tol


class IntervalBlock(FeasibleSet):
    """One-dimensional block [-u, u]."""

    def __init__(self, u: float):
        self.dimension = 1
        self.u = float(u)
        self.diameter = 2.0 * self.u

    def lmo(self, c):
        c = np.asarray(c, dtype=float)
        return np.array([-self.u if c[0] >= 0 else self.u])

    def contains(self, x, tol: float = 1e-9) -> bool:
        return abs(float(np.asarray(x).ravel()[0])) <= self.u + tol


class NonnegativeBall(FeasibleSet):
    """{x >= 0, ||x||_2 <= r}: the nonnegative orthant slice of a ball."""

    def __init__(self, n: int, radius: float):
        self.dimension = n
        self.radius = float(radius)
        self.diameter = self.radius * (math.sqrt(2.0) if n > 1 else 1.0)

    def lmo(self, c):
        c = np.asarray(c, dtype=float)
        d = np.maximum(-c, 0.0)
        norm = l2_norm(d)
        if norm == 0.0:
            return np.zeros(self.dimension)
        return self.radius / norm * d

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= -tol)) and l2_norm(x) <= self.radius * (1.0 + tol) + tol


class ProductSet(FeasibleSet):
    """Cartesian product of blocks; the oracle decomposes blockwise."""

    def __init__(self, blocks):
        self.blocks = tuple(blocks)
        self.dimension = sum(b.dimension for b in self.blocks)
        self.diameter = math.sqrt(sum(b.diameter ** 2 for b in self.blocks))
        self._slices = []
        offset = 0
        for b in self.blocks:
            self._slices.append(slice(offset, offset + b.dimension))
            offset += b.dimension

    def lmo(self, c):
        return product_lmo(self.blocks, c)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dimension:
            return False
        return all(b.contains(x[s], tol) for b, s in zip(self.blocks, self._slices))


# ---------------------------------------------------------------------------
# Local linear minimization oracle (simplex)
# ---------------------------------------------------------------------------

class SimplexLLOO:
    """Ball-restricted linear oracle on the unit simplex with rho = sqrt(n).

    query(x, r, c) returns u minimizing <c, .> over all simplex points whose
    one-sided transported mass does not exceed min(1, sqrt(n) r / 2); every
    point of B(x, r) on the simplex moves at most that much mass, so
    <c, y> >= <c, u> on the whole intersection, while ||x - u||_2 <= sqrt(n) r.
    """

    def __init__(self, n: int):
        self.n = n
        self.rho = math.sqrt(n)

    def query(self, x, r: float, c):
        if not r > 0:
            raise ValueError("radius must be positive")
        x = np.asarray(x, dtype=float)
        c = np.asarray(c, dtype=float)
        if not UnitSimplex(self.n).contains(x, tol=1e-7):
            raise ValueError("query point is not on the simplex")
        if float(np.ptp(c)) == 0.0:
            return x.copy()
        budget = min(1.0, 0.5 * self.rho * r)
        target = int(np.argmin(c))
        u = x.copy()
        moved = 0.0
        # Drain mass from the worst coordinates first (ties: lowest index).
        order = np.lexsort((np.arange(self.n), -c))
        for idx in order:
            if idx == target:
                continue
            take = min(u[idx], budget - moved)
            if take <= 0.0:
                continue
            u[idx] -= take
            moved += take
            if moved >= budget:
                break
        u[target] += moved
        return u


# ---------------------------------------------------------------------------
# Domain-boundary search
# ---------------------------------------------------------------------------

def max_feasible_step(obj: Objective, x, v) -> float:
    """Largest step in (0, 1] keeping x + t v inside dom f, shrunk for safety.

    Uses the objective's exact boundary rule when it provides one, otherwise
    30 bisection steps on the domain oracle followed by a (1 - 1e-7) shrink.
    """
    if not obj.in_domain(x):
        raise ValueError("x must lie in the domain")
    exact = obj.max_step(x, v)
    if exact is not None:
        return exact
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if obj.in_domain(x + v):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if obj.in_domain(x + mid * v):
            lo = mid
        else:
            hi = mid
    return lo * (1.0 - 1e-7)
