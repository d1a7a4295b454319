"""Benchmark objectives: elastic-net logistic regression, log-utility
portfolio selection, distance-weighted discrimination, and sparse inverse
covariance estimation, plus the data plumbing they need.

Each constructor returns a ProblemInstance bundling the objective (with its
GSC classification), the feasible set, and a name.  Instances are immutable
after construction; every evaluation is stateless, so instances can be
shared across concurrently running solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import expit

from .gsc import (GscSpec, Objective, gsc_affine_constant, gsc_finite_sum_constant,
                  gsc_sum_constant, inner)
from .sets import (EuclideanBall, FeasibleSet, IntervalBlock, L1Ball, NonnegativeBall,
                   ProductSet, SymmetricL1Ball, UnitSimplex)


# ---------------------------------------------------------------------------
# Sparse datasets (LIBSVM-style)
# ---------------------------------------------------------------------------

class SparseDataset:
    """Rows of sparse predictors with +-1 labels."""

    def __init__(self, matrix: sp.csr_matrix, labels):
        labels = np.asarray(labels, dtype=float)
        if matrix.shape[0] != labels.shape[0]:
            raise ValueError("row/label count mismatch")
        if labels.size and not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be +-1")
        self.matrix = matrix.tocsr()
        self.matrix.sort_indices()
        self.labels = labels

    @property
    def count(self) -> int:  # number of samples p
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:  # feature dimension n
        return self.matrix.shape[1]

    def row_norms(self):
        sq = np.asarray(self.matrix.multiply(self.matrix).sum(axis=1)).ravel()
        return np.sqrt(sq)

    def normalized(self) -> "SparseDataset":
        """Each row divided by its euclidean norm (zero rows left alone)."""
        norms = self.row_norms()
        scale = np.where(norms > 0, 1.0 / np.maximum(norms, 1e-300), 1.0)
        d = sp.diags(scale)
        return SparseDataset((d @ self.matrix).tocsr(), self.labels.copy())


def libsvm_parse(source, normalize: bool = False, dimension: int | None = None) -> SparseDataset:
    """Parse LIBSVM text: 'label idx:val ...' with 1-based ascending indices.

    Labels must be strictly +-1; indices become 0-based internally.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    elif hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = list(source)
    labels, indptr, indices, values = [], [0], [], []
    max_index = -1
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad label {tokens[0]!r}") from exc
        if label not in (-1.0, 1.0):
            raise ValueError(f"line {lineno}: label must be +-1, got {tokens[0]!r}")
        labels.append(label)
        prev = 0
        for tok in tokens[1:]:
            try:
                idx_text, val_text = tok.split(":", 1)
                idx = int(idx_text)
                val = float(val_text)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: malformed pair {tok!r}") from exc
            if idx <= prev:
                raise ValueError(f"line {lineno}: indices must be 1-based ascending")
            prev = idx
            indices.append(idx - 1)
            values.append(val)
            max_index = max(max_index, idx - 1)
        indptr.append(len(indices))
    n = dimension if dimension is not None else max_index + 1
    matrix = sp.csr_matrix((values, indices, indptr), shape=(len(labels), max(n, 0)))
    data = SparseDataset(matrix, np.array(labels))
    return data.normalized() if normalize else data


def libsvm_serialize(data: SparseDataset) -> str:
    """Inverse of libsvm_parse (indices re-based to 1)."""
    lines = []
    m = data.matrix
    for i in range(data.count):
        row = m.getrow(i)
        pairs = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(row.indices, row.data))
        label = int(data.labels[i])
        lines.append(f"{label:+d} {pairs}".rstrip())
    return "\n".join(lines)


def synthetic_classification(p: int, n: int, density: float = 0.15,
                             seed: int = 0, normalize: bool = True) -> SparseDataset:
    """Seeded sparse classification data with a planted linear separator."""
    rng = np.random.default_rng(seed)
    nnz_per_row = max(1, int(round(density * n)))
    indptr = [0]
    indices = []
    values = []
    for _ in range(p):
        cols = np.sort(rng.choice(n, size=nnz_per_row, replace=False))
        indices.extend(cols.tolist())
        values.extend(rng.standard_normal(nnz_per_row).tolist())
        indptr.append(len(indices))
    matrix = sp.csr_matrix((values, indices, indptr), shape=(p, n))
    planted = rng.standard_normal(n)
    margins = matrix @ planted + 0.5 * rng.standard_normal(p)
    labels = np.where(margins >= 0, 1.0, -1.0)
    data = SparseDataset(matrix, labels)
    return data.normalized() if normalize else data


# ---------------------------------------------------------------------------
# Problem container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemInstance:
    objective: Objective
    feasible_set: FeasibleSet
    name: str
    reference_optimum: float | None = None

    def __post_init__(self):
        if self.objective.dimension != self.feasible_set.dimension:
            raise ValueError("objective and feasible set dimensions differ")


# ---------------------------------------------------------------------------
# Elastic-net logistic regression
# ---------------------------------------------------------------------------

class LogisticObjective(Objective):
    """(1/p) sum log(1 + exp(-y_i <a_i, x>)) + (gamma/2) ||x||^2; full domain."""

    name = "logistic"

    def __init__(self, data: SparseDataset, gamma: float, nu_mode: int):
        if data.count == 0:
            raise ValueError("empty dataset")
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        if nu_mode not in (2, 3):
            raise ValueError("nu_mode must be 2 or 3")
        self.a = data.matrix
        self.y = data.labels
        self.gamma = float(gamma)
        self.p = data.count
        self.dimension = data.dimension
        norms = data.row_norms()
        if nu_mode == 2:
            # each summand is (1, 2)-GSC; unit-weight max of affine constants
            m = gsc_sum_constant([(1.0, gsc_affine_constant(1.0, 2.0, r)) for r in norms], 2.0)
            self.spec = GscSpec(m, 2.0)
        else:
            m = gsc_finite_sum_constant([(1.0, r) for r in norms], 2.0, gamma)
            self.spec = GscSpec(m, 3.0)

    def _margins(self, x):
        return self.y * (self.a @ x)

    def value(self, x) -> float:
        z = self._margins(x)
        return float(np.mean(np.logaddexp(0.0, -z))) + 0.5 * self.gamma * float(x @ x)

    def gradient(self, x):
        z = self._margins(x)
        w = expit(-z)  # 1 / (1 + e^z)
        return -(self.a.T @ (self.y * w)) / self.p + self.gamma * x

    def hess_vec(self, x, v):
        z = self._margins(x)
        s = expit(z)
        w = s * (1.0 - s)
        return (self.a.T @ (w * (self.a @ v))) / self.p + self.gamma * v

    def in_domain(self, x) -> bool:
        return True

    def max_step(self, x, v):
        return 1.0


def logistic_problem(data: SparseDataset, gamma: float, radius: float,
                     nu_mode: int = 2) -> ProblemInstance:
    obj = LogisticObjective(data, gamma, nu_mode)
    return ProblemInstance(obj, L1Ball(data.dimension, radius),
                           name=f"logistic-nu{nu_mode}")


# ---------------------------------------------------------------------------
# Log-utility portfolio selection
# ---------------------------------------------------------------------------

class PortfolioObjective(Objective):
    """-sum_t log(r_t . x) over the simplex; a (2, 3) objective."""

    name = "portfolio"

    def __init__(self, returns):
        self.r = np.asarray(returns, dtype=float)
        if self.r.ndim != 2:
            raise ValueError("returns must be a p x n matrix")
        self.dimension = self.r.shape[1]
        self.spec = GscSpec(2.0, 3.0)

    def value(self, x) -> float:
        m = self.r @ x
        if np.any(m <= 0.0):
            return math.inf
        return -float(np.sum(np.log(m)))

    def gradient(self, x):
        m = self.r @ x
        return -(self.r.T @ (1.0 / m))

    def hess_vec(self, x, v):
        m = self.r @ x
        return self.r.T @ ((self.r @ v) / (m * m))

    def in_domain(self, x) -> bool:
        return bool(np.all(self.r @ x > 0.0))

    def max_step(self, x, v):
        # domain boundary is linear: r_t . (x + t v) = 0
        m = self.r @ x
        dm = self.r @ v
        shrinking = dm < 0.0
        if not np.any(shrinking):
            return 1.0
        t_raw = float(np.min(m[shrinking] / -dm[shrinking]))
        if t_raw * (1.0 - 1e-7) >= 1.0:
            return 1.0
        return min(1.0, t_raw * (1.0 - 1e-7))


def portfolio_problem(returns) -> ProblemInstance:
    obj = PortfolioObjective(returns)
    return ProblemInstance(obj, UnitSimplex(obj.dimension), name="portfolio")


def portfolio_generator(p: int, n: int, seed: int = 0):
    """Per-period price ratios 1 + N(0, 0.1), deterministic per seed."""
    if p < 1 or n < 1:
        raise ValueError("need p, n >= 1")
    rng = np.random.default_rng(seed)
    return 1.0 + 0.1 * rng.standard_normal((p, n))


# ---------------------------------------------------------------------------
# Distance-weighted discrimination
# ---------------------------------------------------------------------------

class DwdObjective(Objective):
    """(1/p) sum (a_i.w + mu y_i + xi_i)^(-q) + c.xi over x = (w, mu, xi)."""

    name = "dwd"

    def __init__(self, data: SparseDataset, q: float, c):
        if data.count == 0:
            raise ValueError("empty dataset")
        if not q >= 1:
            raise ValueError("q must be at least 1")
        self.a = data.matrix
        self.y = data.labels
        self.q = float(q)
        self.p = data.count
        self.d = data.dimension
        self.dimension = self.d + 1 + self.p
        self.c = np.asarray(c, dtype=float)
        if self.c.shape != (self.p,):
            raise ValueError("c must have one entry per sample")
        nu = 2.0 * (q + 3.0) / (q + 2.0)
        m_phi = (q + 2.0) / (q * (q + 1.0)) ** (1.0 / (q + 2.0))
        # rows of the lifted design [A | y | I]; the linear c-term has constant 0
        b_norms = np.sqrt(data.row_norms() ** 2 + self.y ** 2 + 1.0)
        per_term = [(1.0 / self.p, gsc_affine_constant(m_phi, nu, bn)) for bn in b_norms]
        self.spec = GscSpec(gsc_sum_constant(per_term, nu), nu)

    def split(self, x):
        return x[:self.d], x[self.d], x[self.d + 1:]

    def _margins(self, x):
        w, mu, xi = self.split(x)
        return self.a @ w + mu * self.y + xi

    def _lift(self, v):
        vw, vmu, vxi = self.split(v)
        return self.a @ vw + vmu * self.y + vxi

    def _lift_adjoint(self, t):
        return np.concatenate([self.a.T @ t, [float(self.y @ t)], t])

    def value(self, x) -> float:
        m = self._margins(x)
        if np.any(m <= 0.0):
            return math.inf
        _, _, xi = self.split(x)
        return float(np.sum(m ** -self.q)) / self.p + float(self.c @ xi)

    def gradient(self, x):
        m = self._margins(x)
        s = -self.q * m ** (-self.q - 1.0) / self.p
        out = self._lift_adjoint(s)
        out[self.d + 1:] += self.c
        return out

    def hess_vec(self, x, v):
        m = self._margins(x)
        s = self.q * (self.q + 1.0) * m ** (-self.q - 2.0) / self.p
        return self._lift_adjoint(s * self._lift(v))

    def in_domain(self, x) -> bool:
        return bool(np.all(self._margins(x) > 0.0))

    def max_step(self, x, v):
        m = self._margins(x)
        dm = self._lift(v)
        shrinking = dm < 0.0
        if not np.any(shrinking):
            return 1.0
        t_raw = float(np.min(m[shrinking] / -dm[shrinking]))
        if t_raw * (1.0 - 1e-7) >= 1.0:
            return 1.0
        return min(1.0, t_raw * (1.0 - 1e-7))


def dwd_problem(data: SparseDataset, q: float = 2.0, c=None, u: float = 5.0,
                big_r: float = 10.0) -> ProblemInstance:
    if c is None:
        c = np.ones(data.count)
    obj = DwdObjective(data, q, c)
    feasible = ProductSet([
        EuclideanBall(data.dimension, 1.0),
        IntervalBlock(u),
        NonnegativeBall(data.count, math.sqrt(big_r)),
    ])
    return ProblemInstance(obj, feasible, name="dwd")


# ---------------------------------------------------------------------------
# Sparse inverse covariance estimation
# ---------------------------------------------------------------------------

class CovarianceObjective(Objective):
    """-log det(X) + tr(S X) over symmetric positive definite X."""

    name = "covariance"

    def __init__(self, sigma_hat):
        s = np.asarray(sigma_hat, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("expected a square matrix")
        if float(np.max(np.abs(s - s.T))) > 1e-10 * max(1.0, float(np.max(np.abs(s)))):
            raise ValueError("sigma_hat must be symmetric")
        self.sigma = (s + s.T) / 2.0
        self.p = s.shape[0]
        self.dimension = self.p * self.p
        self.spec = GscSpec(2.0, 3.0)

    def _factor(self, x):
        x = np.asarray(x, dtype=float)
        scale = max(1.0, float(np.max(np.abs(x))))
        if float(np.max(np.abs(x - x.T))) > 1e-8 * scale:
            return None
        try:
            return cho_factor((x + x.T) / 2.0, lower=True)
        except np.linalg.LinAlgError:
            return None
        except ValueError:
            return None

    def value(self, x) -> float:
        factor = self._factor(x)
        if factor is None:
            return math.inf
        logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
        return -logdet + inner(self.sigma, x)

    def gradient(self, x):
        factor = self._factor(x)
        if factor is None:
            raise ValueError("gradient undefined outside the domain")
        x_inv = cho_solve(factor, np.eye(self.p))
        x_inv = (x_inv + x_inv.T) / 2.0
        return self.sigma - x_inv

    def hess_vec(self, x, v):
        # X^{-1} V X^{-1} through two triangular solves per side
        factor = self._factor(x)
        if factor is None:
            raise ValueError("hess_vec undefined outside the domain")
        v = np.asarray(v, dtype=float)
        w = cho_solve(factor, v)
        z = cho_solve(factor, w.T).T
        return (z + z.T) / 2.0

    def in_domain(self, x) -> bool:
        return self._factor(x) is not None

    def max_step(self, x, v):
        # X + tV > 0 iff t * lambda_max(-L^{-1} V L^{-T}) < 1 with X = L L^T
        factor = self._factor(x)
        if factor is None:
            raise ValueError("x must lie in the domain")
        low = np.tril(factor[0])
        y = solve_triangular(low, np.asarray(v, dtype=float), lower=True)
        w = solve_triangular(low, y.T, lower=True)
        lam_min = float(np.linalg.eigvalsh((w + w.T) / 2.0)[0])
        if lam_min >= 0.0:
            return 1.0
        t_raw = 1.0 / -lam_min
        if t_raw * (1.0 - 1e-7) >= 1.0:
            return 1.0
        return min(1.0, t_raw * (1.0 - 1e-7))


def covariance_problem(sigma_hat, radius: float | None = None) -> ProblemInstance:
    obj = CovarianceObjective(sigma_hat)
    if radius is None:
        radius = float(math.ceil(math.sqrt(obj.p)))
    return ProblemInstance(obj, SymmetricL1Ball(obj.p, radius), name="covariance")


def covariance_generator(p: int, seed: int = 0):
    """SPD target sum_i sigma_i v_i v_i^T with a seeded random orthonormal
    basis and sigma_i ~ U(0.5, 1)."""
    if p < 1:
        raise ValueError("need p >= 1")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    sigmas = rng.uniform(0.5, 1.0, size=p)
    s = (q * sigmas) @ q.T
    return (s + s.T) / 2.0
