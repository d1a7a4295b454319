"""Projection-free solvers for generalized self-concordant objectives.

Seven variants share the same trace format: the classic oblivious and
line-search baselines, the analytic-step method, two backtracking methods
(over a local Lipschitz estimate and over the self-concordance constant),
a ball-restricted-oracle accelerated method, and an away-step method with
explicit vertex representation.  A solver run owns its mutable state and is
single-threaded; several runs may share immutable objectives and sets.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .gsc import GscSpec, LocalGeometry, Objective, delta_nu, inner, l2_norm, omega
from .sets import FeasibleSet, SimplexLLOO, VertexSet, gap as fw_gap, max_feasible_step
from .stepsize import PsiParams, analytic_step, t_star

_STALL_LIMIT = 50  # consecutive zero steps before giving up
_BACKTRACK_LIMIT = 100  # doublings; beyond this the model is being misused
# Trial estimates shrink by gamma_d after every accepted step; without a floor
# a long quadratic-like phase drives them so low that recovery would blow the
# doubling budget once real curvature reappears.
_ESTIMATE_FLOOR = 1e-10


class BacktrackingError(RuntimeError):
    """Backtracking exceeded its doubling budget (model misuse)."""


@dataclass
class SolverConfig:
    epsilon: float = 1e-6
    max_iter: int = 1000
    gamma_u: float = 2.0
    gamma_d: float = 0.9
    l_init: float | None = None  # None: curvature probe along the first direction
    mu_init: float = 1.0
    sigma_f: float | None = None  # None: smallest Hessian eigenvalue at x0
    line_search_tol: float = 1e-10
    seed: int = 0
    keep_iterates: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if not (self.gamma_u > 1.0 > self.gamma_d > 0.0):
            raise ValueError("need gamma_u > 1 > gamma_d > 0")


@dataclass
class IterationRecord:
    k: int
    f_value: float
    gap: float  # FW gap, or the modified gap for away-step runs
    alpha: float
    step_kind: str  # forward | away | drop | zero
    backtrack_count: int = 0
    estimate: float | None = None  # L_k, mu_k, or the radius-decay product
    elapsed_seconds: float = 0.0
    predicted_decrease: float | None = None
    certificate: float | None = None
    radius: float | None = None


@dataclass
class RunTrace:
    iterations: list
    status: str  # gap-converged | iteration-cap | stalled
    final_f: float
    final_gap: float
    x: np.ndarray
    meta: dict = field(default_factory=dict)
    iterates: list | None = None

    def f_values(self):
        """Objective value at every iterate, final point included."""
        return [rec.f_value for rec in self.iterations] + [self.final_f]

    def gaps(self):
        return [rec.gap for rec in self.iterations] + [self.final_gap]

    def alphas(self):
        return [rec.alpha for rec in self.iterations]

    def cumulative_seconds(self):
        """Wall time elapsed when each iterate was produced (iterate 0 at 0)."""
        out = [0.0]
        for rec in self.iterations:
            out.append(out[-1] + rec.elapsed_seconds)
        return out

    def best_f(self):
        return min(self.f_values())


class _Run:
    """Shared trace bookkeeping for a single solver execution."""

    def __init__(self, obj: Objective, feasible: FeasibleSet, x0, config: SolverConfig,
                 solver: str):
        x = np.array(x0, dtype=float)
        if not feasible.contains(x, tol=1e-7):
            raise ValueError("initial point is not feasible")
        if not obj.in_domain(x):
            raise ValueError("initial point is outside the domain")
        self.obj = obj
        self.feasible = feasible
        self.config = config
        self.x = x
        self.records = []
        self.status = "iteration-cap"
        self.zero_streak = 0
        self.meta = {"solver": solver, "problem": getattr(obj, "name", "objective")}
        self.iterates = [x.copy()] if config.keep_iterates else None

    def record(self, rec: IterationRecord):
        self.records.append(rec)
        if rec.step_kind == "zero":
            self.zero_streak += 1
        else:
            self.zero_streak = 0

    def move(self, x_new):
        self.x = x_new
        if self.iterates is not None:
            self.iterates.append(np.array(x_new, copy=True))

    def stalled(self) -> bool:
        if self.zero_streak >= _STALL_LIMIT:
            self.status = "stalled"
            return True
        return False

    def finish(self, final_gap=None) -> RunTrace:
        if final_gap is None:
            g = self.obj.gradient(self.x)
            final_gap = fw_gap(g, self.x, self.feasible.lmo(g))
        return RunTrace(iterations=self.records, status=self.status,
                        final_f=self.obj.value(self.x), final_gap=final_gap,
                        x=self.x, meta=self.meta, iterates=self.iterates)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def fw_standard(obj: Objective, feasible: FeasibleSet, x0, config: SolverConfig) -> RunTrace:
    """Oblivious 2/(k+2) schedule; domain-violating candidates are zeroed."""
    run = _Run(obj, feasible, x0, config, "fw-standard")
    for k in range(config.max_iter):
        t0 = time.perf_counter()
        g = obj.gradient(run.x)
        s = feasible.lmo(g)
        gp = fw_gap(g, run.x, s)
        if gp <= config.epsilon:
            run.status = "gap-converged"
            return run.finish(gp)
        alpha = 2.0 / (k + 2.0)
        cand = run.x + alpha * (s - run.x)
        kind = "forward"
        if not obj.in_domain(cand):
            alpha, cand, kind = 0.0, run.x, "zero"
        run.record(IterationRecord(k, obj.value(run.x), gp, alpha, kind,
                                   elapsed_seconds=time.perf_counter() - t0))
        run.move(cand)
        if run.stalled():
            break
    return run.finish()


def _exact_line_search(obj: Objective, x, v, gp, config: SolverConfig) -> float:
    """Bisection on the directional derivative over the domain-feasible range."""
    t_max = max_feasible_step(obj, x, v)

    def slope(t):
        return inner(obj.gradient(x + t * v), v)

    if slope(t_max) <= 0.0:
        return t_max
    lo, hi = 0.0, t_max  # slope(0) = -gap < 0
    for _ in range(200):
        if hi - lo <= config.line_search_tol:
            break
        mid = 0.5 * (lo + hi)
        if slope(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fw_line_search(obj: Objective, feasible: FeasibleSet, x0, config: SolverConfig) -> RunTrace:
    """Exact line search within the domain-feasible segment."""
    run = _Run(obj, feasible, x0, config, "fw-line-search")
    for k in range(config.max_iter):
        t0 = time.perf_counter()
        g = obj.gradient(run.x)
        s = feasible.lmo(g)
        gp = fw_gap(g, run.x, s)
        if gp <= config.epsilon:
            run.status = "gap-converged"
            return run.finish(gp)
        v = s - run.x
        alpha = _exact_line_search(obj, run.x, v, gp, config)
        run.record(IterationRecord(k, obj.value(run.x), gp, alpha, "forward",
                                   elapsed_seconds=time.perf_counter() - t0))
        run.move(run.x + alpha * v)
    return run.finish()


# ---------------------------------------------------------------------------
# Analytic step
# ---------------------------------------------------------------------------

def fwgsc(obj: Objective, feasible: FeasibleSet, x0, config: SolverConfig) -> RunTrace:
    """Frank-Wolfe with the closed-form step from the GSC descent model.

    Every iterate stays feasible and in the domain without any line search
    or domain oracle, and f decreases by at least the recorded prediction.
    """
    run = _Run(obj, feasible, x0, config, "fwgsc")
    for k in range(config.max_iter):
        t0 = time.perf_counter()
        g = obj.gradient(run.x)
        s = feasible.lmo(g)
        gp = fw_gap(g, run.x, s)
        if gp <= config.epsilon:
            run.status = "gap-converged"
            return run.finish(gp)
        v = s - run.x
        geom = LocalGeometry.from_direction(obj, run.x, v, gp)
        dec = analytic_step(obj.spec, geom, cap=1.0)
        run.record(IterationRecord(k, obj.value(run.x), gp, dec.alpha, "forward",
                                   predicted_decrease=dec.predicted_decrease,
                                   elapsed_seconds=time.perf_counter() - t0))
        run.move(run.x + dec.alpha * v)
    return run.finish()


# ---------------------------------------------------------------------------
# Backtracking over the local Lipschitz estimate
# ---------------------------------------------------------------------------

def step_l(obj: Objective, feasible: FeasibleSet, v, x, l_prev: float,
           config: SolverConfig, *, gap_value=None, f_x=None):
    """Quadratic-model backtracking: doubles the estimate until the candidate
    is in the domain and below the model.  Returns (alpha, L_new, backtracks,
    candidate, f_candidate)."""
    g = None
    if gap_value is None:
        g = obj.gradient(x)
        gap_value = -inner(g, v)
    if f_x is None:
        f_x = obj.value(x)
    beta2 = inner(v, v)
    if beta2 <= 0.0:
        raise ValueError("zero direction")
    lt = max(config.gamma_d * l_prev, _ESTIMATE_FLOOR)
    slack = 1e-12 * (1.0 + abs(f_x))
    for trial in range(_BACKTRACK_LIMIT + 1):
        alpha = min(1.0, gap_value / (lt * beta2))
        cand = x + alpha * v
        if obj.in_domain(cand):
            f_cand = obj.value(cand)
            model = f_x - alpha * gap_value + 0.5 * lt * alpha * alpha * beta2
            if f_cand <= model + slack:
                return alpha, lt, trial, cand, f_cand
        lt *= config.gamma_u
    raise BacktrackingError("quadratic-model backtracking exceeded 100 doublings")


def _probe_l_init(obj: Objective, feasible: FeasibleSet, x) -> float:
    """One finite-difference curvature probe along the first search direction."""
    g = obj.gradient(x)
    v = feasible.lmo(g) - x
    beta2 = inner(v, v)
    if beta2 == 0.0:
        return 1.0
    h = 1e-6
    for _ in range(40):
        if obj.in_domain(x + h * v):
            break
        h *= 0.1
    else:
        return 1.0
    curv = abs(inner(obj.gradient(x + h * v) - g, v)) / (h * beta2)
    return max(curv, 1e-6)


def lbtfwgsc(obj: Objective, feasible: FeasibleSet, x0, config: SolverConfig) -> RunTrace:
    """Backtracking over the gradient's local Lipschitz modulus."""
    run = _Run(obj, feasible, x0, config, "lbtfwgsc")
    l_prev = config.l_init if config.l_init is not None else _probe_l_init(obj, feasible, run.x)
    run.meta["l_init"] = l_prev
    for k in range(config.max_iter):
        t0 = time.perf_counter()
        g = obj.gradient(run.x)
        s = feasible.lmo(g)
        gp = fw_gap(g, run.x, s)
        if gp <= config.epsilon:
            run.status = "gap-converged"
            return run.finish(gp)
        v = s - run.x
        f_x = obj.value(run.x)
        alpha, l_prev, backtracks, cand, _ = step_l(
            obj, feasible, v, run.x, l_prev, config, gap_value=gp, f_x=f_x)
        run.record(IterationRecord(k, f_x, gp, alpha, "forward",
                                   backtrack_count=backtracks, estimate=l_prev,
                                   elapsed_seconds=time.perf_counter() - t0))
        run.move(cand)
    return run.finish()


# ---------------------------------------------------------------------------
# Backtracking over the self-concordance constant
# ---------------------------------------------------------------------------

def step_m(obj: Objective, feasible: FeasibleSet, v, x, mu_prev: float,
           config: SolverConfig, *, gap_value=None, f_x=None, geom=None):
    """Backtracking over the GSC constant: the trial constant is doubled until
    the analytic step it induces satisfies the matching upper model."""
    if gap_value is None:
        gap_value = -inner(obj.gradient(x), v)
    if f_x is None:
        f_x = obj.value(x)
    if geom is None:
        geom = LocalGeometry.from_direction(obj, x, v, gap_value)
    nu = obj.spec.nu
    mt = max(config.gamma_d * mu_prev, _ESTIMATE_FLOOR)
    slack = 1e-12 * (1.0 + abs(f_x))
    for trial in range(_BACKTRACK_LIMIT + 1):
        dec = analytic_step(GscSpec(mt, nu), geom, cap=1.0)
        cand = x + dec.alpha * v
        if obj.in_domain(cand):
            f_cand = obj.value(cand)
            if f_cand <= f_x - dec.predicted_decrease + slack:
                return dec.alpha, mt, trial, cand, f_cand
        mt *= config.gamma_u
    raise BacktrackingError("GSC-constant backtracking exceeded 100 doublings")


def mbtfwgsc(obj: Objective, feasible: FeasibleSet, x0, config: SolverConfig) -> RunTrace:
    """Backtracking over the generalized self-concordance constant."""
    run = _Run(obj, feasible, x0, config, "mbtfwgsc")
    mu_prev = config.mu_init
    for k in range(config.max_iter):
        t0 = time.perf_counter()
        g = obj.gradient(run.x)
        s = feasible.lmo(g)
        gp = fw_gap(g, run.x, s)
        if gp <= config.epsilon:
            run.status = "gap-converged"
            return run.finish(gp)
        v = s - run.x
        f_x = obj.value(run.x)
        geom = LocalGeometry.from_direction(obj, run.x, v, gp)
        alpha, mu_prev, backtracks, cand, _ = step_m(
            obj, feasible, v, run.x, mu_prev, config, gap_value=gp, f_x=f_x, geom=geom)
        run.record(IterationRecord(k, f_x, gp, alpha, "forward",
                                   backtrack_count=backtracks, estimate=mu_prev,
                                   elapsed_seconds=time.perf_counter() - t0))
        run.move(cand)
    return run.finish()


# ---------------------------------------------------------------------------
# Ball-restricted oracle acceleration
# ---------------------------------------------------------------------------

@dataclass
class LlooState:
    """Radius-decay bookkeeping: r_k^2 = r_0^2 c_k, c_{k+1} = c_k e^(-alpha_k/2)."""
    r_0: float
    c_k: float = 1.0

    @property
    def r_k(self) -> float:
        return self.r_0 * math.sqrt(self.c_k)

    def shrink(self, alpha: float):
        self.c_k *= math.exp(-0.5 * alpha)


def smallest_hessian_eigenvalue(obj: Objective, x) -> float:
    """Assembles the Hessian column by column through hess_vec."""
    n = np.asarray(x).size
    h = np.empty((n, n))
    basis = np.zeros(n)
    for i in range(n):
        basis[i] = 1.0
        h[:, i] = np.ravel(obj.hess_vec(x, basis.reshape(np.shape(x))))
        basis[i] = 0.0
    return float(np.linalg.eigvalsh((h + h.T) / 2.0)[0])


def fwlloo(obj: Objective, feasible: FeasibleSet, lloo, x0, config: SolverConfig) -> RunTrace:
    """Ball-restricted oracle variant with geometrically shrinking radius.

    Maintains the certificate f(x_k) - f* <= gap(x_0) * c_k with
    c_k = exp(-sum alpha_i / 2).  Needs a strong-convexity estimate sigma_f;
    when absent it is taken as the smallest Hessian eigenvalue at the start,
    floored at 1e-10.
    """
    run = _Run(obj, feasible, x0, config, "fwlloo")
    sigma = config.sigma_f
    if sigma is None:
        sigma = max(smallest_hessian_eigenvalue(obj, run.x), 1e-10)
    if not sigma > 0.0:
        raise ValueError("sigma_f must be positive")
    run.meta["sigma_f"] = sigma

    g0 = obj.gradient(run.x)
    gap0 = fw_gap(g0, run.x, feasible.lmo(g0))
    if gap0 <= config.epsilon:
        run.status = "gap-converged"
        return run.finish(gap0)
    state = LlooState(r_0=math.sqrt(2.0 * gap0 / sigma))
    run.meta["r_0"] = state.r_0

    for k in range(config.max_iter):
        t0 = time.perf_counter()
        g = obj.gradient(run.x)
        s = feasible.lmo(g)
        gp = fw_gap(g, run.x, s)
        if gp <= config.epsilon:
            run.status = "gap-converged"
            return run.finish(gp)
        u = lloo.query(run.x, state.r_k, g)
        v = u - run.x
        beta = l2_norm(v)
        if beta == 0.0:
            run.record(IterationRecord(k, obj.value(run.x), gp, 0.0, "zero",
                                       estimate=state.c_k, certificate=gap0 * state.c_k,
                                       radius=state.r_k,
                                       elapsed_seconds=time.perf_counter() - t0))
            if run.stalled():
                break
            continue
        e2 = max(inner(obj.hess_vec(run.x, v), v), 0.0)
        e = math.sqrt(e2)
        params = PsiParams(delta=obj.spec.m * delta_nu(obj.spec, beta, e),
                           xi=2.0 * e2 / (gap0 * state.c_k), nu=obj.spec.nu)
        alpha = min(1.0, t_star(params))
        run.record(IterationRecord(k, obj.value(run.x), gp, alpha, "forward",
                                   estimate=state.c_k, certificate=gap0 * state.c_k,
                                   radius=state.r_k,
                                   elapsed_seconds=time.perf_counter() - t0))
        run.move(run.x + alpha * v)
        state.shrink(alpha)
    return run.finish()


# ---------------------------------------------------------------------------
# Away steps with vertex representation
# ---------------------------------------------------------------------------

_PURGE_TOL = 1e-12


class ActiveSet:
    """Iterate as an explicit convex combination of polytope vertices."""

    def __init__(self, items):
        # items: iterable of (vertex_id, vertex_point, weight)
        self.points = {}
        self.weights = {}
        for vid, point, w in items:
            self.points[vid] = np.array(point, dtype=float)
            self.weights[vid] = self.weights.get(vid, 0.0) + float(w)
        self._normalize()

    @classmethod
    def single(cls, vid, point) -> "ActiveSet":
        return cls([(vid, point, 1.0)])

    def _normalize(self):
        for vid in [v for v, w in self.weights.items() if w < _PURGE_TOL]:
            del self.weights[vid]
            del self.points[vid]
        total = sum(self.weights.values())
        if not self.weights or not math.isfinite(total) or total <= 0.0:
            raise ValueError("active set lost all mass")
        if abs(total - 1.0) > 1e-15:
            for vid in self.weights:
                self.weights[vid] /= total

    def forward_update(self, vid, point, alpha: float):
        """x <- (1 - alpha) x + alpha * vertex."""
        for w in self.weights:
            self.weights[w] *= (1.0 - alpha)
        self.points.setdefault(vid, np.array(point, dtype=float))
        self.weights[vid] = self.weights.get(vid, 0.0) + alpha
        self._normalize()

    def away_update(self, vid, alpha: float):
        """x <- (1 + alpha) x - alpha * vertex; alpha = weight/(1-weight) drops it."""
        for w in self.weights:
            self.weights[w] *= (1.0 + alpha)
        self.weights[vid] -= alpha
        self._normalize()

    def weight(self, vid) -> float:
        return self.weights.get(vid, 0.0)

    def reconstruct(self):
        out = None
        for vid, w in self.weights.items():
            term = w * self.points[vid]
            out = term if out is None else out + term
        return out

    def __len__(self):
        return len(self.weights)

    def ids(self):
        return sorted(self.weights)


def away_vertex(grad, active: ActiveSet):
    """Active vertex most aligned with the gradient (lowest id on ties)."""
    if len(active) == 0:
        raise ValueError("active set is empty")
    best_id, best_val = None, -math.inf
    for vid in active.ids():
        val = inner(grad, active.points[vid])
        if val > best_val:
            best_id, best_val = vid, val
    return best_id, active.points[best_id]


def asfwgsc(obj: Objective, polytope: VertexSet, start, config: SolverConfig) -> RunTrace:
    """Away-step variant over a polytope with vertex-representation updates.

    ``start`` is either an ActiveSet or a (vertex_id, vertex) pair.  Away
    steps are capped at weight/(1-weight); hitting the cap drops the vertex.
    """
    if not isinstance(polytope, VertexSet):
        raise ValueError("away-step solver needs a polytope with vertex ids")
    if isinstance(start, ActiveSet):
        # the run owns its bookkeeping; never mutate the caller's copy
        active = ActiveSet([(vid, start.points[vid], w)
                            for vid, w in start.weights.items()])
    else:
        vid, point = start
        active = ActiveSet.single(vid, point)
    x0 = active.reconstruct()

    run = _Run(obj, polytope, x0, config, "asfwgsc")
    drift = 0.0
    forced_forward = 0
    drop_count = 0
    final_gap = None
    for k in range(config.max_iter):
        t0 = time.perf_counter()
        g = obj.gradient(run.x)
        sid, s = polytope.lmo_indexed(g)
        gp = fw_gap(g, run.x, s)
        if gp <= config.epsilon:
            run.status = "gap-converged"
            final_gap = gp
            break
        uid, u = away_vertex(g, active)
        away_gap = inner(g, u) - inner(g, run.x)
        forward = gp >= away_gap
        if not forward and active.weight(uid) >= 1.0 - 1e-12:
            forward = True  # away from the only vertex is undefined; flag it
            forced_forward += 1
        if forward:
            v = s - run.x
            t_bar = 1.0
            kind = "forward"
        else:
            v = run.x - u
            mu_u = active.weight(uid)
            t_bar = mu_u / (1.0 - mu_u)
            kind = "away"
        g_mod = max(gp, away_gap) if not forward else gp
        geom = LocalGeometry.from_direction(obj, run.x, v, g_mod)
        dec = analytic_step(obj.spec, geom, cap=t_bar)
        alpha = dec.alpha
        drop = kind == "away" and alpha >= t_bar
        if drop:
            kind = "drop"
            drop_count += 1
        run.record(IterationRecord(k, obj.value(run.x), g_mod, alpha, kind,
                                   predicted_decrease=dec.predicted_decrease,
                                   elapsed_seconds=time.perf_counter() - t0))
        run.move(run.x + alpha * v)
        if forward:
            active.forward_update(sid, s, alpha)
        else:
            active.away_update(uid, alpha)
        drift = max(drift, l2_norm(active.reconstruct() - run.x) / (1.0 + l2_norm(run.x)))
    run.meta["active_set_max_drift"] = drift
    run.meta["forced_forward_steps"] = forced_forward
    run.meta["drop_steps"] = drop_count
    run.meta["active_set_size"] = len(active)
    return run.finish(final_gap)


# ---------------------------------------------------------------------------
# Registry used by the benchmark harness
# ---------------------------------------------------------------------------

def make_simplex_lloo(n: int) -> SimplexLLOO:
    return SimplexLLOO(n)


SOLVERS = {
    "fw-standard": fw_standard,
    "fw-line-search": fw_line_search,
    "fwgsc": fwgsc,
    "lbtfwgsc": lbtfwgsc,
    "mbtfwgsc": mbtfwgsc,
    "fwlloo": fwlloo,
    "asfwgsc": asfwgsc,
}
