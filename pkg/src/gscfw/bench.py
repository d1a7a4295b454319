"""Experiment harness: config-driven grids, relative-error statistics, and
performance profiles.

A grid run executes (problem x method x start) cells, estimates each
problem's optimal value as the best value any method attained, writes one
line-delimited record file per run, and a CSV profile summary.  Fixed-seed
reruns are bit-identical apart from wall-time fields.
"""

from __future__ import annotations

import csv
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .problems import (ProblemInstance, covariance_generator, covariance_problem,
                       dwd_problem, logistic_problem, portfolio_generator,
                       portfolio_problem, synthetic_classification)
from .sets import NonnegativeBall, UnitSimplex
from .solvers import (SOLVERS, ActiveSet, RunTrace, SolverConfig, asfwgsc, fwlloo,
                      make_simplex_lloo)

WORKER_ENV = "GSCFW_WORKERS"


class ConfigError(ValueError):
    """Malformed experiment configuration."""


# ---------------------------------------------------------------------------
# Relative error and profile statistics
# ---------------------------------------------------------------------------

def relative_error(f_value: float, f_star: float) -> float:
    """(f - f*) / max(|f*|, 1e-12); the absolute-value denominator keeps the
    statistic meaningful for negative optima.  Rounding-level negativity is
    clamped to zero."""
    err = (f_value - f_star) / max(abs(f_star), 1e-12)
    if -1e-12 <= err < 0.0:
        return 0.0
    return err


@dataclass(frozen=True)
class RunRecord:
    problem: str
    method: str
    start: int
    trace: RunTrace
    f_star_estimate: float

    def errors(self):
        return [relative_error(f, self.f_star_estimate) for f in self.trace.f_values()]

    def first_hit(self, epsilon: float):
        """Smallest iteration index k with relative error <= epsilon, or None."""
        for k, err in enumerate(self.errors()):
            if err <= epsilon:
                return k
        return None

    def time_to_hit(self, epsilon: float):
        k = self.first_hit(epsilon)
        if k is None:
            return None
        return self.trace.cumulative_seconds()[k]


@dataclass(frozen=True)
class ProfilePoint:
    epsilon: float
    method: str
    rho: float
    rho_iter: float | None
    rho_time: float | None


def success_ratio(records, epsilon: float) -> float:
    """Fraction of (problem, start) runs of one method reaching epsilon."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    hits = sum(1 for r in records if r.first_hit(epsilon) is not None)
    return hits / len(records)


def _ratio_average(records, epsilon: float, score):
    """Double average of score ratios against the per-instance best method."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    methods = sorted({r.method for r in records})
    problems = sorted({r.problem for r in records})
    by_instance = {}
    for r in records:
        by_instance.setdefault((r.problem, r.start), {})[r.method] = score(r, epsilon)
    if not any(v is not None for inst in by_instance.values() for v in inst.values()):
        raise ValueError("no successful instance anywhere")

    out = {}
    for method in methods:
        per_problem = []
        for problem in problems:
            ratios = []
            for (prob, _start), scores in by_instance.items():
                if prob != problem or scores.get(method) is None:
                    continue
                best = min(v for v in scores.values() if v is not None)
                own = scores[method]
                if best <= 0.0:
                    ratios.append(1.0 if own <= 0.0 else max(own, 1.0))
                else:
                    ratios.append(own / best)
            if ratios:
                per_problem.append(sum(ratios) / len(ratios))
        if per_problem:
            out[method] = sum(per_problem) / len(per_problem)
    return out


def iteration_ratio(records, epsilon: float):
    """Average iteration ratio per method (1 is best-possible)."""
    return _ratio_average(records, epsilon, lambda r, eps: r.first_hit(eps))


def time_ratio(records, epsilon: float):
    """Average wall-time ratio per method (excluded from determinism checks)."""
    return _ratio_average(records, epsilon, lambda r, eps: r.time_to_hit(eps))


def profile_points(records, epsilons):
    """Per-method profile rows over an epsilon grid."""
    records = list(records)
    methods = sorted({r.method for r in records})
    rows = []
    for eps in sorted(epsilons):
        try:
            iters = iteration_ratio(records, eps)
            times = time_ratio(records, eps)
        except ValueError:
            iters, times = {}, {}
        for method in methods:
            mine = [r for r in records if r.method == method]
            rows.append(ProfilePoint(epsilon=eps, method=method,
                                     rho=success_ratio(mine, eps),
                                     rho_iter=iters.get(method),
                                     rho_time=times.get(method)))
    return rows


# ---------------------------------------------------------------------------
# Problem and start construction from grid specs
# ---------------------------------------------------------------------------

DEFAULT_SIZES = {
    "logistic": {"p": 500, "n": 50, "density": 0.15, "gamma": None, "radius": 10.0, "nu_mode": 2},
    "portfolio": {"p": 200, "n": 100},
    "dwd": {"p": 200, "d": 30, "q": 2.0, "u": 5.0, "big_r": 10.0},
    "covariance": {"p": 30},
}


def build_problem(spec: dict) -> ProblemInstance:
    """Instantiate a benchmark problem from a grid-spec dictionary."""
    spec = dict(spec)
    name = spec.pop("name", None)
    seed = int(spec.pop("seed", 0))
    if name not in DEFAULT_SIZES:
        raise ConfigError(f"unknown problem {name!r}")
    params = {**DEFAULT_SIZES[name], **spec}
    if name == "logistic":
        data = synthetic_classification(int(params["p"]), int(params["n"]),
                                        density=float(params["density"]), seed=seed)
        gamma = params["gamma"]
        gamma = 1.0 / data.count if gamma is None else float(gamma)
        return logistic_problem(data, gamma, float(params["radius"]), int(params["nu_mode"]))
    if name == "portfolio":
        returns = portfolio_generator(int(params["p"]), int(params["n"]), seed)
        return portfolio_problem(returns)
    if name == "dwd":
        data = synthetic_classification(int(params["p"]), int(params["d"]), seed=seed)
        return dwd_problem(data, q=float(params["q"]), u=float(params["u"]),
                           big_r=float(params["big_r"]))
    returns = covariance_generator(int(params["p"]), seed)
    return covariance_problem(returns)


def make_start(instance: ProblemInstance, start_seed: int):
    """Starting point recipe per problem family.

    Returns (x0, active) with active an ActiveSet when a vertex
    representation is available (needed by the away-step solver).
    logistic: random l1-ball vertex; portfolio: random simplex vertex;
    dwd: (0, 0, xi) with xi drawn from its block; covariance: a random
    diagonal matrix with diagonal on the scaled simplex.
    """
    rng = np.random.default_rng(np.random.SeedSequence([abs(start_seed), 977]))
    family = instance.name.split("-")[0]
    feasible = instance.feasible_set
    obj = instance.objective
    if family == "logistic":
        i = int(rng.integers(feasible.dimension))
        sign = 1 if rng.integers(2) else -1
        vid = (i, sign)
        x0 = feasible.vertex(vid)
        return x0, ActiveSet.single(vid, x0)
    if family == "portfolio":
        for _ in range(1000):
            i = int(rng.integers(feasible.dimension))
            x0 = feasible.vertex(i)
            if obj.in_domain(x0):
                return x0, ActiveSet.single(i, x0)
        raise ConfigError("no feasible simplex vertex found")
    if family == "dwd":
        d = obj.d
        p = obj.p
        radius = math.sqrt(10.0)
        for block in feasible.blocks:
            if isinstance(block, NonnegativeBall):
                radius = block.radius
        direction = np.abs(rng.standard_normal(p))
        direction /= max(np.linalg.norm(direction), 1e-300)
        xi = direction * radius * rng.uniform() ** (1.0 / p)
        x0 = np.concatenate([np.zeros(d), [0.0], xi])
        if not obj.in_domain(x0):
            x0[d + 1:] = np.maximum(xi, 1e-6)
        return x0, None
    if family == "covariance":
        p = obj.p
        diag = rng.dirichlet(np.ones(p)) * feasible.radius
        x0 = np.diag(diag)
        active = ActiveSet([((i, i, 1), feasible.vertex((i, i, 1)), diag[i] / feasible.radius)
                            for i in range(p)])
        return x0, active
    raise ConfigError(f"no start recipe for {instance.name!r}")


def run_method(method: str, instance: ProblemInstance, x0, active, config: SolverConfig) -> RunTrace:
    if method not in SOLVERS:
        raise ConfigError(f"unknown method {method!r}")
    if method == "asfwgsc":
        if active is None:
            raise ConfigError(f"{instance.name} provides no vertex representation "
                              "for the away-step solver")
        return asfwgsc(instance.objective, instance.feasible_set, active, config)
    if method == "fwlloo":
        feasible = instance.feasible_set
        if not isinstance(feasible, UnitSimplex):
            raise ConfigError("fwlloo requires a set with a ball-restricted oracle "
                              "(unit simplex only)")
        return fwlloo(instance.objective, feasible, make_simplex_lloo(feasible.dimension),
                      x0, config)
    return SOLVERS[method](instance.objective, instance.feasible_set, x0, config)


# ---------------------------------------------------------------------------
# Record serialization
# ---------------------------------------------------------------------------

def trace_to_lines(problem: str, method: str, start: int, trace: RunTrace,
                   f_star_estimate=None):
    """Line-delimited record: one header object, then one object per iteration."""
    header = {
        "type": "header", "problem": problem, "method": method, "start": start,
        "status": trace.status, "final_f": float(trace.final_f),
        "final_gap": float(trace.final_gap),
        "f_star_estimate": None if f_star_estimate is None else float(f_star_estimate),
        "n_iterations": len(trace.iterations),
    }
    lines = [json.dumps(header, sort_keys=True)]
    for rec in trace.iterations:
        row = {
            "k": rec.k, "f": float(rec.f_value), "gap": float(rec.gap),
            "alpha": float(rec.alpha), "kind": rec.step_kind,
            "backtracks": rec.backtrack_count,
            "estimate": None if rec.estimate is None else float(rec.estimate),
            "elapsed": float(rec.elapsed_seconds),
        }
        if rec.predicted_decrease is not None:
            row["predicted"] = float(rec.predicted_decrease)
        if rec.certificate is not None:
            row["certificate"] = float(rec.certificate)
        lines.append(json.dumps(row, sort_keys=True))
    return lines


def write_record(path: Path, lines):
    path.write_text("\n".join(lines) + "\n")


def record_filename(problem: str, method: str, start: int) -> str:
    return f"{problem}__{method}__s{start}.jsonl"


# ---------------------------------------------------------------------------
# Grid runner
# ---------------------------------------------------------------------------

_SOLVER_FIELDS = ("epsilon", "max_iter", "gamma_u", "gamma_d", "l_init", "mu_init",
                  "sigma_f", "line_search_tol", "seed")


def _parse_config(config: dict):
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("problems", "methods"):
        if key not in config or not isinstance(config[key], list) or not config[key]:
            raise ConfigError(f"config needs a nonempty {key!r} list")
    solver_kwargs = {k: config[k] for k in _SOLVER_FIELDS if k in config}
    try:
        solver_config = SolverConfig(**solver_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc
    n_starts = int(config.get("n_starts", 1))
    if n_starts < 1:
        raise ConfigError("n_starts must be at least 1")
    methods = list(config["methods"])
    for m in methods:
        if m not in SOLVERS:
            raise ConfigError(f"unknown method {m!r}")
    problems = []
    for spec in config["problems"]:
        if not isinstance(spec, dict) or spec.get("name") not in DEFAULT_SIZES:
            raise ConfigError(f"bad problem spec {spec!r}")
        problems.append(dict(spec))
    return problems, methods, n_starts, solver_config


def _cell_id(problem_spec: dict) -> str:
    name = problem_spec["name"]
    tags = [f"{k}{problem_spec[k]}" for k in sorted(problem_spec) if k != "name"]
    return "-".join([name] + tags) if tags else name


def _run_cell(payload):
    """Worker entry: build everything locally so cells are independent."""
    problem_spec, method, start_index, base_seed, solver_kwargs = payload
    instance = build_problem(problem_spec)
    config = SolverConfig(**solver_kwargs)
    cell_tag = zlib.crc32(_cell_id(problem_spec).encode())  # stable across processes
    start_seed = int(np.random.SeedSequence(
        [base_seed, cell_tag, start_index]).generate_state(1)[0])
    x0, active = make_start(instance, start_seed)
    trace = run_method(method, instance, x0, active, config)
    return _cell_id(problem_spec), method, start_index, trace


def run_experiment(config, out_dir=None, dry_run: bool = False):
    """Execute a (problem x method x start) grid and write record files.

    Returns the list of RunRecords (empty for a dry run).  Worker count is
    taken from the GSCFW_WORKERS environment variable (default 1).
    """
    if isinstance(config, (str, Path)):
        try:
            config = json.loads(Path(config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    problems, methods, n_starts, solver_config = _parse_config(config)
    out_dir = Path(out_dir if out_dir is not None else config.get("out_dir", "records"))

    cells = [(spec, method, start, int(config.get("seed", solver_config.seed)),
              {k: getattr(solver_config, k) for k in _SOLVER_FIELDS})
             for spec in problems for method in methods for start in range(n_starts)]
    if dry_run:
        for spec, method, start, _, _ in cells:
            print(f"{_cell_id(spec)} x {method} x start{start}")
        return []

    workers = int(os.environ.get(WORKER_ENV, "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]

    # f*_j: best value attained on problem j by any method from any start
    f_star = {}
    for problem, _method, _start, trace in results:
        best = trace.best_f()
        f_star[problem] = min(f_star.get(problem, math.inf), best)

    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for problem, method, start, trace in results:
        records.append(RunRecord(problem, method, start, trace, f_star[problem]))
        lines = trace_to_lines(problem, method, start, trace, f_star[problem])
        write_record(out_dir / record_filename(problem, method, start), lines)

    epsilons = config.get("profile_epsilons", [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    write_profile_csv(out_dir / "profiles.csv", profile_points(records, epsilons))
    return records


def write_profile_csv(path: Path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", "method", "rho", "rho_iter", "rho_time"])
        for row in rows:
            writer.writerow([
                f"{row.epsilon:g}", row.method, f"{row.rho:.6f}",
                "" if row.rho_iter is None else f"{row.rho_iter:.6f}",
                "" if row.rho_time is None else f"{row.rho_time:.6f}",
            ])


def load_records(directory) -> list:
    """Read record files back into RunRecords (for the profile subcommand)."""
    from .solvers import IterationRecord
    out = []
    for path in sorted(Path(directory).glob("*.jsonl")):
        lines = path.read_text().splitlines()
        header = json.loads(lines[0])
        iterations = []
        for line in lines[1:]:
            row = json.loads(line)
            iterations.append(IterationRecord(
                k=row["k"], f_value=row["f"], gap=row["gap"], alpha=row["alpha"],
                step_kind=row["kind"], backtrack_count=row.get("backtracks", 0),
                estimate=row.get("estimate"), elapsed_seconds=row.get("elapsed", 0.0),
                predicted_decrease=row.get("predicted"),
                certificate=row.get("certificate")))
        trace = RunTrace(iterations=iterations, status=header["status"],
                         final_f=header["final_f"], final_gap=header["final_gap"],
                         x=np.empty(0), meta={"problem": header["problem"],
                                              "solver": header["method"]})
        f_star = header.get("f_star_estimate")
        if f_star is None:
            f_star = trace.best_f()
        out.append(RunRecord(header["problem"], header["method"], header["start"],
                             trace, f_star))
    return out
