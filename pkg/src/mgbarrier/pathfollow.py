"""Central-path following: naive schedules, Algorithm MGB, and the practical
MGB algorithm with direct steps and adaptive step sizes.

All strategies record a PathTrace with per-(step, level) Newton counts,
decrements, objective values and timings, emitted as CSV.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import LevelObjective
from .newton import CONVERGED, center

STATUS_CONVERGED = "converged"
STATUS_BUDGET = "budget"
STATUS_FAILURE = "solver-failure"

CSV_HEADER = "k,t,rho,level,newton_iters,direct_step,objective,decrement,cum_newton,wall_ms"


@dataclass
class PathConfig:
    rho0: float = 2.0
    c_stp: float = 1.0
    t_cap: float = 1e8
    t0: float | None = None       # absolute t0; None -> h_fine^d scaling
    theta: float = 0.5            # naive theta-schedule parameter
    direct_cap: int = 5           # Newton cap for the practical direct step
    lam_tol: float = 1e-3         # intermediate centering tolerance
    lam_tol_final: float = 1e-6   # final centering tolerance
    max_center_iters: int = 500
    budget_s: float = 300.0

    def __post_init__(self):
        if self.rho0 <= 1.0:
            raise ValueError("rho0 must be > 1")

    def initial_t(self, problem):
        if self.t0 is not None:
            return float(self.t0)
        h = problem.h_fine()
        return h ** problem.fine_fesys.d

    def stop_t(self, problem):
        h = problem.h_fine()
        return min(self.c_stp * h ** (-2 * problem.spec.alpha), self.t_cap)


@dataclass
class TraceRow:
    k: int
    t: float
    rho: float
    level: int          # 0 = direct step, 1..L = grid level, -1 = step summary
    newton_iters: int
    direct_step: int
    objective: float
    decrement: float
    cum_newton: int
    wall_ms: float


@dataclass
class PathTrace:
    rows: list = field(default_factory=list)
    status: str = STATUS_CONVERGED
    costs: list = field(default_factory=list)   # (k, t, int^(h) c[z^(k)])
    iterates: list = field(default_factory=list)  # (k, z) fine iterates if stored
    z_final: np.ndarray | None = None
    t_final: float = 0.0
    failure_reason: str = ""

    @property
    def total_newton(self):
        return self.rows[-1].cum_newton if self.rows else 0

    def summary_rows(self):
        return [r for r in self.rows if r.level == -1]

    def max_step_newton(self, min_k=1):
        """max_k m_k over path steps k >= min_k."""
        vals = [r.newton_iters for r in self.summary_rows() if r.k >= min_k]
        return max(vals) if vals else 0

    def step_sizes(self, min_k=1):
        return [r.rho for r in self.summary_rows() if r.k >= min_k]

    def to_csv(self, wall_times=True):
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for r in self.rows:
            wall = r.wall_ms if wall_times else 0.0
            buf.write(
                f"{r.k},{float(r.t)!r},{float(r.rho)!r},{r.level},"
                f"{r.newton_iters},{r.direct_step},{float(r.objective)!r},"
                f"{float(r.decrement)!r},{r.cum_newton},{float(wall)!r}\n"
            )
        return buf.getvalue()

    def write_csv(self, path, wall_times=True):
        with open(path, "w") as fh:
            fh.write(self.to_csv(wall_times=wall_times))

    @staticmethod
    def rows_from_csv(text):
        lines = text.strip().splitlines()
        if lines[0] != CSV_HEADER:
            raise ValueError("unexpected trace CSV header")
        rows = []
        for line in lines[1:]:
            k, t, rho, lvl, m, ds, obj, dec, cum, wall = line.split(",")
            rows.append(TraceRow(int(k), float(t), float(rho), int(lvl),
                                 int(m), int(ds), float(obj), float(dec),
                                 int(cum), float(wall)))
        return rows


def adapt_stepsize(rho_prev, m_k):
    """Step-size adaptation from the worst per-level Newton count m_k."""
    if m_k <= 2:
        return rho_prev * rho_prev
    if m_k <= 5:
        return rho_prev
    return math.sqrt(rho_prev)


class _Run:
    """Shared bookkeeping for one path-following run."""

    def __init__(self, problem, config, store_iterates=False):
        self.problem = problem
        self.config = config
        self.store_iterates = store_iterates
        self.trace = PathTrace()
        self.cum_newton = 0
        self.t_start = time.monotonic()

    def wall_ms(self):
        return (time.monotonic() - self.t_start) * 1e3

    def over_budget(self):
        return time.monotonic() - self.t_start > self.config.budget_s

    def add_row(self, k, t, rho, level, m, direct, objective, decrement):
        self.cum_newton += m
        self.trace.rows.append(TraceRow(
            k, t, rho, level, m, int(direct), objective, decrement,
            self.cum_newton, self.wall_ms(),
        ))

    def record_step(self, k, t, z_fine):
        self.trace.costs.append((k, t, self.problem.fine_objective.cost_integral(z_fine)))
        if self.store_iterates:
            self.trace.iterates.append((k, z_fine.copy()))
        self.trace.z_final = z_fine
        self.trace.t_final = t

    def fail(self, reason, status=STATUS_FAILURE):
        self.trace.status = status
        self.trace.failure_reason = reason
        return self.trace


def mgb_t_step(problem, z_k, t_next, config, run=None, k=0, rho=0.0):
    """One Algorithm MGB step: center the shifted path on levels 1..L.

    Returns (z_next, per-level Newton counts) or (None, counts) on failure.
    """
    L = problem.L
    obj = problem.fine_objective
    counts = []
    y = None
    for lvl in range(L):
        P = problem.P_free_to_fine[lvl]
        level_obj = LevelObjective(obj, z_k, P)
        if y is None:
            y0 = np.zeros(level_obj.dim)
        else:
            y0 = problem.P_free[lvl - 1] @ y
        res = center(level_obj, y0, t_next,
                     lam_tol=config.lam_tol, max_iters=config.max_center_iters)
        counts.append(res.iterations)
        val = level_obj.value(res.y, t_next)
        if run is not None:
            run.add_row(k, t_next, rho, lvl + 1, res.iterations, False,
                        val, res.decrement)
        if res.status != CONVERGED:
            return None, counts, f"level {lvl + 1} centering: {res.status}"
        y = res.y
    z_next = LevelObjective(obj, z_k, None).full_point(y)
    return z_next, counts, ""


def practical_step(problem, z_k, t_k, rho_prev, config, run, k):
    """t_{k+1} = rho * t_k; direct fine-grid centering (cap 5) with MGB fallback."""
    obj = problem.fine_objective
    t_next = min(rho_prev * t_k, config.t_cap)

    level_obj = LevelObjective(obj, z_k, None)
    res = center(level_obj, np.zeros(level_obj.dim), t_next,
                 lam_tol=config.lam_tol, max_iters=config.direct_cap)
    counts = [res.iterations]
    direct_ok = res.status == CONVERGED
    val = level_obj.value(res.y, t_next)
    run.add_row(k, t_next, rho_prev, 0, res.iterations, True, val, res.decrement)

    if direct_ok:
        z_next = level_obj.full_point(res.y)
        decrement = res.decrement
    else:
        z_next, mgb_counts, err = mgb_t_step(
            problem, z_k, t_next, config, run=run, k=k, rho=rho_prev)
        counts.extend(mgb_counts)
        if z_next is None:
            return None, t_next, rho_prev, err
        decrement = run.trace.rows[-1].decrement
        val = run.trace.rows[-1].objective

    m_k = max(counts)
    rho_k = adapt_stepsize(rho_prev, m_k)
    run.add_row(k, t_next, rho_k, -1, m_k, direct_ok, val, decrement)
    return z_next, t_next, rho_k, ""


def _initial_phase(run, t0, lam_tol=None):
    """Coarse-grid centering then h-then-t style refinement to the fine grid.

    Returns the fine-grid iterate centered at t0, or None on failure.
    """
    problem, config = run.problem, run.config
    lam_tol = lam_tol if lam_tol is not None else config.lam_tol
    z = run.problem.z0.copy()
    for lvl in range(problem.L):
        obj = problem.objectives[lvl]
        level_obj = LevelObjective(obj, z, None)
        res = center(level_obj, np.zeros(level_obj.dim), t0,
                     lam_tol=lam_tol, max_iters=config.max_center_iters)
        val = level_obj.value(res.y, t0)
        run.add_row(0, t0, config.rho0, lvl + 1, res.iterations, False,
                    val, res.decrement)
        if res.status != CONVERGED:
            run.fail(f"initial centering failed on level {lvl + 1}: {res.status}")
            return None
        z = level_obj.full_point(res.y)
        if lvl < problem.L - 1:
            z = problem.refine_iterate(z, lvl)
        if run.over_budget():
            run.fail("budget exhausted in initial phase", STATUS_BUDGET)
            return None
    m0 = max(r.newton_iters for r in run.trace.rows if r.k == 0)
    run.add_row(0, t0, config.rho0, -1, m0, False,
                run.trace.rows[-1].objective, run.trace.rows[-1].decrement)
    return z


def _final_recenter(run, z, t):
    """Tighten the last center to lam_tol_final for error measurement."""
    problem, config = run.problem, run.config
    level_obj = LevelObjective(problem.fine_objective, z, None)
    res = center(level_obj, np.zeros(level_obj.dim), t,
                 lam_tol=config.lam_tol_final, max_iters=config.max_center_iters)
    if res.status != CONVERGED:
        return z, res
    return level_obj.full_point(res.y), res


def run_mgb(problem, config=None, store_iterates=False):
    """Practical MGB: initial h-then-t phase at t0, then adaptive direct/MGB steps."""
    config = config or PathConfig()
    run = _Run(problem, config, store_iterates)
    t0 = config.initial_t(problem)
    t_stop = config.stop_t(problem)

    z = _initial_phase(run, t0)
    if z is None:
        return run.trace
    t = t0
    run.record_step(0, t, z)

    rho = config.rho0
    k = 0
    while t <= t_stop and t < config.t_cap:
        if run.over_budget():
            return run.fail("wall-clock budget exhausted", STATUS_BUDGET)
        k += 1
        z_next, t_next, rho, err = practical_step(problem, z, t, rho, config, run, k)
        if z_next is None:
            return run.fail(err)
        z, t = z_next, t_next
        run.record_step(k, t, z)

    z, res = _final_recenter(run, z, t)
    run.add_row(k + 1, t, rho, -1, res.iterations, False,
                problem.fine_objective.value(z, t), res.decrement)
    run.record_step(k + 1, t, z)
    run.trace.status = STATUS_CONVERGED
    return run.trace


def run_naive(problem, config=None, schedule="h-then-t", store_iterates=False):
    """Naive single-path algorithm with an h/t refinement schedule.

    schedule: "h-then-t" or "theta" (grid level ceil(theta * log2 t), clamped).
    Each h-refinement prolongates the iterate and re-centers at the current t;
    each t-refinement re-centers at rho * t on the current grid and adapts rho.
    """
    config = config or PathConfig()
    run = _Run(problem, config, store_iterates)
    t0 = config.initial_t(problem)
    t_stop = config.stop_t(problem)
    L = problem.L

    def theta_level(t):
        if t <= 1.0:
            return 1
        return min(max(math.ceil(config.theta * math.log2(t)), 1), L)

    z = problem.z0.copy()
    t = t0
    rho = config.rho0
    lvl = 0  # 0-based current level
    k = 0

    # center the initial iterate on the coarsest grid
    level_obj = LevelObjective(problem.objectives[0], z, None)
    res = center(level_obj, np.zeros(level_obj.dim), t,
                 lam_tol=config.lam_tol, max_iters=config.max_center_iters)
    run.add_row(0, t, rho, 1, res.iterations, False,
                level_obj.value(res.y, t), res.decrement)
    if res.status != CONVERGED:
        return run.fail(f"initial centering: {res.status}")
    z = level_obj.full_point(res.y)
    run.add_row(0, t, rho, -1, res.iterations, False,
                run.trace.rows[-1].objective, res.decrement)
    if lvl == L - 1:
        run.record_step(0, t, z)

    while True:
        if run.over_budget():
            return run.fail("wall-clock budget exhausted", STATUS_BUDGET)
        if lvl == L - 1 and t > t_stop:
            break
        if t >= config.t_cap and lvl == L - 1:
            break

        if schedule == "h-then-t":
            refine_h = lvl < L - 1
        elif schedule == "theta":
            refine_h = lvl < theta_level(max(t, rho * t)) - 1 and lvl < L - 1
            if lvl < L - 1 and t > t_stop:
                refine_h = True  # never finish below the finest level
        else:
            raise ValueError(f"unknown schedule {schedule!r}")

        k += 1
        if refine_h:
            z = problem.refine_iterate(z, lvl)
            lvl += 1
            level_obj = LevelObjective(problem.objectives[lvl], z, None)
            res = center(level_obj, np.zeros(level_obj.dim), t,
                         lam_tol=config.lam_tol, max_iters=config.max_center_iters)
            run.add_row(k, t, rho, lvl + 1, res.iterations, False,
                        level_obj.value(res.y, t), res.decrement)
            if res.status != CONVERGED:
                return run.fail(f"h-refinement centering: {res.status}")
            z = level_obj.full_point(res.y)
            run.add_row(k, t, rho, -1, res.iterations, False,
                        run.trace.rows[-1].objective, res.decrement)
        else:
            t_next = min(rho * t, config.t_cap)
            level_obj = LevelObjective(problem.objectives[lvl], z, None)
            res = center(level_obj, np.zeros(level_obj.dim), t_next,
                         lam_tol=config.lam_tol, max_iters=config.max_center_iters)
            run.add_row(k, t_next, rho, lvl + 1, res.iterations, False,
                        level_obj.value(res.y, t_next), res.decrement)
            if res.status != CONVERGED:
                return run.fail(f"t-refinement centering: {res.status}")
            z = level_obj.full_point(res.y)
            t = t_next
            rho = adapt_stepsize(rho, res.iterations)
            run.add_row(k, t, rho, -1, res.iterations, False,
                        run.trace.rows[-1].objective, res.decrement)

        if lvl == L - 1:
            run.record_step(k, t, z)

    # final tight centering on the finest grid
    z, res = _final_recenter(run, z, t)
    run.add_row(k + 1, t, rho, -1, res.iterations, False,
                problem.fine_objective.value(z, t), res.decrement)
    run.record_step(k + 1, t, z)
    run.trace.status = STATUS_CONVERGED
    return run.trace
