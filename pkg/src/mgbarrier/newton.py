"""Damped Newton centering with feasibility backtracking.

Step length is the classic 1/(1+lambda) damping while the decrement is large,
and a full step in the quadratic phase (lambda < 1/4). Trial points outside
the barrier domain (value = +inf) are handled by halving the step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import regularize

CONVERGED = "converged"
ITERATION_CAP = "iteration-cap"
INFEASIBLE_START = "infeasible-start"
SOLVER_FAILURE = "solver-failure"

MAX_BACKTRACK = 40
QUAD_PHASE = 0.25


@dataclass
class CenteringResult:
    y: np.ndarray
    iterations: int
    decrement: float
    status: str


def newton_decrement(g, H):
    """lambda = sqrt(g^T H^{-1} g) and the Newton direction -H^{-1} g."""
    Hreg = regularize(H)
    try:
        lu = spla.splu(Hreg.tocsc())
        step = -lu.solve(g)
    except RuntimeError:
        return None, None
    lam2 = float(-g @ step)
    if not np.isfinite(lam2):
        return None, None
    return float(np.sqrt(max(lam2, 0.0))), step


def center(level_obj, y0, t, lam_tol=1e-3, max_iters=100):
    """Damped Newton until the decrement drops below lam_tol.

    Returns a CenteringResult; iterations counts accepted Newton steps.
    """
    y = np.asarray(y0, dtype=float).copy()
    val = level_obj.value(y, t)
    if not np.isfinite(val):
        return CenteringResult(y, 0, np.inf, INFEASIBLE_START)

    lam = np.inf
    for it in range(max_iters + 1):
        g, H = level_obj.grad_hess(y, t)
        lam, step = newton_decrement(g, H)
        if lam is None:
            return CenteringResult(y, it, np.inf, SOLVER_FAILURE)
        if lam <= lam_tol:
            return CenteringResult(y, it, lam, CONVERGED)
        if it == max_iters:
            break

        damped = lam >= QUAD_PHASE
        alpha = 1.0 / (1.0 + lam) if damped else 1.0
        accepted = False
        for _ in range(MAX_BACKTRACK):
            y_try = y + alpha * step
            val_try = level_obj.value(y_try, t)
            if np.isfinite(val_try) and (not damped or val_try < val):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return CenteringResult(y, it, lam, SOLVER_FAILURE)
        y, val = y_try, val_try

    return CenteringResult(y, max_iters, lam, ITERATION_CAP)
