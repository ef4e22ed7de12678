"""Empirical verifiers and the benchmark harness.

Covers the minimizing-filter bound, a sampled lower estimate of the discrete
reverse Hölder constant, the p=2 linear-FEM oracle, and the iteration-count
benchmark grid emitted as CSV.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .pathfollow import PathConfig, run_mgb, run_naive
from .problems import ProblemSpec, build_problem

BENCH_HEADER = "algorithm,p,h,fine_cells,total_newton,max_step_newton,t_final,status,wall_s"


def filter_gap(trace, nu, domain_volume, slack_factor=2.0):
    """Suboptimality gaps vs the nu |Omega| / t filter bound.

    Returns a list of (k, t, gap, bound) using the cost integral at the
    largest achieved t as the reference. The bound carries a factor covering
    the centering tolerance.
    """
    if not trace.costs:
        raise ValueError("trace has no recorded cost integrals")
    ref = trace.costs[-1][2]
    out = []
    for k, t, c in trace.costs:
        out.append((k, t, c - ref, slack_factor * nu * domain_volume / t))
    return out


def rh_constant_estimate(problem, z, num_samples=20, seed=0):
    """Sampled lower estimate of the discrete reverse Hölder constant.

    For each coarse level H and element K of T_H, draws random coarse
    coefficient vectors v and computes
        |K| * ||sqrt(F''(Dz)[(Dv)^2])||_Linf_h(K) / ||...||_L1_h(K)
    with fine-grid quadrature. Returns per-level maxima (level 1 = coarsest).
    """
    rng = np.random.default_rng(seed)
    L = problem.L
    fes_f = problem.fine_fesys
    smp = problem.samplers[-1]
    d = fes_f.d

    grad_u, s_val = smp.sample(z)
    q = grad_u.reshape(-1, d)
    s = s_val.ravel()
    _, _, H = problem.barrier.value_grad_hess(q, s)
    ne_f, nq = smp.wq.shape
    Hn = H.reshape(ne_f, nq, d + 1, d + 1)

    # ancestor element of each fine element at every level
    anc = np.arange(ne_f)
    ancestors = [None] * L
    ancestors[L - 1] = anc.copy()
    for lvl in range(L - 2, -1, -1):
        anc = problem.hierarchy.levels[lvl + 1].parent_map[anc]
        ancestors[lvl] = anc.copy()

    out = []
    for lvl in range(L - 1):
        fes_c = problem.fesystems[lvl]
        Pff = problem.P_free_to_fine[lvl]
        vols = problem.hierarchy.levels[lvl].volumes()
        worst = 0.0
        for _ in range(num_samples):
            v = rng.standard_normal(Pff.shape[1])
            z_v = problem.fine_objective.embed_free(Pff @ v)
            gv, sv = smp.sample(z_v)
            Dv = np.concatenate([gv, sv[..., None]], axis=-1)  # (ne, nq, d+1)
            quad = np.einsum("eqa,eqab,eqb->eq", Dv, Hn, Dv)
            val = np.sqrt(np.maximum(quad, 0.0))
            owner = ancestors[lvl]
            for K in range(fes_c.mesh.num_elements):
                mask = owner == K
                vals = val[mask]
                w = smp.wq[mask]
                linf = float(vals.max())
                l1 = float(np.sum(w * vals))
                if l1 > 0:
                    worst = max(worst, vols[K] * linf / l1)
        out.append(worst)
    return out


def p2_linear_fem(problem):
    """Direct FEM solution of the p=2 Euler-Lagrange equation 2 Delta u = f.

    Minimizes int f u + |grad u|^2 in the same space and quadrature; returns
    the full u coefficient vector with the problem's Dirichlet data.
    """
    if problem.spec.p != 2.0:
        raise ValueError("linear FEM oracle requires p = 2")
    fes = problem.fine_fesys
    smp = problem.samplers[-1]
    n_lu = fes.u_elem.shape[1]
    kloc = 2.0 * np.einsum("eq,eqia,eqja->eij", smp.wq, smp.grads, smp.grads)
    rows = np.repeat(fes.u_elem, n_lu, axis=1).ravel()
    cols = np.tile(fes.u_elem, (1, n_lu)).ravel()
    K = sp.csr_matrix((kloc.ravel(), (rows, cols)), shape=(fes.n_u, fes.n_u))

    rhs = np.zeros(fes.n_u)
    if problem.spec.forcing is not None:
        fvals = np.apply_along_axis(lambda x: problem.spec.forcing(*x), 2, smp.xq)
        np.add.at(rhs, fes.u_elem, -np.einsum("eq,qi->ei", smp.wq * fvals, smp.uvals))

    u = np.zeros(fes.n_u)
    bidx = np.flatnonzero(fes.u_boundary)
    for i in bidx:
        u[i] = problem.spec.dirichlet(*fes.u_node_coords[i])
    iidx = np.flatnonzero(~fes.u_boundary)
    if iidx.size:
        Kii = K[np.ix_(iidx, iidx)].tocsc()
        b = rhs[iidx] - K[np.ix_(iidx, bidx)] @ u[bidx]
        u[iidx] = spla.splu(Kii).solve(b)
    return u


def p2_oracle_error(problem, trace):
    """(L2_h, Linf) error of the final path u against the linear FEM oracle."""
    u_fem = p2_linear_fem(problem)
    fes = problem.fine_fesys
    u_path = trace.z_final[: fes.n_u]
    diff = u_path - u_fem
    smp = problem.samplers[-1]
    vals = np.einsum("qi,ei->eq", smp.uvals, diff[fes.u_elem])
    l2 = float(np.sqrt(np.sum(smp.wq * vals ** 2)))
    linf = float(np.max(np.abs(diff)))
    return l2, linf


# ---------------------------------------------------------------------------
# benchmark harness

@dataclass
class BenchCell:
    algorithm: str       # mgb | naive-h-then-t | naive-theta
    p: float
    levels: int


def run_cell(cell, base_spec_kwargs, config):
    spec = ProblemSpec(p=cell.p, levels=cell.levels, **base_spec_kwargs)
    problem = build_problem(spec)
    t0 = time.monotonic()
    if cell.algorithm == "mgb":
        trace = run_mgb(problem, config)
    elif cell.algorithm == "naive-h-then-t":
        trace = run_naive(problem, config, schedule="h-then-t")
    elif cell.algorithm == "naive-theta":
        trace = run_naive(problem, config, schedule="theta")
    else:
        raise ValueError(f"unknown algorithm {cell.algorithm!r}")
    wall = time.monotonic() - t0
    return problem, trace, wall


def bench(algorithms, p_values, level_values, base_spec_kwargs=None, config=None):
    """Run the (algorithm, p, h) matrix; failures are recorded, not raised."""
    base_spec_kwargs = base_spec_kwargs or {}
    config = config or PathConfig()
    buf = io.StringIO()
    buf.write(BENCH_HEADER + "\n")
    for alg in algorithms:
        for p in p_values:
            for levels in level_values:
                cell = BenchCell(alg, p, levels)
                problem, trace, wall = run_cell(cell, base_spec_kwargs, config)
                h = problem.h_fine()
                cells = problem.hierarchy.fine.num_elements
                buf.write(
                    f"{alg},{p!r},{h!r},{cells},{trace.total_newton},"
                    f"{trace.max_step_newton()},{trace.t_final!r},"
                    f"{trace.status},{wall:.3f}\n"
                )
    return buf.getvalue()
