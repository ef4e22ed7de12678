import numpy as np
import pytest
import scipy.sparse as sp

from mgbarrier.assembly import LevelObjective, Objective, regularize, restrict
from mgbarrier.barrier import PLapBarrier
from mgbarrier.femspace import build_fe_system, interpolate, sample_D
from mgbarrier.mesh import build_rect_mesh
from mgbarrier.problems import ProblemSpec, build_problem
from mgbarrier.quadrature import reference_rule


def make_objective(p=1.5, alpha=2, cells=2, forcing=None):
    mesh = build_rect_mesh([(0, 1), (0, 1)], cells)
    fes = build_fe_system(mesh, alpha)
    smp = sample_D(fes, reference_rule(2, 2 * alpha))
    return Objective(fes, smp, PLapBarrier(p=p, d=2), forcing), fes, smp


def feasible_point(fes, margin=2.0):
    z = interpolate(fes, lambda x, y: 0.3 * x * y + 0.1 * x,
                    lambda x, y: margin + x)
    return z


def test_regularize_formula_exact():
    H = sp.csr_matrix(np.array([[4.0, -1.0], [-1.0, 3.0]]))
    R = regularize(H).toarray()
    norm_inf = 5.0  # max absolute row sum
    expected = H.toarray() + 1e-15 * norm_inf * np.eye(2)
    assert np.array_equal(R, expected)


def test_regularize_zero_matrix():
    H = sp.csr_matrix((3, 3))
    assert regularize(H).nnz == 0


def test_cost_integral_is_volume_of_slack():
    # with f = 0, int c[z] = int s; constant slack 2 integrates to 2|Omega|
    obj, fes, smp = make_objective()
    z = interpolate(fes, lambda x, y: 0.0, lambda x, y: 2.0)
    assert obj.cost_integral(z) == pytest.approx(2.0, rel=1e-12)


def test_cost_integral_with_forcing():
    # f = 1: int c[z] = int u + int s; u = x integrates to 1/2
    obj, fes, smp = make_objective(forcing=lambda x, y: 1.0)
    z = interpolate(fes, lambda x, y: x, lambda x, y: 3.0)
    assert obj.cost_integral(z) == pytest.approx(0.5 + 3.0, rel=1e-12)


def test_value_matches_direct_sum():
    obj, fes, smp = make_objective(p=2.0)
    z = feasible_point(fes)
    t = 4.0
    grad_u, s_val = smp.sample(z)
    F = obj.barrier.value(grad_u.reshape(-1, 2), s_val.ravel()).reshape(s_val.shape)
    expected = t * obj.cost_integral(z) + float(np.sum(smp.wq * F))
    assert obj.value(z, t) == pytest.approx(expected, rel=1e-13)


def test_value_infinite_when_infeasible():
    obj, fes, smp = make_objective()
    z = interpolate(fes, lambda x, y: 0.0, lambda x, y: -1.0)
    assert obj.value(z, 1.0) == np.inf
    assert not obj.feasible(z)
    with pytest.raises(ValueError):
        obj.grad_hess(z, 1.0)


def test_grad_hess_finite_differences():
    obj, fes, smp = make_objective(p=1.5, cells=2)
    z = feasible_point(fes)
    t = 2.0
    g, H = obj.grad_hess(z, t)
    free = obj.free_idx()
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(8):
        k = rng.integers(len(free))
        zp, zm = z.copy(), z.copy()
        zp[free[k]] += h
        zm[free[k]] -= h
        fd = (obj.value(zp, t) - obj.value(zm, t)) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=2e-5, abs=1e-7)
        gp, _ = obj.grad_hess(zp, t)
        gm, _ = obj.grad_hess(zm, t)
        fd_col = (gp - gm) / (2 * h)
        assert np.allclose(H.toarray()[:, k], fd_col, rtol=1e-4, atol=1e-5)


def test_hessian_symmetric_positive_definite():
    obj, fes, smp = make_objective(p=3.0)
    z = feasible_point(fes)
    _, H = obj.grad_hess(z, 1.0)
    Hd = H.toarray()
    assert np.allclose(Hd, Hd.T, atol=1e-12)
    w = np.linalg.eigvalsh(Hd)
    assert np.all(w > 0)


def test_embed_free_roundtrip():
    obj, fes, smp = make_objective()
    y = np.arange(len(obj.free_idx()), dtype=float)
    z = obj.embed_free(y)
    assert np.array_equal(z[obj.free_idx()], y)
    fixed = np.setdiff1d(np.arange(obj.n), obj.free_idx())
    assert np.all(z[fixed] == 0.0)


def test_level_objective_galerkin_restriction(small_problem):
    pr = small_problem
    obj = pr.fine_objective
    z_base = pr.refine_iterate(pr.z0, 0)
    P = pr.P_free_to_fine[0]
    lvl = restrict(obj, z_base, P)
    assert lvl.dim == P.shape[1]

    y = np.zeros(lvl.dim)
    t = 1.0
    g, H = lvl.grad_hess(y, t)
    gf, Hf = obj.grad_hess(z_base, t)
    assert np.allclose(g, P.T @ gf, atol=1e-12)
    assert np.allclose(H.toarray(), (P.T @ Hf @ P).toarray(), atol=1e-12)
    # full_point maps coordinates back into the affine subspace
    rng = np.random.default_rng(0)
    yr = 1e-3 * rng.standard_normal(lvl.dim)
    zf = lvl.full_point(yr)
    assert np.allclose(zf - z_base, obj.embed_free(P @ yr), atol=1e-15)


def test_fine_level_objective_is_identity(small_problem):
    pr = small_problem
    obj = pr.fine_objective
    z_base = pr.refine_iterate(pr.z0, 0)
    lvl = LevelObjective(obj, z_base, None)
    assert lvl.dim == len(obj.free_idx())
    assert lvl.value(np.zeros(lvl.dim), 2.0) == pytest.approx(obj.value(z_base, 2.0))
