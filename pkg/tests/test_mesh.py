import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mgbarrier.mesh import (MeshHierarchy, build_rect_mesh, dump_mesh,
                            quasi_uniformity, ref_simplex_volume,
                            refine_uniform)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def test_ref_simplex_volume():
    assert ref_simplex_volume(1) == 1.0
    assert ref_simplex_volume(2) == 0.5


@given(st.integers(min_value=1, max_value=6),
       st.floats(min_value=-3.0, max_value=2.0),
       st.floats(min_value=0.5, max_value=4.0))
def test_total_volume_matches_box(k, lo, width):
    mesh = build_rect_mesh([(lo, lo + width), (0.0, 1.0)], k)
    assert mesh.total_volume() == pytest.approx(width * 1.0, rel=1e-12)


def test_unit_square_counts():
    mesh = build_rect_mesh([(0, 1), (0, 1)], 3)
    assert mesh.num_vertices == 16
    assert mesh.num_elements == 18
    # boundary of a 3x3 grid: 4*3 = 12 vertices
    assert len(mesh.boundary_vertices) == 12


def test_mesh_size_and_shape_regularity():
    # each triangle maps from the reference by A = (1/k) [[1,1],[0,1]] (up to
    # permutation), whose singular values are the golden ratio and its inverse
    mesh = build_rect_mesh([(0, 1), (0, 1)], 4)
    h, rho = quasi_uniformity(mesh)
    assert h == pytest.approx(GOLDEN / 4.0, rel=1e-12)
    assert rho == pytest.approx(1.0 / GOLDEN ** 2, rel=1e-12)
    assert mesh.h() == pytest.approx(h)


def test_refine_quadruples_triangles():
    mesh = build_rect_mesh([(0, 1), (0, 1)], 2)
    fine = refine_uniform(mesh)
    assert fine.num_elements == 4 * mesh.num_elements
    assert fine.h() == pytest.approx(mesh.h() / 2.0, rel=1e-12)
    # coarse vertices keep their indices
    assert np.array_equal(fine.vertices[: mesh.num_vertices], mesh.vertices)
    assert fine.total_volume() == pytest.approx(1.0, rel=1e-12)


def test_parent_map_contains_children():
    mesh = build_rect_mesh([(0, 1), (0, 1)], 2)
    fine = refine_uniform(mesh)
    for e in range(fine.num_elements):
        parent = fine.parent_map[e]
        child_verts = fine.vertices[fine.elements[e]]
        pv = mesh.vertices[mesh.elements[parent]]
        # every child vertex is a convex combination of the parent's vertices
        A = np.concatenate([pv.T, np.ones((1, 3))])
        for x in child_verts:
            lam = np.linalg.solve(A, np.append(x, 1.0))
            assert np.all(lam > -1e-12)


def test_refine_1d():
    mesh = build_rect_mesh([(0.0, 2.0)], 3)
    fine = refine_uniform(mesh)
    assert fine.num_elements == 6
    assert fine.total_volume() == pytest.approx(2.0)
    assert sorted(fine.boundary_vertices.tolist()) == [0, 3]


def test_hierarchy_nesting_and_parent_chain():
    hier = MeshHierarchy.build([(0, 1), (0, 1)], 2, 3)
    assert hier.L == 3
    hs = hier.h_values()
    assert hs[0] / hs[1] == pytest.approx(2.0)
    assert hs[1] / hs[2] == pytest.approx(2.0)
    chain = hier.parent_chain(hier.fine.num_elements - 1)
    assert len(chain) == 3
    assert 0 <= chain[-1] < hier.levels[0].num_elements


def test_degenerate_element_rejected():
    from mgbarrier.mesh import SimplicialMesh
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        SimplicialMesh(2, verts, np.array([[0, 1, 2]]), np.array([0, 1, 2]))


def test_dump_mesh_roundtrippable(tmp_path):
    mesh = build_rect_mesh([(0, 1), (0, 1)], 2)
    path = tmp_path / "mesh.txt"
    dump_mesh(mesh, path)
    lines = path.read_text().strip().splitlines()
    d, nv, ne = map(int, lines[0].split())
    assert (d, nv, ne) == (2, mesh.num_vertices, mesh.num_elements)
    verts = np.array([[float(t) for t in ln.split()] for ln in lines[1:1 + nv]])
    assert np.array_equal(verts, mesh.vertices)
