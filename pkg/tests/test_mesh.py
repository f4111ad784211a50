import numpy as np
import pytest

from wavesim.elements import STEEL, SectionProps, crack_flexibilities, crack_spring_matrices
from wavesim.mesh import (
    GlobalSystem,
    LoadError,
    LoadSpec,
    MeshError,
    assemble,
    build_load_vector,
    build_mesh,
)

SEC = SectionProps(0.02, 0.02)


def dense(A):
    return A.toarray() if hasattr(A, "toarray") else np.asarray(A)


def test_uniform_beam_counts():
    mesh = build_mesh(1.5, 20, "bswi_beam")
    assert mesh.n_elements == 20
    assert all(el.length == pytest.approx(0.075) for el in mesh.elements)
    assert sum(el.length for el in mesh.elements) == pytest.approx(1.5, rel=1e-12)
    sys_ = assemble(mesh)
    assert len(sys_.node_x) == 201
    assert sys_.n_dof == 402


def test_boundary_interior_partition():
    sys_ = assemble(build_mesh(1.5, 4, "bswi_beam"))
    assert sys_.boundary.size == 5 * 2
    assert sys_.interior.size == 4 * 9 * 2
    assert np.intersect1d(sys_.boundary, sys_.interior).size == 0
    assert np.union1d(sys_.boundary, sys_.interior).size == sys_.n_dof


def test_crack_on_existing_interface():
    mesh = build_mesh(1.5, 20, "bswi_beam", cracks=[(0.75, 0.004)])
    assert mesh.n_elements == 20
    sys_ = assemble(mesh)
    assert sys_.nodes_at(0.75).size == 2
    assert len(sys_.node_x) == 202
    springs = [b for b in sys_.blocks if b.element_index is None]
    assert len(springs) == 1


def test_quarter_crack_interface_and_split():
    m20 = build_mesh(1.5, 20, "bswi_beam", cracks=[(0.375, 0.004)])
    assert m20.n_elements == 20
    assert any(el.x1 == pytest.approx(0.375) for el in m20.elements[:5])
    m7 = build_mesh(1.5, 7, "bswi_beam", cracks=[(0.375, 0.004)])
    assert m7.n_elements == 8
    assert m7.elements[1].x0 == pytest.approx(1.5 / 7)
    assert m7.elements[1].x1 == pytest.approx(0.375)
    assert m7.elements[2].x1 == pytest.approx(2 * 1.5 / 7)
    assert sum(el.length for el in m7.elements) == pytest.approx(1.5, rel=1e-12)


@pytest.mark.parametrize("x", [0.0, -0.1, 1.5, 2.0])
def test_crack_outside(x):
    with pytest.raises(MeshError):
        build_mesh(1.5, 4, "bswi_beam", cracks=[(x, 0.004)])


def test_cracks_too_close():
    with pytest.raises(MeshError):
        build_mesh(1.5, 4, "bswi_beam", cracks=[(0.7, 0.004), (0.7 + 1e-12, 0.004)])


def test_crack_on_rod_rejected():
    with pytest.raises(MeshError):
        build_mesh(1.5, 4, "bswi_rod", cracks=[(0.7, 0.004)])


@pytest.mark.parametrize(
    "kwargs", [dict(kind="xfem"), dict(n_elements=0), dict(L=-1.0), dict(bc=("free", "pinned"))]
)
def test_mesh_argument_errors(kwargs):
    args = dict(L=1.5, n_elements=4, kind="bswi_beam") | kwargs
    with pytest.raises(MeshError):
        build_mesh(**args)


def test_zero_depth_crack_merges_nodes():
    sys_ = assemble(build_mesh(1.5, 4, "bswi_beam", cracks=[(0.6, 0.0)]))
    assert sys_.nodes_at(0.6).size == 1
    assert all(b.element_index is not None for b in sys_.blocks)


def test_two_element_rod_total_mass():
    sys_ = assemble(build_mesh(1.5, 2, "bswi_rod", section=SEC))
    one = np.ones(sys_.n_dof)
    assert one @ dense(sys_.M) @ one == pytest.approx(STEEL.rho * SEC.A * 1.5, rel=1e-10)


@pytest.mark.parametrize("kind,expect", [("bswi_beam", 2), ("fem_beam", 2), ("bswi_rod", 1), ("fem_rod", 1)])
def test_free_free_nullspace(kind, expect):
    K = dense(assemble(build_mesh(1.5, 4, kind)).K)
    ev = np.linalg.eigvalsh(K)
    assert int(np.sum(np.abs(ev) < 1e-8 * np.abs(ev).max())) == expect


def test_symmetry_and_definiteness():
    sys_ = assemble(build_mesh(1.5, 3, "bswi_beam", cracks=[(0.5, 0.004)], bc=("clamped", "free")))
    K, M = dense(sys_.K), dense(sys_.M)
    np.testing.assert_allclose(K, K.T, rtol=0, atol=1e-9 * np.abs(K).max())
    f = sys_.free
    assert np.all(np.linalg.eigvalsh(M[np.ix_(f, f)]) > 0)
    assert np.all(np.linalg.eigvalsh(K[np.ix_(f, f)]) > -1e-8 * np.abs(K).max())


def test_crack_spring_is_local():
    a = 0.2 * SEC.h
    cracked = assemble(build_mesh(1.5, 4, "bswi_beam", cracks=[(0.75, a)], section=SEC))
    Kc = dense(cracked.K)
    elems = np.zeros_like(Kc)
    for b in cracked.blocks:
        if b.element_index is not None:
            elems[np.ix_(b.dofs, b.dofs)] += b.K
    diff = Kc - elems
    left, right = cracked.nodes_at(0.75)
    iface = [cracked.dof(left, "deflection"), cracked.dof(left, "rotation"),
             cracked.dof(right, "deflection"), cracked.dof(right, "rotation")]
    mask = np.ones_like(diff, bool)
    mask[np.ix_(iface, iface)] = False
    assert np.all(diff[mask] == 0)
    c_b, c_s = crack_flexibilities(STEEL, SEC, a)
    np.testing.assert_allclose(diff[np.ix_(iface, iface)], crack_spring_matrices(c_b, c_s).K, rtol=1e-12)

    # merging the duplicated interface node recovers the uncracked system exactly
    intact = dense(assemble(build_mesh(1.5, 4, "bswi_beam", section=SEC)).K)
    n_merged = intact.shape[0]
    P = np.zeros((Kc.shape[0], n_merged))
    for i in range(Kc.shape[0]):
        node, comp = divmod(i, 2)
        P[i, (node - (node > left)) * 2 + comp] = 1.0
    np.testing.assert_allclose(P.T @ Kc @ P, intact, rtol=0, atol=1e-6 * np.abs(intact).max())


def test_clamped_dofs():
    sys_ = assemble(build_mesh(1.5, 2, "bswi_beam", bc=("clamped", "clamped")))
    last = len(sys_.node_x) - 1
    np.testing.assert_array_equal(sys_.fixed, [0, 1, 2 * last, 2 * last + 1])


def test_load_vector_unit_and_zero():
    sys_ = assemble(build_mesh(1.5, 2, "bswi_beam"))
    f = build_load_vector(sys_, LoadSpec("left", "deflection"), 1.0)
    e = np.zeros(sys_.n_dof)
    e[sys_.dof(0, "deflection")] = 1.0
    np.testing.assert_array_equal(f, e)
    np.testing.assert_array_equal(build_load_vector(sys_, LoadSpec("left", "deflection"), 0.0), 0.0)
    f_pos = build_load_vector(sys_, LoadSpec(0.75, "rotation"), 2.0)
    assert f_pos[sys_.dof(sys_.nodes_at(0.75)[0], "rotation")] == 2.0


def test_load_on_interior_rejected():
    sys_ = assemble(build_mesh(1.5, 2, "bswi_rod"))
    with pytest.raises(LoadError, match="transferred"):
        build_load_vector(sys_, LoadSpec(3, "axial"))
    with pytest.raises(LoadError):
        build_load_vector(sys_, LoadSpec("middle", "axial"))
    with pytest.raises(LoadError):
        build_load_vector(sys_, LoadSpec(0.1234, "axial"))


def test_observation_row_interpolates_linear_field():
    sys_ = assemble(build_mesh(1.5, 3, "bswi_rod"))
    u = sys_.node_x.copy()
    for x in (0.0, 0.123, 0.75, 1.49, 1.5):
        assert sys_.observation_row(x, "axial") @ u == pytest.approx(x, abs=1e-12)
    with pytest.raises(MeshError):
        sys_.observation_row(2.0, "axial")


def test_from_matrices_validation():
    with pytest.raises(MeshError):
        GlobalSystem.from_matrices(np.eye(2), np.eye(3))
    s = GlobalSystem.from_matrices([[2.0, -1.0], [-1.0, 2.0]], np.eye(2), interior=[1])
    np.testing.assert_array_equal(s.boundary, [0])
