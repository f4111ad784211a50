import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from wavesim.basis import DEFAULT_ELEMENT_BASIS
from wavesim.elements import (
    ALUMINUM,
    STEEL,
    ElementError,
    MaterialProps,
    NoCrack,
    SectionProps,
    bswi_beam_matrices,
    bswi_rod_matrices,
    conventional_beam_matrices,
    conventional_rod_matrices,
    crack_correction,
    crack_flexibilities,
    crack_spring_matrices,
)
from wavesim.mesh import assemble, build_mesh

XI = DEFAULT_ELEMENT_BASIS.nodes.array


def null_dim(K, tol=1e-8):
    ev = np.linalg.eigvalsh(K)
    return int(np.sum(np.abs(ev) < tol * np.linalg.norm(K, 2)))


def first_nonzero_frequency(K, M):
    lam = np.sort(sla.eigh(K, M, eigvals_only=True))
    lam = lam[lam > 1e-6 * lam[-1]]
    return math.sqrt(lam[0]) / (2 * math.pi)


@pytest.mark.parametrize(
    "kwargs", [dict(E=0, nu=0.3, rho=1), dict(E=1, nu=0.5, rho=1), dict(E=1, nu=0.3, rho=-1)]
)
def test_material_validation(kwargs):
    with pytest.raises(ElementError):
        MaterialProps(**kwargs)


def test_section_properties():
    s = SectionProps(0.02, 0.03)
    assert s.A == pytest.approx(6e-4)
    assert s.I == pytest.approx(0.02 * 0.03**3 / 12)
    with pytest.raises(ElementError):
        SectionProps(0.0, 0.02)


def test_presets():
    assert (STEEL.E, STEEL.nu, STEEL.rho) == (200e9, 0.3, 7800.0)
    assert (ALUMINUM.E, ALUMINUM.nu, ALUMINUM.rho) == (70e9, 0.3, 2730.0)
    assert STEEL.bar_velocity == pytest.approx(5063.7, abs=0.1)


@settings(max_examples=25, deadline=None)
@given(
    E=st.floats(1e9, 400e9),
    rho=st.floats(1000, 20000),
    b=st.floats(1e-3, 0.1),
    h=st.floats(1e-3, 0.1),
    le=st.floats(1e-3, 1.0),
)
def test_rod_rigid_mode_and_mass(E, rho, b, h, le):
    mat, sec = MaterialProps(E, 0.3, rho), SectionProps(b, h)
    em = bswi_rod_matrices(mat, sec, le)
    assert em.K.shape == (11, 11)
    assert np.max(np.abs(em.K @ np.ones(11))) <= 1e-8 * np.linalg.norm(em.K, 2)
    assert np.ones(11) @ em.M @ np.ones(11) == pytest.approx(rho * b * h * le, rel=1e-10)
    np.testing.assert_allclose(em.K, em.K.T, rtol=1e-9, atol=0)


def test_rod_matrix_definiteness(steel, section):
    em = bswi_rod_matrices(steel, section, 0.075)
    assert np.all(np.linalg.eigvalsh(em.M) > 0)
    assert null_dim(em.K) == 1


def test_rod_free_free_frequency(steel, section):
    le = 0.075
    em = bswi_rod_matrices(steel, section, le)
    f1 = first_nonzero_frequency(em.K, em.M)
    assert f1 == pytest.approx(steel.bar_velocity / (2 * le), rel=5e-3)


@pytest.mark.parametrize("le", [0.0, -1.0, float("nan")])
def test_nonpositive_length(steel, section, le):
    for fn in (bswi_rod_matrices, bswi_beam_matrices, conventional_rod_matrices, conventional_beam_matrices):
        with pytest.raises(ElementError):
            fn(steel, section, le)


def test_beam_rigid_modes(steel, section):
    le = 0.075
    em = bswi_beam_matrices(steel, section, le)
    assert em.K.shape == (22, 22)
    tol = 1e-8 * np.linalg.norm(em.K, 2)
    trans = np.concatenate([np.ones(11), np.zeros(11)])
    rot = np.concatenate([XI * le, np.ones(11)])
    assert np.max(np.abs(em.K @ trans)) <= tol
    assert np.max(np.abs(em.K @ rot)) <= tol
    assert null_dim(em.K) == 2
    assert np.all(np.linalg.eigvalsh(em.M) > 0)


def test_beam_block_masses(steel, section):
    le = 0.075
    M = bswi_beam_matrices(steel, section, le).M
    one = np.ones(11)
    assert one @ M[:11, :11] @ one == pytest.approx(steel.rho * section.A * le, rel=1e-10)
    assert one @ M[11:, 11:] @ one == pytest.approx(steel.rho * section.I * le, rel=1e-10)


def test_beam_flexural_frequency_matches_refined_fem(steel, section):
    le = 0.075
    em = bswi_beam_matrices(steel, section, le)
    f_bswi = first_nonzero_frequency(em.K, em.M)
    ref = assemble(build_mesh(le, 200, "fem_beam", material=steel, section=section))
    f_ref = first_nonzero_frequency(ref.K.toarray() if hasattr(ref.K, "toarray") else ref.K,
                                    ref.M.toarray() if hasattr(ref.M, "toarray") else ref.M)
    assert f_bswi == pytest.approx(f_ref, rel=1e-2)


def test_conventional_rod_closed_form(steel, section):
    le = 0.01
    em = conventional_rod_matrices(steel, section, le)
    k = steel.E * section.A / le
    m = steel.rho * section.A * le
    np.testing.assert_array_equal(em.K, k * np.array([[1, -1], [-1, 1]]))
    np.testing.assert_allclose(em.M, m / 6 * np.array([[2, 1], [1, 2]]), rtol=1e-15)
    np.testing.assert_allclose(em.K @ np.ones(2), 0.0, atol=1e-8 * k)


def test_conventional_beam_nullspace(steel, section):
    em = conventional_beam_matrices(steel, section, 0.01)
    assert null_dim(em.K) == 2


def _cantilever_tip(L, h, n):
    sec = SectionProps(0.02, h)
    sys_ = assemble(build_mesh(L, n, "fem_beam", bc=("clamped", "free"), material=STEEL, section=sec))
    K = sys_.K.toarray() if hasattr(sys_.K, "toarray") else np.asarray(sys_.K)
    free = sys_.free
    F = np.zeros(sys_.n_dof)
    tip = sys_.dof(sys_.end_node("right"), "deflection")
    F[tip] = 1.0
    u = np.zeros(sys_.n_dof)
    u[free] = np.linalg.solve(K[np.ix_(free, free)], F[free])
    return u[tip], sec


def test_cantilever_timoshenko_tip_deflection():
    L, P = 0.3, 1.0
    tip, sec = _cantilever_tip(L, 0.02, 100)
    expect = P * L**3 / (3 * STEEL.E * sec.I) + P * L * sec.k / (STEEL.G * sec.A)
    assert tip == pytest.approx(expect, rel=1e-2)


def test_cantilever_thin_limit_no_locking():
    L = 1.0
    tip, sec = _cantilever_tip(L, 1e-3 * L, 100)
    assert tip == pytest.approx(L**3 / (3 * STEEL.E * sec.I), rel=2e-2)


def test_crack_zero_depth(steel, section):
    assert crack_flexibilities(steel, section, 0.0) == (0.0, 0.0)


@pytest.mark.parametrize("a", [-1e-4, 0.02, 0.03])
def test_crack_depth_domain(steel, section, a):
    with pytest.raises(ElementError):
        crack_flexibilities(steel, section, a)


def test_crack_flexibilities_increase(steel, section):
    vals = [crack_flexibilities(steel, section, r * section.h) for r in (0.1, 0.2, 0.3, 0.4)]
    cb, cs = zip(*vals)
    assert all(np.diff(cb) > 0) and all(np.diff(cs) > 0)
    assert all(v > 0 for v in cb + cs)


def test_crack_flexibility_trapezoid_oracle(steel, section):
    h, b, a = section.h, section.b, 0.2 * section.h
    al = np.linspace(0.0, a, 400001)
    J = np.trapezoid(al / h**2 * crack_correction(al, h) ** 2, al)
    cb_ref = 72 * np.pi / (steel.E * b * h**2) * J
    cs_ref = 2 * section.k**2 * np.pi / (steel.E * b) * J
    cb, cs = crack_flexibilities(steel, section, a)
    assert cb == pytest.approx(cb_ref, rel=1e-6)
    assert cs == pytest.approx(cs_ref, rel=1e-6)


def test_crack_correction_shallow_limit():
    assert float(crack_correction(0.0, 0.02)) == pytest.approx(0.752 + 0.37, rel=1e-12)


def test_spring_rigid_modes_and_nullspace():
    K = crack_spring_matrices(1e-6, 2e-9).K
    np.testing.assert_allclose(K @ [1, 0, 1, 0], 0.0, atol=0)
    np.testing.assert_allclose(K @ [0, 1, 0, 1], 0.0, atol=0)
    np.testing.assert_array_equal(K, K.T)
    assert np.all(np.linalg.eigvalsh(K) > -1e-9 * np.abs(K).max())
    assert null_dim(K) == 2


def test_spring_doubling_flexibility_halves_rotation_block():
    K1 = crack_spring_matrices(1e-6, 2e-9).K
    K2 = crack_spring_matrices(2e-6, 2e-9).K
    rot = np.ix_([1, 3], [1, 3])
    sh = np.ix_([0, 2], [0, 2])
    np.testing.assert_array_equal(K2[rot], 0.5 * K1[rot])
    np.testing.assert_array_equal(K2[sh], K1[sh])


def test_spring_zero_flexibility_signals_merge():
    with pytest.raises(NoCrack):
        crack_spring_matrices(0.0, 1e-9)
    with pytest.raises(ElementError):
        crack_spring_matrices(-1.0, 1e-9)
