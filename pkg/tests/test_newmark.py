import numpy as np
import pytest
import scipy.sparse as sp

from wavesim import kernels
from wavesim.excitation import hanning_toneburst
from wavesim.laplace import SolverError
from wavesim.mesh import GlobalSystem, LoadSpec, assemble, build_load_vector, build_mesh
from wavesim.newmark import (
    NewmarkParams,
    l2_deviation,
    measure_convergence,
    newmark_solve,
    resample,
    to_lower_band,
)

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


def test_params_validation():
    assert NewmarkParams(1e-6, 10).unconditionally_stable
    assert not NewmarkParams(1e-6, 10, beta=0.1).unconditionally_stable
    for kw in (dict(dt=0.0, steps=1), dict(dt=1.0, steps=0), dict(dt=1.0, steps=1, beta=0.0)):
        with pytest.raises(ValueError):
            NewmarkParams(**kw)


def test_lower_band_storage(rng):
    A = np.zeros((6, 6))
    for d in range(3):
        v = rng.standard_normal(6 - d)
        A += np.diag(v, -d) + (np.diag(v, d) if d else 0)
    B, p = to_lower_band(A)
    assert p == 2
    for j in range(6):
        for d in range(3):
            if j + d < 6:
                assert B[j, d] == A[j + d, j]
    B2, _ = to_lower_band(sp.csr_matrix(A))
    np.testing.assert_array_equal(B, B2)
    with pytest.raises(ValueError):
        to_lower_band(A, 1)


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_load_zero_response(backend):
    sys_ = assemble(build_mesh(1.5, 4, "fem_rod"))
    out = newmark_solve(sys_, [(np.eye(sys_.n_dof)[0], np.zeros(5))], NewmarkParams(1e-6, 50), backend=backend)
    assert np.all(out.data == 0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_free_vibration_energy_conserved(backend):
    m, kap = 2.0, 8.0e3
    period = 2 * np.pi * np.sqrt(m / kap)
    dt = period / 20
    sys_ = GlobalSystem.from_matrices([[kap]], [[m]])
    out = newmark_solve(sys_, [], NewmarkParams(dt, 1001), u0=[1e-3], v0=[0.2], backend=backend)
    u = out.data[0]
    a = -kap * u / m
    v = np.empty_like(u)
    v[0] = 0.2
    for n in range(u.size - 1):
        v[n + 1] = v[n] + 0.5 * dt * (a[n] + a[n + 1])
    E = 0.5 * m * v**2 + 0.5 * kap * u**2
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-6


@pytest.mark.parametrize("backend", BACKENDS)
def test_step_load_overshoot(backend):
    m, kap, F = 1.0, 1.0e4, 5.0
    period = 2 * np.pi * np.sqrt(m / kap)
    dt = period / 200
    steps = 2001
    sys_ = GlobalSystem.from_matrices([[kap]], [[m]])
    out = newmark_solve(sys_, [(np.ones(1), np.full(steps, F))], NewmarkParams(dt, steps), backend=backend)
    u = out.data[0]
    static = F / kap
    assert u.max() == pytest.approx(2 * static, rel=1e-3)
    assert u.mean() == pytest.approx(static, rel=1e-2)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")
def test_backends_agree():
    sys_ = assemble(build_mesh(1.5, 30, "fem_beam"))
    dt = 1 / 150e3 / 20
    sig = hanning_toneburst(100e3, 5, dt)
    load = build_load_vector(sys_, LoadSpec("left", "deflection"))
    runs = [newmark_solve(sys_, [(load, sig.samples)], NewmarkParams(dt, 300), backend=b).data for b in ("cython", "python")]
    np.testing.assert_allclose(runs[0], runs[1], rtol=0, atol=1e-10 * np.abs(runs[0]).max())


def test_signal_longer_than_steps():
    sys_ = GlobalSystem.from_matrices([[1.0]], [[1.0]])
    with pytest.raises(ValueError):
        newmark_solve(sys_, [(np.ones(1), np.ones(10))], NewmarkParams(1e-3, 5))


def test_singular_mass_reported():
    sys_ = GlobalSystem.from_matrices([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(SolverError):
        newmark_solve(sys_, [(np.ones(2), np.ones(3))], NewmarkParams(1e-3, 5))


def test_clamped_dofs_stay_zero():
    sys_ = assemble(build_mesh(1.0, 5, "fem_rod", bc=("clamped", "free")))
    load = build_load_vector(sys_, LoadSpec("right", "axial"))
    out = newmark_solve(sys_, [(load, np.ones(20))], NewmarkParams(1e-6, 20))
    assert np.all(out.data[0] == 0)
    assert np.any(out.data[-1] != 0)
    assert out.meta["mass"] == "consistent"


def test_l2_deviation_and_resample():
    x = np.sin(np.linspace(0, 3, 50))
    assert l2_deviation(x, x) == 0.0
    assert l2_deviation(2 * x, x) == pytest.approx(1.0)
    assert l2_deviation(np.zeros(3), np.zeros(3)) == 0.0
    with pytest.raises(ValueError):
        l2_deviation(x, x[:-1])
    t = np.linspace(0, 1, 201)
    y = resample(t**3, 1 / 200, np.linspace(0, 1, 37))
    np.testing.assert_allclose(y, np.linspace(0, 1, 37) ** 3, atol=1e-12)
    with pytest.raises(ValueError):
        resample(t, 1 / 200, [0.0, 2.0])


def test_measure_convergence_identical_and_reference():
    x = np.sin(np.linspace(0, 10, 101))
    dev = measure_convergence({1: (0.1, x), 2: (0.1, x)})
    assert dev == {1: 0.0, 2: 0.0}
    dev = measure_convergence({"a": (0.1, 2 * x), "b": (0.1, x)}, reference="b")
    assert dev["a"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        measure_convergence({1: (0.1, x)}, duration=100.0)


def test_measure_convergence_mixed_steps():
    t_f = np.arange(1001) * 1e-3
    t_c = np.arange(101) * 1e-2
    dev = measure_convergence({1: (1e-2, np.sin(t_c)), 2: (1e-3, np.sin(t_f))})
    assert dev[1] < 1e-12


def test_fem_rod_epw_monotone():
    c0 = 5063.7
    lam = c0 / 150e3
    dt = 1 / 150e3 / 40
    sig = hanning_toneburst(100e3, 5, dt)
    series = {}
    for epw in (5, 10, 15, 20):
        n = round(1.5 * epw / lam)
        sys_ = assemble(build_mesh(1.5, n, "fem_rod"))
        load = build_load_vector(sys_, LoadSpec("left", "axial"))
        out = newmark_solve(sys_, [(load, sig.samples)], NewmarkParams(dt, 2400),
                            {"mid": sys_.observation_row(0.75, "axial")})
        series[epw] = (dt, out.data[0])
    dev = measure_convergence(series)
    assert dev[5] > dev[10] > dev[15] > dev[20] == 0.0
