"""Implicit Newmark time integration of ``M u'' + K u = F(t)``."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import kernels
from .laplace import SolverError, TimeSeriesField
from .mesh import GlobalSystem


@dataclass(frozen=True)
class NewmarkParams:
    dt: float
    steps: int
    beta: float = 0.25
    gamma: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def unconditionally_stable(self) -> bool:
        return self.beta >= self.gamma / 2 >= 0.25


def to_lower_band(A, p: int | None = None) -> tuple[np.ndarray, int]:
    """Lower band storage ``B[j, d] = A[j + d, j]`` of a symmetric matrix."""
    if hasattr(A, "tocoo"):
        coo = A.tocoo()
        rows, cols, vals = coo.row, coo.col, coo.data
        n = coo.shape[0]
    else:
        dense = np.asarray(A)
        n = dense.shape[0]
        rows, cols = np.nonzero(dense)
        vals = dense[rows, cols]
    if p is None:
        p = int(np.max(np.abs(rows - cols), initial=0))
    B = np.zeros((n, p + 1))
    low = rows >= cols
    d = rows[low] - cols[low]
    if np.any(d > p):
        raise ValueError(f"matrix bandwidth exceeds {p}")
    np.add.at(B, (cols[low], d), vals[low])
    return B, p


def newmark_solve(
    system: GlobalSystem,
    loads,
    params: NewmarkParams,
    observe: dict | None = None,
    u0=None,
    v0=None,
    backend: str | None = None,
) -> TimeSeriesField:
    """Average-acceleration recursion over the free DOFs.

    ``loads`` is a sequence of ``(load_vector, samples)``; samples are taken
    at ``params.dt`` and zero-padded to ``params.steps``.  The effective
    matrix is factored once.
    """
    t_start = time.perf_counter()
    free = system.free
    K = system.K[free][:, free]
    M = system.M[free][:, free]
    _, pk = to_lower_band(K)
    _, pm = to_lower_band(M)
    p = max(pk, pm)
    Kb, _ = to_lower_band(K, p)
    Mb, _ = to_lower_band(M, p)
    nf = free.size
    nsteps = params.steps

    loads = list(loads)
    P = np.zeros((max(len(loads), 1), nf))
    S = np.zeros((max(len(loads), 1), nsteps))
    for i, (vec, samples) in enumerate(loads):
        samples = np.asarray(samples, dtype=float)
        if samples.size > nsteps:
            raise ValueError(f"signal has {samples.size} samples, more than {nsteps} steps")
        P[i] = np.asarray(vec, dtype=float)[free]
        S[i, : samples.size] = samples

    u = np.zeros(nf) if u0 is None else np.asarray(u0, dtype=float)[free]
    v = np.zeros(nf) if v0 is None else np.asarray(v0, dtype=float)[free]
    # initial acceleration from equilibrium at t = 0
    r0 = P.T @ S[:, 0] - K @ u
    try:
        a = sla.cho_solve_banded(
            (sla.cholesky_banded(Mb.T, lower=True), True), r0
        ) if np.any(r0) else np.zeros(nf)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"mass matrix not positive definite: {exc}") from exc

    pos = np.full(system.n_dof, -1)
    pos[free] = np.arange(nf)
    if observe is None:
        labels = system.dof_labels()
        rows = np.eye(system.n_dof)
    else:
        labels = list(observe)
        rows = np.array([np.asarray(observe[k], dtype=float) for k in labels])
    needed = np.flatnonzero(np.any(rows != 0, axis=0))
    rec_free = needed[pos[needed] >= 0]
    record = np.ascontiguousarray(pos[rec_free], dtype=np.intc)

    kern = kernels.backend(backend)
    try:
        hist = kern.newmark(
            np.ascontiguousarray(Mb), np.ascontiguousarray(Kb),
            np.ascontiguousarray(P), np.ascontiguousarray(S),
            params.dt, params.beta, params.gamma, record,
            np.ascontiguousarray(u), np.ascontiguousarray(v), np.ascontiguousarray(a),
        )
    except kernels.KernelError as exc:
        raise SolverError(str(exc)) from exc

    data = rows[:, rec_free] @ hist.T
    field = TimeSeriesField(params.dt, data, labels)
    field.meta.update(
        solver="newmark",
        beta=params.beta,
        gamma=params.gamma,
        mass="consistent",
        backend=backend or kernels.BACKEND,
        wall_time=time.perf_counter() - t_start,
        dt=params.dt,
        steps=nsteps,
    )
    return field


def l2_deviation(u, ref) -> float:
    u = np.asarray(u, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if u.shape != ref.shape:
        raise ValueError(f"series shapes differ: {u.shape} vs {ref.shape}")
    norm = np.linalg.norm(ref)
    if norm == 0:
        return 0.0 if not np.any(u) else float("inf")
    return float(np.linalg.norm(u - ref) / norm)


def resample(values, dt: float, t_target) -> np.ndarray:
    """Cubic interpolation of a uniformly sampled series onto ``t_target``."""
    from scipy.interpolate import CubicSpline

    values = np.asarray(values, dtype=float)
    t = np.arange(values.size) * dt
    t_target = np.asarray(t_target, dtype=float)
    if t_target.size and (t_target[-1] > t[-1] * (1 + 1e-9) or t_target[0] < 0):
        raise ValueError("target times exceed the series")
    return CubicSpline(t, values)(np.clip(t_target, 0.0, t[-1]))


def measure_convergence(series_by_param: dict, reference=None, duration: float | None = None) -> dict:
    """L2 deviation of each series from the reference run.

    ``series_by_param`` maps a parameter value to ``(dt, samples)``.  The
    reference defaults to the largest parameter (the finest run).  Every series
    is compared on the coarsest common time grid over ``duration``.
    """
    if len(series_by_param) < 1:
        raise ValueError("no series given")
    if reference is None:
        reference = max(series_by_param)
    items = {k: (float(dt), np.asarray(v, dtype=float)) for k, (dt, v) in series_by_param.items()}
    dt_c = max(dt for dt, _ in items.values())
    t_end = min(dt * (v.size - 1) for dt, v in items.values())
    if duration is not None:
        if duration > t_end * (1 + 1e-9):
            raise ValueError(f"duration {duration} exceeds the shortest series ({t_end})")
        t_end = duration
    t = np.arange(int(np.floor(t_end / dt_c + 1e-6)) + 1) * dt_c
    grid = {}
    for k, (dt, v) in items.items():
        grid[k] = v[: t.size] if np.isclose(dt, dt_c, rtol=1e-12) else resample(v, dt, t)
        if grid[k].size != t.size:
            raise ValueError(f"series {k} has mismatched length after resampling")
    ref = grid[reference]
    try:
        order = sorted(grid)
    except TypeError:  # mixed key types keep insertion order
        order = list(grid)
    return {k: l2_deviation(grid[k], ref) for k in order}
