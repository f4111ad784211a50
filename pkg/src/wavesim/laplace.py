"""Numerical Laplace transform solver.

Pipeline: damped FFT of the excitation, per-frequency condensed solves of
``(s^2 M + K) u = F`` with ``s = sigma + i omega``, optional recovery of
element interiors, damped inverse FFT back to time histories.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import kernels
from .excitation import next_pow2
from .mesh import GlobalSystem, LoadError

DEFAULT_WINDOW_DECAY = 1e-3


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LaplaceGrid:
    N: int
    dt: float
    sigma: float

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")
        if not (self.dt > 0 and self.sigma > 0):
            raise ValueError(f"dt and sigma must be positive ({self.dt}, {self.sigma})")

    @classmethod
    def for_duration(
        cls,
        dt: float,
        duration: float,
        sigma: float | None = None,
        window_factor: float = 2.0,
        decay: float = DEFAULT_WINDOW_DECAY,
    ) -> LaplaceGrid:
        """Window of at least ``window_factor * duration``; ``exp(-sigma T_w) = decay`` by default."""
        N = next_pow2(window_factor * duration / dt)
        if sigma is None:
            sigma = math.log(1.0 / decay) / (N * dt)
        return cls(N, dt, sigma)

    @property
    def window(self) -> float:
        return self.N * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N) * self.dt

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.N) / self.window

    @property
    def s(self) -> np.ndarray:
        return self.sigma + 1j * self.omega

    @property
    def n_solve(self) -> int:
        return self.N // 2 + 1


@dataclass
class TimeSeriesField:
    dt: float
    data: np.ndarray
    labels: list[str]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        if self.data.shape[0] != len(self.labels):
            raise ValueError("one label per channel required")
        if not np.all(np.isfinite(self.data)):
            raise SolverError("time series contains non-finite values")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def channel(self, label: str) -> np.ndarray:
        return self.data[self.labels.index(label)]

    def truncate(self, duration: float) -> TimeSeriesField:
        n = int(math.floor(duration / self.dt + 1e-6)) + 1
        return TimeSeriesField(self.dt, self.data[:, :n], list(self.labels), dict(self.meta))


@dataclass
class FrequencySolution:
    """Solutions at ``k = 0..N/2`` for the listed channels, shape ``(N/2+1, n_channels)``."""

    values: np.ndarray
    labels: list[str]


def forward_transform(f, grid: LaplaceGrid) -> np.ndarray:
    """``F(s_k) = dt * DFT(f_n exp(-sigma t_n))`` for all ``k = 0..N-1``."""
    f = np.asarray(f, dtype=float)
    if f.size > grid.N:
        raise ValueError(
            f"signal has {f.size} samples but the grid holds {grid.N}; use a larger grid"
        )
    padded = np.zeros(grid.N)
    padded[: f.size] = f
    return grid.dt * np.fft.fft(padded * np.exp(-grid.sigma * grid.times))


def inverse_transform(spectra: FrequencySolution, grid: LaplaceGrid) -> TimeSeriesField:
    """Hermitian extension, inverse DFT scaled by ``1/(N dt)``, undo the damping."""
    U = np.asarray(spectra.values)
    if U.ndim == 1:
        U = U[:, None]
    half = grid.N // 2
    if U.shape[0] < half + 1:
        raise ValueError(f"need spectra for k = 0..{half}, got {U.shape[0]} rows")
    full = np.empty((grid.N, U.shape[1]), dtype=complex)
    full[: half + 1] = U[: half + 1]
    # real signal: DC and Nyquist bins must be real
    full[0] = full[0].real
    full[half] = full[half].real
    full[half + 1 :] = np.conj(U[1:half][::-1])
    assert np.allclose(full[1:], np.conj(full[1:][::-1]), rtol=0, atol=0)
    g = np.fft.ifft(full, axis=0) / grid.dt
    peak = np.max(np.abs(g)) if g.size else 0.0
    assert np.max(np.abs(g.imag), initial=0.0) <= 1e-9 * max(peak, np.finfo(float).tiny)
    u = g.real * np.exp(grid.sigma * grid.times)[:, None]
    return TimeSeriesField(grid.dt, u.T, list(spectra.labels), {"sigma": grid.sigma, "N": grid.N})


# ----------------------------------------------------------------------------
# generic (matrix-level) operations


def _dense(A):
    return A.toarray() if hasattr(A, "toarray") else np.asarray(A)


def _dynamic(system: GlobalSystem, s: complex):
    return _dense(system.K) + (s * s) * _dense(system.M)


def condense(system: GlobalSystem, s: complex) -> np.ndarray:
    """``K11 - K12 K22^-1 K21`` of ``s^2 M + K`` over ``system.boundary``."""
    b = system.boundary
    if not system.blocks:
        A = _dynamic(system, s)
        i = system.interior
        if i.size == 0:
            return A[np.ix_(b, b)]
        X = _solve(A[np.ix_(i, i)], A[np.ix_(i, b)], s)
        return A[np.ix_(b, b)] - A[np.ix_(b, i)] @ X
    pos = _positions(system)
    Kbar = np.zeros((b.size, b.size), dtype=complex)
    for blk in system.blocks:
        A = blk.K + (s * s) * blk.M
        bl, il = blk.boundary, blk.interior
        S = A[np.ix_(bl, bl)]
        if il.size:
            S = S - A[np.ix_(bl, il)] @ _solve(A[np.ix_(il, il)], A[np.ix_(il, bl)], s)
        idx = pos[blk.dofs[bl]]
        Kbar[np.ix_(idx, idx)] += S
    return Kbar


def recover_interior(system: GlobalSystem, s: complex, u_boundary) -> np.ndarray:
    """Interior DOFs ``u2 = -K22^-1 K21 u1`` (ordered as ``system.interior``)."""
    u_boundary = np.asarray(u_boundary, dtype=complex)
    i = system.interior
    out = np.zeros(i.size, dtype=complex)
    if i.size == 0:
        return out
    if not system.blocks:
        A = _dynamic(system, s)
        return -_solve(A[np.ix_(i, i)], A[np.ix_(i, system.boundary)] @ u_boundary, s)
    pos = _positions(system)
    ipos = np.full(system.n_dof, -1)
    ipos[i] = np.arange(i.size)
    for blk in system.blocks:
        il = blk.interior
        if not il.size:
            continue
        A = blk.K + (s * s) * blk.M
        ub = u_boundary[pos[blk.dofs[blk.boundary]]]
        out[ipos[blk.dofs[il]]] = -_solve(A[np.ix_(il, il)], A[np.ix_(il, blk.boundary)] @ ub, s)
    return out


def solve_frequency(system: GlobalSystem, grid: LaplaceGrid, F_spectrum, k: int) -> np.ndarray:
    """Boundary solution at ``s_k``.

    ``F_spectrum`` is the nodal force spectrum, shape ``(n_k, n_dof)``; it must
    vanish on interior DOFs.
    """
    if not 0 <= k <= grid.N // 2:
        raise ValueError(f"k must lie in 0..{grid.N // 2}; upper half follows by conjugation")
    F = np.asarray(F_spectrum)
    F = F[k] if F.ndim == 2 else F
    if system.interior.size and np.any(F[system.interior] != 0):
        raise LoadError("force spectrum has interior entries; condensation needs boundary loads")
    s = grid.s[k]
    Kbar = condense(system, s)
    rhs = np.array(F[system.boundary], dtype=complex)
    keep = ~np.isin(system.boundary, system.fixed)
    u = np.zeros(system.boundary.size, dtype=complex)
    try:
        u[keep] = sla.solve(Kbar[np.ix_(keep, keep)], rhs[keep])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"factorization failed at k = {k}, s = {s}: {exc}") from exc
    return u


def direct_solve(system: GlobalSystem, s: complex, F) -> np.ndarray:
    """Uncondensed solve of ``(s^2 M + K) u = F`` over free DOFs (reference path)."""
    A = _dynamic(system, s)
    free = system.free
    u = np.zeros(system.n_dof, dtype=complex)
    u[free] = sla.solve(A[np.ix_(free, free)], np.asarray(F, dtype=complex)[free])
    return u


def _solve(A, B, s):
    try:
        return sla.solve(A, B)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"interior block singular at s = {s}: {exc}") from exc


def _positions(system: GlobalSystem) -> np.ndarray:
    pos = np.full(system.n_dof, -1)
    pos[system.boundary] = np.arange(system.boundary.size)
    return pos


# ----------------------------------------------------------------------------
# chain sweep


@dataclass
class _Chain:
    Kg: np.ndarray
    Mg: np.ndarray
    nint: np.ndarray
    link_group: np.ndarray
    link_start: np.ndarray
    interior_local: list
    nb: int
    c: int
    fixed: np.ndarray


def chain_of(system: GlobalSystem) -> _Chain:
    """Pack element groups and links for the sweep kernel (cached on the system)."""
    cached = getattr(system, "_chain", None)
    if cached is not None:
        return cached
    if not system.blocks:
        raise SolverError("system has no element structure; use solve_frequency")
    c = system.n_comp
    nbl = 2 * c
    pos = _positions(system)
    keys: dict = {}
    mats = []
    link_group, link_start, interior_local = [], [], []
    for blk in system.blocks:
        order = np.r_[blk.boundary, blk.interior]
        key = (blk.group, id(blk.K)) if blk.group >= 0 else ("spring", id(blk.K))
        if key not in keys:
            keys[key] = len(mats)
            mats.append((blk.K[np.ix_(order, order)], blk.M[np.ix_(order, order)], blk.interior.size))
        bpos = pos[blk.dofs[blk.boundary]]
        j0 = int(bpos[0])
        if blk.boundary.size != nbl or not np.array_equal(bpos, j0 + np.arange(nbl)):
            raise SolverError("boundary DOFs of a block are not contiguous along the chain")
        link_group.append(keys[key])
        link_start.append(j0)
        interior_local.append(blk.dofs[blk.interior])
    nmax = max(m[0].shape[0] for m in mats)
    Kg = np.zeros((len(mats), nmax, nmax))
    Mg = np.zeros((len(mats), nmax, nmax))
    for g, (Kl, Ml, _) in enumerate(mats):
        n = Kl.shape[0]
        Kg[g, :n, :n] = Kl
        Mg[g, :n, :n] = Ml
    fixed = np.zeros(system.boundary.size, dtype=np.uint8)
    fixed[pos[system.fixed]] = 1
    chain = _Chain(
        Kg=Kg,
        Mg=Mg,
        nint=np.array([m[2] for m in mats], dtype=np.intc),
        link_group=np.array(link_group, dtype=np.intc),
        link_start=np.array(link_start, dtype=np.intc),
        interior_local=interior_local,
        nb=int(system.boundary.size),
        c=c,
        fixed=fixed,
    )
    system._chain = chain
    return chain


def sweep_system(
    system: GlobalSystem,
    s: np.ndarray,
    rhs_boundary: np.ndarray,
    recover: list[int] | None = None,
    threads: int = 1,
    backend: str | None = None,
) -> tuple[np.ndarray, dict]:
    """Solve at every ``s`` with boundary forces ``rhs_boundary[k]``.

    Returns ``(u_boundary[nf, nb], {link_index: u_interior[nf, n_int]})``.
    Frequencies are split into contiguous chunks, one per thread; each chunk
    writes its own rows, so the result does not depend on ``threads``.
    """
    ch = chain_of(system)
    kern = kernels.backend(backend)
    rec = np.array(sorted(set(recover or [])), dtype=np.intc)
    s = np.ascontiguousarray(s, dtype=complex)
    rhs_boundary = np.ascontiguousarray(rhs_boundary, dtype=complex)
    nf = s.size

    def run(lo, hi):
        return kern.sweep(
            s[lo:hi], ch.Kg, ch.Mg, ch.nint, ch.link_group, ch.link_start,
            ch.nb, ch.c, ch.fixed, rhs_boundary[lo:hi], rec,
        )

    threads = max(1, min(int(threads), nf))
    edges = np.linspace(0, nf, threads + 1).astype(int)
    try:
        if threads == 1:
            parts = [run(0, nf)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(run, edges[:-1], edges[1:]))
    except kernels.KernelError as exc:
        raise SolverError(str(exc)) from exc
    ub = np.concatenate([p[0] for p in parts], axis=0)
    ui = np.concatenate([p[1] for p in parts], axis=0)
    interiors = {}
    for r, link in enumerate(rec):
        ni = int(ch.nint[ch.link_group[link]])
        interiors[int(link)] = ui[:, r, :ni]
    return ub, interiors


def run_lwfem(
    system: GlobalSystem,
    loads,
    grid: LaplaceGrid,
    observe: dict | None = None,
    threads: int = 1,
    backend: str | None = None,
    check: bool = False,
    rng_seed: int = 0,
) -> TimeSeriesField:
    """Time histories from the Laplace-domain solver.

    ``loads`` is a sequence of ``(load_vector, samples)``; ``observe`` maps a
    label to a weight row over all DOFs (``None`` returns every DOF).  With
    ``check=True`` eight random frequencies are re-solved without condensation
    and compared.
    """
    t0 = time.perf_counter()
    loads = list(loads)
    nk = grid.n_solve
    rhs_full = np.zeros((nk, system.n_dof), dtype=complex)
    for vec, samples in loads:
        vec = np.asarray(vec, dtype=float)
        if system.interior.size and np.any(vec[system.interior] != 0):
            raise LoadError("loads must act on boundary DOFs for condensation")
        F = forward_transform(samples, grid)[:nk]
        rhs_full += F[:, None] * vec[None, :]
    rhs_b = rhs_full[:, system.boundary]

    if observe is None:
        labels = system.dof_labels()
        rows = None
        needed = np.arange(system.n_dof)
    else:
        labels = list(observe)
        rows = np.array([np.asarray(observe[k], dtype=float) for k in labels])
        needed = np.flatnonzero(np.any(rows != 0, axis=0))
    U = np.zeros((nk, system.n_dof), dtype=complex)
    filled = system.boundary
    if system.blocks:
        ch = chain_of(system)
        need_set = set(needed.tolist())
        recover = [
            link
            for link, dofs in enumerate(ch.interior_local)
            if need_set.intersection(dofs.tolist())
        ]
        ub, interiors = sweep_system(system, grid.s[:nk], rhs_b, recover, threads, backend)
        U[:, system.boundary] = ub
        for link, vals in interiors.items():
            U[:, ch.interior_local[link]] = vals
        filled = np.concatenate([filled, *(ch.interior_local[link] for link in interiors)])
    else:
        for k in range(nk):
            U[k, system.boundary] = solve_frequency(system, grid, rhs_full, k)
            U[k, system.interior] = recover_interior(system, grid.s[k], U[k, system.boundary])
        filled = np.arange(system.n_dof)

    if check:
        _spot_check(system, grid, rhs_full, U, filled, rng_seed)

    values = U if rows is None else U @ rows.T
    field = inverse_transform(FrequencySolution(values, labels), grid)
    field.meta.update(
        solver="lwfem",
        backend=backend or kernels.BACKEND,
        threads=threads,
        wall_time=time.perf_counter() - t0,
        dt=grid.dt,
        N=grid.N,
        sigma=grid.sigma,
    )
    return field


def _spot_check(system, grid, rhs_full, U, filled, seed, n=8, tol=1e-10):
    """Compare the solved DOFs ``filled`` against uncondensed solves at random ``k``."""
    rng = np.random.default_rng(seed)
    ks = rng.choice(grid.n_solve, size=min(n, grid.n_solve), replace=False)
    for k in ks:
        ref = direct_solve(system, grid.s[k], rhs_full[k])
        diff = U[k, filled] - ref[filled]
        err = np.linalg.norm(diff) / max(np.linalg.norm(ref[filled]), np.finfo(float).tiny)
        if err > tol:
            raise SolverError(f"condensed solution deviates from the full solve at k={k}: {err:.2e}")
