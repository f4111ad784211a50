"""NumPy/SciPy versions of the compiled kernels (same signatures and results)."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla


class KernelError(RuntimeError):
    pass


def sweep(s, Kg, Mg, nint, link_group, link_start, nb, c, fixed, rhs, rec_links):
    s = np.asarray(s)
    nf = s.size
    nbl = 2 * c
    G, nmax, _ = Kg.shape
    nimax = max(nmax - nbl, 1)
    s2 = (s * s)[:, None, None]

    S = np.empty((G, nf, nbl, nbl), dtype=complex)
    X = np.zeros((G, nf, nimax, nbl), dtype=complex)
    for g in range(G):
        n = nbl + int(nint[g])
        A = Kg[g, :n, :n][None] + s2 * Mg[g, :n, :n][None]
        if n > nbl:
            Aii = A[:, nbl:, nbl:]
            Aib = A[:, nbl:, :nbl]
            try:
                Xg = np.linalg.solve(Aii, Aib)
            except np.linalg.LinAlgError as exc:
                raise KernelError(f"interior block singular in group {g}: {exc}") from exc
            X[g, :, : n - nbl] = Xg
            S[g] = A[:, :nbl, :nbl] - A[:, :nbl, nbl:] @ Xg
        else:
            S[g] = A[:, :nbl, :nbl]

    kl = ku = nbl - 1
    # solve_banded layout: ab[ku + i - j, j] = A[i, j]
    ab = np.zeros((nf, kl + ku + 1, nb), dtype=complex)
    ii, jj = np.meshgrid(np.arange(nbl), np.arange(nbl), indexing="ij")
    for lg, j0 in zip(link_group, link_start):
        np.add.at(ab, (slice(None), ku + ii - jj, j0 + jj), S[lg])
    b = np.array(rhs, dtype=complex, copy=True)
    for i in np.flatnonzero(np.asarray(fixed)):
        for j in range(max(0, i - ku), min(nb, i + kl + 1)):
            ab[:, ku + i - j, j] = 0.0
            ab[:, ku + j - i, i] = 0.0
        ab[:, ku, i] = 1.0
        b[:, i] = 0.0

    ub = np.empty((nf, nb), dtype=complex)
    for k in range(nf):
        try:
            ub[k] = sla.solve_banded((kl, ku), ab[k], b[k], check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise KernelError(
                f"complex factorization failed at frequency index {k} (s = {s[k]}): {exc}"
            ) from exc

    nr = len(rec_links)
    ui = np.zeros((nf, nr, nimax), dtype=complex)
    for r, link in enumerate(rec_links):
        g = link_group[link]
        j0 = link_start[link]
        ni = int(nint[g])
        ui[:, r, :ni] = -np.einsum("kij,kj->ki", X[g, :, :ni], ub[:, j0 : j0 + nbl])
    return ub, ui


def newmark(Mb, Kb, loads, signals, dt, beta, gamma, record, u0, v0, acc0):
    n, ldab = Mb.shape
    p = ldab - 1
    c0 = 1.0 / (beta * dt * dt)
    c2 = 1.0 / (beta * dt)
    c3 = 1.0 / (2.0 * beta) - 1.0
    # scipy lower band layout is [offset, column]
    Keff = (np.asarray(Kb) + c0 * np.asarray(Mb)).T
    try:
        chol = sla.cholesky_banded(Keff, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise KernelError(f"effective matrix not positive definite: {exc}") from exc
    M = _band_to_sparse(np.asarray(Mb))
    F = np.asarray(loads).T @ np.asarray(signals)

    nsteps = signals.shape[1]
    hist = np.zeros((nsteps, len(record)))
    u = np.array(u0, dtype=float)
    v = np.array(v0, dtype=float)
    a = np.array(acc0, dtype=float)
    hist[0] = u[record]
    for step in range(1, nsteps):
        rhs = F[:, step] + M @ (c0 * u + c2 * v + c3 * a)
        unew = sla.cho_solve_banded((chol, True), rhs, check_finite=False)
        anew = c0 * (unew - u) - c2 * v - c3 * a
        v = v + dt * ((1.0 - gamma) * a + gamma * anew)
        a = anew
        u = unew
        hist[step] = u[record]
    return hist


def _band_to_sparse(Mb):
    import scipy.sparse as sp

    n, ldab = Mb.shape
    diags = [Mb[: n - d, d] for d in range(ldab)]
    lower = sp.diags(diags, [-d for d in range(ldab)], shape=(n, n), format="csr")
    if ldab == 1:
        return lower
    upper = sp.diags(diags[1:], list(range(1, ldab)), shape=(n, n), format="csr")
    return (lower + upper).tocsr()
