# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: the condensed frequency sweep and the Newmark recursion."""

import numpy as np
cimport numpy as cnp
from libc.string cimport memset
from scipy.linalg.cython_lapack cimport zgesv, zgbsv, dpbtrf, dpbtrs

cnp.import_array()

ctypedef double complex zc


class KernelError(RuntimeError):
    pass


def sweep(
    const zc[::1] s,
    const double[:, :, ::1] Kg,
    const double[:, :, ::1] Mg,
    const int[::1] nint,
    const int[::1] link_group,
    const int[::1] link_start,
    int nb,
    int c,
    const unsigned char[::1] fixed,
    const zc[:, ::1] rhs,
    const int[::1] rec_links,
):
    """Condense every group, solve the banded boundary system, recover interiors.

    Group matrices are ordered ``[boundary(2c) | interior(nint)]``.  Returns
    ``(u_boundary[nf, nb], u_interior[nf, n_rec, max_nint])``.
    """
    cdef int nf = s.shape[0]
    cdef int G = Kg.shape[0]
    cdef int nmax = Kg.shape[1]
    cdef int nl = link_group.shape[0]
    cdef int nr = rec_links.shape[0]
    cdef int nbl = 2 * c
    cdef int kl = nbl - 1
    cdef int ku = nbl - 1
    cdef int ldab = 2 * kl + ku + 1
    cdef int nimax = nmax - nbl
    if nimax < 0:
        nimax = 0

    ub_arr = np.zeros((nf, nb), dtype=np.complex128)
    ui_arr = np.zeros((nf, nr, max(nimax, 1)), dtype=np.complex128)
    cdef zc[:, ::1] ub = ub_arr
    cdef zc[:, :, ::1] ui = ui_arr

    # Fortran-ordered workspaces
    A_arr = np.zeros((nmax, nmax), dtype=np.complex128, order="F")
    S_arr = np.zeros((G, nbl, nbl), dtype=np.complex128)
    X_arr = np.zeros((G, nbl, max(nimax, 1)), dtype=np.complex128)
    ab_arr = np.zeros((nb, ldab), dtype=np.complex128)
    Aii_arr = np.zeros((max(nimax, 1), max(nimax, 1)), dtype=np.complex128, order="F")
    Aib_arr = np.zeros((nbl, max(nimax, 1)), dtype=np.complex128)
    ipiv_arr = np.zeros(max(nb, nmax, 1), dtype=np.intc)
    b_arr = np.zeros(nb, dtype=np.complex128)
    cdef zc[::1, :] A = A_arr
    cdef zc[:, :, ::1] S = S_arr
    cdef zc[:, :, ::1] X = X_arr
    cdef zc[:, ::1] ab = ab_arr
    cdef zc[::1, :] Aii = Aii_arr
    cdef zc[:, ::1] Aib = Aib_arr
    cdef int[::1] ipiv = ipiv_arr
    cdef zc[::1] bvec = b_arr

    cdef int k, g, i, j, q, l, j0, ni, n, info, one = 1, r
    cdef zc s2, acc
    cdef int bad_k = -1, bad_info = 0

    with nogil:
        for k in range(nf):
            s2 = s[k] * s[k]
            for g in range(G):
                ni = nint[g]
                n = nbl + ni
                for j in range(n):
                    for i in range(n):
                        A[i, j] = Kg[g, i, j] + s2 * Mg[g, i, j]
                if ni > 0:
                    # X holds (A_ii^-1 A_ib)^T row-major == A_ii^-1 A_ib column-major
                    for j in range(ni):
                        for i in range(ni):
                            Aii[i, j] = A[nbl + i, nbl + j]
                    for j in range(nbl):
                        for i in range(ni):
                            Aib[j, i] = A[nbl + i, j]
                    zgesv(&ni, &nbl, &Aii[0, 0], &nimax, &ipiv[0], &Aib[0, 0], &nimax, &info)
                    if info != 0:
                        bad_k = k
                        bad_info = info
                        break
                    for j in range(nbl):
                        for i in range(ni):
                            X[g, j, i] = Aib[j, i]
                    for i in range(nbl):
                        for j in range(nbl):
                            acc = A[i, j]
                            for q in range(ni):
                                acc = acc - A[i, nbl + q] * Aib[j, q]
                            S[g, i, j] = acc
                else:
                    for i in range(nbl):
                        for j in range(nbl):
                            S[g, i, j] = A[i, j]
            if bad_k >= 0:
                break

            memset(&ab[0, 0], 0, nb * ldab * sizeof(zc))
            for l in range(nl):
                g = link_group[l]
                j0 = link_start[l]
                for j in range(nbl):
                    for i in range(nbl):
                        # A(i, j) -> ab[kl + ku + i - j, j]; ab is stored column-major as [j, row]
                        ab[j0 + j, kl + ku + i - j] = ab[j0 + j, kl + ku + i - j] + S[g, i, j]
            for i in range(nb):
                bvec[i] = rhs[k, i]
            for i in range(nb):
                if fixed[i]:
                    for j in range(i - ku if i - ku > 0 else 0, (i + kl + 1) if i + kl + 1 < nb else nb):
                        ab[j, kl + ku + i - j] = 0
                    for j in range(i - kl if i - kl > 0 else 0, (i + ku + 1) if i + ku + 1 < nb else nb):
                        ab[i, kl + ku + j - i] = 0
                    ab[i, kl + ku] = 1.0
                    bvec[i] = 0
            zgbsv(&nb, &kl, &ku, &one, &ab[0, 0], &ldab, &ipiv[0], &bvec[0], &nb, &info)
            if info != 0:
                bad_k = k
                bad_info = info
                break
            for i in range(nb):
                ub[k, i] = bvec[i]
            for r in range(nr):
                l = rec_links[r]
                g = link_group[l]
                j0 = link_start[l]
                for i in range(nint[g]):
                    acc = 0
                    for j in range(nbl):
                        acc = acc - X[g, j, i] * bvec[j0 + j]
                    ui[k, r, i] = acc
    if bad_k >= 0:
        raise KernelError(
            f"complex factorization failed at frequency index {bad_k} "
            f"(s = {complex(s[bad_k])}, LAPACK info = {bad_info})"
        )
    return ub_arr, ui_arr


def newmark(
    const double[:, ::1] Mb,
    const double[:, ::1] Kb,
    const double[:, ::1] loads,
    const double[:, ::1] signals,
    double dt,
    double beta,
    double gamma,
    const int[::1] record,
    const double[::1] u0,
    const double[::1] v0,
    const double[::1] acc0,
):
    """Newmark recursion on banded symmetric matrices.

    ``Mb``/``Kb`` use LAPACK lower band storage laid out as ``[column, offset]``.
    ``loads[l]`` is the spatial pattern driven by ``signals[l]``.  Returns the
    recorded displacement history ``[n_steps, n_record]``.
    """
    cdef int n = Mb.shape[0]
    cdef int p = Mb.shape[1] - 1
    cdef int ldab = p + 1
    cdef int nload = loads.shape[0]
    cdef int nsteps = signals.shape[1]
    cdef int nrec = record.shape[0]

    hist_arr = np.zeros((nsteps, nrec))
    cdef double[:, ::1] hist = hist_arr
    Keff_arr = np.zeros((n, ldab))
    cdef double[:, ::1] Keff = Keff_arr
    u_arr = np.array(u0, dtype=np.float64)
    v_arr = np.array(v0, dtype=np.float64)
    a_arr = np.array(acc0, dtype=np.float64)
    w_arr = np.zeros(n)
    rhs_arr = np.zeros(n)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] a = a_arr
    cdef double[::1] w = w_arr
    cdef double[::1] rhs = rhs_arr

    cdef double c0 = 1.0 / (beta * dt * dt)
    cdef double c2 = 1.0 / (beta * dt)
    cdef double c3 = 1.0 / (2.0 * beta) - 1.0
    cdef double unew, anew, val
    cdef int i, j, d, l, step, info = 0, one = 1
    cdef char uplo = b'L'

    for j in range(n):
        for d in range(ldab):
            Keff[j, d] = Kb[j, d] + c0 * Mb[j, d]
    with nogil:
        dpbtrf(&uplo, &n, &p, &Keff[0, 0], &ldab, &info)
    if info != 0:
        raise KernelError(f"effective matrix not positive definite (LAPACK info = {info})")

    with nogil:
        for i in range(nrec):
            hist[0, i] = u[record[i]]
        for step in range(1, nsteps):
            for i in range(n):
                w[i] = c0 * u[i] + c2 * v[i] + c3 * a[i]
            for i in range(n):
                val = 0.0
                for l in range(nload):
                    val = val + loads[l, i] * signals[l, step]
                rhs[i] = val
            # symmetric banded matvec: rhs += M w
            for j in range(n):
                rhs[j] = rhs[j] + Mb[j, 0] * w[j]
                for d in range(1, ldab):
                    if j + d >= n:
                        break
                    rhs[j + d] = rhs[j + d] + Mb[j, d] * w[j]
                    rhs[j] = rhs[j] + Mb[j, d] * w[j + d]
            dpbtrs(&uplo, &n, &p, &one, &Keff[0, 0], &ldab, &rhs[0], &n, &info)
            for i in range(n):
                unew = rhs[i]
                anew = c0 * (unew - u[i]) - c2 * v[i] - c3 * a[i]
                v[i] = v[i] + dt * ((1.0 - gamma) * a[i] + gamma * anew)
                a[i] = anew
                u[i] = unew
            for i in range(nrec):
                hist[step, i] = u[record[i]]
    return hist_arr
