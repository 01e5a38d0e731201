# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: subset least-squares fits from a Gram matrix and the
Metropolis chain over inclusion vectors.  Same contract as ``_pykernel``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, NAN, isnan
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double RANK_TOL = 1e-6


cdef double _fitted(const double[:, ::1] G, const double[::1] b,
                    const Py_ssize_t* idx, Py_ssize_t k, double ridge,
                    double* L, double* z) noexcept nogil:
    # L is a k-by-k row-major workspace (stride k), z length k.
    cdef Py_ssize_t i, j, m
    cdef double s, gii, out
    if k == 0:
        return 0.0
    for i in range(k):
        for j in range(i + 1):
            s = G[idx[i], idx[j]]
            for m in range(j):
                s -= L[i * k + m] * L[j * k + m]
            if i == j:
                gii = G[idx[i], idx[i]]
                if ridge > 0:
                    s += ridge
                    if s <= 0:
                        return NAN
                elif s <= 0 or sqrt(s) <= RANK_TOL * sqrt(gii):
                    return NAN
                L[i * k + i] = sqrt(s)
            else:
                L[i * k + j] = s / L[j * k + j]
    for i in range(k):
        s = b[idx[i]]
        for m in range(i):
            s -= L[i * k + m] * z[m]
        z[i] = s / L[i * k + i]
    out = 0.0
    if ridge <= 0:
        for i in range(k):
            out += z[i] * z[i]
        return out
    # ridge: beta = L^-T z, then beta' G_MM beta
    for i in range(k - 1, -1, -1):
        s = z[i]
        for m in range(i + 1, k):
            s -= L[m * k + i] * z[m]
        z[i] = s / L[i * k + i]
    for i in range(k):
        s = 0.0
        for j in range(k):
            s += G[idx[i], idx[j]] * z[j]
        out += z[i] * s
    return out


def fitted_norm(const double[:, ::1] G, const double[::1] b, idx, double ridge=0.0):
    cdef const Py_ssize_t[::1] ix = np.ascontiguousarray(idx, dtype=np.intp)
    cdef Py_ssize_t k = ix.shape[0]
    cdef double* L = <double*> malloc((k * k + k + 1) * sizeof(double))
    cdef double out
    try:
        out = _fitted(G, b, &ix[0] if k > 0 else NULL, k, ridge, L, L + k * k)
    finally:
        free(L)
    return out


def fitted_norms(const double[:, ::1] G, const double[::1] b, masks, double ridge=0.0):
    cdef const cnp.uint64_t[::1] ms = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef Py_ssize_t p = G.shape[0], t, i, k
    cdef Py_ssize_t nm = ms.shape[0]
    cdef double[::1] out = np.empty(nm)
    cdef Py_ssize_t* idx = <Py_ssize_t*> malloc((p + 1) * sizeof(Py_ssize_t))
    cdef double* L = <double*> malloc((p * p + p + 1) * sizeof(double))
    cdef cnp.uint64_t m
    try:
        with nogil:
            for t in range(nm):
                m = ms[t]
                k = 0
                for i in range(p):
                    if (m >> i) & 1:
                        idx[k] = i
                        k += 1
                out[t] = _fitted(G, b, idx, k, ridge, L, L + k * k)
    finally:
        free(idx)
        free(L)
    return np.asarray(out)


def mcmc_chain(const double[:, ::1] G, const double[::1] b, blocks, kappas, size_pen,
               init_mask, const double[:, ::1] u, double swap_prob, double ridge,
               Py_ssize_t max_size):
    cdef Py_ssize_t p = G.shape[0]
    cdef Py_ssize_t iters = u.shape[0]
    cdef const cnp.int64_t[::1] blk = np.ascontiguousarray(blocks, dtype=np.int64)
    cdef const double[::1] kap = np.ascontiguousarray(kappas, dtype=np.float64)
    cdef const double[::1] spen = np.ascontiguousarray(size_pen, dtype=np.float64)
    cdef cnp.uint8_t[::1] mask = np.array(init_mask, dtype=np.uint8)

    add_np = np.full(iters, -1, dtype=np.int64)
    del_np = np.full(iters, -1, dtype=np.int64)
    fit_np = np.full(iters, np.nan)
    acc_np = np.zeros(iters, dtype=np.uint8)
    cdef cnp.int64_t[::1] add_out = add_np
    cdef cnp.int64_t[::1] del_out = del_np
    cdef double[::1] fit_out = fit_np
    cdef cnp.uint8_t[::1] acc_out = acc_np

    cdef Py_ssize_t* cur = <Py_ssize_t*> malloc((p + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* prop = <Py_ssize_t*> malloc((p + 1) * sizeof(Py_ssize_t))
    cdef double* L = NULL
    cdef Py_ssize_t kcap = max_size if max_size < p else p
    cdef Py_ssize_t k = 0, i, j, t, r, kn, k_new, i_add, i_del
    cdef double f_cur, f_init, f_new, pen_cur, pen_new, c_cur, c_new, dc
    cdef double u0, u1, u2, u3

    try:
        for i in range(p):
            if mask[i]:
                cur[k] = i
                k += 1
        if k > kcap:
            kcap = k
        # workspace for any model with at most kcap columns
        L = <double*> malloc((kcap * kcap + kcap + 1) * sizeof(double))
        f_cur = _fitted(G, b, cur, k, ridge, L, L + k * k)
        f_init = f_cur
        if isnan(f_cur):
            return add_np, del_np, fit_np, acc_np, f_init
        pen_cur = spen[k]
        for i in range(k):
            pen_cur += kap[blk[cur[i]]]
        c_cur = 0.5 * f_cur - pen_cur

        with nogil:
            for t in range(iters):
                u0 = u[t, 0]
                u1 = u[t, 1]
                u2 = u[t, 2]
                u3 = u[t, 3]
                if u0 < swap_prob and k > 0 and k < p:
                    r = <Py_ssize_t>(u1 * k)
                    i_del = -1
                    for i in range(p):
                        if mask[i]:
                            if r == 0:
                                i_del = i
                                break
                            r -= 1
                    r = <Py_ssize_t>(u2 * (p - k))
                    i_add = -1
                    for i in range(p):
                        if not mask[i]:
                            if r == 0:
                                i_add = i
                                break
                            r -= 1
                    k_new = k
                else:
                    i = <Py_ssize_t>(u1 * p)
                    if mask[i]:
                        i_del = i
                        i_add = -1
                        k_new = k - 1
                    else:
                        i_del = -1
                        i_add = i
                        k_new = k + 1
                add_out[t] = i_add
                del_out[t] = i_del
                if k_new > max_size:
                    continue
                kn = 0
                for j in range(k):
                    if cur[j] != i_del:
                        prop[kn] = cur[j]
                        kn += 1
                if i_add >= 0:
                    prop[kn] = i_add
                    kn += 1
                f_new = _fitted(G, b, prop, kn, ridge, L, L + kn * kn)
                fit_out[t] = f_new
                if isnan(f_new):
                    continue
                pen_new = pen_cur - spen[k] + spen[k_new]
                if i_del >= 0:
                    pen_new -= kap[blk[i_del]]
                if i_add >= 0:
                    pen_new += kap[blk[i_add]]
                c_new = 0.5 * f_new - pen_new
                dc = c_new - c_cur
                if dc >= 0 or u3 < exp(dc):
                    acc_out[t] = 1
                    for j in range(kn):
                        cur[j] = prop[j]
                    if i_del >= 0:
                        mask[i_del] = 0
                    if i_add >= 0:
                        mask[i_add] = 1
                    k = k_new
                    f_cur = f_new
                    pen_cur = pen_new
                    c_cur = c_new
    finally:
        free(cur)
        free(prop)
        free(L)
    return add_np, del_np, fit_np, acc_np, f_init
