"""Pure numpy implementation of the hot kernels.

Mirrors ``_ckernel.pyx`` move for move so that, given the same uniforms,
both backends walk the same chain.  Used when the compiled module is not
built or when ``BLOCKL0_PURE_PYTHON=1``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

# Relative residual below which a column is treated as collinear with the
# columns before it (L_ii / sqrt(G_ii)).
RANK_TOL = 1e-6


def fitted_norm(G, b, idx, ridge=0.0):
    """||X_M beta_M||^2 from the Gram matrix; NaN when rank deficient."""
    k = len(idx)
    if k == 0:
        return 0.0
    sub = G[np.ix_(idx, idx)]
    A = sub + ridge * np.eye(k) if ridge > 0 else sub
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return math.nan
    if ridge <= 0:
        d = np.diag(L)
        if not np.all(d > RANK_TOL * np.sqrt(np.diag(sub))):
            return math.nan
    z = solve_triangular(L, b[idx], lower=True, check_finite=False)
    if ridge <= 0:
        return float(z @ z)
    beta = solve_triangular(L.T, z, lower=False, check_finite=False)
    return float(beta @ (sub @ beta))


def fitted_norms(G, b, masks, ridge=0.0):
    p = G.shape[0]
    out = np.empty(len(masks))
    bits = np.arange(p, dtype=np.uint64)
    for t, m in enumerate(np.asarray(masks, dtype=np.uint64)):
        idx = np.flatnonzero((m >> bits) & np.uint64(1))
        out[t] = fitted_norm(G, b, idx, ridge)
    return out


def mcmc_chain(G, b, blocks, kappas, size_pen, init_mask, u, swap_prob,
               ridge, max_size):
    """Metropolis walk over inclusion vectors.

    Returns ``(add, delete, fitted, accepted, init_fitted)`` with one entry
    per iteration; ``add``/``delete`` are -1 when unused and ``fitted`` is
    NaN for proposals that are rank deficient or exceed ``max_size``.
    """
    p = G.shape[0]
    iters = u.shape[0]
    mask = np.array(init_mask, dtype=bool)
    cur = list(np.flatnonzero(mask))
    k = len(cur)
    f_cur = f_init = fitted_norm(G, b, np.asarray(cur, dtype=np.intp), ridge)
    pen_cur = float(kappas[blocks[cur]].sum()) + size_pen[k] if k else size_pen[0]

    add_out = np.full(iters, -1, dtype=np.int64)
    del_out = np.full(iters, -1, dtype=np.int64)
    fit_out = np.full(iters, np.nan)
    acc_out = np.zeros(iters, dtype=np.uint8)
    if math.isnan(f_cur):
        return add_out, del_out, fit_out, acc_out, f_init
    c_cur = 0.5 * f_cur - pen_cur

    for t in range(iters):
        u0, u1, u2, u3 = u[t]
        if u0 < swap_prob and 0 < k < p:
            inc = np.flatnonzero(mask)
            exc = np.flatnonzero(~mask)
            i_del = int(inc[int(u1 * k)])
            i_add = int(exc[int(u2 * (p - k))])
            k_new = k
        else:
            i = int(u1 * p)
            if mask[i]:
                i_del, i_add, k_new = i, -1, k - 1
            else:
                i_del, i_add, k_new = -1, i, k + 1
        add_out[t] = i_add
        del_out[t] = i_del
        if k_new > max_size:
            continue
        prop = [j for j in cur if j != i_del]
        if i_add >= 0:
            prop.append(i_add)
        f_new = fitted_norm(G, b, np.asarray(prop, dtype=np.intp), ridge)
        fit_out[t] = f_new
        if math.isnan(f_new):
            continue
        pen_new = pen_cur - size_pen[k] + size_pen[k_new]
        if i_del >= 0:
            pen_new -= kappas[blocks[i_del]]
        if i_add >= 0:
            pen_new += kappas[blocks[i_add]]
        c_new = 0.5 * f_new - pen_new
        dc = c_new - c_cur
        if dc >= 0 or u3 < math.exp(dc):
            acc_out[t] = 1
            cur = prop
            if i_del >= 0:
                mask[i_del] = False
            if i_add >= 0:
                mask[i_add] = True
            k, f_cur, pen_cur, c_cur = k_new, f_new, pen_new, c_new
    return add_out, del_out, fit_out, acc_out, f_init
