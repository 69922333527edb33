"""Numba kernels for the hot paths: unit-clause propagation, message-passing
rounds, guided decimation with live message passing, sparse peeling, and
bit-packed GF(2) elimination.

All kernels are deterministic and single-threaded; callers own the arrays.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# message codes shared by BP and WP kernels
BP_ZERO, BP_HALF, BP_ONE = 0, 1, 2
WP_UNIFORM, WP_FROZEN, WP_NULL = 0, 1, 2


# ---------------------------------------------------------------------------
# unit clause propagation
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ucp_drain(t, qh, qt, q_var, q_want, mark, assigned, assign_iter,
               var_ptr, var_cls, width, crhs, cxor, m_count,
               conflict_t, conflict_v, ncf, n_live, violated, lifo):
    while qh < qt:
        if lifo:
            qt -= 1
            u = q_var[qt]
            want = q_want[qt]
        else:
            u = q_var[qh]
            want = q_want[qh]
            qh += 1
        if assigned[u] >= 0:
            continue
        if mark[u] == 3:
            val = np.uint8(0)
            conflict_t[ncf] = t
            conflict_v[ncf] = u
            ncf += 1
        else:
            val = want
        assigned[u] = val
        assign_iter[u] = t
        n_live -= 1
        for idx in range(var_ptr[u], var_ptr[u + 1]):
            c = var_cls[idx]
            w = width[c]
            if w == 0:
                continue
            width[c] = w - 1
            m_count[w] -= 1
            m_count[w - 1] += 1
            crhs[c] ^= val
            cxor[c] ^= u
            if w - 1 == 1:
                u2 = np.int32(cxor[c])
                s2 = crhs[c]
                mark[u2] |= np.uint8(1) << s2
                q_var[qt] = u2
                q_want[qt] = s2
                qt += 1
            elif w - 1 == 0:
                if crhs[c] == 1:
                    violated = 1
    return qh, qt, ncf, n_live, violated


@njit(cache=True)
def ucp_kernel(n, kmax, var_ptr, var_cls, width, crhs, cxor, tau, lifo,
               snap_stride, snap_n, snap_m,
               assigned, assign_iter, conflict_t, conflict_v):
    """Run unit clause propagation over all variables in index order.

    ``width``/``crhs``/``cxor`` are consumed in place.  Free choices come
    from ``tau``; opposing simultaneous unit clauses record a conflict and
    pin the variable to 0.  Returns (#conflict events, violated_flag).
    """
    m = width.shape[0]
    q_var = np.empty(m + n + 2, np.int32)
    q_want = np.empty(m + n + 2, np.uint8)
    mark = np.zeros(n + 1, np.uint8)
    m_count = np.zeros(kmax + 2, np.int64)
    for c in range(m):
        m_count[width[c]] += 1
    ncf = 0
    n_live = n
    violated = 0
    qh = qt = 0

    # flush unit clauses present in the raw input before the first iteration
    for c in range(m):
        if width[c] == 1:
            u2 = np.int32(cxor[c])
            s2 = crhs[c]
            mark[u2] |= np.uint8(1) << s2
            q_var[qt] = u2
            q_want[qt] = s2
            qt += 1
        elif width[c] == 0 and crhs[c] == 1:
            violated = 1
    qh, qt, ncf, n_live, violated = _ucp_drain(
        0, qh, qt, q_var, q_want, mark, assigned, assign_iter,
        var_ptr, var_cls, width, crhs, cxor, m_count,
        conflict_t, conflict_v, ncf, n_live, violated, lifo)

    if snap_stride > 0:
        snap_n[0] = n_live
        for w in range(kmax + 1):
            snap_m[0, w] = m_count[w]

    for t in range(n):
        x = t + 1
        if assigned[x] < 0:
            q_var[qt] = np.int32(x)
            q_want[qt] = tau[x]
            qt += 1
            qh, qt, ncf, n_live, violated = _ucp_drain(
                t, qh, qt, q_var, q_want, mark, assigned, assign_iter,
                var_ptr, var_cls, width, crhs, cxor, m_count,
                conflict_t, conflict_v, ncf, n_live, violated, lifo)
        if snap_stride > 0 and (t + 1) % snap_stride == 0:
            r = (t + 1) // snap_stride
            snap_n[r] = n_live
            for w in range(kmax + 1):
                snap_m[r, w] = m_count[w]
    return ncf, violated


# ---------------------------------------------------------------------------
# belief propagation / warning propagation rounds
# ---------------------------------------------------------------------------

@njit(cache=True)
def bp_round(e_var, e_cls, live, v2c, c2v, cls_rhs,
             v2c_new, c2v_new, c_half, c_xor, v_cnt0, v_cnt2):
    """One synchronous BP update; returns the number of changed messages."""
    E = e_var.shape[0]
    m = c_half.shape[0]
    nv = v_cnt0.shape[0]
    for c in range(m):
        c_half[c] = 0
        c_xor[c] = 0
    for v in range(nv):
        v_cnt0[v] = 0
        v_cnt2[v] = 0
    for e in range(E):
        if live[e]:
            code = v2c[e]
            c = e_cls[e]
            if code == BP_HALF:
                c_half[c] += 1
            elif code == BP_ONE:
                c_xor[c] ^= 1
            code2 = c2v[e]
            v = e_var[e]
            if code2 == BP_ZERO:
                v_cnt0[v] += 1
            elif code2 == BP_ONE:
                v_cnt2[v] += 1
    changed = 0
    for e in range(E):
        if not live[e]:
            continue
        c = e_cls[e]
        v = e_var[e]
        oh = c_half[c] - (1 if v2c[e] == BP_HALF else 0)
        if oh > 0:
            nc = np.uint8(BP_HALF)
        else:
            b = cls_rhs[c] ^ c_xor[c] ^ (1 if v2c[e] == BP_ONE else 0)
            nc = np.uint8(BP_ONE) if b else np.uint8(BP_ZERO)
        if nc != c2v[e]:
            changed += 1
        c2v_new[e] = nc
        o0 = v_cnt0[v] - (1 if c2v[e] == BP_ZERO else 0)
        o2 = v_cnt2[v] - (1 if c2v[e] == BP_ONE else 0)
        if o0 > 0 and o2 > 0:
            prev = v2c[e]
            nn = prev if prev != BP_HALF else np.uint8(BP_ZERO)
        elif o0 > 0:
            nn = np.uint8(BP_ZERO)
        elif o2 > 0:
            nn = np.uint8(BP_ONE)
        else:
            nn = np.uint8(BP_HALF)
        if nn != v2c[e]:
            changed += 1
        v2c_new[e] = nn
    return changed


@njit(cache=True)
def bp_marginals(e_var, live, c2v, n, marg, fail):
    """Converged-state marginals per variable; flags normalization failures."""
    for v in range(n + 1):
        marg[v] = BP_HALF
        fail[v] = 0
    cnt0 = np.zeros(n + 1, np.int32)
    cnt2 = np.zeros(n + 1, np.int32)
    for e in range(e_var.shape[0]):
        if live[e]:
            code = c2v[e]
            if code == BP_ZERO:
                cnt0[e_var[e]] += 1
            elif code == BP_ONE:
                cnt2[e_var[e]] += 1
    for v in range(1, n + 1):
        if cnt0[v] > 0 and cnt2[v] > 0:
            marg[v] = BP_ZERO
            fail[v] = 1
        elif cnt0[v] > 0:
            marg[v] = BP_ZERO
        elif cnt2[v] > 0:
            marg[v] = BP_ONE


@njit(cache=True)
def wp_round(e_var, e_cls, live, v2c, c2v,
             v2c_new, c2v_new, c_null, c_unif, c_deg, v_null, v_froz):
    """One synchronous WP update; returns the number of changed messages."""
    E = e_var.shape[0]
    m = c_null.shape[0]
    nv = v_null.shape[0]
    for c in range(m):
        c_null[c] = 0
        c_unif[c] = 0
        c_deg[c] = 0
    for v in range(nv):
        v_null[v] = 0
        v_froz[v] = 0
    for e in range(E):
        if live[e]:
            c = e_cls[e]
            c_deg[c] += 1
            code = v2c[e]
            if code == WP_NULL:
                c_null[c] += 1
            elif code == WP_UNIFORM:
                c_unif[c] += 1
            code2 = c2v[e]
            v = e_var[e]
            if code2 == WP_NULL:
                v_null[v] += 1
            elif code2 == WP_FROZEN:
                v_froz[v] += 1
    changed = 0
    for e in range(E):
        if not live[e]:
            continue
        c = e_cls[e]
        v = e_var[e]
        on = c_null[c] - (1 if v2c[e] == WP_NULL else 0)
        ou = c_unif[c] - (1 if v2c[e] == WP_UNIFORM else 0)
        if on == c_deg[c] - 1:
            nc = np.uint8(WP_NULL)
        elif ou == 0:
            nc = np.uint8(WP_FROZEN)
        else:
            nc = np.uint8(WP_UNIFORM)
        if nc != c2v[e]:
            changed += 1
        c2v_new[e] = nc
        on2 = v_null[v] - (1 if c2v[e] == WP_NULL else 0)
        of2 = v_froz[v] - (1 if c2v[e] == WP_FROZEN else 0)
        if on2 > 0:
            nn = np.uint8(WP_NULL)
        elif of2 > 0:
            nn = np.uint8(WP_FROZEN)
        else:
            nn = np.uint8(WP_UNIFORM)
        if nn != v2c[e]:
            changed += 1
        v2c_new[e] = nn
    return changed


@njit(cache=True)
def wp_marks(e_var, live, c2v, n, marks):
    """Variable marks from the current clause-to-variable messages."""
    cnt_n = np.zeros(n + 1, np.int32)
    cnt_f = np.zeros(n + 1, np.int32)
    for e in range(e_var.shape[0]):
        if live[e]:
            code = c2v[e]
            if code == WP_NULL:
                cnt_n[e_var[e]] += 1
            elif code == WP_FROZEN:
                cnt_f[e_var[e]] += 1
    for v in range(1, n + 1):
        if cnt_n[v] > 0:
            marks[v] = WP_NULL
        elif cnt_f[v] > 0:
            marks[v] = WP_FROZEN
        else:
            marks[v] = WP_UNIFORM


# ---------------------------------------------------------------------------
# guided decimation, strict mode: real message passing at every step
# ---------------------------------------------------------------------------

@njit(cache=True)
def bpgd_strict_kernel(n, e_var, e_cls, var_eptr, var_eidx,
                       var_ptr, var_cls, width, crhs, tau,
                       assigned, assign_iter, conflict_t, conflict_v):
    """Assign variables in index order using converged BP marginals.

    Message passing restarts from the uniform state at every step, runs on
    the live subformula (clauses with at least one unassigned variable), and
    the marginal decides: forced value, or the shared free bit on 1/2, or 0
    when both products vanish (recorded as a conflict).
    """
    E = e_var.shape[0]
    m = width.shape[0]
    v2c = np.empty(E, np.uint8)
    c2v = np.empty(E, np.uint8)
    v2c_new = np.empty(E, np.uint8)
    c2v_new = np.empty(E, np.uint8)
    live = np.empty(E, np.uint8)
    c_half = np.empty(m, np.int32)
    c_xor = np.empty(m, np.uint8)
    v_cnt0 = np.empty(n + 1, np.int32)
    v_cnt2 = np.empty(n + 1, np.int32)
    ncf = 0
    for t in range(n):
        x = t + 1
        n_live_edges = 0
        for e in range(E):
            alive = assigned[e_var[e]] < 0
            live[e] = 1 if alive else 0
            if alive:
                n_live_edges += 1
                v2c[e] = BP_HALF
                c2v[e] = BP_HALF
        cap = 2 * n_live_edges + 4
        for _ in range(cap):
            changed = bp_round(e_var, e_cls, live, v2c, c2v, crhs,
                               v2c_new, c2v_new, c_half, c_xor, v_cnt0, v_cnt2)
            tmp = v2c
            v2c = v2c_new
            v2c_new = tmp
            tmp = c2v
            c2v = c2v_new
            c2v_new = tmp
            if changed == 0:
                break
        cnt0 = 0
        cnt2 = 0
        for idx in range(var_eptr[x], var_eptr[x + 1]):
            e = var_eidx[idx]
            if live[e]:
                code = c2v[e]
                if code == BP_ZERO:
                    cnt0 += 1
                elif code == BP_ONE:
                    cnt2 += 1
        if cnt0 > 0 and cnt2 > 0:
            val = np.uint8(0)
            conflict_t[ncf] = t
            conflict_v[ncf] = x
            ncf += 1
        elif cnt0 > 0:
            val = np.uint8(0)
        elif cnt2 > 0:
            val = np.uint8(1)
        else:
            val = tau[x]
        assigned[x] = val
        assign_iter[x] = t
        for idx in range(var_ptr[x], var_ptr[x + 1]):
            c = var_cls[idx]
            if width[c] > 0:
                width[c] -= 1
                crhs[c] ^= val
    return ncf


# ---------------------------------------------------------------------------
# bit-packed GF(2) row-echelon rank
# ---------------------------------------------------------------------------

@njit(cache=True)
def ref_rank(rows, rhs):
    """Row-echelon rank of a bit-packed system; rows are destroyed.

    Returns (rank, consistent).  Pivots take the lowest-index column of each
    reduced row, so the result is order-independent.
    """
    m, W = rows.shape
    pivot_of = np.full(W * 64, -1, np.int64)
    rank = 0
    consistent = True
    for i in range(m):
        w0 = 0
        while True:
            lead = -1
            for w in range(w0, W):
                x = rows[i, w]
                if x != np.uint64(0):
                    b = 0
                    while (x >> np.uint64(b)) & np.uint64(1) == np.uint64(0):
                        b += 1
                    lead = w * 64 + b
                    w0 = w
                    break
            if lead < 0:
                if rhs[i] != 0:
                    consistent = False
                break
            p = pivot_of[lead]
            if p < 0:
                pivot_of[lead] = i
                rank += 1
                break
            for w in range(w0, W):
                rows[i, w] ^= rows[p, w]
            rhs[i] ^= rhs[p]
    return rank, consistent


# ---------------------------------------------------------------------------
# sparse peeling decomposition
# ---------------------------------------------------------------------------

@njit(cache=True)
def peel_kernel(n, ptr, flat, rhs, vptr, ventry, entry_row, active_var):
    """Peel unit rows and private columns off a sparse GF(2) system.

    ``active_var`` marks which variable ids are columns of the system.
    Returns rank contributions, forced values, the pivot stack for
    back-substitution, and which rows/columns remain in the dense core.

    Output var_mode codes: 0 live-in-core-or-free, 1 unit-forced, 2 pivot;
    core membership is decided by the caller from ``col_deg`` afterwards.
    """
    m = ptr.shape[0] - 1
    T = flat.shape[0]
    width = np.empty(m, np.int32)
    rrhs = rhs.copy()
    rxor = np.zeros(m, np.int64)
    row_alive = np.ones(m, np.uint8)
    col_deg = np.zeros(n + 1, np.int64)
    var_mode = np.zeros(n + 1, np.uint8)
    forced_val = np.zeros(n + 1, np.uint8)

    for c in range(m):
        width[c] = np.int32(ptr[c + 1] - ptr[c])
        for i in range(ptr[c], ptr[c + 1]):
            v = flat[i]
            rxor[c] ^= v
            col_deg[v] += 1

    unit_q = np.empty(2 * m + T + n + 2, np.int64)
    col_q = np.empty(T + n + 2, np.int64)
    uh = ut = ch = ct = 0
    for c in range(m):
        if width[c] == 1:
            unit_q[ut] = c
            ut += 1
    for v in range(1, n + 1):
        if active_var[v] and col_deg[v] == 1:
            col_q[ct] = v
            ct += 1

    rank = 0
    inconsistent = 0
    piv_col = np.empty(n + 1, np.int64)
    piv_rhs = np.empty(n + 1, np.uint8)
    piv_optr = np.empty(n + 2, np.int64)
    piv_others = np.empty(T, np.int64)
    npiv = 0
    piv_optr[0] = 0
    nother = 0

    while True:
        if uh < ut:
            r = unit_q[uh]
            uh += 1
            if row_alive[r] == 0 or width[r] != 1:
                continue
            c = rxor[r]
            val = rrhs[r]
            rank += 1
            row_alive[r] = 0
            col_deg[c] -= 1
            var_mode[c] = 1
            forced_val[c] = val
            # substitute the forced value everywhere the column appears
            for i in range(vptr[c], vptr[c + 1]):
                r2 = entry_row[ventry[i]]
                if row_alive[r2] == 0:
                    continue
                width[r2] -= 1
                rrhs[r2] ^= val
                rxor[r2] ^= c
                if width[r2] == 1:
                    unit_q[ut] = r2
                    ut += 1
                elif width[r2] == 0:
                    row_alive[r2] = 0
                    if rrhs[r2] == 1:
                        inconsistent = 1
            col_deg[c] = 0
            continue
        if ch < ct:
            v = col_q[ch]
            ch += 1
            if var_mode[v] != 0 or col_deg[v] != 1:
                continue
            # locate the unique live row still containing v
            r = -1
            for i in range(vptr[v], vptr[v + 1]):
                r2 = entry_row[ventry[i]]
                if row_alive[r2] and var_mode[flat[ventry[i]]] == 0:
                    r = r2
                    break
            if r < 0:
                continue
            if width[r] == 1:
                unit_q[ut] = r
                ut += 1
                continue
            rank += 1
            row_alive[r] = 0
            var_mode[v] = 2
            piv_col[npiv] = v
            piv_rhs[npiv] = rrhs[r]
            for i in range(ptr[r], ptr[r + 1]):
                u = flat[i]
                if var_mode[u] == 0:
                    col_deg[u] -= 1
                    if u != v:
                        piv_others[nother] = u
                        nother += 1
                        if col_deg[u] == 1:
                            col_q[ct] = u
                            ct += 1
                    else:
                        col_deg[u] = 0
            npiv += 1
            piv_optr[npiv] = nother
            continue
        break

    return (rank, inconsistent, row_alive, width, rrhs, col_deg, var_mode,
            forced_val, piv_col[:npiv], piv_rhs[:npiv], piv_optr[:npiv + 1],
            piv_others[:nother])
