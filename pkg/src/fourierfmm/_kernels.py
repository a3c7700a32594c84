"""Compiled inner loops. Callers own validation; these assume well-formed input."""

import math

import numba as nb
import numpy as np

_opts = dict(cache=True, nogil=True)


@nb.njit(parallel=True, **_opts)
def legendre_series(coef, x):
    """sum_k coef[k] P_k(x) for every entry of the 1-D array ``x``."""
    n = coef.shape[0]
    cr = coef.real.copy()
    ci = coef.imag.copy()
    out = np.empty(x.shape[0], dtype=np.complex128)
    a = np.empty(n)
    b = np.empty(n)
    for k in range(n):
        a[k] = (2.0 * k + 1.0) / (k + 1.0)
        b[k] = k / (k + 1.0)
    for i in nb.prange(x.shape[0]):
        xi = x[i]
        p0 = 1.0
        sr = cr[0]
        si = ci[0]
        if n > 1:
            p1 = xi
            sr += cr[1] * p1
            si += ci[1] * p1
            for k in range(1, n - 1):
                p2 = a[k] * xi * p1 - b[k] * p0
                sr += cr[k + 1] * p2
                si += ci[k + 1] * p2
                p0 = p1
                p1 = p2
        out[i] = complex(sr, si)
    return out


@nb.njit(parallel=True, **_opts)
def legendre_series_pole(coef, t, neg):
    """sum_k coef[k] P_k(x) with x given through its distance to the nearest
    pole: x = 1 - t, or x = -(1 - t) where ``neg`` is set.

    Runs the recurrence on D_k = P_k - P_{k-1},
    (k+1) D_{k+1} = k D_k - (2k+1) t P_k, which keeps full relative accuracy
    in t near x = +-1 where the plain recurrence loses it.
    """
    n = coef.shape[0]
    out = np.empty(t.shape[0], dtype=np.complex128)
    a = np.empty(max(n - 1, 1))
    b = np.empty(max(n - 1, 1))
    for k in range(n - 1):
        a[k] = k / (k + 1.0)
        b[k] = (2.0 * k + 1.0) / (k + 1.0)
    cr = coef.real.copy()
    ci = coef.imag.copy()
    # the odd-order coefficients flip sign on the negative pole
    crn = cr.copy()
    cin = ci.copy()
    for k in range(1, n, 2):
        crn[k] = -cr[k]
        cin[k] = -ci[k]
    for i in nb.prange(t.shape[0]):
        ti = t[i]
        pr = crn if neg[i] else cr
        pi = cin if neg[i] else ci
        p = 1.0
        d = 0.0
        sr = pr[0]
        si = pi[0]
        for k in range(0, n - 1):
            d = a[k] * d - b[k] * ti * p
            p = p + d
            sr += pr[k + 1] * p
            si += pi[k + 1] * p
        out[i] = complex(sr, si)
    return out


@nb.njit(parallel=True, **_opts)
def p2m(fields, box_start, box_stop, box_center, pts, weights, kappa,
        n_phi, offsets, cos_t, sin_t, cos_p, sin_p):
    """fields[b, k] = sum_i w_i exp(i kappa s_k.(x_i - c_b)) on stored rows.

    ``cos_p``/``sin_p`` are flat per-sample tables. Rows n and n_rows-1-n are
    mirror images in z and share phase work when their n_phi agree; every
    n_phi must be even.
    """
    nbox = fields.shape[0]
    nrow = n_phi.shape[0]
    for b in nb.prange(nbox):
        for k in range(fields.shape[1]):
            fields[b, k] = 0.0
        cx = box_center[b, 0]
        cy = box_center[b, 1]
        cz = box_center[b, 2]
        for i in range(box_start[b], box_stop[b]):
            dx = kappa * (pts[i, 0] - cx)
            dy = kappa * (pts[i, 1] - cy)
            dz = kappa * (pts[i, 2] - cz)
            w = weights[i]
            for n in range(nrow):
                n2 = nrow - 1 - n
                if n2 < n and n_phi[n2] == n_phi[n]:
                    continue
                pair = n2 > n and n_phi[n2] == n_phi[n]
                pz = dz * cos_t[n]
                bz = complex(math.cos(pz), math.sin(pz))
                wb = w * bz
                wbc = w * bz.conjugate()
                L = n_phi[n]
                h = L // 2
                o = offsets[n]
                o2 = offsets[n2]
                st = sin_t[n]
                for m in range(h):
                    ph = st * (dx * cos_p[o + m] + dy * sin_p[o + m])
                    a = complex(math.cos(ph), math.sin(ph))
                    ac = a.conjugate()
                    fields[b, o + m] += wb * a
                    fields[b, o + m + h] += wb * ac
                    if pair:
                        fields[b, o2 + m] += wbc * a
                        fields[b, o2 + m + h] += wbc * ac


@nb.njit(parallel=True, **_opts)
def l2p(out, fields, box_start, box_stop, box_center, pts, qweights, kappa,
        n_phi, offsets, cos_t, sin_t, cos_p, sin_p):
    """out[i] += sum_k q_k L[b, k] exp(i kappa s_k.(c_b - x_i))."""
    nbox = fields.shape[0]
    nrow = n_phi.shape[0]
    for b in nb.prange(nbox):
        cx = box_center[b, 0]
        cy = box_center[b, 1]
        cz = box_center[b, 2]
        for i in range(box_start[b], box_stop[b]):
            dx = kappa * (cx - pts[i, 0])
            dy = kappa * (cy - pts[i, 1])
            dz = kappa * (cz - pts[i, 2])
            acc = 0.0 + 0.0j
            for n in range(nrow):
                n2 = nrow - 1 - n
                if n2 < n and n_phi[n2] == n_phi[n]:
                    continue
                pair = n2 > n and n_phi[n2] == n_phi[n]
                pz = dz * cos_t[n]
                bz = complex(math.cos(pz), math.sin(pz))
                L = n_phi[n]
                h = L // 2
                o = offsets[n]
                o2 = offsets[n2]
                st = sin_t[n]
                r1 = 0.0 + 0.0j
                r2 = 0.0 + 0.0j
                for m in range(h):
                    ph = st * (dx * cos_p[o + m] + dy * sin_p[o + m])
                    a = complex(math.cos(ph), math.sin(ph))
                    ac = a.conjugate()
                    r1 += qweights[o + m] * fields[b, o + m] * a \
                        + qweights[o + m + h] * fields[b, o + m + h] * ac
                    if pair:
                        r2 += qweights[o2 + m] * fields[b, o2 + m] * a \
                            + qweights[o2 + m + h] * fields[b, o2 + m + h] * ac
                acc += r1 * bz + r2 * bz.conjugate()
            out[i] += acc


@nb.njit(parallel=True, **_opts)
def m2l_accumulate(incoming, outgoing, table, tgt, src):
    """incoming[tgt[p]] += outgoing[src[p]] * table; targets are distinct."""
    nk = table.shape[0]
    for p in nb.prange(tgt.shape[0]):
        t = tgt[p]
        s = src[p]
        for k in range(nk):
            incoming[t, k] += outgoing[s, k] * table[k]


@nb.njit(parallel=True, **_opts)
def m2l_gather(incoming, outgoing, tables, ptr, src, tab):
    """incoming[t] += sum_q outgoing[src[q]] * tables[tab[q]] for q in ptr[t]:ptr[t+1].

    Blocked over samples so the accumulator stays in cache and every target
    row is written once.
    """
    nk = outgoing.shape[1]
    blk = 256
    for t in nb.prange(incoming.shape[0]):
        if ptr[t] == ptr[t + 1]:
            continue
        acc = np.empty(blk, dtype=np.complex128)
        for k0 in range(0, nk, blk):
            k1 = min(nk, k0 + blk)
            for k in range(k1 - k0):
                acc[k] = 0.0
            for q in range(ptr[t], ptr[t + 1]):
                s = src[q]
                j = tab[q]
                for k in range(k0, k1):
                    acc[k - k0] += outgoing[s, k] * tables[j, k]
            for k in range(k0, k1):
                incoming[t, k] += acc[k - k0]


@nb.njit(parallel=True, **_opts)
def near_field(out, pts, weights, leaf_start, leaf_stop, nbr_ptr, nbr_idx, kappa):
    """Direct kernel sums over each leaf's neighbor list (self included)."""
    nleaf = leaf_start.shape[0]
    wre = weights.real.copy()
    wim = weights.imag.copy()
    bad = 0
    for b in nb.prange(nleaf):
        for i in range(leaf_start[b], leaf_stop[b]):
            xi = pts[i, 0]
            yi = pts[i, 1]
            zi = pts[i, 2]
            ar = 0.0
            ai = 0.0
            for q in range(nbr_ptr[b], nbr_ptr[b + 1]):
                c = nbr_idx[q]
                for j in range(leaf_start[c], leaf_stop[c]):
                    if j == i:
                        continue
                    dx = xi - pts[j, 0]
                    dy = yi - pts[j, 1]
                    dz = zi - pts[j, 2]
                    d = math.sqrt(dx * dx + dy * dy + dz * dz)
                    if d == 0.0:
                        bad += 1
                        continue
                    kd = kappa * d
                    inv = 1.0 / d
                    cr = math.cos(kd) * inv
                    ci = math.sin(kd) * inv
                    wr = wre[j]
                    wi = wim[j]
                    ar += wr * cr - wi * ci
                    ai += wr * ci + wi * cr
            out[i] += complex(ar, ai)
    return bad


@nb.njit(**_opts)
def _two_sum(a, b):
    s = a + b
    bp = s - a
    return s, (a - (s - bp)) + (b - bp)


@nb.njit(parallel=True, **_opts)
def direct_sum_compensated(pts, weights, kappa):
    """sigma_i = sum_{j != i} exp(i kappa r_ij) / r_ij psi_j with error-free
    transformations on the real and imaginary accumulators."""
    n = pts.shape[0]
    out = np.empty(n, dtype=np.complex128)
    bad = 0
    for i in nb.prange(n):
        sr = 0.0
        er = 0.0
        si = 0.0
        ei = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            dz = pts[i, 2] - pts[j, 2]
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            if d == 0.0:
                bad += 1
                continue
            kd = kappa * d
            gr = math.cos(kd) / d
            gi = math.sin(kd) / d
            w = weights[j]
            tr = gr * w.real - gi * w.imag
            ti = gr * w.imag + gi * w.real
            sr, e = _two_sum(sr, tr)
            er += e
            si, e = _two_sum(si, ti)
            ei += e
        out[i] = complex(sr + er, si + ei)
    return out, bad


@nb.njit(**_opts)
def aliasing_bound_scan(coef_abs, bess_abs, start, stop, step, threshold):
    """Smallest N in range(start, stop, step) with
    sum_n coef_abs[n] * bess_abs[M(N, n)] < threshold, or -1.

    ``coef_abs`` is indexed by frequency n in [-F, F] at offset F;
    M(N, n) = N - |n| if |n| < N/2 else |n|. ``bess_abs`` must cover all
    orders up to ``stop + F``.
    """
    F = (coef_abs.shape[0] - 1) // 2
    for N in range(start, stop, step):
        acc = 0.0
        for idx in range(coef_abs.shape[0]):
            c = coef_abs[idx]
            if c == 0.0:
                continue
            a = abs(idx - F)
            if 2 * a < N:
                m = N - a
            else:
                m = a
            acc += c * bess_abs[m]
            if acc >= threshold:
                break
        if acc < threshold:
            return N
    return -1


@nb.njit(**_opts)
def aliasing_bound(coef_abs, bess_abs, N):
    F = (coef_abs.shape[0] - 1) // 2
    acc = 0.0
    for idx in range(coef_abs.shape[0]):
        a = abs(idx - F)
        m = N - a if 2 * a < N else a
        acc += coef_abs[idx] * bess_abs[m]
    return acc
