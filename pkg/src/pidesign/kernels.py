"""Numerical kernels with a numba fast path and a numpy fallback.

Set PIDESIGN_DISABLE_NUMBA=1 to force the fallback. Leaf routines exist in
two implementations bound to module globals at import time; the sweep kernel
is written once in nopython-compatible style and either jit-compiled or run
as plain Python against the numpy leaves.

Array packing convention for multi-model work: per-model blocks live in flat
arrays with offset vectors (``m_off`` for length-m blocks, ``sq_off`` for
m-by-m blocks, ``exp_off`` for m-by-nfac exponent blocks). Exponents are
small non-negative integers.
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("PIDESIGN_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _flag not in ("", "0", "false", "no")

USING_NUMBA = False
if not _DISABLED:
    try:
        import numba

        USING_NUMBA = True
    except ImportError:
        numba = None


def njit_maybe(fn):
    if USING_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# leaf: inverse of a symmetric positive definite matrix, with success flag

def _inv_psd_loop(M, out):
    """Cholesky factor/solve written with explicit loops for nopython mode."""
    m = M.shape[0]
    L = np.zeros((m, m))
    for j in range(m):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not (s > 0.0) or not np.isfinite(s):
            return 0
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, m):
            s2 = M[i, j]
            for k in range(j):
                s2 -= L[i, k] * L[j, k]
            L[i, j] = s2 / L[j, j]
    # columns of the inverse: solve L y = e_c, then L^T x = y
    y = np.empty(m)
    for c in range(m):
        for i in range(m):
            s = 1.0 if i == c else 0.0
            for k in range(i):
                s -= L[i, k] * y[k]
            y[i] = s / L[i, i]
        for i in range(m - 1, -1, -1):
            s = y[i]
            for k in range(i + 1, m):
                s -= L[k, i] * out[k, c]
            out[i, c] = s / L[i, i]
    return 1


def _inv_psd_np(M, out):
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return 0
    out[:] = np.linalg.solve(M, np.eye(M.shape[0]))
    if not np.all(np.isfinite(out)):
        return 0
    return 1


if USING_NUMBA:
    _inv_psd = numba.njit(cache=True)(_inv_psd_loop)
else:
    _inv_psd = _inv_psd_np


# ---------------------------------------------------------------------------
# leaf: monomial feature vector of one point

def _fvec_loop(z, fac, expo, m, nf, fout):
    for r in range(m):
        val = 1.0
        for c in range(nf):
            e = expo[r * nf + c]
            if e > 0:
                zz = z[fac[c]]
                ve = zz
                for _ in range(e - 1):
                    ve *= zz
                val *= ve
        fout[r] = val
    return fout


def _fvec_np(z, fac, expo, m, nf, fout):
    if nf == 0:
        fout[:] = 1.0
        return fout
    fout[:] = np.prod(z[fac][None, :] ** expo.reshape(m, nf), axis=1)
    return fout


if USING_NUMBA:
    _fvec = numba.njit(cache=True)(_fvec_loop)
else:
    _fvec = _fvec_np


# ---------------------------------------------------------------------------
# monomial feature matrix of many points

def _monomials_batch_loop(Z, E):
    n = Z.shape[0]
    m, d = E.shape
    F = np.empty((n, m))
    for i in range(n):
        for r in range(m):
            val = 1.0
            for c in range(d):
                e = E[r, c]
                if e > 0:
                    zz = Z[i, c]
                    ve = zz
                    for _ in range(e - 1):
                        ve *= zz
                    val *= ve
            F[i, r] = val
    return F


def _monomials_batch_np(Z, E, chunk=8192):
    n = Z.shape[0]
    out = np.empty((n, E.shape[0]))
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        out[a:b] = np.prod(Z[a:b, None, :] ** E[None, :, :], axis=2)
    return out


if USING_NUMBA:
    _monomials_jit = numba.njit(cache=True)(_monomials_batch_loop)

    def monomials_batch(Z, E):
        return _monomials_jit(
            np.ascontiguousarray(Z, dtype=np.float64),
            np.ascontiguousarray(E, dtype=np.int64),
        )

else:

    def monomials_batch(Z, E):
        return _monomials_batch_np(
            np.asarray(Z, dtype=np.float64), np.asarray(E, dtype=np.int64)
        )


# ---------------------------------------------------------------------------
# box-constrained least squares: min ||A x - b||^2, lo <= x <= hi
#
# Projected gradient with exact line search: the step direction is the
# gradient restricted to coordinates not pinned at an active bound, the
# step length is the exact parabola minimizer capped at the first bound
# crossing. Descent is monotone by construction. The problem is convex,
# so a vanishing projected gradient certifies the global minimum.

PG_TOL = 1e-12
BCLS_MAXIT = 10_000


def _bcls_point_loop(A, b, lo, hi, x, maxit, tol):
    # projected gradient with exact search along the projection arc: the
    # step walks through bound breakpoints instead of stopping at the first
    q, p = A.shape
    r = np.empty(q)
    d = np.empty(p)
    v = np.empty(q)
    tb = np.empty(p)
    pg = np.inf
    for _ in range(maxit):
        for i in range(q):
            s = -b[i]
            for j in range(p):
                s += A[i, j] * x[j]
            r[i] = s
        pg = 0.0
        moving = False
        for j in range(p):
            s = 0.0
            for i in range(q):
                s += A[i, j] * r[i]
            xc = x[j] - s
            if xc < lo[j]:
                xc = lo[j]
            elif xc > hi[j]:
                xc = hi[j]
            diff = abs(x[j] - xc)
            if diff > pg:
                pg = diff
            if (x[j] <= lo[j] and s > 0.0) or (x[j] >= hi[j] and s < 0.0):
                d[j] = 0.0
            else:
                d[j] = -s
                if s != 0.0:
                    moving = True
        if pg < tol or not moving:
            break
        for j in range(p):
            if d[j] > 0.0:
                tb[j] = (hi[j] - x[j]) / d[j]
            elif d[j] < 0.0:
                tb[j] = (lo[j] - x[j]) / d[j]
            else:
                tb[j] = np.inf
        order = np.argsort(tb)
        for i in range(q):
            s = 0.0
            for j in range(p):
                s += A[i, j] * d[j]
            v[i] = s
        tcur = 0.0
        for k in range(p):
            jc = order[k]
            fp = 0.0
            fpp = 0.0
            for i in range(q):
                fp += r[i] * v[i]
                fpp += v[i] * v[i]
            if fpp <= 0.0 or fp >= 0.0:
                break
            dt = -fp / fpp
            seg = tb[jc] - tcur
            if dt < seg:
                for j in range(p):
                    if d[j] != 0.0:
                        xn = x[j] + dt * d[j]
                        if xn < lo[j]:
                            xn = lo[j]
                        elif xn > hi[j]:
                            xn = hi[j]
                        x[j] = xn
                break
            for j in range(p):
                if d[j] != 0.0:
                    xn = x[j] + seg * d[j]
                    if xn < lo[j]:
                        xn = lo[j]
                    elif xn > hi[j]:
                        xn = hi[j]
                    x[j] = xn
            x[jc] = hi[jc] if d[jc] > 0.0 else lo[jc]
            for i in range(q):
                r[i] += seg * v[i]
                v[i] -= d[jc] * A[i, jc]
            d[jc] = 0.0
            tcur = tb[jc]
    return pg


def _bcls_batch_loop(A, B, lo, hi, X, maxit, tol):
    n = B.shape[0]
    pgs = np.empty(n)
    for i in range(n):
        pgs[i] = _bcls_point_loop(A, B[i], lo, hi, X[i], maxit, tol)
    return pgs


def _bcls_batch_np(A, B, lo, hi, X, maxit, tol):
    n = B.shape[0]
    p = A.shape[1]
    pgs = np.full(n, np.inf)
    active = np.arange(n)
    x = X[active].copy()
    b = B[active]
    for _ in range(maxit):
        r = x @ A.T - b
        g = r @ A
        xc = np.clip(x - g, lo, hi)
        pg = np.max(np.abs(x - xc), axis=1)
        done = pg < tol
        if np.any(done):
            idx = active[done]
            X[idx] = x[done]
            pgs[idx] = pg[done]
            keep = ~done
            active, x, b, r, g = (
                active[keep],
                x[keep],
                b[keep],
                r[keep],
                g[keep],
            )
            if active.size == 0:
                return pgs
        d = -g
        d[(x <= lo) & (g > 0)] = 0.0
        d[(x >= hi) & (g < 0)] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            tb = np.where(
                d > 0, (hi - x) / d, np.where(d < 0, (lo - x) / d, np.inf)
            )
        order = np.argsort(tb, axis=1)
        ends = np.take_along_axis(tb, order, axis=1)
        v = d @ A.T
        z = x.copy()
        dcur = d.copy()
        rr = r.copy()
        tcur = np.zeros(active.size)
        alive = np.any(dcur != 0.0, axis=1)
        for k in range(p):
            if not alive.any():
                break
            fp = np.einsum("ij,ij->i", rr, v)
            fpp = np.einsum("ij,ij->i", v, v)
            alive &= (fpp > 0.0) & (fp < 0.0)
            dt = np.where(fpp > 0.0, -fp / np.where(fpp > 0.0, fpp, 1.0), 0.0)
            seg = ends[:, k] - tcur
            finish = alive & (dt < seg)
            if finish.any():
                z[finish] += dt[finish, None] * dcur[finish]
            alive &= ~finish
            if alive.any():
                rows = np.flatnonzero(alive)
                z[rows] += seg[rows, None] * dcur[rows]
                jc = order[rows, k]
                z[rows, jc] = np.where(dcur[rows, jc] > 0.0, hi[jc], lo[jc])
                rr[rows] += seg[rows, None] * v[rows]
                v[rows] -= dcur[rows, jc][:, None] * A.T[jc]
                dcur[rows, jc] = 0.0
                tcur[rows] = ends[rows, k]
        x = np.clip(z, lo, hi)
    # hit the iteration cap; report last state
    r = x @ A.T - b
    g = r @ A
    xc = np.clip(x - g, lo, hi)
    X[active] = x
    pgs[active] = np.max(np.abs(x - xc), axis=1)
    return pgs


if USING_NUMBA:
    _bcls_point = numba.njit(cache=True)(_bcls_point_loop)

    @numba.njit(cache=True)
    def _bcls_batch_inner(A, B, lo, hi, X, maxit, tol):
        n = B.shape[0]
        pgs = np.empty(n)
        for i in range(n):
            pgs[i] = _bcls_point(A, B[i], lo, hi, X[i], maxit, tol)
        return pgs

else:
    _bcls_batch_inner = _bcls_batch_np


def bcls_batch(A, B, lo, hi, X, maxit=BCLS_MAXIT, tol=PG_TOL):
    """Batch box-constrained least squares; X is start points, solved in place.

    Columns are equilibrated to unit norm first (a diagonal change of
    variables, so the box stays a box); the gradient-projection tolerance
    applies in the scaled coordinates.
    """
    s = np.sqrt((A * A).sum(axis=0))
    s[s == 0.0] = 1.0
    Xs = X * s
    pgs = _bcls_batch_inner(
        np.ascontiguousarray(A / s),
        np.ascontiguousarray(B),
        np.ascontiguousarray(lo * s),
        np.ascontiguousarray(hi * s),
        Xs,
        maxit,
        tol,
    )
    X[:] = np.clip(Xs / s, lo, hi)
    return pgs


# ---------------------------------------------------------------------------
# coordinate-exchange sweep over a packed model set
#
# Design rows are log-factor settings; each model sees them through either
# the affine dimensionless map (S v + t) or the scaled natural-factor map
# ((exp(v) - mid)/halfw). One sweep visits every (row, coordinate) pair and
# line-searches the coordinate over its interval with a bounded
# golden-section/parabolic minimizer. Rank-one downdates give the trial
# criterion in two matrix-vector products per model; near-singular downdates
# fall back to full re-inversion per trial.

_GOLD = 0.3819660112501051
_SQRT_EPS = 1.4901161193847656e-08
ACCEPT_TOL = 1e-10


def _sweep_body(
    V, lo, hi, S, tvec, chi_mid, chi_hw,
    map_flag, wts, m_arr, nf_arr,
    fac_flat, fac_off, exp_flat, exp_off, sq_off, m_off,
    mhat_flat, m_flat, minv_flat, d_flat, base_flat, work_flat,
    fold_flat, fbuf, gbuf, tvals, t0, slow,
    mode, w_comp, ref_da, ref_chi, n_da, xatol, maxfun,
):
    n, p = V.shape
    q = S.shape[0]
    n_mod = m_arr.shape[0]
    zq = np.empty(q)
    zp = np.empty(chi_mid.shape[0])
    accepted = 0

    def combine(tv):
        if mode == 0:
            s = 0.0
            for j in range(n_mod):
                s += wts[j] * tv[j]
            return s
        da = 0.0
        for j in range(n_da):
            da += wts[j] * tv[j]
        e_da = ref_da / da if np.isfinite(da) and da > 0.0 else 0.0
        tc = tv[n_da]
        e_chi = ref_chi / tc if np.isfinite(tc) and tc > 0.0 else 0.0
        return -(w_comp * e_da + (1.0 - w_comp) * e_chi)

    def model_f(j, x, i, k):
        # feature vector of row i with coordinate k set to x
        if map_flag[j] == 0:
            for a in range(q):
                zq[a] = tvec[a]
                for c in range(p):
                    vv = x if c == k else V[i, c]
                    zq[a] += S[a, c] * vv
            z = zq
        else:
            for c in range(p):
                vv = x if c == k else V[i, c]
                zp[c] = (math.exp(vv) - chi_mid[c]) / chi_hw[c]
            z = zp
        m = m_arr[j]
        nf = nf_arr[j]
        return _fvec(
            z,
            fac_flat[fac_off[j]:fac_off[j + 1]],
            exp_flat[exp_off[j]:exp_off[j + 1]],
            m,
            nf,
            fbuf[:m],
        )

    def trial_trace(j, f):
        m = m_arr[j]
        o = sq_off[j]
        if slow[j] == 1:
            base = base_flat[o:o + m * m].reshape(m, m)
            trial = work_flat[o:o + m * m].reshape(m, m)
            for r in range(m):
                for c in range(m):
                    trial[r, c] = base[r, c] + f[r] * f[c]
            inv = d_flat[o:o + m * m].reshape(m, m)
            ok = _inv_psd(trial, inv)
            if ok == 0:
                return np.inf
            mh = mhat_flat[o:o + m * m].reshape(m, m)
            s = 0.0
            for r in range(m):
                for c in range(m):
                    s += inv[r, c] * mh[r, c]
            return s
        D = d_flat[o:o + m * m].reshape(m, m)
        mh = mhat_flat[o:o + m * m].reshape(m, m)
        u = 0.0
        for r in range(m):
            s = 0.0
            for c in range(m):
                s += D[r, c] * f[c]
            gbuf[r] = s
            u += f[r] * s
        if 1.0 + u < 1e-12:
            return np.inf
        snum = 0.0
        for r in range(m):
            s = 0.0
            for c in range(m):
                s += mh[r, c] * gbuf[c]
            snum += gbuf[r] * s
        return t0[j] - snum / (1.0 + u)

    def objective(x, i, k):
        if mode == 0:
            s = 0.0
            for j in range(n_mod):
                f = model_f(j, x, i, k)
                tj = trial_trace(j, f)
                if not np.isfinite(tj):
                    return np.inf
                s += wts[j] * tj
            return s
        da = 0.0
        for j in range(n_da):
            f = model_f(j, x, i, k)
            tj = trial_trace(j, f)
            if not np.isfinite(tj):
                da = np.inf
            elif np.isfinite(da):
                da += wts[j] * tj
        f = model_f(n_da, x, i, k)
        tc = trial_trace(n_da, f)
        e_da = ref_da / da if np.isfinite(da) and da > 0.0 else 0.0
        e_chi = ref_chi / tc if np.isfinite(tc) and tc > 0.0 else 0.0
        return -(w_comp * e_da + (1.0 - w_comp) * e_chi)

    for i in range(n):
        for k in range(p):
            if hi[k] - lo[k] <= 0.0:
                continue
            x_cur = V[i, k]
            # per-model downdate: remove row i
            for j in range(n_mod):
                m = m_arr[j]
                o = sq_off[j]
                f_old = fold_flat[m_off[j]:m_off[j] + m]
                model_f(j, x_cur, i, k)
                for r in range(m):
                    f_old[r] = fbuf[r]
                Minv = minv_flat[o:o + m * m].reshape(m, m)
                u_old = 0.0
                for r in range(m):
                    s = 0.0
                    for c in range(m):
                        s += Minv[r, c] * f_old[c]
                    gbuf[r] = s
                    u_old += f_old[r] * s
                if u_old > 1.0 - 1e-10:
                    slow[j] = 1
                    M = m_flat[o:o + m * m].reshape(m, m)
                    base = base_flat[o:o + m * m].reshape(m, m)
                    for r in range(m):
                        for c in range(m):
                            base[r, c] = M[r, c] - f_old[r] * f_old[c]
                else:
                    slow[j] = 0
                    D = d_flat[o:o + m * m].reshape(m, m)
                    den = 1.0 - u_old
                    for r in range(m):
                        for c in range(m):
                            D[r, c] = Minv[r, c] + gbuf[r] * gbuf[c] / den
                    mh = mhat_flat[o:o + m * m].reshape(m, m)
                    s = 0.0
                    for r in range(m):
                        for c in range(m):
                            s += D[r, c] * mh[r, c]
                    t0[j] = s

            j_cur = combine(tvals)

            # bounded scalar minimization (golden section + parabolic)
            a = lo[k]
            b = hi[k]
            xf = a + _GOLD * (b - a)
            nfc = xf
            fulc = xf
            rat = 0.0
            e = 0.0
            fx = objective(xf, i, k)
            num = 1
            ffulc = fx
            fnfc = fx
            xm = 0.5 * (a + b)
            tol1 = _SQRT_EPS * abs(xf) + xatol / 3.0
            tol2 = 2.0 * tol1
            while abs(xf - xm) > (tol2 - 0.5 * (b - a)):
                golden = True
                if abs(e) > tol1:
                    golden = False
                    r_ = (xf - nfc) * (fx - ffulc)
                    q_ = (xf - fulc) * (fx - fnfc)
                    p_ = (xf - fulc) * q_ - (xf - nfc) * r_
                    q_ = 2.0 * (q_ - r_)
                    if q_ > 0.0:
                        p_ = -p_
                    q_ = abs(q_)
                    r_ = e
                    e = rat
                    if (
                        (abs(p_) < abs(0.5 * q_ * r_))
                        and (p_ > q_ * (a - xf))
                        and (p_ < q_ * (b - xf))
                    ):
                        rat = p_ / q_
                        x = xf + rat
                        if ((x - a) < tol2) or ((b - x) < tol2):
                            si = 1.0 if xm - xf >= 0.0 else -1.0
                            rat = tol1 * si
                    else:
                        golden = True
                if golden:
                    if xf >= xm:
                        e = a - xf
                    else:
                        e = b - xf
                    rat = _GOLD * e
                si = 1.0 if rat >= 0.0 else -1.0
                x = xf + si * max(abs(rat), tol1)
                fu = objective(x, i, k)
                num += 1
                if fu <= fx:
                    if x >= xf:
                        a = xf
                    else:
                        b = xf
                    fulc = nfc
                    ffulc = fnfc
                    nfc = xf
                    fnfc = fx
                    xf = x
                    fx = fu
                else:
                    if x < xf:
                        a = x
                    else:
                        b = x
                    if (fu <= fnfc) or (nfc == xf):
                        fulc = nfc
                        ffulc = fnfc
                        nfc = x
                        fnfc = fu
                    elif (fu <= ffulc) or (fulc == xf) or (fulc == nfc):
                        fulc = x
                        ffulc = fu
                xm = 0.5 * (a + b)
                tol1 = _SQRT_EPS * abs(xf) + xatol / 3.0
                tol2 = 2.0 * tol1
                if num >= maxfun:
                    break

            if fx < j_cur - ACCEPT_TOL * (1.0 + abs(j_cur)):
                V[i, k] = xf
                accepted += 1
                for j in range(n_mod):
                    m = m_arr[j]
                    o = sq_off[j]
                    f_new = model_f(j, xf, i, k)
                    f_old = fold_flat[m_off[j]:m_off[j] + m]
                    M = m_flat[o:o + m * m].reshape(m, m)
                    mh = mhat_flat[o:o + m * m].reshape(m, m)
                    Minv = minv_flat[o:o + m * m].reshape(m, m)
                    for r in range(m):
                        for c in range(m):
                            M[r, c] += f_new[r] * f_new[c] - f_old[r] * f_old[c]
                    if slow[j] == 1:
                        ok = _inv_psd(M, Minv)
                        if ok == 0:
                            tvals[j] = np.inf
                            continue
                        s = 0.0
                        for r in range(m):
                            for c in range(m):
                                s += Minv[r, c] * mh[r, c]
                        tvals[j] = s
                    else:
                        D = d_flat[o:o + m * m].reshape(m, m)
                        u = 0.0
                        for r in range(m):
                            s = 0.0
                            for c in range(m):
                                s += D[r, c] * f_new[c]
                            gbuf[r] = s
                            u += f_new[r] * s
                        den = 1.0 + u
                        for r in range(m):
                            for c in range(m):
                                Minv[r, c] = D[r, c] - gbuf[r] * gbuf[c] / den
                        snum = 0.0
                        for r in range(m):
                            s = 0.0
                            for c in range(m):
                                s += mh[r, c] * gbuf[c]
                            snum += gbuf[r] * s
                        tvals[j] = t0[j] - snum / den
    return accepted


exchange_sweep = njit_maybe(_sweep_body)
