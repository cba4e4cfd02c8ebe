"""Numba-jitted implementations of the hot numeric kernels.

Same signatures and semantics as ``numpy_impl``; plain loops compiled with
@njit.  Kept free of scipy so the module imports under numba alone.
"""

import math

import numpy as np
from numba import njit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@njit(cache=True)
def _ndtr(t):
    return 0.5 * math.erfc(-t * _INV_SQRT2)


@njit(cache=True)
def _expm1_div(c, x):
    if abs(c) < 1e-12:
        return x * (1.0 + 0.5 * c * x)
    return math.expm1(c * x) / c


@njit(cache=True)
def _dexpm1_div_dc(c, x):
    cx = c * x
    if abs(cx) < 1e-4:
        return x * x * (0.5 + cx / 3.0 + cx * cx / 8.0)
    return (x * math.exp(cx) * c - math.expm1(cx)) / (c * c)


@njit(cache=True)
def yj_forward(x, gam):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        if x[i] >= 0.0:
            out[i] = _expm1_div(gam[i], math.log1p(x[i]))
        else:
            out[i] = -_expm1_div(2.0 - gam[i], math.log1p(-x[i]))
    return out


@njit(cache=True)
def yj_inverse(y, gam):
    n = y.shape[0]
    out = np.empty(n)
    for i in range(n):
        if y[i] >= 0.0:
            g = gam[i]
            if g == 0.0:
                out[i] = math.expm1(y[i])
            else:
                out[i] = math.expm1(math.log1p(g * y[i]) / g)
        else:
            g = 2.0 - gam[i]
            if g == 0.0:
                out[i] = -math.expm1(-y[i])
            else:
                out[i] = -math.expm1(math.log1p(-g * y[i]) / g)
    return out


@njit(cache=True)
def yj_derivs(x, gam):
    n = x.shape[0]
    d1 = np.empty(n)
    d2 = np.empty(n)
    for i in range(n):
        g = gam[i]
        if x[i] >= 0.0:
            lp = math.log1p(x[i])
            d1[i] = math.exp((g - 1.0) * lp)
            d2[i] = (g - 1.0) * math.exp((g - 2.0) * lp)
        else:
            lp = math.log1p(-x[i])
            d1[i] = math.exp((1.0 - g) * lp)
            d2[i] = (g - 1.0) * math.exp(-g * lp)
    return d1, d2


@njit(cache=True)
def yj_dgamma(x, gam):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        if x[i] >= 0.0:
            out[i] = _dexpm1_div_dc(gam[i], math.log1p(x[i]))
        else:
            out[i] = _dexpm1_div_dc(2.0 - gam[i], math.log1p(-x[i]))
    return out


@njit(cache=True)
def _gh_t(z, g, h):
    return _expm1_div(g, z) * math.exp(0.5 * h * z * z)


@njit(cache=True)
def _gh_t1(z, g, h):
    e = _expm1_div(g, z)
    return math.exp(0.5 * h * z * z) * (math.exp(g * z) + h * z * e)


@njit(cache=True)
def gh_forward(z, g, h):
    n = z.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _gh_t(z[i], g[i], h[i])
    return out


@njit(cache=True)
def gh_derivs(z, g, h):
    n = z.shape[0]
    d1 = np.empty(n)
    d2 = np.empty(n)
    for i in range(n):
        zi, gi, hi = z[i], g[i], h[i]
        e = _expm1_div(gi, zi)
        eg = math.exp(gi * zi)
        hh = math.exp(0.5 * hi * zi * zi)
        d1[i] = hh * (eg + hi * zi * e)
        d2[i] = hh * (gi * eg + 2.0 * hi * zi * eg + (hi + hi * hi * zi * zi) * e)
    return d1, d2


@njit(cache=True)
def gh_param_grads(z, g, h):
    n = z.shape[0]
    dg = np.empty(n)
    dh = np.empty(n)
    for i in range(n):
        zi, gi, hi = z[i], g[i], h[i]
        hh = math.exp(0.5 * hi * zi * zi)
        dg[i] = hh * _dexpm1_div_dc(gi, zi)
        dh[i] = _expm1_div(gi, zi) * hh * 0.5 * zi * zi
    return dg, dh


@njit(cache=True)
def gh_invert(x, g, h, tol=1e-12, max_iter=100):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        xi, gi, hi = x[i], g[i], h[i]
        if hi == 0.0:
            if gi == 0.0:
                out[i] = xi
            else:
                t = gi * xi
                out[i] = math.log1p(t) / gi if t > -1.0 else np.nan
            continue
        atol = tol * max(1.0, abs(xi))
        b = 1.0
        if xi >= 0.0:
            for _ in range(200):
                if _gh_t(b, gi, hi) >= xi:
                    break
                b *= 2.0
            lo, hi_b = 0.0, b
        else:
            for _ in range(200):
                if _gh_t(-b, gi, hi) <= xi:
                    break
                b *= 2.0
            lo, hi_b = -b, 0.0
        z = 0.5 * (lo + hi_b)
        ok = False
        for _ in range(max_iter):
            f = _gh_t(z, gi, hi) - xi
            if abs(f) <= atol:
                ok = True
                break
            if f < 0.0:
                lo = z
            else:
                hi_b = z
            d1 = _gh_t1(z, gi, hi)
            zn = z - f / d1 if d1 > 0.0 else 0.5 * (lo + hi_b)
            if not np.isfinite(zn) or zn <= lo or zn >= hi_b:
                zn = 0.5 * (lo + hi_b)
            z = zn
        out[i] = z if ok else np.nan
    return out


@njit(cache=True)
def sphere_rows(angles):
    m, K = angles.shape
    rows = np.empty((m, K + 1))
    for j in range(m):
        prod = 1.0
        for k in range(K):
            rows[j, k] = math.cos(angles[j, k]) * prod
            prod *= math.sin(angles[j, k])
        rows[j, K] = prod
    return rows


@njit(cache=True)
def sphere_row_jac(angles):
    m, K = angles.shape
    jac = np.zeros((m, K + 1, K))
    for j in range(m):
        for ll in range(K):
            # gap = prod_{t < jj, t != ll} sin, built incrementally over jj
            gap = 1.0
            for jj in range(K + 1):
                if jj > ll:
                    if jj < K:
                        jac[j, jj, ll] = math.cos(angles[j, jj]) * math.cos(angles[j, ll]) * gap
                    else:
                        jac[j, K, ll] = math.cos(angles[j, ll]) * gap
                elif jj == ll:
                    prod = 1.0
                    for t in range(ll + 1):
                        prod *= math.sin(angles[j, t])
                    jac[j, ll, ll] = -prod
                if jj < K and jj != ll:
                    gap *= math.sin(angles[j, jj])
    return jac


@njit(cache=True)
def dpsi_dtau_compact(angles, z, eps, sqrt_w, dkap_dtau):
    m, K = angles.shape
    out = np.empty((m, K))
    for j in range(m):
        for ll in range(K):
            gap = 1.0
            acc = 0.0
            for jj in range(K + 1):
                coef = eps[j] if jj == 0 else z[jj - 1]
                if jj > ll:
                    if jj < K:
                        acc += coef * math.cos(angles[j, jj]) * math.cos(angles[j, ll]) * gap
                    else:
                        acc += coef * math.cos(angles[j, ll]) * gap
                elif jj == ll:
                    prod = 1.0
                    for t in range(ll + 1):
                        prod *= math.sin(angles[j, t])
                    acc -= coef * prod
                if jj < K and jj != ll:
                    gap *= math.sin(angles[j, jj])
            out[j, ll] = sqrt_w * acc * dkap_dtau[j, ll]
    return out


@njit(cache=True)
def chol_from_angles_kernel(angles_flat, r):
    L = np.zeros((r, r))
    L[0, 0] = 1.0
    off = 0
    for i in range(1, r):
        prod = 1.0
        for j in range(i):
            L[i, j] = math.cos(angles_flat[off + j]) * prod
            prod *= math.sin(angles_flat[off + j])
        L[i, i] = prod
        off += i
    return L


@njit(cache=True)
def chol_row_grad(A, angles_flat, r):
    p = angles_flat.shape[0]
    out = np.empty(p)
    off = 0
    for i in range(1, r):
        # row entries and running sine products
        lrow = np.empty(i + 1)
        prod = 1.0
        for j in range(i):
            lrow[j] = math.cos(angles_flat[off + j]) * prod
            prod *= math.sin(angles_flat[off + j])
        lrow[i] = prod
        # rev_next = sum_{j > k} A[i, j] * lrow[j], built backwards
        rev = 0.0
        sprod = np.empty(i)
        sp = 1.0
        for j in range(i):
            sp *= math.sin(angles_flat[off + j])
            sprod[j] = sp
        for k in range(i - 1, -1, -1):
            rev += A[i, k + 1] * lrow[k + 1]
            ang = angles_flat[off + k]
            out[off + k] = -A[i, k] * sprod[k] + (math.cos(ang) / math.sin(ang)) * rev
        off += i
    return out


@njit(cache=True)
def kde_cdf_kernel(query, data, bandwidth):
    nq = query.shape[0]
    nd = data.shape[0]
    out = np.empty(nq)
    for i in range(nq):
        acc = 0.0
        for j in range(nd):
            acc += _ndtr((query[i] - data[j]) / bandwidth)
        out[i] = acc / nd
    return out
