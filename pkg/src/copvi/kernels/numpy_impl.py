"""Vectorized numpy implementations of the hot numeric kernels.

Every function here has a numba twin in ``numba_impl`` with the same
signature and semantics; ``copvi.kernels`` selects one of the two at import
time.  All array arguments are float64 and are treated element-wise unless
noted otherwise.
"""

import numpy as np
from scipy.special import ndtr

_SQRT2 = np.sqrt(2.0)


def _expm1_div(c, x):
    # expm1(c*x)/c with the c -> 0 limit x; series for |c| below 1e-12
    c = np.asarray(c, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(c) < 1e-12
    safe = np.where(small, 1.0, c)
    direct = np.expm1(safe * x) / safe
    series = x * (1.0 + 0.5 * c * x)
    return np.where(small, series, direct)


def _dexpm1_div_dc(c, x):
    # d/dc [expm1(c*x)/c]; series kicks in when c*x is small enough that the
    # direct form loses too many digits to cancellation
    c = np.asarray(c, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    cx = c * x
    small = np.abs(cx) < 1e-4
    safe = np.where(small, 1.0, c)
    direct = (x * np.exp(safe * x) * safe - np.expm1(safe * x)) / (safe * safe)
    series = x * x * (0.5 + cx / 3.0 + cx * cx / 8.0)
    return np.where(small, series, direct)


# ---------------------------------------------------------------------------
# Yeo-Johnson maps.  gamma in (0, 2); the two branches join smoothly at x = 0.

def yj_forward(x, gam):
    x = np.asarray(x, dtype=np.float64)
    gam = np.asarray(gam, dtype=np.float64)
    pos = _expm1_div(gam, np.log1p(np.maximum(x, 0.0)))
    neg = -_expm1_div(2.0 - gam, np.log1p(np.maximum(-x, 0.0)))
    return np.where(x >= 0.0, pos, neg)


def yj_inverse(y, gam):
    y = np.asarray(y, dtype=np.float64)
    gam = np.asarray(gam, dtype=np.float64)
    gp = np.where(gam == 0.0, 1.0, gam)
    pos = np.expm1(np.log1p(gp * np.maximum(y, 0.0)) / gp)
    pos = np.where(gam == 0.0, np.expm1(np.maximum(y, 0.0)), pos)
    gn = 2.0 - gam
    gn_safe = np.where(gn == 0.0, 1.0, gn)
    neg = -np.expm1(np.log1p(gn_safe * np.maximum(-y, 0.0)) / gn_safe)
    neg = np.where(gn == 0.0, -np.expm1(np.maximum(-y, 0.0)), neg)
    return np.where(y >= 0.0, pos, neg)


def yj_derivs(x, gam):
    """First and second derivative of the forward map with respect to x."""
    x = np.asarray(x, dtype=np.float64)
    gam = np.asarray(gam, dtype=np.float64)
    lp = np.log1p(np.abs(x))
    pos1 = np.exp((gam - 1.0) * lp)
    pos2 = (gam - 1.0) * np.exp((gam - 2.0) * lp)
    neg1 = np.exp((1.0 - gam) * lp)
    neg2 = (gam - 1.0) * np.exp(-gam * lp)
    d1 = np.where(x >= 0.0, pos1, neg1)
    d2 = np.where(x >= 0.0, pos2, neg2)
    return d1, d2


def yj_dgamma(x, gam):
    """Derivative of the forward map with respect to gamma at fixed x."""
    x = np.asarray(x, dtype=np.float64)
    gam = np.asarray(gam, dtype=np.float64)
    pos = _dexpm1_div_dc(gam, np.log1p(np.maximum(x, 0.0)))
    neg = _dexpm1_div_dc(2.0 - gam, np.log1p(np.maximum(-x, 0.0)))
    return np.where(x >= 0.0, pos, neg)


# ---------------------------------------------------------------------------
# G-and-H forward map T(z) = ((exp(g z) - 1)/g) exp(h z^2 / 2) and its
# derivatives; the transform itself is the numerical inverse of T.

def gh_forward(z, g, h):
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    return _expm1_div(g, z) * np.exp(0.5 * h * z * z)


def gh_derivs(z, g, h):
    """T'(z) and T''(z)."""
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    e = _expm1_div(g, z)
    eg = np.exp(g * z)
    hh = np.exp(0.5 * h * z * z)
    d1 = hh * (eg + h * z * e)
    d2 = hh * (g * eg + 2.0 * h * z * eg + (h + h * h * z * z) * e)
    return d1, d2


def gh_param_grads(z, g, h):
    """dT/dg and dT/dh at fixed z."""
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    hh = np.exp(0.5 * h * z * z)
    dg = hh * _dexpm1_div_dc(g, z)
    dh = _expm1_div(g, z) * hh * 0.5 * z * z
    return dg, dh


def gh_invert(x, g, h, tol=1e-12, max_iter=100):
    """Solve T(z) = x element-wise; NaN marks a root-finder failure.

    Newton iterations safeguarded by bisection on a bracket grown outward
    from zero.  h = 0 falls back to the closed form, which only exists when
    g*x > -1.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.broadcast_to(np.asarray(g, dtype=np.float64), x.shape).copy()
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), x.shape).copy()
    out = np.full(x.shape, np.nan)

    flat = h == 0.0
    if np.any(flat):
        xg, gg = x[flat], g[flat]
        zf = np.full(xg.shape, np.nan)
        lin = gg == 0.0
        zf[lin] = xg[lin]
        t = gg * xg
        ok = ~lin & (t > -1.0)
        zf[ok] = np.log1p(t[ok]) / gg[ok]
        out[flat] = zf

    curved = ~flat
    if not np.any(curved):
        return out
    xc, gc, hc = x[curved], g[curved], h[curved]
    n = xc.size
    atol = tol * np.maximum(1.0, np.abs(xc))

    # grow a bracket [lo, hi] containing the root; T(0) = 0
    b = np.ones(n)
    pos = xc >= 0.0
    for _ in range(200):
        tb = gh_forward(np.where(pos, b, -b), gc, hc)
        need = np.where(pos, tb < xc, tb > xc)
        if not need.any():
            break
        b = np.where(need, 2.0 * b, b)
    lo = np.where(pos, 0.0, -b)
    hi = np.where(pos, b, 0.0)

    z = 0.5 * (lo + hi)
    done = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        f = gh_forward(z, gc, hc) - xc
        done = np.abs(f) <= atol
        if done.all():
            break
        lo = np.where(f < 0.0, z, lo)
        hi = np.where(f >= 0.0, z, hi)
        d1, _ = gh_derivs(z, gc, hc)
        with np.errstate(divide="ignore", invalid="ignore"):
            zn = z - f / d1
        bad = ~np.isfinite(zn) | (zn <= lo) | (zn >= hi)
        z = np.where(bad & ~done, 0.5 * (lo + hi), np.where(done, z, zn))
    f = gh_forward(z, gc, hc) - xc
    z = np.where(np.abs(f) <= atol, z, np.nan)
    out[curved] = z
    return out


# ---------------------------------------------------------------------------
# Spherical-coordinate rows of the factor scale matrix [d B].

def sphere_rows(angles):
    """(m, K) angles -> (m, K+1) unit rows (cos, cos*sin, ..., prod sin)."""
    angles = np.asarray(angles, dtype=np.float64)
    m, K = angles.shape
    rows = np.empty((m, K + 1))
    if K == 0:
        rows[:, 0] = 1.0
        return rows
    c = np.cos(angles)
    s = np.sin(angles)
    S = np.cumprod(s, axis=1)
    rows[:, 0] = c[:, 0]
    for k in range(1, K):
        rows[:, k] = c[:, k] * S[:, k - 1]
    rows[:, K] = S[:, K - 1]
    return rows


def sphere_row_jac(angles):
    """Jacobian of each row w.r.t. its own angles, shape (m, K+1, K)."""
    angles = np.asarray(angles, dtype=np.float64)
    m, K = angles.shape
    jac = np.zeros((m, K + 1, K))
    if K == 0:
        return jac
    c = np.cos(angles)
    s = np.sin(angles)
    S = np.cumprod(s, axis=1)
    for ll in range(K):
        sm = s.copy()
        sm[:, ll] = 1.0
        cp = np.cumprod(sm, axis=1)
        # gap[:, j] = prod_{t < j, t != ll} sin(angles[:, t])
        gap = np.empty((m, K + 1))
        gap[:, 0] = 1.0
        gap[:, 1:] = cp
        for jj in range(ll + 1, K):
            jac[:, jj, ll] = c[:, jj] * c[:, ll] * gap[:, jj]
        jac[:, K, ll] = c[:, ll] * gap[:, K]
        jac[:, ll, ll] = -S[:, ll]
    return jac


def dpsi_dtau_compact(angles, z, eps, sqrt_w, dkap_dtau):
    """Per-row derivative of psi w.r.t. the row's raw angle parameters.

    Returns (m, K); the full Jacobian is block sparse with these values on
    the row-own blocks and zeros elsewhere.
    """
    jac = sphere_row_jac(angles)
    z = np.asarray(z, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    contrib = eps[:, None] * jac[:, 0, :]
    if z.size:
        contrib = contrib + np.einsum("mkl,k->ml", jac[:, 1:, :], z)
    return sqrt_w * contrib * np.asarray(dkap_dtau, dtype=np.float64)


# ---------------------------------------------------------------------------
# Cholesky factor of a correlation matrix from spherical angles.

def chol_from_angles_kernel(angles_flat, r):
    """Angles (row-major, r(r-1)/2 of them) -> lower-triangular L, unit rows."""
    angles_flat = np.asarray(angles_flat, dtype=np.float64)
    L = np.zeros((r, r))
    L[0, 0] = 1.0
    off = 0
    for i in range(1, r):
        ang = angles_flat[off:off + i]
        off += i
        c = np.cos(ang)
        s = np.sin(ang)
        S = np.cumprod(s)
        L[i, 0] = c[0]
        if i > 1:
            L[i, 1:i] = c[1:] * S[:-1]
        L[i, i] = S[i - 1]
    return L


def chol_row_grad(A, angles_flat, r):
    """Contraction sum_j A[i, j] * dL[i, j]/dangle[i, k] over the lower triangle.

    A is any (r, r) matrix of coefficients; returns the flat (r(r-1)/2,)
    gradient with the same row-major angle layout as chol_from_angles_kernel.
    """
    A = np.asarray(A, dtype=np.float64)
    angles_flat = np.asarray(angles_flat, dtype=np.float64)
    out = np.empty(angles_flat.shape[0])
    off = 0
    for i in range(1, r):
        ang = angles_flat[off:off + i]
        c = np.cos(ang)
        s = np.sin(ang)
        S = np.cumprod(s)
        lrow = np.empty(i + 1)
        lrow[0] = c[0]
        if i > 1:
            lrow[1:i] = c[1:] * S[:-1]
        lrow[i] = S[i - 1]
        aw = A[i, :i + 1] * lrow
        # rev[k] = sum_{j > k} A[i, j] * L[i, j]
        rev = np.cumsum(aw[::-1])[::-1]
        cot = c / s
        out[off:off + i] = -A[i, :i] * S + cot * rev[1:]
        off += i
    return out


# ---------------------------------------------------------------------------
# Gaussian-kernel empirical CDF.

def kde_cdf_kernel(query, data, bandwidth):
    """Mean of Phi((q - y_i)/b) over the data, for each query point."""
    query = np.asarray(query, dtype=np.float64)
    data = np.asarray(data, dtype=np.float64)
    out = np.empty(query.shape[0])
    step = max(1, 2_000_000 // max(1, data.size))
    for start in range(0, query.size, step):
        q = query[start:start + step]
        out[start:start + step] = ndtr((q[:, None] - data[None, :]) / bandwidth).mean(axis=1)
    return out
