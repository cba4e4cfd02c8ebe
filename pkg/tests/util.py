"""Shared numerical helpers for the test suite.

Everything here is deliberately independent of the package internals it is
used to check: quadrature is built from numpy Gauss-Legendre nodes, finite
differences are plain central differences, and random parameter settings are
drawn from seeded generators so every test is reproducible.
"""
import numpy as np
from dataclasses import replace
from numpy.polynomial.legendre import leggauss
from scipy.stats import kstwobign

from copvi.copula_va import VariationalParams, default_params
from copvi.elliptical import EllipticalFamily
from copvi.factor_scale import FactorScale
from copvi.targets import TargetModel


# ---------------------------------------------------------------------------
# tolerances and finite differences

def assert_close(a, b, tol, msg=""):
    """Hybrid absolute/relative comparison: |a-b| <= tol * max(1, |a|, |b|)."""
    a = float(a)
    b = float(b)
    bound = tol * max(1.0, abs(a), abs(b))
    assert abs(a - b) <= bound, (
        f"{msg} {a!r} vs {b!r}: |diff|={abs(a - b):.3e} > {bound:.3e}")


def allclose_hybrid(a, b, tol):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return np.all(np.abs(a - b) <= tol * scale)


def fd_step(x):
    return 1e-6 * max(1.0, abs(float(x)))


def central_fd(f, x, h=None):
    """Scalar central difference df/dx."""
    x = float(x)
    if h is None:
        h = fd_step(x)
    return (f(x + h) - f(x - h)) / (2.0 * h)


def grad_fd(f, x, h=None):
    """Central-difference gradient of scalar f at vector x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        hi = h if h is not None else fd_step(x[i])
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        g[i] = (f(xp) - f(xm)) / (2.0 * hi)
    return g


def jac_fd(f, x, h=None):
    """Central-difference Jacobian of vector-valued f at vector x."""
    x = np.asarray(x, dtype=np.float64)
    f0 = np.asarray(f(x), dtype=np.float64)
    J = np.zeros(f0.shape + (x.size,))
    for i in range(x.size):
        hi = h if h is not None else fd_step(x[i])
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        J[..., i] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * hi)
    return J


# ---------------------------------------------------------------------------
# random parameter settings

def random_params(rng, m, K, family="gaussian", kind="yj", nu=None):
    """A generic, moderately-perturbed parameter setting for sweeps."""
    base = default_params(m, K, family=family, kind=kind)
    tr = replace(base.transforms,
                 mu=rng.normal(0.0, 1.0, size=m),
                 log_sigma=rng.normal(0.0, 0.3, size=m),
                 gamma_raw=base.transforms.gamma_raw
                 + rng.normal(0.0, 0.5, size=base.transforms.gamma_raw.shape))
    sc = FactorScale(tau=rng.normal(0.0, 0.7, size=(m, K)))
    fam = base.family
    if fam.omega_raw.size:
        target_nu = nu if nu is not None else float(rng.uniform(3.0, 40.0))
        fam = EllipticalFamily(fam.kind, np.array([np.log(target_nu)]))
    return VariationalParams(transforms=tr, scale=sc, family=fam)


# ---------------------------------------------------------------------------
# quadrature on the whole real line (tan substitution)

def _panel_nodes(n, lo, hi):
    x, w = leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def integrate_real_line(f, center=0.0, n_side=500):
    """Integral of f over R via theta = center + tan(t), split at center.

    Splitting at the center keeps integrands with a kink there (for example
    a Laplace-mixture marginal) inside smooth panels.
    """
    total = 0.0
    for lo, hi in ((-np.pi / 2.0, 0.0), (0.0, np.pi / 2.0)):
        t, w = _panel_nodes(n_side, lo, hi)
        theta = center + np.tan(t)
        total += float(np.sum(w * f(theta) / np.cos(t) ** 2))
    return total


def marginal_normalization(params, i, n_side=2000):
    """Integral of the i-th marginal density over the real line."""
    from copvi.copula_va import marginal_log_q

    def dens(thetas):
        return np.exp(marginal_log_q(thetas, i, params))

    return integrate_real_line(dens, center=float(params.transforms.mu[i]),
                               n_side=n_side)


def joint_normalization_2d(params, n_dim=200):
    """Integral of the bivariate density over R^2 on a tan tensor grid."""
    from copvi.copula_va import log_q

    x, w = leggauss(n_dim)
    t = 0.5 * np.pi * x
    wt = 0.5 * np.pi * w / np.cos(t) ** 2
    mu = params.transforms.mu
    th0 = mu[0] + np.tan(t)
    th1 = mu[1] + np.tan(t)
    pts = np.stack([np.repeat(th0, n_dim), np.tile(th1, n_dim)], axis=1)
    vals = np.exp(log_q(pts, params)).reshape(n_dim, n_dim)
    return float(wt @ vals @ wt)


# ---------------------------------------------------------------------------
# marginal CDF grid and Kolmogorov-Smirnov statistic

def marginal_cdf_grid(params, i, n_grid=40001):
    """(theta_grid, cdf_grid) for the i-th marginal, normalized to end at 1."""
    from copvi.copula_va import marginal_log_q

    eps = 1e-5
    t = np.linspace(-np.pi / 2.0 + eps, np.pi / 2.0 - eps, n_grid)
    mu_i = float(params.transforms.mu[i])
    theta = mu_i + np.tan(t)
    dens = np.exp(marginal_log_q(theta, i, params)) / np.cos(t) ** 2
    dt = t[1] - t[0]
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * dt)])
    cdf /= cdf[-1]
    return theta, cdf


def ks_statistic(draws, theta_grid, cdf_grid):
    draws = np.sort(np.asarray(draws, dtype=np.float64))
    n = draws.size
    F = np.interp(draws, theta_grid, cdf_grid)
    emp_hi = np.arange(1, n + 1) / n
    emp_lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(F - emp_hi)), np.max(np.abs(F - emp_lo))))


def ks_critical(n, conf=0.99):
    return float(kstwobign.ppf(conf) / np.sqrt(n))


# ---------------------------------------------------------------------------
# dense Jacobian assembly from the block structure

def dense_jacobian(jac, layout):
    """(m, layout.size) matrix from per-block derivative arrays.

    Location, log-scale, shape and scale-angle blocks are block-diagonal
    across coordinates (coordinate i only depends on its own row); the
    family block is dense.
    """
    m, G, K = layout.m, layout.G, layout.K
    J = np.zeros((m, layout.size))
    idx = np.arange(m)
    J[idx, idx] = jac.dmu
    J[idx, m + idx] = jac.dlog_sigma
    for g in range(G):
        J[idx, 2 * m + idx * G + g] = jac.dgamma[:, g]
    off = 2 * m + m * G
    for k in range(K):
        J[idx, off + idx * K + k] = jac.dtau[:, k]
    off = 2 * m + m * G + m * K
    if layout.n_omega:
        J[:, off:off + layout.n_omega] = jac.domega
    return J


# ---------------------------------------------------------------------------
# targets used only by tests

class FrozenDensityTarget(TargetModel):
    """Wraps plain callables as a target model (for optimizer tests)."""

    def __init__(self, dim, log_g_fn, grad_fn):
        self._dim = dim
        self._log_g = log_g_fn
        self._grad = grad_fn

    @property
    def dim(self):
        return self._dim

    def log_g(self, theta):
        return float(self._log_g(np.asarray(theta, dtype=np.float64)))

    def grad_log_g(self, theta):
        return np.asarray(self._grad(np.asarray(theta, dtype=np.float64)),
                          dtype=np.float64)
