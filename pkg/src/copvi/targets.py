"""Target models: log density and gradient of the distributions being fitted.

The main model here is a Gaussian copula likelihood for normal scores with a
correlation matrix parameterized through spherical coordinates of its
Cholesky factor, and a horseshoe-type shrinkage prior on the angle scale:

    Omega = L L',   l_ij from angles theta_ij in (0, pi),
    theta_ij = pi * Phi(eta_s),   eta_s = tau_s * sqrt(xi * chi_s),
    chi_s | nu_s ~ InvGamma(1/2, 1/nu_s),  xi | kappa ~ InvGamma(1/2, 1/kappa),
    nu_s, kappa ~ InvGamma(1/2, 20),       tau_s ~ N(0, 1),

all positive quantities kept on the log scale.  The free vector is
(tau, log chi, log xi, log nu, log kappa), length 3 p + 2 with p = r(r-1)/2.
"""

import abc
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, log_ndtr, ndtr

from . import kernels
from .errors import IllConditionedError, NumericError

_LOG_2PI = np.log(2.0 * np.pi)
_ANGLE_CLAMP = 1e-8
_HALF_LOG_2PI = 0.5 * _LOG_2PI
_HYPER_RATE = 20.0  # rate of the InvGamma(1/2, .) hyper-priors


class TargetModel(abc.ABC):
    """Anything with a log density kernel and its gradient on R^dim."""

    @property
    @abc.abstractmethod
    def dim(self):
        ...

    @abc.abstractmethod
    def log_g(self, theta):
        ...

    @abc.abstractmethod
    def grad_log_g(self, theta):
        ...


class GaussianTarget(TargetModel):
    """Independent normal target, mostly for calibration checks."""

    def __init__(self, mean, sd=1.0):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.sd = np.broadcast_to(np.asarray(sd, dtype=np.float64), self.mean.shape).copy()

    @property
    def dim(self):
        return self.mean.shape[0]

    def log_g(self, theta):
        z = (np.asarray(theta, dtype=np.float64) - self.mean) / self.sd
        return float(-0.5 * np.sum(z * z) - np.sum(np.log(self.sd)) - 0.5 * self.dim * _LOG_2PI)

    def grad_log_g(self, theta):
        return -(np.asarray(theta, dtype=np.float64) - self.mean) / (self.sd * self.sd)


# ---------------------------------------------------------------------------
# skew normal

def sn_log_density_and_grad(x, xi, omega, alpha):
    """Log density of the skew normal and its derivative in x; array friendly."""
    x = np.asarray(x, dtype=np.float64)
    z = (x - xi) / omega
    az = alpha * z
    logpdf = (np.log(2.0) - np.log(omega) - _HALF_LOG_2PI - 0.5 * z * z
              + log_ndtr(az))
    # phi(az)/Phi(az), stable in the far left tail
    ratio = np.exp(-_HALF_LOG_2PI - 0.5 * az * az - log_ndtr(az))
    grad = (-z + alpha * ratio) / omega
    return logpdf, grad


def _sn_skew_of_delta(delta):
    b = np.sqrt(2.0 / np.pi)
    num = (4.0 - np.pi) / 2.0 * (delta * b) ** 3
    return num / (1.0 - 2.0 * delta * delta / np.pi) ** 1.5


SKEW_SUP = float(_sn_skew_of_delta(1.0 - 1e-13))


def skew_to_alpha(skew):
    """Shape parameter alpha whose skew-normal Pearson skewness equals skew."""
    s = float(skew)
    if abs(s) >= SKEW_SUP:
        raise NumericError(f"skewness {s} outside the attainable range (+-{SKEW_SUP:.4f})")
    if s == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0 - 1e-13
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _sn_skew_of_delta(mid) < abs(s):
            lo = mid
        else:
            hi = mid
    delta = 0.5 * (lo + hi)
    alpha = delta / np.sqrt(1.0 - delta * delta)
    return float(np.copysign(alpha, s))


class SkewNormalTarget(TargetModel):
    """One-dimensional skew normal with direct-parameter fields."""

    def __init__(self, xi, omega, alpha):
        if omega <= 0.0:
            raise NumericError("omega must be positive")
        self.xi = float(xi)
        self.omega = float(omega)
        self.alpha = float(alpha)

    @classmethod
    def from_moments(cls, skew, mean, sd):
        """Match Pearson skewness, mean and standard deviation."""
        alpha = skew_to_alpha(skew)
        delta = alpha / np.sqrt(1.0 + alpha * alpha)
        b = np.sqrt(2.0 / np.pi)
        omega = sd / np.sqrt(1.0 - b * b * delta * delta)
        xi = mean - omega * delta * b
        return cls(xi=xi, omega=omega, alpha=alpha)

    @property
    def dim(self):
        return 1

    def mean_sd(self):
        delta = self.alpha / np.sqrt(1.0 + self.alpha * self.alpha)
        b = np.sqrt(2.0 / np.pi)
        mean = self.xi + self.omega * delta * b
        sd = self.omega * np.sqrt(1.0 - b * b * delta * delta)
        return float(mean), float(sd)

    def log_g(self, theta):
        lp, _ = sn_log_density_and_grad(np.asarray(theta).reshape(-1)[0],
                                        self.xi, self.omega, self.alpha)
        return float(lp)

    def grad_log_g(self, theta):
        _, g = sn_log_density_and_grad(np.asarray(theta).reshape(-1)[0],
                                       self.xi, self.omega, self.alpha)
        return np.array([float(g)])

    def logpdf(self, x):
        lp, _ = sn_log_density_and_grad(x, self.xi, self.omega, self.alpha)
        return lp


# ---------------------------------------------------------------------------
# correlation matrix target

@dataclass(frozen=True)
class CopulaData:
    """Normal-scores data matrix for the correlation model."""

    x: np.ndarray  # (N, r)

    @property
    def n_obs(self):
        return self.x.shape[0]

    @property
    def r(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class CorrModelParams:
    """Model parameter blocks; positive parts stored on the log scale."""

    tau_hs: np.ndarray
    log_chi: np.ndarray
    log_xi: float
    log_nu_hs: np.ndarray
    log_kappa: float

    @property
    def p(self):
        return self.tau_hs.shape[0]

    @classmethod
    def from_flat(cls, theta, r):
        p = r * (r - 1) // 2
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (3 * p + 2,):
            raise NumericError(f"parameter vector has shape {theta.shape}, expected ({3 * p + 2},)")
        return cls(tau_hs=theta[:p].copy(),
                   log_chi=theta[p:2 * p].copy(),
                   log_xi=float(theta[2 * p]),
                   log_nu_hs=theta[2 * p + 1:3 * p + 1].copy(),
                   log_kappa=float(theta[3 * p + 1]))

    def to_flat(self):
        return np.concatenate([self.tau_hs, self.log_chi, [self.log_xi],
                               self.log_nu_hs, [self.log_kappa]])

    def eta(self):
        return self.tau_hs * np.exp(0.5 * (self.log_xi + self.log_chi))

    def angles(self):
        return np.clip(np.pi * ndtr(self.eta()), _ANGLE_CLAMP, np.pi - _ANGLE_CLAMP)


def chol_from_angles(vartheta, r):
    """Lower-triangular Cholesky factor with unit-norm rows from angles.

    vartheta is the row-major stack (row 2 first: one angle, then two, ...),
    each angle in (0, pi).
    """
    vartheta = np.asarray(vartheta, dtype=np.float64)
    p = r * (r - 1) // 2
    if vartheta.shape != (p,):
        raise NumericError(f"angle vector has shape {vartheta.shape}, expected ({p},)")
    return kernels.chol_from_angles_kernel(np.ascontiguousarray(vartheta), r)


def dL_dvartheta(vartheta, r):
    """Dense (r, r, p) Jacobian of chol_from_angles, for audits at small r."""
    vartheta = np.asarray(vartheta, dtype=np.float64)
    p = r * (r - 1) // 2
    jac = np.zeros((r, r, p))
    off = 0
    for i in range(1, r):
        ang = vartheta[off:off + i]
        c, s = np.cos(ang), np.sin(ang)
        S = np.cumprod(s)
        for k in range(i):
            # d l_ij / d ang_k, nonzero only for j >= k within this row
            jac[i, k, off + k] = -S[k]
            for j in range(k + 1, i):
                jac[i, j, off + k] = c[j] * c[k] * np.prod(np.delete(s[:j], k))
            jac[i, i, off + k] = c[k] * np.prod(np.delete(s[:i], k))
        off += i
    return jac


def spearman_from_omega(omega):
    """Element-wise rank-correlation map (6/pi) arcsin(rho/2); unit diagonal."""
    omega = np.asarray(omega, dtype=np.float64)
    if np.any(np.abs(omega) > 1.0 + 1e-12):
        raise NumericError("correlation entries must lie in [-1, 1]")
    out = (6.0 / np.pi) * np.arcsin(np.clip(omega, -1.0, 1.0) / 2.0)
    if out.ndim == 2 and out.shape[0] == out.shape[1]:
        np.fill_diagonal(out, 1.0)
    return out


def _inv_gamma_half_logpdf_logscale(log_x, rate):
    """log pdf of log X when X ~ InvGamma(1/2, rate), Jacobian included."""
    return 0.5 * np.log(rate) - gammaln(0.5) - 0.5 * log_x - rate * np.exp(-log_x)


def _chol_and_checks(params, r):
    L = kernels.chol_from_angles_kernel(np.ascontiguousarray(params.angles()), r)
    diag = np.diag(L)
    if np.any(diag < 1e-12):
        raise IllConditionedError("correlation factor is numerically singular "
                                  f"(min diagonal {diag.min():.3e})")
    return L


def _log_prior(params):
    chi = np.exp(params.log_chi)
    xi = np.exp(params.log_xi)
    nu = np.exp(params.log_nu_hs)
    kappa = np.exp(params.log_kappa)
    lp = float(np.sum(-0.5 * params.tau_hs ** 2 - _HALF_LOG_2PI))
    # chi_s | nu_s ~ InvGamma(1/2, 1/nu_s), on the log scale
    lp += float(np.sum(-0.5 * params.log_nu_hs - gammaln(0.5)
                       - 0.5 * params.log_chi - 1.0 / (nu * chi)))
    lp += float(-0.5 * params.log_kappa - gammaln(0.5)
                - 0.5 * params.log_xi - 1.0 / (kappa * xi))
    lp += float(np.sum(_inv_gamma_half_logpdf_logscale(params.log_nu_hs, _HYPER_RATE)))
    lp += float(_inv_gamma_half_logpdf_logscale(params.log_kappa, _HYPER_RATE))
    return lp


def corr_log_posterior(params, data):
    """Log posterior kernel of the correlation model (constants included)."""
    r = data.r
    N = data.n_obs
    L = _chol_and_checks(params, r)
    S = data.x.T @ data.x
    V = solve_triangular(L, S, lower=True)
    U = solve_triangular(L, V.T, lower=True)
    loglik = -N * float(np.sum(np.log(np.diag(L)))) \
        - 0.5 * (float(np.trace(U)) - float(np.trace(S)))
    return loglik + _log_prior(params)


def corr_grad(params, data):
    """Gradient of corr_log_posterior in the flat parameter order."""
    r = data.r
    N = data.n_obs
    p = params.p
    L = _chol_and_checks(params, r)
    S = data.x.T @ data.x
    Linv = solve_triangular(L, np.eye(r), lower=True)
    omega_inv = Linv.T @ Linv
    # d loglik / d L on the lower triangle: (Omega^{-1} S - N I) L^{-T}
    A = (omega_inv @ S - N * np.eye(r)) @ Linv.T

    angles = params.angles()
    g_ang = kernels.chol_row_grad(np.ascontiguousarray(A),
                                  np.ascontiguousarray(angles), r)
    eta = params.eta()
    phi_eta = np.exp(-0.5 * eta * eta) / np.sqrt(2.0 * np.pi)
    g_eta = g_ang * np.pi * phi_eta

    chi = np.exp(params.log_chi)
    xi = np.exp(params.log_xi)
    nu = np.exp(params.log_nu_hs)
    kappa = np.exp(params.log_kappa)
    sxc = np.exp(0.5 * (params.log_xi + params.log_chi))  # sqrt(xi chi_s)

    g_tau = g_eta * sxc - params.tau_hs
    g_chi = 0.5 * params.tau_hs * sxc * g_eta + (-0.5 + 1.0 / (nu * chi))
    g_xi = float(0.5 * np.sum(g_eta * params.tau_hs * sxc) - 0.5 + 1.0 / (kappa * xi))
    g_nu = (-0.5 + 1.0 / (nu * chi)) + (-0.5 + _HYPER_RATE / nu)
    g_kappa = float((-0.5 + 1.0 / (kappa * xi)) + (-0.5 + _HYPER_RATE / kappa))

    out = np.empty(3 * p + 2)
    out[:p] = g_tau
    out[p:2 * p] = g_chi
    out[2 * p] = g_xi
    out[2 * p + 1:3 * p + 1] = g_nu
    out[3 * p + 1] = g_kappa
    return out


class CorrMatrixTarget(TargetModel):
    """Posterior of the shrinkage correlation model given normal scores."""

    def __init__(self, data):
        self.data = data
        self._S = data.x.T @ data.x
        self._trS = float(np.trace(self._S))

    @property
    def r(self):
        return self.data.r

    @property
    def dim(self):
        p = self.r * (self.r - 1) // 2
        return 3 * p + 2

    def unpack(self, theta):
        return CorrModelParams.from_flat(theta, self.r)

    def log_g(self, theta):
        params = self.unpack(theta)
        L = _chol_and_checks(params, self.r)
        V = solve_triangular(L, self._S, lower=True)
        U = solve_triangular(L, V.T, lower=True)
        loglik = -self.data.n_obs * float(np.sum(np.log(np.diag(L)))) \
            - 0.5 * (float(np.trace(U)) - self._trS)
        return loglik + _log_prior(params)

    def grad_log_g(self, theta):
        return corr_grad(self.unpack(theta), self.data)

    def omega_from_theta(self, theta):
        L = _chol_and_checks(self.unpack(theta), self.r)
        return L @ L.T
