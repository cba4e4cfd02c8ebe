"""Implicit-copula variational approximation and its re-parameterization gradient.

The approximating density couples m transformed margins through an elliptical
scale mixture with factor correlation structure:

    theta_i = mu_i + sigma_i * t_i^{-1}(psi_i),   psi = sqrt(W) (B z + D eps),

with z ~ N(0, I_K), eps ~ N(0, I_m) and W the family's mixing variable drawn
by inverse-CDF from one uniform.  The free parameter vector is

    lambda = (mu, log sigma, gamma_raw blocks, tau row-major, omega_raw).

``reparam_grad`` returns the single-draw gradient estimate
(d theta / d lambda)' (grad_theta log g - grad_theta log q), which is unbiased
for the evidence-lower-bound gradient.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import elliptical, factor_scale
from .elliptical import EllipticalFamily, FamilyKind
from .errors import NumericError
from .factor_scale import FactorScale
from .transforms import GAMMA_DIM, TransformStack, gamma_chain


@dataclass(frozen=True)
class VariationalParams:
    transforms: TransformStack
    scale: FactorScale
    family: EllipticalFamily

    @property
    def m(self):
        return self.transforms.m

    @property
    def K(self):
        return self.scale.K

    def layout(self):
        return ParamLayout.for_params(self)

    def flatten(self):
        lay = self.layout()
        out = np.empty(lay.size)
        out[lay.mu] = self.transforms.mu
        out[lay.log_sigma] = self.transforms.log_sigma
        out[lay.gamma] = self.transforms.gamma_raw.ravel()
        out[lay.tau] = self.scale.tau.ravel()
        out[lay.omega] = self.family.omega_raw
        return out

    def unflatten(self, vec):
        """New params with the same structure and values taken from vec."""
        lay = self.layout()
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (lay.size,):
            raise NumericError(f"flat vector has shape {vec.shape}, expected ({lay.size},)")
        tr = replace(self.transforms,
                     mu=vec[lay.mu].copy(),
                     log_sigma=vec[lay.log_sigma].copy(),
                     gamma_raw=vec[lay.gamma].reshape(self.transforms.gamma_raw.shape).copy())
        sc = FactorScale(tau=vec[lay.tau].reshape(self.scale.tau.shape).copy())
        fam = EllipticalFamily(self.family.kind, vec[lay.omega].copy())
        return VariationalParams(transforms=tr, scale=sc, family=fam)


@dataclass(frozen=True)
class ParamLayout:
    """Slices of the flattened parameter vector, in fixed block order."""

    m: int
    K: int
    G: int
    n_omega: int

    @classmethod
    def for_params(cls, params):
        return cls(m=params.m, K=params.K,
                   G=GAMMA_DIM[params.transforms.kind],
                   n_omega=params.family.omega_raw.shape[0])

    @property
    def mu(self):
        return slice(0, self.m)

    @property
    def log_sigma(self):
        return slice(self.m, 2 * self.m)

    @property
    def gamma(self):
        return slice(2 * self.m, 2 * self.m + self.m * self.G)

    @property
    def tau(self):
        a = 2 * self.m + self.m * self.G
        return slice(a, a + self.m * self.K)

    @property
    def omega(self):
        a = 2 * self.m + self.m * self.G + self.m * self.K
        return slice(a, a + self.n_omega)

    @property
    def size(self):
        return 2 * self.m + self.m * self.G + self.m * self.K + self.n_omega

    def block_name(self, idx):
        for name in ("mu", "log_sigma", "gamma", "tau", "omega"):
            s = getattr(self, name)
            if s.start <= idx < s.stop:
                return name
        raise IndexError(idx)


def default_params(m, K, family="gaussian", kind="yj", nu=20.0, sigma0=1.0, rng=None):
    """Convenience starting point used by the command-line driver and tests.

    The unit starting scale matches the natural scale of normal-scores
    targets; starting much narrower makes the early steps prefer heavier
    tails (a too-narrow approximation covers the target better by inflating
    tail weight), which the scale-mixture families then have to unwind.
    """
    tr = TransformStack.default(m, kind)
    tr = replace(tr, log_sigma=np.full(m, np.log(sigma0)))
    return VariationalParams(transforms=tr,
                             scale=FactorScale.default(m, K, rng=rng),
                             family=EllipticalFamily.make(family, nu=nu))


@dataclass(frozen=True)
class BaseDraw:
    """The three base variates of one draw."""

    z: np.ndarray    # (K,)
    eps: np.ndarray  # (m,)
    u: float


@dataclass(frozen=True)
class SampleRecord:
    """One draw with the intermediates needed by the gradient."""

    base: BaseDraw
    w: float
    psi: np.ndarray
    theta: np.ndarray


def sample(params, base):
    """Draw theta = h(base, lambda) and keep the intermediates."""
    B, d = factor_scale.build_B_d(params.scale)
    w = elliptical.w_quantile(base.u, params.family)
    core = d * base.eps
    if params.K > 0:
        core = core + B @ base.z
    psi = np.sqrt(w) * core
    theta = params.transforms.h_inverse(psi)
    if not np.all(np.isfinite(theta)):
        raise NumericError("draw produced non-finite theta")
    return SampleRecord(base=base, w=float(w), psi=psi, theta=theta)


def sample_batch(params, rng, n):
    """n independent draws; returns theta with shape (n, m)."""
    m, K = params.m, params.K
    B, d = factor_scale.build_B_d(params.scale)
    z = rng.standard_normal((n, K))
    eps = rng.standard_normal((n, m))
    u = np.clip(rng.random(n), 1e-16, 1.0 - 1e-16)
    w = elliptical.w_quantile(u, params.family)
    core = eps * d
    if K > 0:
        core = core + z @ B.T
    psi = np.sqrt(w)[:, None] * core
    return params.transforms.h_inverse(psi)


def _quad_form_parts(params, psi):
    B, d = factor_scale.build_B_d(params.scale)
    sol, logdet = factor_scale.sigma_solve_logdet(B, d, psi.T if psi.ndim == 2 else psi)
    if psi.ndim == 2:
        quad = np.sum(psi * sol.T, axis=1)
        return sol.T, quad, logdet
    return sol, float(psi @ sol), logdet


def log_q(theta, params):
    """Log density of the approximation; theta may be (m,) or a batch (n, m)."""
    theta = np.asarray(theta, dtype=np.float64)
    x = (theta - params.transforms.mu) / params.transforms.sigma
    psi, log_tp = params.transforms.forward_with_logderiv(x)
    return _log_q_from_psi(params, psi, log_tp, np.ndim(theta) == 1)


def _log_q_from_psi(params, psi, log_tp, scalar):
    _, quad, logdet = _quad_form_parts(params, psi)
    lg = elliptical.log_gtilde(quad, params.m, params.family)
    jac = np.sum(log_tp - params.transforms.log_sigma, axis=-1)
    out = -0.5 * logdet + lg + jac
    return float(out) if scalar else out


def log_q_record(rec, params):
    """log q at a stored draw, reusing psi (no numerical re-inversion)."""
    x = (rec.theta - params.transforms.mu) / params.transforms.sigma
    tp, _ = params.transforms.derivs_from_psi(rec.psi)
    _, quad, logdet = _quad_form_parts(params, rec.psi)
    lg = elliptical.log_gtilde(quad, params.m, params.family)
    return float(-0.5 * logdet + lg + np.sum(np.log(tp) - params.transforms.log_sigma))


def marginal_log_q(theta_i, i, params):
    """Log of the i-th marginal density (closed form, no m-dim integral)."""
    tr = params.transforms
    theta_i = np.asarray(theta_i, dtype=np.float64)
    x = (theta_i - tr.mu[i]) / tr.sigma[i]
    sub = TransformStack(kind=tr.kind,
                         gamma_raw=tr.gamma_raw[i:i + 1],
                         mu=tr.mu[i:i + 1], log_sigma=tr.log_sigma[i:i + 1])
    psi, log_tp = sub.forward_with_logderiv(x[..., None] if x.ndim else x.reshape(1))
    psi = psi.reshape(theta_i.shape) if theta_i.ndim else psi[0]
    log_tp = log_tp.reshape(theta_i.shape) if theta_i.ndim else log_tp[0]
    out = elliptical.marginal_log_density(psi, params.family) + log_tp - tr.log_sigma[i]
    return out if theta_i.ndim else float(out)


def grad_theta_log_q(rec, params):
    """Gradient of log q with respect to theta at a stored draw."""
    tr = params.transforms
    tp, ts = tr.derivs_from_psi(rec.psi)
    sol, quad, _ = _quad_form_parts(params, rec.psi)
    ratio = elliptical.gtilde_log_ratio(quad, params.m, params.family)
    return ratio * 2.0 * (tp / tr.sigma) * sol + ts / (tp * tr.sigma)


@dataclass(frozen=True)
class ThetaJacobian:
    """Blocks of d theta / d lambda at one draw, raw parameterization.

    mu and log_sigma blocks are diagonal (their diagonals stored); gamma is
    block diagonal per coordinate; tau is block sparse per row; omega is a
    dense column (or absent).
    """

    dmu: np.ndarray         # (m,)
    dlog_sigma: np.ndarray  # (m,)
    dgamma: np.ndarray      # (m, G)
    dtau: np.ndarray        # (m, K)
    domega: np.ndarray      # (m, n_omega)

    def vjp(self, v, layout):
        """(d theta/d lambda)' v as a flat vector in layout order."""
        out = np.empty(layout.size)
        out[layout.mu] = self.dmu * v
        out[layout.log_sigma] = self.dlog_sigma * v
        out[layout.gamma] = (self.dgamma * v[:, None]).ravel()
        out[layout.tau] = (self.dtau * v[:, None]).ravel()
        out[layout.omega] = self.domega.T @ v
        return out


def dtheta_dlambda(rec, params):
    """Jacobian blocks of the draw map h(base, lambda) at fixed base variates."""
    tr = params.transforms
    sigma = tr.sigma
    x = tr.t_inverse(rec.psi)
    dpsi, dgam_c = tr.t_inverse_param_grads(rec.psi)
    gchain = gamma_chain(tr.kind, tr.gamma_raw)

    dmu = np.ones(params.m)
    dlog_sigma = sigma * x
    dgamma = sigma[:, None] * dgam_c * gchain
    dtau = sigma[:, None] * dpsi[:, None] * factor_scale.dpsi_dtau(
        params.scale, rec.base.z, rec.base.eps, rec.w)

    n_omega = params.family.omega_raw.shape[0]
    if params.family.kind is FamilyKind.STUDENT_T:
        B, d = factor_scale.build_B_d(params.scale)
        core = d * rec.base.eps
        if params.K > 0:
            core = core + B @ rec.base.z
        dw = elliptical.w_quantile_domega(rec.base.u, params.family)
        dpsi_dnu = core * dw / (2.0 * np.sqrt(rec.w))
        domega = (sigma * dpsi * dpsi_dnu * params.family.nu)[:, None]
    else:
        domega = np.zeros((params.m, n_omega))
    return ThetaJacobian(dmu=dmu, dlog_sigma=dlog_sigma, dgamma=dgamma,
                         dtau=dtau, domega=domega)


def elbo_estimate(rec, params, target):
    """Single-draw evidence-lower-bound estimate log g - log q at the draw."""
    return float(target.log_g(rec.theta)) - log_q_record(rec, params)


def reparam_grad(base, params, target):
    """Single-draw re-parameterization gradient of the lower bound.

    Returns (flat gradient, record, elbo estimate) so the ascent loop reuses
    the draw.
    """
    rec = sample(params, base)
    diff = np.asarray(target.grad_log_g(rec.theta), dtype=np.float64) \
        - grad_theta_log_q(rec, params)
    jac = dtheta_dlambda(rec, params)
    grad = jac.vjp(diff, params.layout())
    return grad, rec, elbo_estimate(rec, params, target)
