"""Element-wise monotone transforms used by the variational family.

Each transform t maps the real line onto itself, strictly increasing, with a
small shape-parameter vector gamma held in unconstrained (raw) form:

* ``identity``   no shape parameters,
* ``yj``         power map with gamma = 2*logistic(raw) in (0, 2),
* ``igh``        numerical inverse of the G-and-H map
                 T(z) = ((exp(g z) - 1)/g) exp(h z^2/2); g free,
                 h = softplus(raw) >= 0,
* ``double-yj``  composition of two yj maps (second applied on top).

The full element map is theta = mu + sigma * t^{-1}(psi) and its inverse
psi = t((theta - mu)/sigma); sigma = exp(log_sigma).
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from . import kernels
from .errors import NumericError


class TransformKind(enum.Enum):
    IDENTITY = "identity"
    YJ = "yj"
    IGH = "igh"
    DOUBLE_YJ = "double-yj"

    @classmethod
    def from_name(cls, name):
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown transform kind {name!r}")


GAMMA_DIM = {
    TransformKind.IDENTITY: 0,
    TransformKind.YJ: 1,
    TransformKind.IGH: 2,
    TransformKind.DOUBLE_YJ: 2,
}


def _softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)


def constrain_gamma(kind, gamma_raw):
    """Raw shape parameters -> constrained (gamma, or (g, h), or (g1, g2))."""
    gamma_raw = np.asarray(gamma_raw, dtype=np.float64)
    if kind is TransformKind.IDENTITY:
        return gamma_raw
    if kind is TransformKind.YJ:
        return 2.0 * expit(gamma_raw)
    if kind is TransformKind.IGH:
        out = gamma_raw.copy()
        out[..., 1] = _softplus(gamma_raw[..., 1])
        return out
    return 2.0 * expit(gamma_raw)  # DOUBLE_YJ, both components


def unconstrain_gamma(kind, gamma):
    """Inverse of constrain_gamma, for building params from constrained values."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if kind is TransformKind.IDENTITY:
        return gamma
    if kind is TransformKind.IGH:
        out = gamma.copy()
        with np.errstate(divide="ignore"):
            out[..., 1] = np.where(gamma[..., 1] > 0.0,
                                   np.log(np.expm1(gamma[..., 1])), -np.inf)
        return out
    return logit(gamma / 2.0)


def gamma_chain(kind, gamma_raw):
    """d(constrained)/d(raw), element-wise; matches constrain_gamma."""
    gamma_raw = np.asarray(gamma_raw, dtype=np.float64)
    if kind is TransformKind.IDENTITY:
        return np.ones_like(gamma_raw)
    if kind is TransformKind.IGH:
        out = np.ones_like(gamma_raw)
        out[..., 1] = expit(gamma_raw[..., 1])
        return out
    s = expit(gamma_raw)
    return 2.0 * s * (1.0 - s)


@dataclass(frozen=True)
class TransformParams:
    """Location, log-scale and raw shape parameters for one coordinate."""

    kind: TransformKind
    gamma_raw: np.ndarray
    mu: float = 0.0
    log_sigma: float = 0.0

    @property
    def sigma(self):
        return float(np.exp(self.log_sigma))

    @property
    def gamma(self):
        return constrain_gamma(self.kind, self.gamma_raw)

    @classmethod
    def from_constrained(cls, kind, gamma=(), mu=0.0, log_sigma=0.0):
        kind = TransformKind.from_name(kind) if isinstance(kind, str) else kind
        raw = unconstrain_gamma(kind, np.atleast_1d(np.asarray(gamma, dtype=np.float64)))
        return cls(kind=kind, gamma_raw=raw, mu=mu, log_sigma=log_sigma)


@dataclass(frozen=True)
class TransformStack:
    """Per-coordinate transform parameters stored as arrays (one shared kind)."""

    kind: TransformKind
    gamma_raw: np.ndarray  # (m, G)
    mu: np.ndarray         # (m,)
    log_sigma: np.ndarray  # (m,)

    @property
    def m(self):
        return self.mu.shape[0]

    @property
    def sigma(self):
        return np.exp(self.log_sigma)

    @property
    def gamma(self):
        return constrain_gamma(self.kind, self.gamma_raw)

    def param(self, i):
        return TransformParams(kind=self.kind, gamma_raw=self.gamma_raw[i].copy(),
                               mu=float(self.mu[i]), log_sigma=float(self.log_sigma[i]))

    @classmethod
    def from_params(cls, params):
        kinds = {p.kind for p in params}
        if len(kinds) != 1:
            raise ValueError("all coordinates must share one transform kind")
        kind = kinds.pop()
        return cls(kind=kind,
                   gamma_raw=np.array([np.atleast_1d(p.gamma_raw) for p in params],
                                      dtype=np.float64).reshape(len(params), GAMMA_DIM[kind]),
                   mu=np.array([p.mu for p in params], dtype=np.float64),
                   log_sigma=np.array([p.log_sigma for p in params], dtype=np.float64))

    @classmethod
    def default(cls, m, kind):
        kind = TransformKind.from_name(kind) if isinstance(kind, str) else kind
        G = GAMMA_DIM[kind]
        raw = np.zeros((m, G))
        if kind is TransformKind.IGH:
            raw[:, 1] = -3.0  # small initial tail weight h ~ 0.049
        return cls(kind=kind, gamma_raw=raw, mu=np.zeros(m), log_sigma=np.zeros(m))

    # -- vectorized maps; x has shape (m,) or (n, m) ------------------------

    def _bc(self, x, col):
        return np.ascontiguousarray(np.broadcast_to(col, x.shape), dtype=np.float64).ravel()

    def t_forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind is TransformKind.IDENTITY:
            return x.copy()
        flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
        g = self.gamma
        if self.kind is TransformKind.YJ:
            out = kernels.yj_forward(flat, self._bc(x, g[:, 0]))
        elif self.kind is TransformKind.IGH:
            out = kernels.gh_invert(flat, self._bc(x, g[:, 0]), self._bc(x, g[:, 1]))
            if np.isnan(out).any():
                raise NumericError("G-and-H inversion failed to converge")
        else:
            mid = kernels.yj_forward(flat, self._bc(x, g[:, 0]))
            out = kernels.yj_forward(mid, self._bc(x, g[:, 1]))
        return out.reshape(x.shape)

    def t_inverse(self, psi):
        psi = np.asarray(psi, dtype=np.float64)
        if self.kind is TransformKind.IDENTITY:
            return psi.copy()
        flat = np.ascontiguousarray(psi, dtype=np.float64).ravel()
        g = self.gamma
        if self.kind is TransformKind.YJ:
            out = kernels.yj_inverse(flat, self._bc(psi, g[:, 0]))
        elif self.kind is TransformKind.IGH:
            out = kernels.gh_forward(flat, self._bc(psi, g[:, 0]), self._bc(psi, g[:, 1]))
        else:
            mid = kernels.yj_inverse(flat, self._bc(psi, g[:, 1]))
            out = kernels.yj_inverse(mid, self._bc(psi, g[:, 0]))
        return out.reshape(psi.shape)

    def t_derivs(self, x):
        """(t', t'') of the forward map at x."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind is TransformKind.IDENTITY:
            return np.ones_like(x), np.zeros_like(x)
        flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
        g = self.gamma
        if self.kind is TransformKind.YJ:
            d1, d2 = kernels.yj_derivs(flat, self._bc(x, g[:, 0]))
        elif self.kind is TransformKind.IGH:
            z = kernels.gh_invert(flat, self._bc(x, g[:, 0]), self._bc(x, g[:, 1]))
            if np.isnan(z).any():
                raise NumericError("G-and-H inversion failed to converge")
            T1, T2 = kernels.gh_derivs(z, self._bc(x, g[:, 0]), self._bc(x, g[:, 1]))
            d1 = 1.0 / T1
            d2 = -T2 / T1 ** 3
        else:
            g1 = self._bc(x, g[:, 0])
            g2 = self._bc(x, g[:, 1])
            y1 = kernels.yj_forward(flat, g1)
            a1, a2 = kernels.yj_derivs(flat, g1)
            b1, b2 = kernels.yj_derivs(y1, g2)
            d1 = b1 * a1
            d2 = b2 * a1 * a1 + b1 * a2
        return d1.reshape(x.shape), d2.reshape(x.shape)

    def derivs_from_psi(self, psi):
        """(t', t'') evaluated at x = t^{-1}(psi), without re-inverting igh."""
        psi = np.asarray(psi, dtype=np.float64)
        if self.kind is TransformKind.IDENTITY:
            return np.ones_like(psi), np.zeros_like(psi)
        flat = np.ascontiguousarray(psi, dtype=np.float64).ravel()
        g = self.gamma
        if self.kind is TransformKind.YJ:
            x = kernels.yj_inverse(flat, self._bc(psi, g[:, 0]))
            d1, d2 = kernels.yj_derivs(x, self._bc(psi, g[:, 0]))
        elif self.kind is TransformKind.IGH:
            T1, T2 = kernels.gh_derivs(flat, self._bc(psi, g[:, 0]), self._bc(psi, g[:, 1]))
            d1 = 1.0 / T1
            d2 = -T2 / T1 ** 3
        else:
            g1 = self._bc(psi, g[:, 0])
            g2 = self._bc(psi, g[:, 1])
            y1 = kernels.yj_inverse(flat, g2)
            x = kernels.yj_inverse(y1, g1)
            a1, a2 = kernels.yj_derivs(x, g1)
            b1, b2 = kernels.yj_derivs(y1, g2)
            d1 = b1 * a1
            d2 = b2 * a1 * a1 + b1 * a2
        return d1.reshape(psi.shape), d2.reshape(psi.shape)

    def forward_with_logderiv(self, x):
        """psi = t(x) together with log t'(x), sharing the igh inversion."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind is TransformKind.IDENTITY:
            return x.copy(), np.zeros_like(x)
        flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
        g = self.gamma
        if self.kind is TransformKind.YJ:
            gam = self._bc(x, g[:, 0])
            psi = kernels.yj_forward(flat, gam)
            logd = (gam - 1.0) * np.sign(flat) * np.log1p(np.abs(flat))
        elif self.kind is TransformKind.IGH:
            z = kernels.gh_invert(flat, self._bc(x, g[:, 0]), self._bc(x, g[:, 1]))
            if np.isnan(z).any():
                raise NumericError("G-and-H inversion failed to converge")
            T1, _ = kernels.gh_derivs(z, self._bc(x, g[:, 0]), self._bc(x, g[:, 1]))
            psi = z
            logd = -np.log(T1)
        else:
            g1 = self._bc(x, g[:, 0])
            g2 = self._bc(x, g[:, 1])
            y1 = kernels.yj_forward(flat, g1)
            psi = kernels.yj_forward(y1, g2)
            logd = ((g1 - 1.0) * np.sign(flat) * np.log1p(np.abs(flat))
                    + (g2 - 1.0) * np.sign(y1) * np.log1p(np.abs(y1)))
        return psi.reshape(x.shape), logd.reshape(x.shape)

    def t_inverse_param_grads(self, psi):
        """(d t^{-1}/d psi, d t^{-1}/d gamma_constrained) at psi.

        The second array has shape (..., m, G); raw-parameter chain factors
        are applied by the caller.
        """
        psi = np.asarray(psi, dtype=np.float64)
        if self.kind is TransformKind.IDENTITY:
            return np.ones_like(psi), np.zeros(psi.shape + (0,))
        flat = np.ascontiguousarray(psi, dtype=np.float64).ravel()
        g = self.gamma
        if self.kind is TransformKind.YJ:
            gam = self._bc(psi, g[:, 0])
            x = kernels.yj_inverse(flat, gam)
            d1, _ = kernels.yj_derivs(x, gam)
            dpsi = 1.0 / d1
            dgam = (-kernels.yj_dgamma(x, gam) / d1)[:, None]
        elif self.kind is TransformKind.IGH:
            gg = self._bc(psi, g[:, 0])
            hh = self._bc(psi, g[:, 1])
            dpsi, _ = kernels.gh_derivs(flat, gg, hh)
            dg, dh = kernels.gh_param_grads(flat, gg, hh)
            dgam = np.stack([dg, dh], axis=-1)
        else:
            g1 = self._bc(psi, g[:, 0])
            g2 = self._bc(psi, g[:, 1])
            y1 = kernels.yj_inverse(flat, g2)
            x = kernels.yj_inverse(y1, g1)
            t1p, _ = kernels.yj_derivs(x, g1)
            t2p, _ = kernels.yj_derivs(y1, g2)
            dpsi = 1.0 / (t1p * t2p)
            dgam1 = -kernels.yj_dgamma(x, g1) / t1p
            dgam2 = -kernels.yj_dgamma(y1, g2) / (t1p * t2p)
            dgam = np.stack([dgam1, dgam2], axis=-1)
        G = GAMMA_DIM[self.kind]
        return dpsi.reshape(psi.shape), dgam.reshape(psi.shape + (G,))

    def k_forward(self, theta):
        return self.t_forward((np.asarray(theta, dtype=np.float64) - self.mu) / self.sigma)

    def h_inverse(self, psi):
        return self.mu + self.sigma * self.t_inverse(psi)


def _as_stack(p):
    return TransformStack(kind=p.kind,
                          gamma_raw=np.atleast_1d(np.asarray(p.gamma_raw, dtype=np.float64)
                                                  ).reshape(1, GAMMA_DIM[p.kind]),
                          mu=np.array([p.mu], dtype=np.float64),
                          log_sigma=np.array([p.log_sigma], dtype=np.float64))


def _check_finite(x):
    if not np.isfinite(x):
        raise NumericError(f"non-finite input {x!r}")


def t_forward(x, p):
    """Scalar forward map psi = t(x) for one coordinate's parameters."""
    _check_finite(x)
    return float(_as_stack(p).t_forward(np.array([x]))[0])


def t_inverse(psi, p):
    """Scalar inverse map x = t^{-1}(psi)."""
    _check_finite(psi)
    return float(_as_stack(p).t_inverse(np.array([psi]))[0])


def t_derivs(x, p):
    """Scalar (t'(x), t''(x))."""
    _check_finite(x)
    d1, d2 = _as_stack(p).t_derivs(np.array([x]))
    return float(d1[0]), float(d2[0])


def t_inverse_param_grads(psi, p):
    """Scalar (d t^{-1}/d psi, d t^{-1}/d gamma_constrained)."""
    _check_finite(psi)
    dpsi, dgam = _as_stack(p).t_inverse_param_grads(np.array([psi]))
    return float(dpsi[0]), dgam[0]


def k_forward(theta, p):
    """Scalar psi = t((theta - mu)/sigma)."""
    _check_finite(theta)
    return float(_as_stack(p).k_forward(np.array([theta]))[0])


def h_inverse(psi, p):
    """Scalar theta = mu + sigma * t^{-1}(psi)."""
    _check_finite(psi)
    return float(_as_stack(p).h_inverse(np.array([psi]))[0])
