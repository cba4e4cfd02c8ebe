"""Scale-mixture-of-normals generator kernels and mixing-variable quantiles.

``log_gtilde(x, m, fam)`` is the log of the m-dimensional generator density
kernel evaluated at the quadratic form x = psi' Sigma^{-1} psi, normalizing
constant included, so that exp(log_gtilde(|psi|^2, m)) integrates to one over
R^m.  Families:

* ``gaussian``    W == 1,
* ``t``           W ~ nu / chi2(nu), nu = exp(raw) (init 20),
* ``laplace``     W ~ Exp(1),
* ``ep``          exponential-power kernel exp(-x^beta/2), beta = logistic(raw)
                  in (0, 1]; density and ratio only (no sampler, no marginal).

All heavy-tail bookkeeping is done in the log domain; the Laplace branch uses
log K_nu evaluated by scipy for moderate orders and by a uniform asymptotic
expansion for large orders.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaincinv, gammaln, kve, logit

from .errors import NumericError, UnsupportedFamilyError

_LOG_2PI = np.log(2.0 * np.pi)
_X_FLOOR = 1e-12  # small-x floor for the Laplace cusp; the induced density
# flattening within |psi| < sqrt(floor) costs ~floor of marginal mass, so the
# floor must sit well below the 1e-8 normalization guarantee


class FamilyKind(enum.Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "t"
    LAPLACE = "laplace"
    EXP_POWER = "ep"

    @classmethod
    def from_name(cls, name):
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown family {name!r}")


OMEGA_DIM = {
    FamilyKind.GAUSSIAN: 0,
    FamilyKind.STUDENT_T: 1,
    FamilyKind.LAPLACE: 0,
    FamilyKind.EXP_POWER: 1,
}


@dataclass(frozen=True)
class EllipticalFamily:
    """Mixing family tag plus raw mixing parameters."""

    kind: FamilyKind
    omega_raw: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def nu(self):
        if self.kind is not FamilyKind.STUDENT_T:
            raise UnsupportedFamilyError("nu is defined for the t family only")
        return float(np.exp(self.omega_raw[0]))

    @property
    def beta(self):
        if self.kind is not FamilyKind.EXP_POWER:
            raise UnsupportedFamilyError("beta is defined for the exponential-power family only")
        return float(expit(self.omega_raw[0]))

    @classmethod
    def make(cls, name, nu=20.0, beta=0.5):
        kind = FamilyKind.from_name(name) if isinstance(name, str) else name
        if kind is FamilyKind.STUDENT_T:
            return cls(kind, np.array([np.log(nu)]))
        if kind is FamilyKind.EXP_POWER:
            return cls(kind, np.array([logit(beta)]))
        return cls(kind, np.zeros(0))


# ---------------------------------------------------------------------------
# log K_nu in the log domain

def _log_kv_debye(v, s):
    # uniform asymptotic expansion for large order, s = v*z
    z = s / v
    t2 = 1.0 + z * z
    sq = np.sqrt(t2)
    eta = sq + np.log(z / (1.0 + sq))
    p = 1.0 / sq
    p2 = p * p
    u1 = p * (3.0 - 5.0 * p2) / 24.0
    u2 = p2 * (81.0 - 462.0 * p2 + 385.0 * p2 * p2) / 1152.0
    u3 = (p * p2 * (30375.0 - 369603.0 * p2 + 765765.0 * p2 * p2
                    - 425425.0 * p2 * p2 * p2) / 414720.0)
    series = 1.0 - u1 / v + u2 / v ** 2 - u3 / v ** 3
    return 0.5 * np.log(np.pi / (2.0 * v)) - v * eta - 0.25 * np.log(t2) + np.log(series)


def log_kv(order, s):
    """log of the modified Bessel function K_order(s), s > 0, any real order."""
    v = abs(float(order))
    s = np.asarray(s, dtype=np.float64)
    if np.any(s <= 0.0):
        raise NumericError("Bessel argument must be positive")
    if v > 50.0:
        return _log_kv_debye(v, s)
    out = np.log(kve(v, s)) - s
    bad = ~np.isfinite(out)
    if np.any(bad):
        if v <= 0.0:
            raise NumericError("log K_0 overflow outside the supported range")
        # leading small-argument behaviour, 0.5*Gamma(v)*(2/s)^v
        out = np.where(bad, gammaln(v) - np.log(2.0) + v * (np.log(2.0) - np.log(s)), out)
    return out


# ---------------------------------------------------------------------------
# generator kernels

def _check_x(x, m):
    if m < 1 or int(m) != m:
        raise NumericError(f"dimension m must be a positive integer, got {m!r}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0) or not np.all(np.isfinite(x)):
        raise NumericError("quadratic form x must be finite and >= 0")
    return x


def log_gtilde(x, m, fam):
    """Log generator density kernel, normalizing constant included."""
    x = _check_x(x, m)
    kind = fam.kind
    if kind is FamilyKind.GAUSSIAN:
        out = -0.5 * m * _LOG_2PI - 0.5 * x
    elif kind is FamilyKind.STUDENT_T:
        nu = fam.nu
        out = (gammaln(0.5 * (nu + m)) - gammaln(0.5 * nu)
               - 0.5 * m * np.log(np.pi * nu)
               - 0.5 * (nu + m) * np.log1p(x / nu))
    elif kind is FamilyKind.LAPLACE:
        xf = np.maximum(x, _X_FLOOR)
        ordv = 0.5 * (2.0 - m)
        s = np.sqrt(2.0 * xf)
        out = (np.log(2.0) - 0.5 * m * _LOG_2PI
               + 0.5 * ordv * np.log(0.5 * xf) + log_kv(ordv, s))
    elif kind is FamilyKind.EXP_POWER:
        beta = fam.beta
        out = (np.log(m) + gammaln(0.5 * m) - gammaln(1.0 + 0.5 * m / beta)
               - 0.5 * m * np.log(np.pi) - (1.0 + 0.5 * m / beta) * np.log(2.0)
               - 0.5 * x ** beta)
    else:  # pragma: no cover
        raise UnsupportedFamilyError(kind)
    return out if np.ndim(x) else float(out)


def gtilde_log_ratio(x, m, fam):
    """d/dx log gtilde(x); the tail-weight factor in the entropy gradient."""
    x = _check_x(x, m)
    kind = fam.kind
    if kind is FamilyKind.GAUSSIAN:
        out = np.full(np.shape(x), -0.5)
    elif kind is FamilyKind.STUDENT_T:
        nu = fam.nu
        out = -0.5 * (nu + m) / nu / (1.0 + x / nu)
    elif kind is FamilyKind.LAPLACE:
        xf = np.maximum(x, _X_FLOOR)
        ordv = 0.5 * (2.0 - m)
        s = np.sqrt(2.0 * xf)
        lk = log_kv(ordv, s)
        lkm = log_kv(ordv - 1.0, s)
        lkp = log_kv(ordv + 1.0, s)
        kratio = -0.5 * (np.exp(lkm - lk) + np.exp(lkp - lk))
        out = 0.5 * ordv / xf + kratio / s
    elif kind is FamilyKind.EXP_POWER:
        beta = fam.beta
        if beta < 1.0 and np.any(np.asarray(x) == 0.0):
            raise NumericError("exponential-power ratio is singular at x = 0 for beta < 1")
        out = -0.5 * beta * x ** (beta - 1.0)
    else:  # pragma: no cover
        raise UnsupportedFamilyError(kind)
    return out if np.ndim(x) else float(out)


def marginal_log_density(psi, fam):
    """Log density of one margin, gtilde_{1,omega}(psi^2); not defined for ep."""
    if fam.kind is FamilyKind.EXP_POWER:
        raise UnsupportedFamilyError("the exponential-power family has no closed one-margin kernel")
    psi = np.asarray(psi, dtype=np.float64)
    return log_gtilde(psi * psi, 1, fam)


# ---------------------------------------------------------------------------
# mixing-variable quantiles

def w_quantile(u, fam):
    """Quantile of the mixing variable W at u in (0, 1)."""
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise NumericError("u must lie strictly inside (0, 1)")
    kind = fam.kind
    if kind is FamilyKind.GAUSSIAN:
        out = np.ones_like(u_arr)
    elif kind is FamilyKind.LAPLACE:
        out = -np.log1p(-u_arr)
    elif kind is FamilyKind.STUDENT_T:
        nu = fam.nu
        # W = nu / chi2(nu) quantile: inverse survival of the chi-square
        out = nu / (2.0 * gammaincinv(0.5 * nu, 1.0 - u_arr))
    else:
        raise UnsupportedFamilyError("no mixing-variable sampler for the exponential-power family")
    return out if np.ndim(u) else float(out)


def w_quantile_domega(u, fam, rel_step=1e-4):
    """d W_quantile / d nu for the t family, central differences in nu."""
    if fam.kind is not FamilyKind.STUDENT_T:
        raise UnsupportedFamilyError("the mixing quantile has a free parameter only for the t family")
    nu = fam.nu
    h = rel_step * nu
    up = EllipticalFamily(FamilyKind.STUDENT_T, np.array([np.log(nu + h)]))
    dn = EllipticalFamily(FamilyKind.STUDENT_T, np.array([np.log(nu - h)]))
    return (w_quantile(u, up) - w_quantile(u, dn)) / (2.0 * h)
