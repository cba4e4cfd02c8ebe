"""Unit-diagonal factor scale matrix Sigma = B B' + D^2 from spherical angles.

Row j of the combined matrix [d_j, b_j1, ..., b_jK] is a point on the unit
(K+1)-sphere parameterized by K angles, so Sigma automatically has unit
diagonal.  The angles come from unconstrained parameters tau through the
normal CDF: kappa_k = pi * Phi(tau_k) for k < K and kappa_K = 2 pi * Phi(tau_K).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr, ndtri

from . import kernels
from .errors import DegenerateScaleError

_PHI_CLAMP = 1e-10
_D_FLOOR = 1e-8


@dataclass(frozen=True)
class FactorScale:
    """Raw per-row angle parameters, shape (m, K)."""

    tau: np.ndarray

    @property
    def m(self):
        return self.tau.shape[0]

    @property
    def K(self):
        return self.tau.shape[1]

    @classmethod
    def default(cls, m, K, rng=None):
        """Near-diagonal start: d_j close to one, tiny factor loadings."""
        tau = np.zeros((m, K))
        if K > 0:
            tau[:, 0] = ndtri(0.1)
            if K > 1:
                rng = np.random.default_rng(0) if rng is None else rng
                tau[:, 1:] = 0.01 * rng.standard_normal((m, K - 1))
        return cls(tau=tau)


def tau_to_angles(tau):
    """Map raw parameters to angles; the last column spans (0, 2 pi)."""
    tau = np.asarray(tau, dtype=np.float64)
    u = np.clip(ndtr(tau), _PHI_CLAMP, 1.0 - _PHI_CLAMP)
    ang = np.pi * u
    if tau.ndim == 2 and tau.shape[1] > 0:
        ang[:, -1] *= 2.0
    elif tau.ndim == 1 and tau.shape[0] > 0:
        ang[-1] *= 2.0
    return ang


def dangles_dtau(tau):
    """Element-wise derivative of tau_to_angles (pi or 2 pi times the normal pdf)."""
    tau = np.asarray(tau, dtype=np.float64)
    phi = np.exp(-0.5 * tau * tau) / np.sqrt(2.0 * np.pi)
    d = np.pi * phi
    if tau.ndim == 2 and tau.shape[1] > 0:
        d[:, -1] *= 2.0
    elif tau.ndim == 1 and tau.shape[0] > 0:
        d[-1] *= 2.0
    return d


def angles_to_row(angles):
    """One row of [d B] from its K angles: (cos k1, cos k2 sin k1, ..., prod sin)."""
    angles = np.asarray(angles, dtype=np.float64).reshape(1, -1)
    return kernels.sphere_rows(np.ascontiguousarray(angles))[0]


def row_jacobian(angles):
    """(K+1, K) Jacobian of angles_to_row."""
    angles = np.asarray(angles, dtype=np.float64).reshape(1, -1)
    return kernels.sphere_row_jac(np.ascontiguousarray(angles))[0]


def build_B_d(scale):
    """Factor loading matrix B (m, K) and idiosyncratic scales d (m,)."""
    angles = tau_to_angles(scale.tau)
    rows = kernels.sphere_rows(np.ascontiguousarray(angles))
    return rows[:, 1:].copy(), rows[:, 0].copy()


def sigma_solve_logdet(B, d, v):
    """Solve Sigma x = v and return (x, log det Sigma) without forming Sigma.

    Sigma = B B' + diag(d^2); Woodbury identity through the K x K capacitance
    matrix.  v may be a vector (m,) or a matrix of columns (m, n).
    """
    B = np.asarray(B, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    small = np.abs(d) < _D_FLOOR
    if np.any(small):
        row = int(np.argmax(small))
        raise DegenerateScaleError(row, d[row])
    d2 = d * d
    logdet = float(np.sum(np.log(d2)))
    v = np.asarray(v, dtype=np.float64)
    vec = v.ndim == 1
    V = v[:, None] if vec else v
    X = V / d2[:, None]
    if B.shape[1] > 0:
        Bd = B / d2[:, None]
        M = np.eye(B.shape[1]) + B.T @ Bd
        cf = cho_factor(M, lower=True)
        X = X - Bd @ cho_solve(cf, B.T @ X)
        logdet += 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    return (X[:, 0] if vec else X), logdet


def sigma_dense(B, d):
    """Dense Sigma, for oracle checks at small m."""
    B = np.asarray(B, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    return B @ B.T + np.diag(d * d)


def dpsi_dtau(scale, z, eps, w):
    """Compact (m, K) Jacobian of psi = sqrt(w) (B z + D eps) w.r.t. tau.

    Row j of psi depends only on row j of tau, so the full (m, m K) Jacobian
    is block sparse; entry [j, l] here is d psi_j / d tau_{j, l} and every
    cross-row entry is identically zero.
    """
    angles = tau_to_angles(scale.tau)
    dkap = dangles_dtau(scale.tau)
    return kernels.dpsi_dtau_compact(np.ascontiguousarray(angles),
                                     np.ascontiguousarray(z, dtype=np.float64),
                                     np.ascontiguousarray(eps, dtype=np.float64),
                                     float(np.sqrt(w)),
                                     np.ascontiguousarray(dkap))
