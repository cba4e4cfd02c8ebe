"""Kullback-Leibler benchmark of one-margin approximating families.

For a skew-normal target with requested skewness, mean and sd, minimize the
KL divergence over the free parameters of

* ``adjusted``   the copula margin with location/scale inside the transform
                 argument: q(x) = phi(t_g((x - mu)/s)) t_g'((x - mu)/s)/s,
* ``sln2020``    location/scale on the transformed variable instead:
                 q(x) = phi((t_g(x) - mu)/s)/s * t_g'(x),
* ``gaussian``   a plain normal.

Both KL directions use Gauss-Legendre quadrature with the integration
variable chosen so no probability mass can leave the node range: the
target-to-q direction integrates over the target's support (mean +- 10 sd),
while the q-to-target direction substitutes the approximation's generative
form theta(z), z ~ N(0, 1), and integrates over z in +-10.

Row protocol: every family is *fitted* by minimizing the mass-covering
target-to-q divergence (for the plain normal that optimum is moment
matching, solved in closed form; for the transformed families it is found
from several deterministic starts with Nelder-Mead plus an L-BFGS-B
polish), and the *reported* value is the requested direction's divergence
at the fitted parameters.  Fitting in the mass-covering direction is robust
because the fixed target-support quadrature penalizes any candidate that
moves mass away from the target, and reporting defaults to the q-to-target
direction conventional for variational approximations.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from . import kernels
from .targets import SkewNormalTarget

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
QUAD_NODES = 400
QUAD_SPAN = 10.0
N_STARTS = 5

FAMILY_NAMES = ("adjusted", "sln2020", "gaussian")


def _yj(x, gam):
    x = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(x).ravel()
    return kernels.yj_forward(flat, np.full(flat.shape, gam)).reshape(x.shape)


def _yj_inv(y, gam):
    y = np.asarray(y, dtype=np.float64)
    flat = np.ascontiguousarray(y).ravel()
    return kernels.yj_inverse(flat, np.full(flat.shape, gam)).reshape(y.shape)


def _yj_logderiv(x, gam):
    return (gam - 1.0) * np.sign(x) * np.log1p(np.abs(x))


def family_log_density(name, x, params):
    """Log density of one benchmark family at nodes x."""
    x = np.asarray(x, dtype=np.float64)
    if name == "gaussian":
        mu, log_s = params
        s = np.exp(log_s)
        z = (x - mu) / s
        return -_HALF_LOG_2PI - 0.5 * z * z - log_s
    mu, log_s, gam_raw = params
    s = np.exp(log_s)
    gam = 2.0 * expit(gam_raw)
    if name == "adjusted":
        z = (x - mu) / s
        psi = _yj(z, gam)
        return -_HALF_LOG_2PI - 0.5 * psi * psi + _yj_logderiv(z, gam) - log_s
    if name == "sln2020":
        psi = _yj(x, gam)
        zz = (psi - mu) / s
        return -_HALF_LOG_2PI - 0.5 * zz * zz - log_s + _yj_logderiv(x, gam)
    raise ValueError(f"unknown family {name!r}")


@dataclass(frozen=True)
class KlGrid:
    """Quadrature nodes, weights and target log density."""

    nodes: np.ndarray
    weights: np.ndarray
    log_p: np.ndarray
    p: np.ndarray


def make_grid(target, n_nodes=QUAD_NODES, span=QUAD_SPAN):
    mean, sd = target.mean_sd()
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    lo, hi = mean - span * sd, mean + span * sd
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    log_p = target.logpdf(nodes)
    return KlGrid(nodes=nodes, weights=weights, log_p=log_p, p=np.exp(log_p))


def _z_rule(n_nodes=QUAD_NODES, span=QUAD_SPAN):
    z, w = np.polynomial.legendre.leggauss(n_nodes)
    nodes = span * z
    phi_w = span * w * np.exp(-_HALF_LOG_2PI - 0.5 * nodes * nodes)
    return nodes, phi_w


_Z_NODES, _Z_PHI_W = _z_rule()
_BAD_OBJECTIVE = 1e10


def _theta_of_z(name, params, z):
    """Draw map of one family: theta(z) with z standard normal."""
    if name == "gaussian":
        mu, log_s = params
        return mu + np.exp(log_s) * z
    mu, log_s, gam_raw = params
    gam = 2.0 * expit(gam_raw)
    if name == "adjusted":
        return mu + np.exp(log_s) * _yj_inv(z, gam)
    if name == "sln2020":
        return _yj_inv(mu + np.exp(log_s) * z, gam)
    raise ValueError(f"unknown family {name!r}")


def kl_objective(name, params, grid=None, direction="target-to-q", target=None):
    """Quadrature KL divergence for one family at one parameter point.

    ``target-to-q`` integrates over the target grid; ``q-to-target``
    integrates over the approximation's own base variable so the estimate
    stays valid however far the candidate density moves.
    """
    if direction == "target-to-q":
        if grid is None:
            raise ValueError("target-to-q direction needs a quadrature grid")
        log_q = family_log_density(name, grid.nodes, params)
        return float(np.sum(grid.weights * grid.p * (grid.log_p - log_q)))
    if direction == "q-to-target":
        if target is None:
            raise ValueError("q-to-target direction needs the target density")
        with np.errstate(over="ignore", invalid="ignore"):
            theta = _theta_of_z(name, params, _Z_NODES)
            integrand = (family_log_density(name, theta, params)
                         - target.logpdf(theta))
        bad = ~np.isfinite(integrand)
        if np.any(bad & (_Z_PHI_W > 1e-16)):
            return _BAD_OBJECTIVE
        integrand = np.where(bad, 0.0, integrand)
        val = float(np.sum(_Z_PHI_W * integrand))
        return val if np.isfinite(val) else _BAD_OBJECTIVE
    raise ValueError(f"unknown direction {direction!r}")


def _starts(name, mean, sd):
    ls = np.log(sd)
    if name == "gaussian":
        return [np.array([mean, ls]),
                np.array([mean - 0.5 * sd, ls + 0.2]),
                np.array([mean + 0.5 * sd, ls - 0.2]),
                np.array([mean, ls + 0.7]),
                np.array([mean - sd, ls])]
    return [np.array([mean, ls, 0.0]),
            np.array([mean - 0.5 * sd, np.log(1.2 * sd), 0.8]),
            np.array([mean + 0.5 * sd, np.log(0.8 * sd), -0.8]),
            np.array([mean, np.log(2.0 * sd), 1.5]),
            np.array([mean - sd, ls, -1.5])]


@dataclass(frozen=True)
class KlFit:
    family: str
    mu: float
    sigma: float
    kl: float
    params: np.ndarray
    converged: bool


def minimize_kl(name, target, direction="q-to-target", n_starts=N_STARTS, grid=None):
    """Fit one family to the target and report the requested KL direction.

    Fitting always minimizes the mass-covering target-to-q divergence (see
    module docstring); the returned ``kl`` is the ``direction`` divergence
    evaluated at the fitted parameters.
    """
    grid = make_grid(target) if grid is None else grid
    mean, sd = target.mean_sd()
    fit_objective = lambda p: kl_objective(name, p, grid=grid,
                                           direction="target-to-q")
    if name == "gaussian":
        best_x = np.array([mean, np.log(sd)])
    else:
        best = None
        for x0 in _starts(name, mean, sd)[:n_starts]:
            res = minimize(fit_objective, x0, method="Nelder-Mead",
                           options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 4000})
            res2 = minimize(fit_objective, res.x, method="L-BFGS-B",
                            options={"ftol": 1e-14, "gtol": 1e-10, "maxiter": 500})
            cand = res2 if res2.fun <= res.fun else res
            if best is None or cand.fun < best.fun:
                best = cand
        best_x = best.x
    val = kl_objective(name, best_x, grid=grid, direction=direction, target=target)
    return KlFit(family=name, mu=mean, sigma=sd, kl=float(val),
                 params=np.asarray(best_x, dtype=np.float64),
                 converged=bool(np.isfinite(val) and val < _BAD_OBJECTIVE))


def run_grid(skew, mu_grid, sigma_grid, families=FAMILY_NAMES,
             direction="q-to-target", n_starts=N_STARTS, map_fn=map):
    """KL table over the (mu, sigma) grid; rows in deterministic order."""
    cases = [(fam, mu, sig) for fam in families for mu in mu_grid for sig in sigma_grid]

    def solve(case):
        fam, mu, sig = case
        target = SkewNormalTarget.from_moments(skew, mu, sig)
        fit = minimize_kl(fam, target, direction=direction, n_starts=n_starts)
        return KlFit(family=fam, mu=mu, sigma=sig, kl=fit.kl,
                     params=fit.params, converged=fit.converged)

    return list(map_fn(solve, cases))
