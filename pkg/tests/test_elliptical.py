"""Scale-mixture family kernels: point values, calculus, normalization."""
import mpmath
import numpy as np
import pytest

from copvi.elliptical import (EllipticalFamily, FamilyKind, gtilde_log_ratio,
                              log_gtilde, log_kv, marginal_log_density,
                              w_quantile, w_quantile_domega)
from copvi.errors import NumericError, UnsupportedFamilyError
from tests.util import assert_close, integrate_real_line

GAUSS = EllipticalFamily.make("gaussian")
LAPLACE = EllipticalFamily.make("laplace")


def t_fam(nu):
    return EllipticalFamily.make("t", nu=nu)


def ep_fam(beta):
    return EllipticalFamily.make("ep", beta=beta)


# ---------------------------------------------------------------------------
# log-Bessel helper against an arbitrary-precision oracle

@pytest.mark.parametrize("order,s", [
    (0.5, 0.3), (0.5, 12.0), (-1.5, 2.0), (3.0, 0.05), (10.0, 4.0),
    (49.5, 80.0), (60.0, 1.0), (75.5, 30.0), (120.0, 250.0), (500.0, 100.0),
])
def test_log_bessel_matches_arbitrary_precision(order, s):
    expect = float(mpmath.log(mpmath.besselk(order, s)))
    assert_close(log_kv(order, s), expect, 1e-8)


# ---------------------------------------------------------------------------
# joint kernel values

def test_log_gtilde_point_values():
    assert_close(log_gtilde(0.0, 1, GAUSS), -0.5 * np.log(2 * np.pi), 1e-12)
    assert_close(log_gtilde(0.0, 1, t_fam(1.0)), -np.log(np.pi), 1e-12)
    assert_close(log_gtilde(2.0, 3, GAUSS), -1.5 * np.log(2 * np.pi) - 1.0, 1e-12)


def test_log_gtilde_rejects_negative_quadratic_form():
    with pytest.raises(NumericError):
        log_gtilde(-0.5, 1, GAUSS)


def test_log_gtilde_laplace_large_dim_stays_finite():
    # Bessel order ~ m/2; the log-domain evaluation must not overflow
    for m in (10, 200, 3000):
        val = log_gtilde(float(m), m, LAPLACE)
        assert np.isfinite(val)


def test_gtilde_log_ratio_point_values():
    for x in (0.0, 0.5, 7.0):
        for m in (1, 4):
            assert gtilde_log_ratio(x, m, GAUSS) == -0.5
    assert_close(gtilde_log_ratio(0.0, 1, t_fam(1.0)), -1.0, 1e-12)
    assert_close(gtilde_log_ratio(4.0, 2, t_fam(4.0)), -0.375, 1e-12)


def test_gtilde_log_ratio_exp_power_forms():
    beta = 0.7
    for x in (0.4, 2.0):
        assert_close(gtilde_log_ratio(x, 2, ep_fam(beta)),
                     -(beta / 2.0) * x ** (beta - 1.0), 1e-12)
    with pytest.raises(NumericError):
        gtilde_log_ratio(0.0, 2, ep_fam(0.7))


@pytest.mark.parametrize("fam,m", [
    (GAUSS, 1), (GAUSS, 3),
    (t_fam(1.0), 1), (t_fam(7.0), 2), (t_fam(30.0), 5),
    (LAPLACE, 1), (LAPLACE, 3),
    (ep_fam(0.6), 1), (ep_fam(1.0), 4),
])
def test_ratio_is_derivative_of_log_kernel(fam, m):
    for x in (0.1, 1.0, 10.0):
        h = 1e-6 * max(1.0, x)
        fd = (log_gtilde(x + h, m, fam) - log_gtilde(x - h, m, fam)) / (2 * h)
        assert_close(gtilde_log_ratio(x, m, fam), fd, 1e-5)


def test_t_ratio_approaches_gaussian_for_huge_dof():
    fam = t_fam(1e6)
    for x in (0.0, 1.0, 5.0, 10.0):
        for m in (1, 4):
            assert abs(gtilde_log_ratio(x, m, fam) + 0.5) < 1e-5


# ---------------------------------------------------------------------------
# univariate marginals

def test_marginal_point_values():
    assert_close(marginal_log_density(0.0, GAUSS), -0.918939, 1e-5)
    assert_close(marginal_log_density(0.0, t_fam(3.0)),
                 np.log(2.0 / (np.pi * np.sqrt(3.0))), 1e-10)
    psi = 0.5
    expect = np.log(np.exp(-np.sqrt(2.0) * abs(psi)) / np.sqrt(2.0))
    assert_close(marginal_log_density(psi, LAPLACE), expect, 1e-9)


def test_marginal_rejected_for_exp_power():
    with pytest.raises(UnsupportedFamilyError):
        marginal_log_density(0.3, ep_fam(0.8))


@pytest.mark.parametrize("fam", [GAUSS, t_fam(1.0), t_fam(3.0), t_fam(30.0), LAPLACE],
                         ids=["gaussian", "t1", "t3", "t30", "laplace"])
def test_marginal_normalizes_to_one(fam):
    total = integrate_real_line(
        lambda psi: np.array([np.exp(marginal_log_density(float(p), fam))
                              for p in psi]),
        center=0.0, n_side=2000)
    assert abs(total - 1.0) < 1e-8


# ---------------------------------------------------------------------------
# mixing-variable quantile

def test_w_quantile_point_values():
    assert w_quantile(0.37, GAUSS) == 1.0
    assert_close(w_quantile(1.0 - np.exp(-1.0), LAPLACE), 1.0, 1e-12)
    assert_close(w_quantile(0.5, t_fam(2.0)), 1.0 / np.log(2.0), 1e-10)


def test_w_quantile_domain_errors():
    for u in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(NumericError):
            w_quantile(u, t_fam(3.0))
    with pytest.raises(UnsupportedFamilyError):
        w_quantile(0.5, ep_fam(0.5))


def test_w_quantile_derivative_step_refinement():
    fam = t_fam(5.0)
    coarse = w_quantile_domega(0.5, fam)
    fine = w_quantile_domega(0.5, fam, rel_step=1e-6)
    assert abs(coarse - fine) <= 1e-3 * max(1.0, abs(fine))


def test_w_quantile_derivative_rejects_fixed_mixing():
    with pytest.raises(UnsupportedFamilyError):
        w_quantile_domega(0.5, GAUSS)
    with pytest.raises(UnsupportedFamilyError):
        w_quantile_domega(0.5, LAPLACE)


def test_w_quantile_derivative_sign_matches_secant():
    u = 0.9
    d = w_quantile_domega(u, t_fam(10.0))
    assert np.isfinite(d)
    secant = w_quantile(u, t_fam(10.5)) - w_quantile(u, t_fam(9.5))
    assert np.sign(d) == np.sign(secant)


# ---------------------------------------------------------------------------
# the scale-mixture representation reproduces the marginal density

@pytest.mark.parametrize("fam", [t_fam(5.0), LAPLACE], ids=["t5", "laplace"])
def test_scale_mixture_draws_match_marginal(fam):
    # histogram cell probabilities versus the bin-averaged model density;
    # a smoothing-kernel estimate would blur the Laplace peak at zero by
    # more than the tolerance, so the comparison is binned instead
    rng = np.random.default_rng(41)
    n = 1_000_000
    u = rng.random(n)
    # vectorized quantiles (the scalar w_quantile is checked against these
    # closed forms in test_sampled_w_reproduces_quantile_formula)
    if fam.kind is FamilyKind.LAPLACE:
        w = -np.log1p(-u)
    else:
        from scipy.special import gammaincinv
        nu = fam.nu
        w = nu / (2.0 * gammaincinv(nu / 2.0, 1.0 - u))
    draws = np.sqrt(w) * rng.standard_normal(n)
    edges = np.arange(-4.0, 4.0 + 1e-9, 0.05)
    counts, _ = np.histogram(draws, bins=edges)
    emp_density = counts / n / np.diff(edges)
    from numpy.polynomial.legendre import leggauss
    xg, wg = leggauss(12)
    model = np.empty(edges.size - 1)
    for i in range(edges.size - 1):
        half = 0.5 * (edges[i + 1] - edges[i])
        mid = 0.5 * (edges[i + 1] + edges[i])
        pts = mid + half * xg
        vals = np.array([np.exp(marginal_log_density(float(p), fam)) for p in pts])
        model[i] = float(np.sum(wg * vals)) / 2.0
    assert np.max(np.abs(emp_density - model)) < 0.01


def test_sampled_w_reproduces_quantile_formula():
    # spot-check the scalar quantile against the vectorized forms used above
    rng = np.random.default_rng(42)
    for u in rng.random(20):
        assert_close(w_quantile(float(u), LAPLACE), -np.log1p(-float(u)), 1e-12)
    from scipy.special import gammaincinv
    for u in rng.random(20):
        nu = 7.0
        assert_close(w_quantile(float(u), t_fam(nu)),
                     nu / (2.0 * gammaincinv(nu / 2.0, 1.0 - float(u))), 1e-10)


# ---------------------------------------------------------------------------
# family construction

def test_family_construction_and_parameters():
    fam = EllipticalFamily.make("t", nu=6.5)
    assert fam.kind is FamilyKind.STUDENT_T
    assert_close(fam.nu, 6.5, 1e-12)
    assert fam.omega_raw.shape == (1,)
    assert GAUSS.omega_raw.shape == (0,)
    assert LAPLACE.omega_raw.shape == (0,)
    ep = EllipticalFamily.make("ep", beta=0.3)
    assert_close(ep.beta, 0.3, 1e-12)
