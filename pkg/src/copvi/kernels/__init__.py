"""Hot numeric kernels with two interchangeable backends.

The numba backend is used when available; set ``COPVI_NUMBA=0`` to force the
pure-numpy fallback (``COPVI_NUMBA=1`` insists on numba and raises if it is
missing).  Both backends expose identical functions and agree to float
round-off; ``benchmarks/bench_kernels.py`` times them against each other.
"""

import os


def _numba_requested():
    flag = os.environ.get("COPVI_NUMBA", "").strip().lower()
    if flag in ("0", "false", "off", "no"):
        return False
    if flag in ("1", "true", "on", "yes"):
        return True
    return None  # auto


_req = _numba_requested()
if _req is False:
    from . import numpy_impl as _impl
    USE_NUMBA = False
elif _req is True:
    from . import numba_impl as _impl
    USE_NUMBA = True
else:
    try:
        from . import numba_impl as _impl
        USE_NUMBA = True
    except ImportError:
        from . import numpy_impl as _impl
        USE_NUMBA = False

yj_forward = _impl.yj_forward
yj_inverse = _impl.yj_inverse
yj_derivs = _impl.yj_derivs
yj_dgamma = _impl.yj_dgamma
gh_forward = _impl.gh_forward
gh_derivs = _impl.gh_derivs
gh_param_grads = _impl.gh_param_grads
gh_invert = _impl.gh_invert
sphere_rows = _impl.sphere_rows
sphere_row_jac = _impl.sphere_row_jac
dpsi_dtau_compact = _impl.dpsi_dtau_compact
chol_from_angles_kernel = _impl.chol_from_angles_kernel
chol_row_grad = _impl.chol_row_grad
kde_cdf_kernel = _impl.kde_cdf_kernel

__all__ = [
    "USE_NUMBA",
    "yj_forward", "yj_inverse", "yj_derivs", "yj_dgamma",
    "gh_forward", "gh_derivs", "gh_param_grads", "gh_invert",
    "sphere_rows", "sphere_row_jac", "dpsi_dtau_compact",
    "chol_from_angles_kernel", "chol_row_grad", "kde_cdf_kernel",
]
