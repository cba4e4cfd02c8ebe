"""Timing comparison of the compiled kernels against the pure-numpy fallback.

Run as ``python benchmarks/bench_kernels.py``.  Each kernel is timed on a
realistic workload with both implementations (the compiled path is warmed
first so compilation time is excluded).
"""

import time

import numpy as np

from copvi.kernels import numpy_impl

try:
    from copvi.kernels import numba_impl
except ImportError:  # pragma: no cover - benchmark is informative only
    numba_impl = None

KERNELS = [
    "yj_forward",
    "yj_inverse",
    "yj_derivs",
    "gh_invert",
    "sphere_rows",
    "sphere_row_jac",
    "dpsi_dtau_compact",
    "chol_from_angles_kernel",
    "chol_row_grad",
    "kde_cdf_kernel",
]


def make_args(rng):
    m, K, r, n = 2000, 5, 40, 400
    x = rng.standard_normal(m)
    gam = rng.uniform(0.5, 1.5, m)
    angles = np.column_stack([rng.uniform(0.2, np.pi - 0.2, (m, K - 1)),
                              rng.uniform(0.2, 2 * np.pi - 0.2, m)])
    z = rng.standard_normal(K)
    eps = rng.standard_normal(m)
    sqrt_w = 1.3
    dkap = rng.uniform(0.1, 1.0, (m, K))
    p = r * (r - 1) // 2
    vartheta = rng.uniform(0.3, np.pi - 0.3, p)
    L = numpy_impl.chol_from_angles_kernel(vartheta, r)
    A = rng.standard_normal((r, r)) @ L
    query = rng.standard_normal(500)
    data = rng.standard_normal(n)
    return {
        "yj_forward": (x, gam),
        "yj_inverse": (numpy_impl.yj_forward(x, gam), gam),
        "yj_derivs": (x, gam),
        "gh_invert": (numpy_impl.gh_forward(x, 0.2, 0.1),
                      np.full_like(x, 0.2), np.full_like(x, 0.1)),
        "sphere_rows": (angles,),
        "sphere_row_jac": (angles,),
        "dpsi_dtau_compact": (angles, z, eps, sqrt_w, dkap),
        "chol_from_angles_kernel": (vartheta, r),
        "chol_row_grad": (A, vartheta, r),
        "kde_cdf_kernel": (query, data, np.float64(0.4)),
    }


def time_call(fn, args, repeats=20):
    fn(*args)  # warm-up (and JIT compile on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    rng = np.random.default_rng(42)
    args = make_args(rng)
    print(f"{'kernel':<26}{'numpy (ms)':>12}{'numba (ms)':>12}{'speedup':>9}")
    for name in KERNELS:
        t_np = time_call(getattr(numpy_impl, name), args[name]) * 1e3
        if numba_impl is None:
            print(f"{name:<26}{t_np:>12.3f}{'-':>12}{'-':>9}")
            continue
        t_nb = time_call(getattr(numba_impl, name), args[name]) * 1e3
        ratio = t_np / t_nb if t_nb > 0 else float("inf")
        print(f"{name:<26}{t_np:>12.3f}{t_nb:>12.3f}{ratio:>8.1f}x")


if __name__ == "__main__":
    main()
