"""Command-line driver.

Subcommands:

* ``fit-corr``  fit the shrinkage correlation model to a CSV panel,
* ``report``    posterior mean and quantiles of the rank-correlation matrix,
* ``kl-bench``  one-margin KL benchmark table against a skew-normal target,
* ``sample``    draws from a fitted approximation.

Exit codes: 0 success, 2 bad flags, 3 data problems, 4 numerical failure.
``COPVI_THREADS`` caps the worker pool used for independent benchmark rows.
"""

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import data_prep, klbench, optimizer
from .artifact import FitArtifact, load_artifact, save_artifact
from .copula_va import default_params, sample_batch
from .errors import CopviError, DataError, NumericError
from .targets import CorrMatrixTarget, CorrModelParams, chol_from_angles, spearman_from_omega


def _thread_count():
    raw = os.environ.get("COPVI_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise DataError(f"COPVI_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def build_parser():
    p = argparse.ArgumentParser(prog="copvi",
                                description="Copula variational inference toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit-corr", help="fit the correlation model to a CSV panel")
    f.add_argument("--data", required=True, help="CSV panel (labels in first row/column)")
    f.add_argument("--difference", action="store_true",
                   help="first-difference the panel rows before scoring")
    f.add_argument("--family", default="t", choices=["gaussian", "t", "laplace"])
    f.add_argument("--transform", default="yj",
                   choices=["identity", "yj", "igh", "double-yj"])
    f.add_argument("--factors", type=int, default=2, help="number of correlation factors K")
    f.add_argument("--steps", type=int, default=15000)
    f.add_argument("--seed", type=int, default=1)
    f.add_argument("--step-rule", default="adadelta", choices=["adadelta", "adam"])
    f.add_argument("--out", required=True, help="artifact JSON path")
    f.add_argument("--trace", help="optional CSV path for the step/elbo trace")
    f.set_defaults(func=cmd_fit_corr)

    r = sub.add_parser("report", help="posterior rank-correlation summary from an artifact")
    r.add_argument("--artifact", required=True)
    r.add_argument("--draws", type=int, default=1000)
    r.add_argument("--seed", type=int, default=1)
    r.add_argument("--out-mean", required=True, help="CSV for the posterior mean matrix")
    r.add_argument("--out-quantiles", help="CSV for per-pair posterior quantiles")
    r.set_defaults(func=cmd_report)

    k = sub.add_parser("kl-bench", help="KL benchmark of one-margin families")
    k.add_argument("--skew", type=float, default=0.8553)
    k.add_argument("--mu-grid", default="0,15,30,60")
    k.add_argument("--sigma-grid", default="0.1,1,10")
    k.add_argument("--families", default=",".join(klbench.FAMILY_NAMES))
    k.add_argument("--direction", default="q-to-target",
                   choices=["target-to-q", "q-to-target"])
    k.add_argument("--starts", type=int, default=klbench.N_STARTS)
    k.add_argument("--out", required=True, help="CSV for the benchmark table")
    k.set_defaults(func=cmd_kl_bench)

    s = sub.add_parser("sample", help="draws from a fitted approximation")
    s.add_argument("--artifact", required=True)
    s.add_argument("--draws", type=int, default=1000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", required=True, help="CSV of draws, one row each")
    s.set_defaults(func=cmd_sample)
    return p


def _parse_grid(text):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise DataError(f"bad grid {text!r}: comma-separated numbers expected") from exc


def cmd_fit_corr(args):
    panel = data_prep.read_panel_csv(args.data)
    if args.difference:
        panel = data_prep.difference_series(panel)
    data = data_prep.to_copula_scores(panel)
    target = CorrMatrixTarget(data)
    m = target.dim
    if args.steps < 0:
        raise DataError("--steps must be nonnegative")
    # The correlation posterior scales with the number of observations, and a
    # wide starting approximation can draw angle configurations whose scale
    # matrix is nearly singular, tripping the optimizer's divergence guard.
    # A conservative starting scale keeps every early draw in the safe region.
    params0 = default_params(m, args.factors, family=args.family, kind=args.transform,
                             sigma0=0.1, rng=np.random.default_rng([args.seed, 1]))
    rule = optimizer.AdamRule() if args.step_rule == "adam" else optimizer.AdadeltaRule()
    cfg = optimizer.SgaConfig(steps=args.steps, seed=args.seed, rule=rule)

    sink = None
    trace_fh = None
    if args.trace:
        trace_fh = open(args.trace, "w", newline="", encoding="utf-8")
        writer = csv.writer(trace_fh)
        writer.writerow(["step", "elbo"])
        sink = lambda step, elbo: writer.writerow([step, repr(float(elbo))])
    t0 = time.perf_counter()
    try:
        result = optimizer.run(target, params0, cfg, sink=sink)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    wall = time.perf_counter() - t0

    art = FitArtifact(
        params=result.params, lb_bar=result.lb_bar, steps=args.steps, seed=args.seed,
        config={"data": args.data, "difference": bool(args.difference),
                "family": args.family, "transform": args.transform,
                "factors": args.factors, "step_rule": args.step_rule},
        target_meta={"type": "correlation", "r": data.r, "n_obs": data.n_obs,
                     "columns": list(panel.column_labels)},
        wall_clock_seconds=wall)
    save_artifact(art, args.out)
    print(f"fit-corr: r={data.r} n_obs={data.n_obs} m={m} steps={args.steps} "
          f"lb_bar={result.lb_bar:.6f} -> {args.out}")
    return 0


def _require_corr_artifact(art):
    if art.target_meta.get("type") != "correlation":
        raise DataError("artifact was not produced by fit-corr")
    return int(art.target_meta["r"])


def cmd_report(args):
    art, params = load_artifact(args.artifact)
    r = _require_corr_artifact(art)
    labels = art.target_meta.get("columns") or [f"v{j + 1}" for j in range(r)]
    if args.draws < 1:
        raise DataError("--draws must be positive")
    rng = np.random.default_rng(args.seed)
    thetas = sample_batch(params, rng, args.draws)
    qs = (0.05, 0.25, 0.5, 0.75, 0.95)
    mean = np.zeros((r, r))
    pairs = [(i, j) for i in range(1, r) for j in range(i)]
    samples = np.empty((args.draws, len(pairs)))
    for k, theta in enumerate(thetas):
        cp = CorrModelParams.from_flat(theta, r)
        L = chol_from_angles(cp.angles(), r)
        rank = spearman_from_omega(L @ L.T)
        mean += rank
        samples[k] = [rank[i, j] for i, j in pairs]
    mean /= args.draws
    np.fill_diagonal(mean, 1.0)

    with open(args.out_mean, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([""] + labels)
        for lab, row in zip(labels, mean):
            w.writerow([lab] + [repr(float(v)) for v in row])
    if args.out_quantiles:
        qvals = np.quantile(samples, qs, axis=0)
        with open(args.out_quantiles, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["var_i", "var_j"] + [f"q{int(100 * q):02d}" for q in qs])
            for k, (i, j) in enumerate(pairs):
                w.writerow([labels[i], labels[j]]
                           + [repr(float(v)) for v in qvals[:, k]])
    print(f"report: {args.draws} draws -> {args.out_mean}")
    return 0


def cmd_kl_bench(args):
    mu_grid = _parse_grid(args.mu_grid)
    sigma_grid = _parse_grid(args.sigma_grid)
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    for fam in families:
        if fam not in klbench.FAMILY_NAMES:
            raise DataError(f"unknown family {fam!r}; choose from {klbench.FAMILY_NAMES}")
    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = klbench.run_grid(args.skew, mu_grid, sigma_grid, families,
                                    direction=args.direction, n_starts=args.starts,
                                    map_fn=pool.map)
    else:
        rows = klbench.run_grid(args.skew, mu_grid, sigma_grid, families,
                                direction=args.direction, n_starts=args.starts)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "mu", "sigma", "kl", "converged"])
        for row in rows:
            w.writerow([row.family, repr(row.mu), repr(row.sigma),
                        repr(row.kl), int(row.converged)])
    print(f"kl-bench: {len(rows)} rows -> {args.out}")
    return 0


def cmd_sample(args):
    art, params = load_artifact(args.artifact)
    if args.draws < 0:
        raise DataError("--draws must be nonnegative")
    rng = np.random.default_rng(args.seed)
    thetas = sample_batch(params, rng, args.draws)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta_{j + 1}" for j in range(params.m)])
        for row in thetas:
            w.writerow([repr(float(v)) for v in row])
    print(f"sample: {args.draws} draws of dimension {params.m} -> {args.out}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except CopviError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
