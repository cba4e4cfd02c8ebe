"""Stochastic gradient ascent on the evidence lower bound.

One draw per step; ADADELTA step sizing by default with ADAM selectable.
The loop is deterministic given the seed: the same (target, start, config)
reproduces the fitted parameters and trace bit for bit.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import copula_va
from .copula_va import BaseDraw
from .errors import DivergenceError

_ELBO_GUARD = 1e12
LB_WINDOW = 500


@dataclass(frozen=True)
class AdadeltaRule:
    rho: float = 0.95
    eps: float = 1e-6


@dataclass(frozen=True)
class AdamRule:
    alpha: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class StepState:
    """Accumulators for either rule; unused fields stay at zero."""

    acc_g2: np.ndarray
    acc_d2: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(acc_g2=np.zeros(n), acc_d2=np.zeros(n))


@dataclass(frozen=True)
class SgaConfig:
    steps: int = 15000
    seed: int = 0
    rule: object = field(default_factory=AdadeltaRule)
    trace_every: int = 1


def sga_step(lam, grad, state, rule):
    """One ascent update; returns the new flat parameter vector."""
    if isinstance(rule, AdadeltaRule):
        state.acc_g2 = rule.rho * state.acc_g2 + (1.0 - rule.rho) * grad * grad
        step = np.sqrt(state.acc_d2 + rule.eps) / np.sqrt(state.acc_g2 + rule.eps) * grad
        state.acc_d2 = rule.rho * state.acc_d2 + (1.0 - rule.rho) * step * step
        state.t += 1
        return lam + step
    if isinstance(rule, AdamRule):
        state.t += 1
        state.acc_g2 = rule.beta2 * state.acc_g2 + (1.0 - rule.beta2) * grad * grad
        state.acc_d2 = rule.beta1 * state.acc_d2 + (1.0 - rule.beta1) * grad
        mhat = state.acc_d2 / (1.0 - rule.beta1 ** state.t)
        vhat = state.acc_g2 / (1.0 - rule.beta2 ** state.t)
        return lam + rule.alpha * mhat / (np.sqrt(vhat) + rule.eps)
    raise TypeError(f"unknown step rule {rule!r}")


@dataclass
class FitResult:
    params: object
    trace: list      # (step, single-draw elbo estimate) pairs
    lb_bar: float
    short_trace: bool = False


def lb_bar(trace_values):
    """Median of the last LB_WINDOW single-draw estimates (all, if fewer)."""
    vals = np.asarray([v for v in trace_values], dtype=np.float64)
    if vals.size == 0:
        return float("nan")
    if vals.size < LB_WINDOW:
        warnings.warn(f"trace has only {vals.size} entries; lb_bar uses all of them",
                      stacklevel=2)
        return float(np.median(vals))
    return float(np.median(vals[-LB_WINDOW:]))


def run(target, params0, cfg, sink=None):
    """SGA loop; sink, when given, receives (step, elbo) as rows are traced."""
    params = params0
    lam = params.flatten()
    layout = params.layout()
    state = StepState.zeros(lam.shape[0])
    rng = np.random.default_rng(cfg.seed)
    trace = []
    m, K = params.m, params.K
    for step in range(1, cfg.steps + 1):
        base = BaseDraw(z=rng.standard_normal(K), eps=rng.standard_normal(m),
                        u=float(np.clip(rng.random(), 1e-16, 1.0 - 1e-16)))
        grad, _, elbo = copula_va.reparam_grad(base, params, target)
        if not np.all(np.isfinite(grad)):
            bad = int(np.argmax(~np.isfinite(grad)))
            raise DivergenceError(step, f"non-finite gradient in block "
                                        f"'{layout.block_name(bad)}' (index {bad})")
        if not np.isfinite(elbo) or abs(elbo) > _ELBO_GUARD:
            raise DivergenceError(step, f"lower-bound estimate {elbo!r} out of range")
        if step % cfg.trace_every == 0:
            trace.append((step, elbo))
            if sink is not None:
                sink(step, elbo)
        lam = sga_step(lam, grad, state, cfg.rule)
        params = params.unflatten(lam)
    short = 0 < len(trace) < LB_WINDOW
    if trace:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lb = lb_bar([v for _, v in trace])
    else:
        lb = float("nan")
    return FitResult(params=params, trace=trace, lb_bar=lb, short_trace=short)
