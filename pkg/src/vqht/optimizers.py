"""Derivative-free and finite-difference maximizers.

All methods share one contract: maximize f over a flat parameter
vector, stop when the best value stalls for a fixed number of
iterations, and report an honest trace of (iteration, best so far).
Randomness comes only from the supplied generator, so runs are
bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .exceptions import UsageError

METHODS = ("nelder-mead", "spsa", "gradient")


@dataclass
class OptimizerConfig:
    method: str = "nelder-mead"
    max_iters: int = 5000
    patience: int = 50
    min_improvement: float = 1e-6
    restarts: int = 8
    fd_step: float = 1e-4
    learning_rate: float = 0.1
    spsa_step: float = 0.15
    spsa_perturb: float = 0.1
    polish_iters: int = 0
    polish_patience: int = 0
    polish_min_improvement: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown optimizer '{self.method}'; "
                             f"choose from {METHODS}")
        if self.max_iters < 1 or self.patience < 1:
            raise UsageError("iteration counts must be positive")


@dataclass
class MaximizeResult:
    x: np.ndarray
    value: float
    trace: list = field(default_factory=list)
    n_evals: int = 0
    n_iters: int = 0
    converged: bool = False


class _Tracker:
    """Wrap the objective, counting calls and pinning the best point."""

    def __init__(self, f):
        self.f = f
        self.n = 0
        self.best_x = None
        self.best = -math.inf

    def __call__(self, x):
        v = float(self.f(x))
        self.n += 1
        if v > self.best:
            self.best = v
            self.best_x = np.array(x, dtype=float)
        return v


class _Patience:
    """Stall detector on the best-so-far value."""

    def __init__(self, patience, min_improvement):
        self.patience = patience
        self.min_improvement = min_improvement
        self.mark = -math.inf
        self.since = 0

    def stalled(self, best):
        if best > self.mark + self.min_improvement:
            self.mark = best
            self.since = 0
        else:
            self.since += 1
        return self.since >= self.patience


def _nelder_mead(tracker, x0, config):
    trace = []
    stall = _Patience(config.patience, config.min_improvement)
    state = {"it": 0, "converged": False}

    def callback(_xk):
        state["it"] += 1
        trace.append((state["it"], tracker.best))
        if stall.stalled(tracker.best):
            state["converged"] = True
            raise StopIteration

    if len(x0) == 0:
        tracker(x0)
        return trace, 0, True
    try:
        res = minimize(lambda x: -tracker(x), x0, method="Nelder-Mead",
                       callback=callback,
                       options={"maxiter": config.max_iters, "xatol": 1e-10,
                                "fatol": 1e-12,
                                "maxfev": 40 * config.max_iters})
        # simplex collapse before the iteration cap counts as converged
        if res.success:
            state["converged"] = True
    except StopIteration:
        pass
    return trace, state["it"], state["converged"]


def _spsa(tracker, x0, config, rng):
    x = np.array(x0, dtype=float)
    trace = []
    stall = _Patience(config.patience, config.min_improvement)
    converged = False
    big_a = 0.1 * config.max_iters
    it = 0
    for it in range(1, config.max_iters + 1):
        ck = config.spsa_perturb / it ** 0.101
        ak = config.spsa_step / (it + big_a) ** 0.602
        delta = rng.integers(0, 2, size=x.size) * 2.0 - 1.0
        f_plus = tracker(x + ck * delta)
        f_minus = tracker(x - ck * delta)
        x = x + ak * (f_plus - f_minus) / (2.0 * ck) * delta
        if it % 20 == 0:
            tracker(x)
        trace.append((it, tracker.best))
        if stall.stalled(tracker.best):
            converged = True
            break
    tracker(x)
    return trace, it, converged


def _fd_gradient(tracker, x0, config):
    x = np.array(x0, dtype=float)
    h = config.fd_step
    trace = []
    stall = _Patience(config.patience, config.min_improvement)
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        grad = np.zeros_like(x)
        for i in range(x.size):
            step = np.zeros_like(x)
            step[i] = h
            grad[i] = (tracker(x + step) - tracker(x - step)) / (2.0 * h)
        x = x + config.learning_rate * grad
        tracker(x)
        trace.append((it, tracker.best))
        if stall.stalled(tracker.best):
            converged = True
            break
    return trace, it, converged


def maximize(f, x0, config=None, rng=None):
    """Maximize f from x0 with the configured method.

    Returns the best evaluated point, never a merely-predicted one.
    """
    config = config or OptimizerConfig()
    x0 = np.asarray(x0, dtype=float)
    tracker = _Tracker(f)
    if config.method == "nelder-mead":
        trace, iters, converged = _nelder_mead(tracker, x0, config)
    elif config.method == "spsa":
        if rng is None:
            raise UsageError("spsa needs a random generator")
        trace, iters, converged = _spsa(tracker, x0, config, rng)
    else:
        trace, iters, converged = _fd_gradient(tracker, x0, config)
    if tracker.best_x is None:
        tracker(x0)
    return MaximizeResult(tracker.best_x, tracker.best, trace,
                          tracker.n, iters, converged)
