"""Reference calculations for binary and multiple hypothesis testing.

Everything here is computed from first principles with dense linear
algebra: closed-form error bounds, optimal measurements, and figures of
merit used to judge variationally optimized discrimination strategies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import UsageError
from .qsim import (
    DensityMatrix,
    Povm,
    apply_channel,
    apply_channel_adjoint,
    hermitize,
    partial_trace,
    sqrtm_psd,
)

EIG_FLOOR = 1e-14
POVM_REG = 1e-12


def _dense(state):
    """Accept a state object with a .data attribute or a bare array."""
    if hasattr(state, "data"):
        return np.asarray(state.data)
    return np.asarray(state)


def _check_pair(a, b):
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise UsageError("states must be square matrices of equal shape")


# ---------------------------------------------------------------------------
# distances and overlaps


def trace_distance(rho0, rho1):
    """Halved trace norm of the difference of two density matrices."""
    a, b = _dense(rho0), _dense(rho1)
    _check_pair(a, b)
    w = np.linalg.eigvalsh(hermitize(a - b))
    return 0.5 * float(np.abs(w).sum())


def uhlmann_fidelity(rho0, rho1):
    """Squared-overlap fidelity; equals |<psi0|psi1>|^2 for pure states."""
    a, b = _dense(rho0), _dense(rho1)
    _check_pair(a, b)
    s = sqrtm_psd(a)
    w = np.linalg.eigvalsh(hermitize(s @ b @ s))
    return float(np.sqrt(np.clip(w, 0.0, None)).sum() ** 2)


def von_neumann_entropy(state):
    """Entropy -sum(lam ln lam) of the spectrum, in nats."""
    a = _dense(state)
    w = np.linalg.eigvalsh(hermitize(a))
    tr = float(w.sum())
    if tr <= 0.0:
        raise UsageError("state has non-positive trace")
    w = w[w > EIG_FLOOR] / tr
    return float(-(w * np.log(w)).sum())


def schmidt_values(state, keep, top_k=None):
    """Reduced-state spectrum of a pure state, largest first.

    Works for discrete states and for truncated bosonic states; the
    input must be pure up to 1e-6 in purity.
    """
    a = _dense(state)
    tr = float(np.trace(a).real)
    if tr <= 0.0:
        raise UsageError("state has non-positive trace")
    purity = float(np.trace(a @ a).real) / tr ** 2
    if purity < 1.0 - 1e-6:
        raise UsageError(f"schmidt values need a pure state, purity={purity:.8f}")
    if hasattr(state, "cutoff"):
        from .fock import reduce_modes

        reduced = reduce_modes(state, list(keep))
    else:
        reduced = partial_trace(state, list(keep))
    w = np.linalg.eigvalsh(hermitize(reduced.data)) / tr
    w = np.clip(w[::-1], 0.0, None)
    if top_k is not None:
        w = w[:top_k]
    return w


# ---------------------------------------------------------------------------
# binary discrimination


@dataclass
class ErrorRates:
    """Type-I (decide 1 when 0 holds) and type-II decision errors."""

    alpha: float
    beta: float

    def average(self, prior0=0.5):
        return prior0 * self.alpha + (1.0 - prior0) * self.beta


def measurement_error_rates(rho0, rho1, effect0):
    """Error rates when effect0 triggers the decision for hypothesis 0."""
    a, b = _dense(rho0), _dense(rho1)
    g = np.asarray(effect0)
    alpha = 1.0 - float(np.trace(g @ a).real)
    beta = float(np.trace(g @ b).real)
    return ErrorRates(alpha, beta)


@dataclass
class HelstromResult:
    """Optimal two-outcome measurement for a pair of states."""

    rates: ErrorRates
    error_prob: float
    effect: np.ndarray

    @property
    def success_prob(self):
        return 1.0 - self.error_prob


def helstrom(rho0, rho1, priors=(0.5, 0.5)):
    """Minimum-error measurement: project onto the non-negative
    eigenspace of the weighted difference operator."""
    p0, p1 = float(priors[0]), float(priors[1])
    if p0 < 0 or p1 < 0 or abs(p0 + p1 - 1.0) > 1e-9:
        raise UsageError("priors must be non-negative and sum to 1")
    a, b = _dense(rho0), _dense(rho1)
    _check_pair(a, b)
    m = hermitize(p0 * a - p1 * b)
    w, v = np.linalg.eigh(m)
    cols = v[:, w >= 0.0]
    gamma = cols @ cols.conj().T
    success = p1 + float(w[w > 0.0].sum())
    success = min(max(success, 0.0), 1.0)
    return HelstromResult(measurement_error_rates(a, b, gamma),
                          1.0 - success, gamma)


@dataclass
class ChernoffResult:
    """Minimized overlap exponent for symmetric hypothesis testing."""

    bound: float
    s_opt: float


def chernoff_bound(rho0, rho1):
    """Minimize Tr(rho0^s rho1^(1-s)) over s in [0, 1].

    The spectra are floored at 1e-14 and zero eigenvalues stay zero for
    every power, so the endpoints are the correct support-projector
    limits.
    """
    a, b = _dense(rho0), _dense(rho1)
    _check_pair(a, b)
    w0, v0 = np.linalg.eigh(hermitize(a))
    w1, v1 = np.linalg.eigh(hermitize(b))
    w0 = np.where(w0 > EIG_FLOOR, w0, 0.0)
    w1 = np.where(w1 > EIG_FLOOR, w1, 0.0)
    m = np.abs(v0.conj().T @ v1) ** 2

    def _pw(w, s):
        out = np.zeros_like(w)
        nz = w > 0.0
        out[nz] = w[nz] ** s
        return out

    def f(s):
        return float(_pw(w0, s) @ m @ _pw(w1, 1.0 - s))

    res = minimize_scalar(f, bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-8})
    cands = [(f(0.0), 0.0), (f(1.0), 1.0), (float(res.fun), float(res.x))]
    q, s = min(cands)
    return ChernoffResult(q, s)


# ---------------------------------------------------------------------------
# diamond-norm distances


def _circle_contains(pts, center, radius):
    return bool(np.all(np.abs(pts - center) <= radius + 1e-9))


def smallest_enclosing_circle(pts):
    """Exact minimum enclosing circle of a small planar point set.

    Returns (center, radius).  The optimum circle is determined by two
    or three of the points, so all candidates are enumerated.
    """
    pts = np.asarray(pts, dtype=complex)
    n = len(pts)
    if n == 0:
        raise UsageError("need at least one point")
    if n == 1:
        return pts[0], 0.0
    best = None
    for i in range(n):
        for j in range(i + 1, n):
            c = 0.5 * (pts[i] + pts[j])
            r = 0.5 * abs(pts[i] - pts[j])
            if _circle_contains(pts, c, r) and (best is None or r < best[1]):
                best = (c, r)
    if best is not None:
        return best
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                ax, ay = pts[i].real, pts[i].imag
                bx, by = pts[j].real, pts[j].imag
                cx, cy = pts[k].real, pts[k].imag
                d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
                if abs(d) < 1e-12:
                    continue
                ux = ((ax ** 2 + ay ** 2) * (by - cy)
                      + (bx ** 2 + by ** 2) * (cy - ay)
                      + (cx ** 2 + cy ** 2) * (ay - by)) / d
                uy = ((ax ** 2 + ay ** 2) * (cx - bx)
                      + (bx ** 2 + by ** 2) * (ax - cx)
                      + (cx ** 2 + cy ** 2) * (bx - ax)) / d
                c = ux + 1j * uy
                r = abs(pts[i] - c)
                if _circle_contains(pts, c, r) and (best is None
                                                    or r < best[1]):
                    best = (c, r)
    if best is None:
        raise UsageError("degenerate point set for enclosing circle")
    return best


def diamond_unitary(u):
    """Diamond-norm distance between a unitary channel and the identity:
    the diameter of the smallest circle enclosing the eigenvalues,
    capped at the universal maximum of 2."""
    a = np.asarray(u, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise UsageError("input must be a square matrix")
    if np.linalg.norm(a.conj().T @ a - np.eye(a.shape[0])) > 1e-9:
        raise UsageError("input must be a unitary matrix")
    _, radius = smallest_enclosing_circle(np.linalg.eigvals(a))
    return min(2.0, 2.0 * radius)


def diamond_phase_flip(p):
    """Diamond-norm distance between a phase-flip channel of strength p
    and the identity channel."""
    if not 0.0 <= p <= 1.0:
        raise UsageError("flip probability must lie in [0, 1]")
    return 2.0 * p


# ---------------------------------------------------------------------------
# parameter estimation


def _sld_terms(rho, drho):
    w, v = np.linalg.eigh(hermitize(rho))
    a = v.conj().T @ drho @ v
    denom = w[:, None] + w[None, :]
    mask = denom > 1e-12
    terms = 2.0 * np.abs(a[mask]) ** 2 / denom[mask]
    return float(terms.sum()), denom[mask], terms


def qfi(state_fn, x0, step=1e-3):
    """Fisher information of a one-parameter family of states at x0.

    The derivative is taken by central differences at two step sizes
    and Richardson-extrapolated; warnings flag a step-size mismatch
    above 1% and an ill-conditioned spectrum.
    """
    rho = _dense(state_fn(x0)).astype(complex)
    hi = _dense(state_fn(x0 + step))
    lo = _dense(state_fn(x0 - step))
    if hi.shape != rho.shape or lo.shape != rho.shape:
        raise UsageError("parameter family must keep the dimension fixed")
    v_full, _, _ = _sld_terms(rho, (hi - lo) / (2.0 * step))
    hi2 = _dense(state_fn(x0 + 0.5 * step))
    lo2 = _dense(state_fn(x0 - 0.5 * step))
    v_half, denom, terms = _sld_terms(rho, (hi2 - lo2) / step)
    if terms.size and denom[np.argmax(terms)] < 1e-8:
        warnings.warn("fisher information dominated by a near-degenerate "
                      "eigenvalue pair; result may be unstable",
                      RuntimeWarning)
    if v_half > 1e-12 and abs(v_full - v_half) / v_half > 0.01:
        warnings.warn(
            f"fisher information differs by {abs(v_full - v_half) / v_half:.1%} "
            "between step sizes; reduce the step", RuntimeWarning)
    return float((4.0 * v_half - v_full) / 3.0)


# ---------------------------------------------------------------------------
# multiple hypotheses


@dataclass
class DiscriminationResult:
    """Measurement optimization outcome for a fixed set of states."""

    povm: Povm
    success_prob: float
    n_iters: int
    converged: bool


def optimal_povm(states, priors=None, max_iters=200, tol=1e-10):
    """Iterate the minimum-error fixed-point map for k states.

    Each round pushes every effect through the square-root-normalized
    update; the loop stops when no matrix element moves by more than
    tol.  The returned success probability is a feasible (lower-bound)
    value by construction.
    """
    mats = [_dense(s).astype(complex) for s in states]
    k = len(mats)
    if k < 2:
        raise UsageError("need at least two states to discriminate")
    d = mats[0].shape[0]
    for m in mats:
        if m.shape != (d, d):
            raise UsageError("states must share one dimension")
    if priors is None:
        priors = np.full(k, 1.0 / k)
    priors = np.asarray(priors, dtype=float)
    if priors.shape != (k,) or abs(priors.sum() - 1.0) > 1e-9 or priors.min() < 0:
        raise UsageError("priors must be non-negative and sum to 1")
    wt = [priors[i] * mats[i] for i in range(k)]
    effects = [np.eye(d, dtype=complex) / k for _ in range(k)]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        x = hermitize(sum(wt[i] @ effects[i] @ wt[i] for i in range(k)))
        w, v = np.linalg.eigh(x)
        xi = (v * ((w + POVM_REG) ** -0.5)) @ v.conj().T
        new = [hermitize(xi @ wt[i] @ effects[i] @ wt[i] @ xi)
               for i in range(k)]
        delta = max(float(np.abs(new[i] - effects[i]).max()) for i in range(k))
        effects = new
        if delta < tol:
            converged = True
            break
    residual = np.eye(d) - hermitize(sum(effects))
    effects = [hermitize(e + residual / k) for e in effects]
    success = float(sum(np.trace(effects[i] @ wt[i]).real for i in range(k)))
    return DiscriminationResult(Povm(effects), success, it, converged)


@dataclass
class MultiHypothesisResult:
    """Joint probe and measurement optimization outcome."""

    success_prob: float
    probe: DensityMatrix
    povm: Povm
    n_rounds: int
    restart_values: tuple = field(default=())


def _channel_targets(probe_dims, channels):
    in_dims = channels[0].in_dims
    out_dims = channels[0].out_dims
    for ch in channels:
        if ch.in_dims != in_dims or ch.out_dims != out_dims:
            raise UsageError("channels must share input and output dimensions")
    n_sys = len(in_dims)
    if tuple(probe_dims[:n_sys]) != tuple(in_dims):
        raise UsageError("leading probe subsystems must match the channel "
                         "input dimensions")
    return list(range(n_sys))


def multi_hypothesis_opt(channels, probe_dims=None, priors=None,
                         restarts=8, seed=0, max_rounds=50, tol=1e-9,
                         povm_iters=200):
    """Alternate exact probe and measurement updates for k channels.

    Channels act on the leading subsystems of the probe; the rest is an
    untouched reference.  For a fixed measurement the best pure probe
    is the top eigenvector of the prior-averaged pulled-back effects;
    for a fixed probe the measurement comes from the fixed-point
    iteration.  Runs several seeded restarts and keeps the best, so the
    result is a feasible lower bound on the true optimum.
    """
    k = len(channels)
    if k < 2:
        raise UsageError("need at least two channels")
    if probe_dims is None:
        probe_dims = tuple(channels[0].in_dims) * 2
    probe_dims = tuple(probe_dims)
    targets = _channel_targets(probe_dims, channels)
    if priors is None:
        priors = np.full(k, 1.0 / k)
    priors = np.asarray(priors, dtype=float)
    dim_probe = int(np.prod(probe_dims))

    best = None
    values = []
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        psi = rng.normal(size=dim_probe) + 1j * rng.normal(size=dim_probe)
        psi /= np.linalg.norm(psi)
        prev = -np.inf
        rounds = 0
        for rounds in range(1, max_rounds + 1):
            probe = DensityMatrix(probe_dims, np.outer(psi, psi.conj()),
                                  check=False)
            outs = [apply_channel(probe, ch, targets) for ch in channels]
            res = optimal_povm(outs, priors, max_iters=povm_iters)
            pulled = sum(priors[i] * apply_channel_adjoint(
                res.povm.elements[i], channels[i], probe_dims, targets)
                for i in range(k))
            w, v = np.linalg.eigh(hermitize(pulled))
            psi = v[:, -1]
            val = float(w[-1])
            if val - prev < tol:
                break
            prev = val
        probe = DensityMatrix(probe_dims, np.outer(psi, psi.conj()),
                              check=False)
        outs = [apply_channel(probe, ch, targets) for ch in channels]
        final = optimal_povm(outs, priors, max_iters=povm_iters)
        values.append(final.success_prob)
        if best is None or final.success_prob > best.success_prob:
            best = MultiHypothesisResult(final.success_prob, probe,
                                         final.povm, rounds)
    best.restart_values = tuple(values)
    return best


# ---------------------------------------------------------------------------
# robustness of an optimum


@dataclass
class NeighborhoodReport:
    """Output-distance statistics over probes perturbed around an optimum."""

    passed: bool
    epsilon: float
    reference: float
    lower_bound: float
    upper_bound: float
    min_distance: float
    max_distance: float
    n_trials: int
    violations: tuple


def epsilon_neighborhood_check(channels, probe_star, epsilon, n_trials=50,
                               seed=0, slack=1e-9):
    """Mix the optimal probe with random pure states and verify the
    output trace distance stays inside
    [(1 - 2 eps) * reference - slack, reference + slack].

    The mixing weight t <= epsilon upper-bounds the trace distance of
    the perturbed probe from the optimum, and the output distance is
    jointly linear enough in the probe for the window to be guaranteed
    at a true optimum.
    """
    if len(channels) != 2:
        raise UsageError("neighborhood check is for binary problems")
    rho = _dense(probe_star)
    dims = tuple(getattr(probe_star, "dims", (rho.shape[0],)))
    targets = _channel_targets(dims, channels)
    d = rho.shape[0]

    def out_distance(mat):
        st = DensityMatrix(dims, mat, check=False)
        return trace_distance(apply_channel(st, channels[0], targets),
                              apply_channel(st, channels[1], targets))

    reference = out_distance(rho)
    lo = (1.0 - 2.0 * epsilon) * reference - slack
    hi = reference + slack
    rng = np.random.default_rng(seed)
    vmin, vmax = np.inf, -np.inf
    bad = []
    for i in range(n_trials):
        t = epsilon if i == 0 else float(rng.uniform(0.0, epsilon))
        psi = rng.normal(size=d) + 1j * rng.normal(size=d)
        psi /= np.linalg.norm(psi)
        mixed = (1.0 - t) * rho + t * np.outer(psi, psi.conj())
        val = out_distance(mixed)
        vmin, vmax = min(vmin, val), max(vmax, val)
        if not lo <= val <= hi:
            bad.append(i)
    return NeighborhoodReport(not bad, epsilon, reference, lo, hi,
                              vmin, vmax, n_trials, tuple(bad))
