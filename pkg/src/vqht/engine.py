"""Variational discrimination engine.

A problem bundles k candidate processes, a parametrized probe
preparation, and a parametrized joint measurement with a k-level
readout ancilla adjoined in front of the process output.  The engine
evaluates outcome statistics, turns them into scalar costs, and
maximizes those costs over probe and measurement parameters with
multi-start local search.

Discrete processes act on the leading subsystems of the probe
register; any trailing subsystems ride along untouched as a held
reference.  Bosonic problems use the two-mode loss-plus-thermal-noise
return path and a vacuum/no-vacuum readout on a third mode, with
second-moment propagation as the fast path and a truncated
number-basis simulation for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .ansatz import ParamCircuit, BosonicGateSpec, bind_bosonic, circuit_unitary
from .exceptions import UsageError, ValidationError, ConvergenceError
from .fock import (FockState, apply_circuit, fock_vacuum, illumination_channel,
                   tensor_fock, vacuum_probability)
from .gaussian import (apply_gate_moments, gaussian_moments_from_circuit,
                       illumination_moments, mean_photon_moments,
                       reduce_moments, tensor_moments, vacuum_moments,
                       vacuum_overlap_gaussian)
from .optimizers import OptimizerConfig, maximize
from .qsim import DensityMatrix, KrausChannel, apply_channel

PENALTY_WEIGHT = 100.0

_AMPLITUDE_KINDS = {"displacement": (0, 1), "two_mode_squeeze": (0,)}


@dataclass(frozen=True)
class BosonicChannelSpec:
    """Return path with transmissivity eta and bath occupation n_b."""
    eta: float
    n_b: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError("eta must lie in [0, 1]")
        if self.n_b < 0.0:
            raise ValidationError("bath occupation must be nonnegative")


@dataclass(frozen=True)
class ConstraintSpec:
    """Pin the mean photon number of one probe mode to a target."""
    signal_mode: int = 0
    target: float = 0.1
    weight: float = PENALTY_WEIGHT

    def __post_init__(self):
        if self.target < 0.0 or self.weight <= 0.0:
            raise ValidationError("constraint target/weight out of range")


@dataclass
class HypothesisProblem:
    channels: tuple
    probe_circuit: ParamCircuit
    measure_circuit: ParamCircuit
    ancilla_dim: int = 0
    constraint: ConstraintSpec | None = None
    cutoff: int = 20

    def __post_init__(self):
        self.channels = tuple(self.channels)
        if len(self.channels) < 2:
            raise UsageError("need at least two hypotheses")
        kinds = {isinstance(ch, BosonicChannelSpec) for ch in self.channels}
        if len(kinds) != 1:
            raise UsageError("cannot mix discrete and bosonic hypotheses")
        if self.ancilla_dim == 0:
            self.ancilla_dim = len(self.channels)
        if self.ancilla_dim < len(self.channels):
            raise UsageError("readout ancilla needs one level per hypothesis")
        if self.is_bosonic:
            self._validate_bosonic()
        else:
            self._validate_discrete()

    @property
    def k(self):
        return len(self.channels)

    @property
    def is_bosonic(self):
        return isinstance(self.channels[0], BosonicChannelSpec)

    @property
    def n_theta(self):
        return self.probe_circuit.n_params

    @property
    def n_phi(self):
        return self.measure_circuit.n_params

    def _validate_bosonic(self):
        if self.k != 2:
            raise UsageError("bosonic problems are binary only")
        if self.probe_circuit.modes != 2:
            raise UsageError("bosonic probe must prepare signal+idler modes")
        if self.measure_circuit.modes != 3:
            raise UsageError("bosonic measurement spans readout+return+idler")
        if self.cutoff < 2:
            raise UsageError("cutoff too small")

    def _validate_discrete(self):
        for ch in self.channels:
            if not isinstance(ch, KrausChannel):
                raise UsageError("discrete hypotheses must be Kraus channels")
        in_dims = self.channels[0].in_dims
        out_dims = self.channels[0].out_dims
        for ch in self.channels[1:]:
            if ch.in_dims != in_dims or ch.out_dims != out_dims:
                raise UsageError("hypotheses must share input/output spaces")
        probe_dims = self.probe_circuit.dims
        if probe_dims is None:
            raise UsageError("discrete problems need a discrete probe circuit")
        m = len(in_dims)
        if len(probe_dims) < m or tuple(probe_dims[:m]) != tuple(in_dims):
            raise UsageError("probe leading subsystems must match the "
                             "process input space")
        expected = (self.ancilla_dim,) + tuple(out_dims) + tuple(probe_dims[m:])
        if self.measure_circuit.dims is None or \
                tuple(self.measure_circuit.dims) != expected:
            raise UsageError(f"measurement register must be {expected}, "
                             f"got {self.measure_circuit.dims}")

    def output_dims(self):
        if self.is_bosonic:
            return None
        m = len(self.channels[0].in_dims)
        return tuple(self.channels[0].out_dims) + \
            tuple(self.probe_circuit.dims[m:])


def probe_state(problem, theta, representation="auto"):
    """Prepare the probe from the all-zero reference state."""
    if problem.is_bosonic:
        gates = bind_bosonic(problem.probe_circuit, theta)
        if representation in ("auto", "gaussian"):
            return gaussian_moments_from_circuit(gates, 2)
        state = fock_vacuum(2, problem.cutoff)
        return apply_circuit(state, gates, max_cutoff=128)
    u = circuit_unitary(problem.probe_circuit, theta)
    psi = u[:, 0]
    data = np.outer(psi, psi.conj())
    return DensityMatrix(problem.probe_circuit.dims, data, check=False)


def channel_outputs(problem, theta, representation="auto"):
    """States seen by the measurement under each hypothesis."""
    probe = probe_state(problem, theta, representation)
    outs = []
    if problem.is_bosonic:
        for spec in problem.channels:
            if isinstance(probe, FockState):
                outs.append(illumination_channel(probe, spec.eta, spec.n_b))
            else:
                outs.append(illumination_moments(probe, spec.eta, spec.n_b))
        return outs
    m = len(problem.channels[0].in_dims)
    targets = list(range(m))
    for ch in problem.channels:
        outs.append(apply_channel(probe, ch, targets))
    return outs


def _discrete_probs(problem, out_state, v):
    d = out_state.data.shape[0]
    w = v[:, :d]
    tmp = w @ out_state.data
    diag = np.einsum("rb,rb->r", tmp, w.conj()).real
    return diag.reshape(problem.ancilla_dim, d).sum(axis=1)


def _bosonic_probs_gaussian(out_m, gates):
    m = tensor_moments(vacuum_moments(1), out_m)
    for g in gates:
        m = apply_gate_moments(m, g)
    p_vac = vacuum_overlap_gaussian(reduce_moments(m, [0]))
    return np.array([p_vac, 1.0 - p_vac])


def _bosonic_probs_fock(out_f, gates):
    state = tensor_fock(fock_vacuum(1, out_f.cutoff), out_f)
    state = apply_circuit(state, gates, max_cutoff=128)
    p_vac = vacuum_probability(state, 0)
    total = float(np.trace(state.data).real)
    return np.array([p_vac, max(total - p_vac, 0.0)])


def outcome_probabilities(problem, theta, phi, representation="auto"):
    """Probability vector of the readout ancilla under each hypothesis.

    Returns a list of k arrays, one per hypothesis, each of length
    ancilla_dim.  For bosonic problems the outcomes are (vacuum seen
    on the readout mode, anything else).
    """
    outs = channel_outputs(problem, theta, representation)
    if problem.is_bosonic:
        gates = bind_bosonic(problem.measure_circuit, phi)
        if representation in ("auto", "gaussian"):
            return [_bosonic_probs_gaussian(o, gates) for o in outs]
        return [_bosonic_probs_fock(o, gates) for o in outs]
    v = circuit_unitary(problem.measure_circuit, phi)
    return [_discrete_probs(problem, o, v) for o in outs]


def _signed_gap(problem, theta, phi, representation):
    probs = outcome_probabilities(problem, theta, phi, representation)
    return probs[0][0] - probs[1][0]


def cost_tve(problem, theta, phi, representation="auto"):
    """Variational statistic |p0 - p1| for binary problems.

    Half the induced matrix-gap lower bound on the process
    distinguishability; doubling the converged value estimates the
    stabilized worst-case distance between the two hypotheses.
    """
    if problem.k != 2:
        raise UsageError("gap cost is defined for binary problems only")
    return abs(_signed_gap(problem, theta, phi, representation))


def cost_success_multi(problem, theta, phi, representation="auto"):
    """Average probability of naming the true hypothesis, flat prior."""
    probs = outcome_probabilities(problem, theta, phi, representation)
    return float(sum(p[i] for i, p in enumerate(probs)) / problem.k)


def signal_occupation(problem, theta):
    """Mean photon number of the constrained probe mode."""
    if not problem.is_bosonic:
        raise UsageError("signal occupation applies to bosonic problems")
    mode = problem.constraint.signal_mode if problem.constraint else 0
    probe = probe_state(problem, theta, "gaussian")
    return mean_photon_moments(probe, mode)


def penalized_cost(problem, theta, phi, representation="auto"):
    """Discrimination cost minus the quadratic energy penalty."""
    if problem.constraint is None:
        raise UsageError("problem carries no energy constraint")
    if problem.k == 2:
        base = cost_tve(problem, theta, phi, representation)
    else:
        base = cost_success_multi(problem, theta, phi, representation)
    resid = signal_occupation(problem, theta) - problem.constraint.target
    return base - problem.constraint.weight * resid * resid


@dataclass
class OptimizationResult:
    theta: np.ndarray
    phi: np.ndarray
    best_cost: float
    cost_trace: list
    n_evals: int
    converged: bool
    seed: int
    constraint_residual: float | None = None
    diamond_estimate: float | None = None
    restart_costs: tuple = ()


class _CostOracle:
    """Objective over the stacked (theta, phi) vector.

    Binary costs carry a sign ambiguity: which hypothesis "wins" the
    zero outcome is a labeling choice.  The first few evaluations run
    on the absolute gap; after that the sign of the best gap seen is
    frozen so the landscape becomes smooth for the local search.
    """

    RELABEL_AFTER = 10

    def __init__(self, problem, representation="auto"):
        self.problem = problem
        self.representation = representation
        self.n_theta = problem.n_theta
        self.sign = 0
        self.n_seen = 0
        self.best_abs = -1.0
        self.best_sign = 1.0

    def split(self, x):
        return x[:self.n_theta], x[self.n_theta:]

    def base_cost(self, theta, phi):
        if self.problem.k != 2:
            return cost_success_multi(self.problem, theta, phi,
                                      self.representation)
        gap = _signed_gap(self.problem, theta, phi, self.representation)
        if self.sign != 0:
            return self.sign * gap
        self.n_seen += 1
        if abs(gap) > self.best_abs:
            self.best_abs = abs(gap)
            self.best_sign = 1.0 if gap >= 0 else -1.0
        if self.n_seen >= self.RELABEL_AFTER:
            self.sign = self.best_sign
        return abs(gap)

    def __call__(self, x):
        theta, phi = self.split(x)
        value = self.base_cost(theta, phi)
        c = self.problem.constraint
        if c is not None:
            resid = signal_occupation(self.problem, theta) - c.target
            value -= c.weight * resid * resid
        return value

    def unpenalized(self, x):
        theta, phi = self.split(x)
        if self.problem.k == 2:
            return cost_tve(self.problem, theta, phi, self.representation)
        return cost_success_multi(self.problem, theta, phi,
                                  self.representation)


def _amplitude_slots(circuit):
    slots = []
    for gate in circuit.gates:
        if isinstance(gate, BosonicGateSpec):
            for j in _AMPLITUDE_KINDS.get(gate.kind, ()):
                slots.append(gate.slots[j])
    return sorted(set(slots))


def _bosonic_init(circuit, rng, squeeze_center=None, disp_scale=0.3):
    x = np.zeros(circuit.n_params)
    for gate in circuit.gates:
        if not isinstance(gate, BosonicGateSpec):
            continue
        if gate.kind == "displacement":
            x[list(gate.slots)] = rng.normal(0.0, disp_scale, size=2)
        elif gate.kind == "two_mode_squeeze":
            if squeeze_center is None:
                x[gate.slots[0]] = rng.normal(0.0, 0.3)
            else:
                x[gate.slots[0]] = squeeze_center * rng.normal(1.0, 0.15)
            x[gate.slots[1]] = rng.uniform(-math.pi, math.pi)
        elif gate.kind == "beam_splitter":
            x[gate.slots[0]] = rng.uniform(-math.pi / 2, math.pi / 2)
            x[gate.slots[1]] = rng.uniform(-math.pi, math.pi)
        elif gate.kind == "phase_rotation":
            x[gate.slots[0]] = rng.uniform(-math.pi, math.pi)
        elif gate.kind == "controlled_phase":
            x[gate.slots[0]] = rng.normal(0.0, 0.5)
    return x


def _initial_point(problem, rng):
    if not problem.is_bosonic:
        n = problem.n_theta + problem.n_phi
        return rng.uniform(-math.pi, math.pi, size=n)
    center = None
    if problem.constraint is not None:
        center = math.asinh(math.sqrt(max(problem.constraint.target, 0.0)))
    # probe amplitudes start small (the energy penalty is steep there);
    # measurement amplitudes roam wider to reach displaced optima
    theta = _bosonic_init(problem.probe_circuit, rng, center, disp_scale=0.02)
    phi = _bosonic_init(problem.measure_circuit, rng, disp_scale=0.3)
    return np.concatenate([theta, phi])


def _canonical_point(problem, rng):
    """Zero-displacement start that sits exactly on the energy target.

    Multistart includes this landmark alongside the random draws: all
    amplitude slots at zero, squeeze magnitudes at the value whose
    signal occupation equals the constraint target.  The measurement
    side still starts from a small random draw.
    """
    center = math.asinh(math.sqrt(max(problem.constraint.target, 0.0)))
    theta = np.zeros(problem.probe_circuit.n_params)
    for gate in problem.probe_circuit.gates:
        if isinstance(gate, BosonicGateSpec) and gate.kind == "two_mode_squeeze":
            theta[gate.slots[0]] = center
    phi = _bosonic_init(problem.measure_circuit, rng, disp_scale=0.05)
    return np.concatenate([theta, phi])


def _rescale_to_target(problem, theta):
    """Scale the probe amplitude slots so the signal mode hits target."""
    c = problem.constraint
    slots = _amplitude_slots(problem.probe_circuit)
    if not slots:
        raise ConvergenceError("probe circuit has no amplitude controls "
                               "to enforce the energy constraint")

    def occupation(t):
        scaled = np.array(theta, dtype=float)
        scaled[slots] = t * scaled[slots]
        return signal_occupation(problem, scaled) - c.target

    lo, hi = 0.0, 1.0
    if occupation(hi) < 0.0:
        for _ in range(64):
            hi *= 1.5
            if occupation(hi) >= 0.0:
                break
        else:
            raise ConvergenceError("could not bracket the energy target")
    t_star = brentq(occupation, lo, hi, xtol=1e-13, rtol=1e-14)
    scaled = np.array(theta, dtype=float)
    scaled[slots] = t_star * scaled[slots]
    return scaled


def _polish_constrained(problem, oracle, x, config):
    """Land exactly on the energy target, then re-tune phi only."""
    theta, phi = oracle.split(x)
    theta = _rescale_to_target(problem, theta)
    iters = config.polish_iters or 400
    sub = OptimizerConfig(method="nelder-mead", max_iters=iters,
                          patience=config.polish_patience or config.patience,
                          min_improvement=(config.polish_min_improvement
                                           or config.min_improvement))

    def phi_cost(p):
        return oracle.base_cost(theta, p)

    res = maximize(phi_cost, phi, sub)
    return np.concatenate([theta, res.x]), res.n_evals, res.trace


def run_vqht(problem, config=None, seed=0):
    """Multi-start maximization of the discrimination cost.

    Each restart draws its own starting point from a child stream of
    the master seed, runs the configured local method, and the best
    penalized value wins.  Constrained problems additionally polish
    every restart before the comparison: amplitudes are rescaled to
    land the signal energy exactly on target, then the measurement
    parameters are re-tuned alone.  The first restart of a constrained
    bosonic problem starts from the zero-displacement point on the
    energy target rather than a random draw.
    """
    config = config or OptimizerConfig()
    seeds = np.random.SeedSequence(seed).spawn(config.restarts)
    constrained = problem.constraint is not None
    best = None
    restart_costs = []
    total_evals = 0
    for i, child in enumerate(seeds):
        rng = np.random.default_rng(child)
        oracle = _CostOracle(problem)
        if constrained and problem.is_bosonic and i == 0:
            x0 = _canonical_point(problem, rng)
        else:
            x0 = _initial_point(problem, rng)
        res = maximize(oracle, x0, config, rng)
        total_evals += res.n_evals
        value, x_run, trace_run = res.value, res.x, list(res.trace)
        if constrained:
            # polish every restart, not just the winner, so the selection
            # compares candidates whose measurement side has converged at
            # a probe sitting exactly on the energy target
            x_run, extra, ptrace = _polish_constrained(problem, oracle,
                                                       x_run, config)
            total_evals += extra + 1
            base = trace_run[-1][0] if trace_run else 0
            trace_run.extend((base + j, v) for j, v in ptrace)
            value = float(oracle(x_run))
        restart_costs.append(value)
        if best is None or value > best[0]:
            best = (value, x_run, trace_run, res.converged, oracle)
    _, x_best, trace, run_converged, oracle = best
    theta, phi = oracle.split(x_best)
    final = oracle.unpenalized(x_best)
    residual = None
    if problem.constraint is not None:
        residual = abs(signal_occupation(problem, theta)
                       - problem.constraint.target)
    diamond = 2.0 * final if problem.k == 2 else None
    return OptimizationResult(theta=theta, phi=phi, best_cost=final,
                              cost_trace=trace, n_evals=total_evals,
                              converged=run_converged, seed=seed,
                              constraint_residual=residual,
                              diamond_estimate=diamond,
                              restart_costs=tuple(restart_costs))


def noise_robustness(problem, result, variances, n_samples=200, seed=0):
    """Mean cost ratio under Gaussian parameter jitter.

    For each variance v the optimized parameters are perturbed by
    i.i.d. N(0, v) noise n_samples times and the mean cost is divided
    by the noiseless cost.  Variance zero short-circuits to exactly 1.
    """
    n_theta = problem.n_theta

    def plain(x):
        if problem.k == 2:
            return cost_tve(problem, x[:n_theta], x[n_theta:])
        return cost_success_multi(problem, x[:n_theta], x[n_theta:])

    x_star = np.concatenate([result.theta, result.phi])
    noiseless = plain(x_star)
    if noiseless <= 1e-12:
        raise UsageError("noiseless cost is zero; ratios are undefined")
    rng = np.random.default_rng(seed)
    rows = []
    for v in variances:
        if v < 0:
            raise UsageError("variance must be nonnegative")
        if v == 0:
            rows.append((0.0, 1.0))
            continue
        sigma = math.sqrt(v)
        acc = 0.0
        for _ in range(n_samples):
            acc += plain(x_star + rng.normal(0.0, sigma, size=x_star.size))
        rows.append((float(v), acc / n_samples / noiseless))
    return rows
