"""Parameterized circuit families for probes and measurements.

A circuit is a flat list of gate descriptors whose parameters live in
one shared slot vector, so a single optimizer vector can drive any mix
of rotations and bosonic gates.  Discrete circuits materialize to a
dense unitary; bosonic circuits materialize to a gate list for either
the truncated number-basis simulator or the moment propagator.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import UsageError, ValidationError
from .fock import GATE_ARITY, BosonicGate
from .qsim import lift_operator

CZ_RING = "cz"


@dataclass(frozen=True)
class RotationGate:
    """Full generator-basis rotation of one subsystem."""

    target: int
    slots: tuple


@dataclass(frozen=True)
class EntanglerGate:
    """Parameter-free diagonal coupler on a pair of subsystems."""

    targets: tuple


@dataclass(frozen=True, eq=False)
class FixedGate:
    """Constant unitary block on the listed subsystems."""

    matrix: np.ndarray
    targets: tuple


@dataclass(frozen=True)
class BosonicGateSpec:
    """Bosonic gate whose parameters are read from the slot vector."""

    kind: str
    modes: tuple
    slots: tuple

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise UsageError(f"unknown bosonic gate kind '{self.kind}'")
        n_modes, n_params = GATE_ARITY[self.kind]
        if len(self.modes) != n_modes or len(self.slots) != n_params:
            raise UsageError(f"{self.kind} takes {n_modes} modes and "
                             f"{n_params} slots")


@dataclass
class ParamCircuit:
    """Ordered gate list over a shared parameter vector.

    Exactly one of dims (discrete register) or modes (bosonic register)
    is set.  Every slot index below n_params must be referenced by some
    gate.
    """

    gates: tuple
    n_params: int
    dims: tuple | None = None
    modes: int | None = None

    def __post_init__(self):
        if (self.dims is None) == (self.modes is None):
            raise UsageError("set exactly one of dims or modes")
        self.gates = tuple(self.gates)
        if self.dims is not None:
            self.dims = tuple(int(d) for d in self.dims)
        used = set()
        for g in self.gates:
            if isinstance(g, (RotationGate, BosonicGateSpec)):
                used.update(g.slots)
        if used != set(range(self.n_params)):
            missing = sorted(set(range(self.n_params)) - used)
            raise ValidationError(f"unreferenced parameter slots {missing}")

    @property
    def dim(self):
        if self.dims is None:
            raise UsageError("bosonic circuit has no dense dimension")
        return int(np.prod(self.dims))


@functools.lru_cache(maxsize=None)
def generator_basis(d):
    """Hermitian traceless basis of su(d), normalized Tr(G_a G_b) = 2."""
    if d < 2:
        raise UsageError("generators need dimension >= 2")
    out = []
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            out.append(sym)
            anti = np.zeros((d, d), dtype=complex)
            anti[j, k] = -1.0j
            anti[k, j] = 1.0j
            out.append(anti)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        out.append(np.diag(diag * np.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    return tuple(out)


def rotation_unitary(d, weights):
    """exp(i sum_a w_a G_a) over the su(d) generator basis."""
    weights = np.asarray(weights, dtype=float)
    basis = generator_basis(d)
    if weights.shape != (len(basis),):
        raise UsageError(f"dimension {d} rotation takes {len(basis)} weights")
    gen = sum(w * g for w, g in zip(weights, basis))
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(1.0j * w)) @ v.conj().T


@functools.lru_cache(maxsize=None)
def entangler_matrix(da, db):
    """Diagonal phase coupler diag(w^(j*k)), w = exp(2 pi i / max(da, db));
    reduces to CZ for a pair of qubits."""
    w = np.exp(2.0j * np.pi / max(da, db))
    j = np.arange(da)[:, None]
    k = np.arange(db)[None, :]
    return np.diag((w ** (j * k)).ravel())


def _materialize(gate, dims, params):
    if isinstance(gate, RotationGate):
        local = rotation_unitary(dims[gate.target],
                                 params[np.array(gate.slots, dtype=int)])
        return local, (gate.target,)
    if isinstance(gate, EntanglerGate):
        i, j = gate.targets
        return entangler_matrix(dims[i], dims[j]), gate.targets
    if isinstance(gate, FixedGate):
        return gate.matrix, gate.targets
    raise UsageError(f"gate {type(gate).__name__} is not a discrete gate")


def circuit_unitary(circuit, params):
    """Dense unitary of a discrete circuit at the given parameters."""
    if circuit.dims is None:
        raise UsageError("circuit_unitary needs a discrete circuit")
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise UsageError(f"expected {circuit.n_params} parameters, "
                         f"got {params.shape}")
    total = np.eye(circuit.dim, dtype=complex)
    for gate in circuit.gates:
        local, targets = _materialize(gate, circuit.dims, params)
        total = lift_operator(local, circuit.dims, list(targets)) @ total
    return total


def bind_bosonic(circuit, params):
    """Materialize a bosonic circuit to a concrete gate list."""
    if circuit.modes is None:
        raise UsageError("bind_bosonic needs a bosonic circuit")
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise UsageError(f"expected {circuit.n_params} parameters, "
                         f"got {params.shape}")
    out = []
    for gate in circuit.gates:
        if not isinstance(gate, BosonicGateSpec):
            raise UsageError("bosonic circuits hold BosonicGateSpec gates")
        out.append(BosonicGate(gate.kind, gate.modes,
                               tuple(float(params[s]) for s in gate.slots)))
    return out


def build_hardware_efficient_ansatz(dims, layers, entangler=CZ_RING):
    """Layered ansatz: per-subsystem rotations, then a ring of diagonal
    entanglers (0,1), (1,2), ..., (n-1,0); a pair of subsystems gets a
    single coupler and a singleton none."""
    dims = tuple(int(d) for d in dims)
    if layers < 1:
        raise UsageError("need at least one layer")
    if entangler not in (CZ_RING, "none"):
        raise UsageError(f"unknown entangler '{entangler}'")
    n = len(dims)
    gates = []
    slot = 0
    for _ in range(layers):
        for site, d in enumerate(dims):
            width = d * d - 1
            gates.append(RotationGate(site, tuple(range(slot, slot + width))))
            slot += width
        if entangler == CZ_RING and n >= 2:
            pairs = [(i, i + 1) for i in range(n - 1)]
            if n > 2:
                pairs.append((n - 1, 0))
            for pair in pairs:
                gates.append(EntanglerGate(pair))
    return ParamCircuit(tuple(gates), slot, dims=dims)


def _complete_columns(first, dim):
    cols = [first]
    for j in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[j] = 1.0
        for c in cols:
            e = e - (c.conj() @ e) * c
        norm = np.linalg.norm(e)
        if norm > 1e-6:
            cols.append(e / norm)
        if len(cols) == dim:
            break
    if len(cols) != dim:
        raise UsageError("could not complete a unitary around the column")
    return np.stack(cols, axis=1)


def fixed_state_circuit(dims, vec):
    """Zero-parameter circuit preparing the given vector from |0...0>."""
    dims = tuple(int(d) for d in dims)
    vec = np.asarray(vec, dtype=complex)
    dim = int(np.prod(dims))
    if vec.shape != (dim,):
        raise UsageError(f"state vector must have length {dim}")
    norm = np.linalg.norm(vec)
    if abs(norm - 1.0) > 1e-9:
        raise UsageError("state vector must be normalized")
    prep = _complete_columns(vec / norm, dim)
    gate = FixedGate(prep, tuple(range(len(dims))))
    return ParamCircuit((gate,), 0, dims=dims)


def ghz_vector(n_sites, level_count=2):
    """(|00...0> + |d-1 ... d-1>) / sqrt(2) on n_sites qudits."""
    if n_sites < 1:
        raise UsageError("need at least one site")
    dim = level_count ** n_sites
    vec = np.zeros(dim, dtype=complex)
    vec[0] = 1.0 / np.sqrt(2.0)
    vec[-1] = 1.0 / np.sqrt(2.0)
    if level_count == 1:
        vec[0] = 1.0
    return vec


SIGNAL, IDLER = 0, 1
READOUT, RETURNED, MEAS_IDLER = 0, 1, 2


def build_illumination_ansatz(kind):
    """Gaussian ansatz pair for the reflectivity-sensing problem.

    probe (2 modes: signal, idler): displacements on both modes, then a
    two-mode squeeze — 6 parameters.  measure (3 modes: readout,
    returned, idler): displacements on all modes, conditional phase
    couplers readout-returned and readout-idler, then beam splitters on
    the same pairs — 12 parameters.
    """
    if kind == "probe":
        gates = (
            BosonicGateSpec("displacement", (SIGNAL,), (0, 1)),
            BosonicGateSpec("displacement", (IDLER,), (2, 3)),
            BosonicGateSpec("two_mode_squeeze", (SIGNAL, IDLER), (4, 5)),
        )
        return ParamCircuit(gates, 6, modes=2)
    if kind == "measure":
        gates = (
            BosonicGateSpec("displacement", (READOUT,), (0, 1)),
            BosonicGateSpec("displacement", (RETURNED,), (2, 3)),
            BosonicGateSpec("displacement", (MEAS_IDLER,), (4, 5)),
            BosonicGateSpec("controlled_phase", (READOUT, RETURNED), (6,)),
            BosonicGateSpec("controlled_phase", (READOUT, MEAS_IDLER), (7,)),
            BosonicGateSpec("beam_splitter", (READOUT, RETURNED), (8, 9)),
            BosonicGateSpec("beam_splitter", (READOUT, MEAS_IDLER), (10, 11)),
        )
        return ParamCircuit(gates, 12, modes=3)
    raise UsageError("kind must be 'probe' or 'measure'")
