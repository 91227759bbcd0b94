"""Dense finite-dimensional simulator core.

States are density matrices over an ordered list of subsystems with
heterogeneous local dimensions (row-major index convention: the first
subsystem varies slowest). Everything is validated against explicit
tolerances; violations raise instead of being silently repaired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (
    InternalError,
    ResourceError,
    UsageError,
    ValidationError,
)

# Tolerances for physical-object validation.
HERM_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_TOL = -1e-9
COMPLETENESS_TOL = 1e-10
UNITARY_TOL = 1e-10

# Guard against accidentally huge tensor products.
MAX_TENSOR_DIM = 4096


def _as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=complex)


def _check_dims(dims: Sequence[int], max_dim: int = MAX_TENSOR_DIM) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if len(dims) == 0:
        raise UsageError("need at least one subsystem")
    if any(d < 2 for d in dims):
        raise UsageError(f"local dimensions must be >= 2, got {dims}")
    if math.prod(dims) > max_dim:
        raise ResourceError(
            f"total dimension {math.prod(dims)} exceeds guard {max_dim}"
        )
    return dims


def hermitize(a: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (a + a^dag)/2."""
    return 0.5 * (a + a.conj().T)


def sqrtm_psd(a: np.ndarray, eig_floor: float = EIG_TOL) -> np.ndarray:
    """Principal square root of a PSD Hermitian matrix.

    Eigenvalues in [eig_floor, 0) are clamped to zero; anything below
    eig_floor raises ValidationError.
    """
    a = _as_complex(a)
    w, v = np.linalg.eigh(hermitize(a))
    if w.min() < eig_floor:
        raise ValidationError(f"matrix not PSD: min eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


@dataclass
class DensityMatrix:
    """Mixed state over subsystems with local dimensions ``dims``.

    Light checks (shape, hermiticity, unit trace) run on construction;
    ``validate()`` additionally checks positivity.
    """

    dims: tuple[int, ...]
    data: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.dims = _check_dims(self.dims)
        self.data = _as_complex(self.data)
        d = math.prod(self.dims)
        if self.data.shape != (d, d):
            raise ValidationError(
                f"data shape {self.data.shape} does not match dims {self.dims}"
            )
        if self.check:
            herm = np.abs(self.data - self.data.conj().T).max()
            if herm > HERM_TOL:
                raise ValidationError(f"not Hermitian: deviation {herm:.3e}")
            tr = self.data.trace()
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValidationError(f"trace {tr} not 1 within {TRACE_TOL}")

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def validate(self) -> "DensityMatrix":
        """Full validation: hermiticity, trace and positivity."""
        herm = np.abs(self.data - self.data.conj().T).max()
        if herm > HERM_TOL:
            raise ValidationError(f"not Hermitian: deviation {herm:.3e}")
        tr = self.data.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"trace {tr} not 1 within {TRACE_TOL}")
        wmin = np.linalg.eigvalsh(hermitize(self.data)).min()
        if wmin < EIG_TOL:
            raise ValidationError(f"negative eigenvalue {wmin:.3e}")
        return self

    def purity(self) -> float:
        return float(np.real(np.trace(self.data @ self.data)))


@dataclass
class KrausChannel:
    """CPTP map given by Kraus operators.

    Each operator maps the joint space of ``in_dims`` to that of
    ``out_dims`` (same number of subsystems, positionally replaced).
    Completeness sum_k K^dag K = I is enforced within 1e-10.
    """

    operators: list[np.ndarray]
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]

    def __post_init__(self):
        self.in_dims = _check_dims(self.in_dims)
        self.out_dims = _check_dims(self.out_dims)
        if len(self.in_dims) != len(self.out_dims):
            raise UsageError("in_dims and out_dims must have equal length")
        din = math.prod(self.in_dims)
        dout = math.prod(self.out_dims)
        self.operators = [_as_complex(k) for k in self.operators]
        if not self.operators:
            raise UsageError("need at least one Kraus operator")
        for k in self.operators:
            if k.shape != (dout, din):
                raise ValidationError(
                    f"Kraus shape {k.shape}, expected {(dout, din)}"
                )
        comp = sum(k.conj().T @ k for k in self.operators)
        dev = np.abs(comp - np.eye(din)).max()
        if dev > COMPLETENESS_TOL:
            raise ValidationError(f"Kraus completeness off by {dev:.3e}")


@dataclass
class Povm:
    """Measurement with PSD elements summing to the identity within 1e-10."""

    elements: list[np.ndarray]

    def __post_init__(self):
        self.elements = [_as_complex(e) for e in self.elements]
        if not self.elements:
            raise UsageError("need at least one POVM element")
        d = self.elements[0].shape[0]
        for e in self.elements:
            if e.shape != (d, d):
                raise ValidationError("POVM elements must share a square shape")
            if np.abs(e - e.conj().T).max() > HERM_TOL:
                raise ValidationError("POVM element not Hermitian")
            if np.linalg.eigvalsh(hermitize(e)).min() < EIG_TOL:
                raise ValidationError("POVM element not PSD")
        dev = np.abs(sum(self.elements) - np.eye(d)).max()
        if dev > COMPLETENESS_TOL:
            raise ValidationError(f"POVM completeness off by {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)


# ---------------------------------------------------------------------------
# state constructors


def basis_state(dims: Sequence[int], levels: Sequence[int]) -> DensityMatrix:
    """Computational basis state |levels><levels| on ``dims``."""
    dims = _check_dims(dims)
    levels = tuple(int(x) for x in levels)
    if len(levels) != len(dims):
        raise UsageError("one level per subsystem required")
    for lv, d in zip(levels, dims):
        if not 0 <= lv < d:
            raise UsageError(f"level {lv} outside local dimension {d}")
    idx = int(np.ravel_multi_index(levels, dims))
    n = math.prod(dims)
    rho = np.zeros((n, n), dtype=complex)
    rho[idx, idx] = 1.0
    return DensityMatrix(dims, rho)


def pure_state(dims: Sequence[int], vec: np.ndarray) -> DensityMatrix:
    """Density matrix |vec><vec| (vector is normalized first)."""
    dims = _check_dims(dims)
    v = _as_complex(vec).ravel()
    if v.size != math.prod(dims):
        raise UsageError("vector length does not match dims")
    nrm = np.linalg.norm(v)
    if nrm < 1e-12:
        raise UsageError("zero vector")
    v = v / nrm
    return DensityMatrix(dims, np.outer(v, v.conj()))


# ---------------------------------------------------------------------------
# tensor / trace / application


def tensor_product(a: DensityMatrix, b: DensityMatrix,
                   max_dim: int = MAX_TENSOR_DIM) -> DensityMatrix:
    """Kronecker product state; subsystems of ``a`` come first."""
    dims = _check_dims(a.dims + b.dims, max_dim)
    return DensityMatrix(dims, np.kron(a.data, b.data), check=False)


def ptrace_raw(data: np.ndarray, dims: Sequence[int],
               keep: Sequence[int]) -> np.ndarray:
    """Partial-trace contraction on a raw matrix; ``keep`` must be sorted."""
    n = len(dims)
    t = data.reshape(tuple(dims) * 2)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    res = np.einsum(t, row + col, out)
    d = math.prod(dims[i] for i in keep)
    return res.reshape(d, d)


def partial_trace(state: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Trace out all subsystems not listed in ``keep``.

    Output subsystem order follows the original order regardless of how
    ``keep`` is listed.
    """
    n = len(state.dims)
    keep = sorted({int(k) for k in keep})
    if not keep:
        raise UsageError("keep must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise UsageError(f"keep {keep} out of range for {n} subsystems")
    res = ptrace_raw(state.data, state.dims, keep)
    return DensityMatrix(tuple(state.dims[i] for i in keep),
                         res, check=False)


def _resolve_targets(dims: Sequence[int], targets) -> list[int]:
    n = len(dims)
    if targets is None:
        return list(range(n))
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise UsageError(f"duplicate targets {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise UsageError(f"target {t} out of range for {n} subsystems")
    return targets


def lift_operator(op: np.ndarray, dims: Sequence[int], targets,
                  out_local: Sequence[int] | None = None) -> np.ndarray:
    """Embed an operator acting on ``targets`` into the full space.

    ``op`` maps the joint target space (ordered as listed in ``targets``)
    to the space with per-target local dims ``out_local`` (defaults to the
    unchanged input dims). Returns the full (possibly rectangular) matrix.
    """
    dims = tuple(int(d) for d in dims)
    targets = _resolve_targets(dims, targets)
    n = len(dims)
    in_t = [dims[t] for t in targets]
    out_t = list(in_t) if out_local is None else [int(d) for d in out_local]
    if len(out_t) != len(targets):
        raise UsageError("out_local must match number of targets")
    op = _as_complex(op)
    if op.shape != (math.prod(out_t), math.prod(in_t)):
        raise UsageError(
            f"operator shape {op.shape} does not match targets {in_t}->{out_t}"
        )
    rest = [i for i in range(n) if i not in targets]
    rest_dim = math.prod([dims[r] for r in rest]) if rest else 1
    big = np.kron(op, np.eye(rest_dim))
    # big is ordered (targets..., rest...); permute back to the original order
    perm = targets + rest
    inv = np.argsort(perm)
    row_dims = out_t + [dims[r] for r in rest]
    col_dims = in_t + [dims[r] for r in rest]
    big = big.reshape(row_dims + col_dims)
    big = big.transpose(list(inv) + [n + k for k in inv])
    dout = math.prod(out_t) * rest_dim
    din = math.prod(in_t) * rest_dim
    return big.reshape(dout, din)


def apply_unitary(state: DensityMatrix, u: np.ndarray,
                  targets=None) -> DensityMatrix:
    """U rho U^dag with ``u`` acting on the listed target subsystems."""
    u = _as_complex(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise UsageError("unitary must be square")
    dev = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if dev > UNITARY_TOL:
        raise ValidationError(f"matrix not unitary: deviation {dev:.3e}")
    full = lift_operator(u, state.dims, targets)
    return DensityMatrix(state.dims, full @ state.data @ full.conj().T,
                         check=False)


def apply_channel(state: DensityMatrix, channel: KrausChannel,
                  targets=None) -> DensityMatrix:
    """Apply a Kraus channel on the listed target subsystems."""
    targets = _resolve_targets(state.dims, targets)
    tdims = tuple(state.dims[t] for t in targets)
    if tdims != channel.in_dims:
        raise UsageError(
            f"channel input dims {channel.in_dims} do not match targets {tdims}"
        )
    out_dims = list(state.dims)
    for t, d in zip(targets, channel.out_dims):
        out_dims[t] = d
    acc = None
    for k in channel.operators:
        fk = lift_operator(k, state.dims, targets, out_local=channel.out_dims)
        term = fk @ state.data @ fk.conj().T
        acc = term if acc is None else acc + term
    return DensityMatrix(tuple(out_dims), hermitize(acc), check=False)


def apply_channel_adjoint(mat: np.ndarray, channel: KrausChannel,
                          dims: Sequence[int], targets=None) -> np.ndarray:
    """Heisenberg-picture action sum_k K^dag M K on a full-space operator."""
    targets = _resolve_targets(dims, targets)
    acc = None
    for k in channel.operators:
        fk = lift_operator(k, dims, targets, out_local=channel.out_dims)
        term = fk.conj().T @ _as_complex(mat) @ fk
        acc = term if acc is None else acc + term
    return acc


# ---------------------------------------------------------------------------
# named channels and measurement unitaries


def phase_flip_channel(p: float) -> KrausChannel:
    """Single-qubit channel rho -> (1-p) rho + p Z rho Z."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise UsageError(f"flip probability {p} outside [0, 1]")
    z = np.diag([1.0, -1.0]).astype(complex)
    ops = [math.sqrt(1.0 - p) * np.eye(2, dtype=complex), math.sqrt(p) * z]
    return KrausChannel(ops, (2,), (2,))


def depolarizing_channel(p: float) -> KrausChannel:
    """Single-qubit depolarizing channel with error weight ``p``."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise UsageError(f"error weight {p} outside [0, 1]")
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.diag([1.0, -1.0]).astype(complex)
    ops = [math.sqrt(1 - p) * np.eye(2, dtype=complex)]
    ops += [math.sqrt(p / 3.0) * s for s in (sx, sy, sz)]
    return KrausChannel(ops, (2,), (2,))


def _check_effect(gamma: np.ndarray) -> np.ndarray:
    gamma = _as_complex(gamma)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
        raise UsageError("effect must be a square matrix")
    if np.abs(gamma - gamma.conj().T).max() > HERM_TOL:
        raise ValidationError("effect not Hermitian")
    w = np.linalg.eigvalsh(hermitize(gamma))
    if w.min() < EIG_TOL or w.max() > 1.0 - EIG_TOL:
        raise ValidationError(
            f"effect eigenvalues [{w.min():.3e}, {w.max():.3e}] outside [0, 1]"
        )
    return gamma


def naimark_unitary(gamma: np.ndarray) -> np.ndarray:
    """Two-outcome measurement dilation on (qubit ancilla) x (system).

    For an effect 0 <= Gamma <= I the returned unitary U satisfies
    Tr[(|0><0| (x) I) U (|0><0| (x) rho) U^dag] = Tr(Gamma rho): the
    ancilla-0 outcome reproduces the effect, outcome 1 its complement.
    """
    gamma = _check_effect(gamma)
    d = gamma.shape[0]
    s = sqrtm_psd(gamma)
    c = sqrtm_psd(np.eye(d) - gamma, eig_floor=2 * EIG_TOL)
    u = np.zeros((2 * d, 2 * d), dtype=complex)
    u[:d, :d] = s
    u[:d, d:] = c
    u[d:, :d] = -c
    u[d:, d:] = s
    dev = np.abs(u.conj().T @ u - np.eye(2 * d)).max()
    if dev > 1e-9:
        raise InternalError(f"dilation unitary off by {dev:.3e}")
    return u


def naimark_unitary_multi(povm: Povm) -> np.ndarray:
    """k-outcome measurement dilation on (k-level ancilla) x (system).

    Ancilla-input-0 column blocks carry sqrt(Gamma_i); with the ancilla
    prepared in |0>, measuring it in the computational basis reproduces
    the POVM statistics. The remaining columns are completed to a unitary
    by Gram-Schmidt over standard basis vectors in increasing column
    order (deterministic).
    """
    k = len(povm)
    d = povm.dim
    n = k * d
    iso = np.zeros((n, d), dtype=complex)
    for i, e in enumerate(povm.elements):
        iso[i * d:(i + 1) * d, :] = sqrtm_psd(e)
    # columns are orthonormal because sum_i Gamma_i = I; tiny violations
    # (clamped eigenvalues of nearly singular effects) get one polar
    # correction so the completion below starts from an exact isometry
    gram = iso.conj().T @ iso
    dev = np.abs(gram - np.eye(d)).max()
    if dev > 1e-5:
        raise InternalError(f"dilation isometry off by {dev:.3e}")
    if dev > 1e-12:
        w, v = np.linalg.eigh(gram)
        iso = iso @ ((v * (w ** -0.5)) @ v.conj().T)
    cols = [iso[:, j] for j in range(d)]
    for j in range(n):
        if len(cols) == n:
            break
        cand = np.zeros(n, dtype=complex)
        cand[j] = 1.0
        # orthogonalize twice: a single classical Gram-Schmidt pass can
        # leave milli-scale residue after many accumulated columns
        for _ in range(2):
            for c in cols:
                cand = cand - c * (c.conj() @ cand)
        nrm = np.linalg.norm(cand)
        if nrm > 1e-6:
            cols.append(cand / nrm)
    if len(cols) != n:
        raise InternalError("unitary completion failed (rank defect)")
    u = np.zeros((n, n), dtype=complex)
    u[:, :d] = iso
    for j in range(d, n):
        u[:, j] = cols[j]
    dev = np.abs(u.conj().T @ u - np.eye(n)).max()
    if dev > 1e-9:
        raise InternalError(f"completed unitary off by {dev:.3e}")
    return u


def haar_random_unitary(dim: int, seed: int) -> np.ndarray:
    """Haar-distributed unitary from a QR-decomposed Ginibre matrix."""
    dim = int(dim)
    if dim < 1:
        raise UsageError("dimension must be positive")
    rng = np.random.default_rng(int(seed))
    z = (rng.standard_normal((dim, dim))
         + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def random_kraus_channel(dims: Sequence[int], seed: int,
                         env_dim: int | None = None) -> KrausChannel:
    """Random CPTP map: Stinespring dilation of a Haar unitary."""
    dims = _check_dims(dims)
    d = math.prod(dims)
    e = int(env_dim) if env_dim else d
    u = haar_random_unitary(d * e, seed)
    u4 = u.reshape(e, d, e, d)
    ops = [np.ascontiguousarray(u4[j, :, 0, :]) for j in range(e)]
    return KrausChannel(ops, dims, dims)
