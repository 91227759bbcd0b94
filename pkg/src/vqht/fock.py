"""Truncated Fock-space simulator for bosonic modes.

Every mode shares one cutoff D (levels 0..D-1). States carry an explicit
``trace_deficit`` instead of being renormalized: probability mass that
falls past the cutoff (thermal tails, gate leakage, channel loss) is
accumulated there, so ``trace + trace_deficit`` stays pinned near one.

Gate unitaries are built by exponentiating the generator on a padded
space (cutoff + 6), taking the cutoff-sized corner, measuring how much
trace the raw corner would lose on the state at hand (that is the
leakage), then re-unitarizing the corner by polar decomposition before
applying it. Leakage above 1e-6 escalates the cutoff in +6 steps; above
1e-4 with no room to escalate it is a hard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .exceptions import (
    CutoffTooSmallError,
    ResourceError,
    UsageError,
    ValidationError,
)
from .qsim import hermitize, ptrace_raw

HERM_TOL = 1e-10
EIG_TOL = -1e-9
# trace + deficit must stay inside this window
TRACE_SUM_LO = 1.0 - 1e-6
TRACE_SUM_HI = 1.0 + 1e-10
LEAK_ESCALATE = 1e-6
LEAK_HARD = 1e-4
GATE_PAD = 6
CUTOFF_STEP = 6
DEFAULT_MAX_CUTOFF = 128
MAX_FOCK_DIM = 200_000

GATE_ARITY = {
    "displacement": (1, 2),      # (re alpha, im alpha)
    "phase_rotation": (1, 1),    # (phi,)
    "two_mode_squeeze": (2, 2),  # (r, phi)
    "beam_splitter": (2, 2),     # (theta, phi)
    "controlled_phase": (2, 1),  # (s,)
}


@dataclass(frozen=True)
class BosonicGate:
    """Gate descriptor: generator kind, target modes, real parameters."""

    kind: str
    modes: tuple[int, ...]
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise UsageError(f"unknown bosonic gate kind {self.kind!r}")
        n_modes, n_params = GATE_ARITY[self.kind]
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        object.__setattr__(self, "params",
                           tuple(float(p) for p in self.params))
        if len(self.modes) != n_modes or len(set(self.modes)) != n_modes:
            raise UsageError(
                f"{self.kind} needs {n_modes} distinct modes, got {self.modes}"
            )
        if len(self.params) != n_params:
            raise UsageError(
                f"{self.kind} needs {n_params} parameters, got {self.params}"
            )


@dataclass
class FockState:
    """Dense multimode state truncated at a common per-mode cutoff."""

    modes: int
    cutoff: int
    data: np.ndarray
    trace_deficit: float = 0.0
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.modes = int(self.modes)
        self.cutoff = int(self.cutoff)
        if self.modes < 1:
            raise UsageError("need at least one mode")
        if self.cutoff < 2:
            raise UsageError("cutoff must be at least 2")
        d = self.cutoff ** self.modes
        if d > MAX_FOCK_DIM:
            raise ResourceError(f"Fock dimension {d} exceeds {MAX_FOCK_DIM}")
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (d, d):
            raise ValidationError(
                f"data shape {self.data.shape}, expected {(d, d)}"
            )
        self.trace_deficit = float(self.trace_deficit)
        if self.check:
            self._light_checks()

    def _light_checks(self):
        herm = np.abs(self.data - self.data.conj().T).max()
        if herm > HERM_TOL:
            raise ValidationError(f"not Hermitian: deviation {herm:.3e}")
        if self.trace_deficit < -1e-12:
            raise ValidationError("negative trace deficit")
        s = self.data.trace().real + self.trace_deficit
        if not TRACE_SUM_LO <= s <= TRACE_SUM_HI:
            raise ValidationError(
                f"trace + deficit = {s!r} outside "
                f"[{TRACE_SUM_LO}, {TRACE_SUM_HI}]"
            )

    @property
    def dim(self) -> int:
        return self.cutoff ** self.modes

    def trace(self) -> float:
        return float(self.data.trace().real)

    def validate(self) -> "FockState":
        self._light_checks()
        if self.trace_deficit > LEAK_HARD:
            raise CutoffTooSmallError(
                f"trace deficit {self.trace_deficit:.3e} above {LEAK_HARD}"
            )
        wmin = np.linalg.eigvalsh(hermitize(self.data)).min()
        if wmin < EIG_TOL:
            raise ValidationError(f"negative eigenvalue {wmin:.3e}")
        return self


# ---------------------------------------------------------------------------
# constructors


def fock_vacuum(modes: int, cutoff: int) -> FockState:
    """All modes in |0>."""
    d = int(cutoff) ** int(modes)
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    return FockState(modes, cutoff, rho)


def _thermal_diag(n_bar: float, cutoff: int) -> tuple[np.ndarray, float]:
    """Truncated geometric occupation and its tail mass."""
    if n_bar == 0.0:
        p = np.zeros(cutoff)
        p[0] = 1.0
        return p, 0.0
    x = n_bar / (1.0 + n_bar)
    p = (1.0 - x) * x ** np.arange(cutoff)
    return p, float(x ** cutoff)


def thermal_state(n_bar: float, cutoff: int,
                  max_cutoff: int = DEFAULT_MAX_CUTOFF) -> FockState:
    """Single-mode thermal state with mean occupation ``n_bar``.

    The cutoff escalates in +6 steps while the geometric tail exceeds
    1e-6 (up to ``max_cutoff``); a tail above 1e-4 at the cap raises.
    """
    n_bar = float(n_bar)
    if n_bar < 0:
        raise UsageError(f"mean occupation {n_bar} negative")
    d = int(cutoff)
    while d < max_cutoff:
        _, tail = _thermal_diag(n_bar, d)
        if tail <= LEAK_ESCALATE:
            break
        d += CUTOFF_STEP
    p, tail = _thermal_diag(n_bar, d)
    if tail > LEAK_HARD:
        raise CutoffTooSmallError(
            f"thermal tail {tail:.3e} above {LEAK_HARD} at cutoff {d}"
        )
    return FockState(1, d, np.diag(p).astype(complex), trace_deficit=tail)


def coherent_state(alpha: complex, cutoff: int,
                   max_cutoff: int = DEFAULT_MAX_CUTOFF) -> FockState:
    """Single-mode coherent state via a displacement on vacuum."""
    gate = BosonicGate("displacement", (0,),
                       (float(np.real(alpha)), float(np.imag(alpha))))
    return apply_bosonic_gate(fock_vacuum(1, cutoff), gate,
                              max_cutoff=max_cutoff)


def tensor_fock(a: FockState, b: FockState) -> FockState:
    """Kronecker product; modes of ``a`` come first."""
    if a.cutoff != b.cutoff:
        raise UsageError(
            f"cutoff mismatch {a.cutoff} vs {b.cutoff}; embed first"
        )
    deficit = a.trace_deficit + b.trace_deficit \
        - a.trace_deficit * b.trace_deficit
    return FockState(a.modes + b.modes, a.cutoff,
                     np.kron(a.data, b.data), trace_deficit=deficit,
                     check=False)


def embed_cutoff(state: FockState, new_cutoff: int) -> FockState:
    """Zero-pad every mode up to ``new_cutoff`` (a new instance)."""
    new_cutoff = int(new_cutoff)
    if new_cutoff < state.cutoff:
        raise UsageError("embedding cannot shrink the cutoff")
    if new_cutoff == state.cutoff:
        return state
    n, d_old = state.modes, state.cutoff
    old_multi = np.indices((d_old,) * n).reshape(n, -1)
    flat = np.ravel_multi_index(old_multi, (new_cutoff,) * n)
    d_new = new_cutoff ** n
    if d_new > MAX_FOCK_DIM:
        raise ResourceError(f"Fock dimension {d_new} exceeds {MAX_FOCK_DIM}")
    data = np.zeros((d_new, d_new), dtype=complex)
    data[np.ix_(flat, flat)] = state.data
    return FockState(n, new_cutoff, data,
                     trace_deficit=state.trace_deficit, check=False)


def reduce_modes(state: FockState, keep: Sequence[int]) -> FockState:
    """Trace out all modes not listed in ``keep`` (original order kept)."""
    keep = sorted({int(k) for k in keep})
    if not keep:
        raise UsageError("keep must be non-empty")
    if keep[0] < 0 or keep[-1] >= state.modes:
        raise UsageError(f"keep {keep} out of range for {state.modes} modes")
    res = ptrace_raw(state.data, (state.cutoff,) * state.modes, keep)
    return FockState(len(keep), state.cutoff, res,
                     trace_deficit=state.trace_deficit, check=False)


# ---------------------------------------------------------------------------
# operators and gate matrices


def destroy(cutoff: int) -> np.ndarray:
    """Annihilation operator truncated at ``cutoff`` levels."""
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1).astype(complex)


def number_op(cutoff: int) -> np.ndarray:
    return np.diag(np.arange(cutoff, dtype=float)).astype(complex)


def _generator(gate: BosonicGate, cutoff: int) -> np.ndarray:
    """Anti-Hermitian generator G with U = exp(G) on the gate's modes."""
    a = destroy(cutoff)
    ad = a.conj().T
    kind, p = gate.kind, gate.params
    if kind == "displacement":
        alpha = p[0] + 1j * p[1]
        return alpha * ad - np.conj(alpha) * a
    if kind == "phase_rotation":
        return 1j * p[0] * (ad @ a)
    eye = np.eye(cutoff, dtype=complex)
    if kind == "two_mode_squeeze":
        r, phi = p
        adbd = np.kron(ad, ad)
        ab = np.kron(a, a)
        return r * (np.exp(1j * phi) * adbd - np.exp(-1j * phi) * ab)
    if kind == "beam_splitter":
        theta, phi = p
        adb = np.kron(ad, a)
        abd = np.kron(a, ad)
        return theta * (np.exp(1j * phi) * adb - np.exp(-1j * phi) * abd)
    if kind == "controlled_phase":
        q = (a + ad) / math.sqrt(2.0)
        return 1j * p[0] * np.kron(q, q)
    raise UsageError(f"unknown gate kind {kind!r}")  # pragma: no cover


def _corner_indices(n_modes: int, inner: int, outer: int) -> np.ndarray:
    multi = np.indices((inner,) * n_modes).reshape(n_modes, -1)
    return np.ravel_multi_index(multi, (outer,) * n_modes)


def gate_matrices(gate: BosonicGate, cutoff: int,
                  pad: int = GATE_PAD) -> tuple[np.ndarray, np.ndarray]:
    """(raw corner, re-unitarized) gate matrix at the given cutoff.

    The generator is exponentiated at cutoff + pad and the cutoff-sized
    corner extracted; the corner's unitarity defect is exactly the
    coupling into the discarded levels.
    """
    n = len(gate.modes)
    big = cutoff + pad
    u_ext = expm(_generator(gate, big))
    idx = _corner_indices(n, cutoff, big)
    raw = np.ascontiguousarray(u_ext[np.ix_(idx, idx)])
    uu, _, vh = np.linalg.svd(raw)
    fixed = uu @ vh
    return raw, fixed


def _left_apply(data: np.ndarray, n_modes: int, cutoff: int,
                targets: Sequence[int], m: np.ndarray) -> np.ndarray:
    """Contract ``m`` into the ket-side target axes of a state matrix."""
    shape = (cutoff,) * (2 * n_modes)
    t = data.reshape(shape)
    targets = list(targets)
    rest = [i for i in range(2 * n_modes) if i not in targets]
    perm = targets + rest
    t = np.ascontiguousarray(np.transpose(t, perm))
    dt = cutoff ** len(targets)
    t = m @ t.reshape(dt, -1)
    t = t.reshape([shape[i] for i in perm])
    t = np.transpose(t, np.argsort(perm))
    d = cutoff ** n_modes
    return t.reshape(d, d)


def _sandwich(data: np.ndarray, n_modes: int, cutoff: int,
              targets: Sequence[int], m: np.ndarray) -> np.ndarray:
    """m rho m^dag on the target modes."""
    a = _left_apply(data, n_modes, cutoff, targets, m)
    return _left_apply(a.conj().T, n_modes, cutoff, targets, m).conj().T


def apply_bosonic_gate(state: FockState, gate: BosonicGate,
                       max_cutoff: int = DEFAULT_MAX_CUTOFF,
                       pad: int = GATE_PAD) -> FockState:
    """Apply a gate, escalating the cutoff when truncation leaks.

    Leakage is the trace the raw (non-unitary) corner would lose on this
    state; the state is then evolved with the polar-re-unitarized corner
    and the leakage added to the trace deficit.
    """
    for t in gate.modes:
        if not 0 <= t < state.modes:
            raise UsageError(f"gate mode {t} outside state with "
                             f"{state.modes} modes")
    cur = state
    while True:
        raw, fixed = gate_matrices(gate, cur.cutoff, pad=pad)
        # leakage = Tr(rho) - Tr(raw rho raw^dag) = Tr[(I - raw^dag raw) rho_t]
        m = raw.conj().T @ raw
        rho_t = ptrace_raw(cur.data, (cur.cutoff,) * cur.modes,
                           sorted(gate.modes))
        # ptrace keeps original mode order; permute to the gate's order
        if list(gate.modes) != sorted(gate.modes):
            k = len(gate.modes)
            order = list(np.argsort(np.argsort(gate.modes)))
            t4 = rho_t.reshape((cur.cutoff,) * (2 * k))
            t4 = np.transpose(t4, order + [k + o for o in order])
            rho_t = t4.reshape(m.shape)
        leak = cur.trace() - float(np.tensordot(m, rho_t.T, 2).real)
        leak = max(leak, 0.0)
        if leak > LEAK_ESCALATE and cur.cutoff + CUTOFF_STEP <= max_cutoff:
            cur = embed_cutoff(cur, cur.cutoff + CUTOFF_STEP)
            continue
        if leak > LEAK_HARD:
            raise CutoffTooSmallError(
                f"gate leakage {leak:.3e} above {LEAK_HARD} at cutoff "
                f"{cur.cutoff} (cap {max_cutoff})"
            )
        out = _sandwich(cur.data, cur.modes, cur.cutoff, list(gate.modes),
                        fixed)
        # the re-unitarized gate conserves trace; book the leaked mass out
        # of the state so trace + deficit stays pinned
        tr_in = cur.trace()
        if leak > 0.0 and tr_in > 0.0:
            out *= (tr_in - leak) / tr_in
        return FockState(cur.modes, cur.cutoff, hermitize(out),
                         trace_deficit=cur.trace_deficit + leak, check=False)


def apply_circuit(state: FockState, gates: Sequence[BosonicGate],
                  max_cutoff: int = DEFAULT_MAX_CUTOFF) -> FockState:
    for g in gates:
        state = apply_bosonic_gate(state, g, max_cutoff=max_cutoff)
    return state


# ---------------------------------------------------------------------------
# illumination channel

_BS_CACHE: dict[tuple, np.ndarray] = {}


def _bs_unitary(theta: float, phi: float, cutoff: int) -> np.ndarray:
    """Re-unitarized beam-splitter corner at the given cutoff, cached."""
    key = ("bs", round(theta, 15), round(phi, 15), cutoff)
    if key not in _BS_CACHE:
        gate = BosonicGate("beam_splitter", (0, 1), (theta, phi))
        _, fixed = gate_matrices(gate, cutoff)
        if len(_BS_CACHE) > 16:
            _BS_CACHE.clear()
        _BS_CACHE[key] = fixed
    return _BS_CACHE[key]


def illumination_channel(state: FockState, eta: float, n_b: float,
                         max_cutoff: int = DEFAULT_MAX_CUTOFF) -> FockState:
    """Mix the signal mode with a thermal background of ``n_b`` photons.

    Input: two modes (signal, idler). A bath mode in a thermal state is
    attached, a beam splitter with mixing angle asin(eta) couples signal
    and bath (the +-i phases of the coupling follow the exp(i asin(eta)
    (aS^dag aB - aS aB^dag)) convention), and the signal is traced out.
    Output: two modes (returned, idler). ``eta`` is the amplitude
    reflectivity: the returned mode carries (1-eta^2) n_b + eta^2 N_S
    mean photons.

    The bath is contracted level-by-level (never materialized as a dense
    third tensor factor); its internal cutoff escalates independently of
    the state cutoff until the thermal tail is below 1e-6.
    """
    eta = float(eta)
    n_b = float(n_b)
    if state.modes != 2:
        raise UsageError("illumination channel expects (signal, idler)")
    if not 0.0 <= eta <= 1.0:
        raise UsageError(f"reflectivity {eta} outside [0, 1]")
    if n_b < 0:
        raise UsageError(f"background occupation {n_b} negative")
    d = state.cutoff
    tr_in = state.trace()

    if eta == 0.0:
        # same contract as the mixing branch below: the bath distribution
        # is represented at whatever internal cutoff it needs, and only
        # the returned mode is truncated back to d levels (tracked leak)
        d_b = d
        while d_b < max_cutoff:
            _, tail = _thermal_diag(n_b, d_b)
            if tail <= LEAK_ESCALATE:
                break
            d_b += CUTOFF_STEP
        p, tail = _thermal_diag(n_b, d_b)
        if tail > LEAK_HARD:
            raise CutoffTooSmallError(
                f"thermal tail {tail:.3e} above {LEAK_HARD} at bath cutoff {d_b}"
            )
        leak = float(np.sum(p[d:])) + tail
        idler = reduce_modes(state, [1])
        out = np.kron(np.diag(p[:d]).astype(complex), idler.data)
        return FockState(2, d, out,
                         trace_deficit=state.trace_deficit + leak * tr_in,
                         check=False)

    # bath representation large enough for the thermal tail
    d_b = d
    while d_b < max_cutoff:
        _, tail = _thermal_diag(n_b, d_b)
        if tail <= LEAK_ESCALATE:
            break
        d_b += CUTOFF_STEP
    p_th, tail = _thermal_diag(n_b, d_b)
    if tail > LEAK_HARD:
        raise CutoffTooSmallError(
            f"thermal tail {tail:.3e} above {LEAK_HARD} at bath cutoff {d_b}"
        )

    theta = math.asin(eta)
    u = _bs_unitary(theta, math.pi / 2.0, d_b)
    # modes of u are (signal, bath): u4[s', b', s, b]
    u4 = u.reshape(d_b, d_b, d_b, d_b)

    rho = state.data.reshape(d, d, d, d)  # [s, i, s~, i~]
    rho_flat = rho.reshape(d, d * d * d)
    out = np.zeros((d, d, d, d), dtype=complex)  # [b', i, b'~, i~]
    for m_lvl in range(d_b):
        w = p_th[m_lvl]
        if w < 1e-18:
            continue
        for n_lvl in range(d_b):
            # K[b', s] = u4[n, b', s, m], keep b' < d, s < d
            k = u4[n_lvl, :d, :d, m_lvl]
            if np.abs(k).max() < 1e-14:
                continue
            t1 = (k @ rho_flat).reshape(d, d, d, d)  # [b', i, s~, i~]
            # contract s~ against conj K: out += w * t1 kc^T on axis 2
            t1 = np.transpose(t1, (0, 1, 3, 2)).reshape(d * d * d, d)
            t2 = (t1 @ k.conj().T).reshape(d, d, d, d)  # [b', i, i~, b'~]
            out += w * np.transpose(t2, (0, 1, 3, 2))
    out = hermitize(out.reshape(d * d, d * d))
    leak = max(tr_in - float(out.trace().real), 0.0)
    return FockState(2, d, out,
                     trace_deficit=state.trace_deficit + leak, check=False)


# ---------------------------------------------------------------------------
# readout

def _mode_reduced(state: FockState, mode: int) -> np.ndarray:
    if not 0 <= int(mode) < state.modes:
        raise UsageError(f"mode {mode} outside state with {state.modes} modes")
    return reduce_modes(state, [int(mode)]).data


def vacuum_probability(state: FockState, mode: int) -> float:
    """P(0 photons) in one mode, marginalized over the rest."""
    return float(_mode_reduced(state, mode)[0, 0].real)


def parity_expectation(state: FockState, mode: int) -> float:
    """<(-1)^n> for one mode."""
    diag = np.real(np.diag(_mode_reduced(state, mode)))
    signs = (-1.0) ** np.arange(state.cutoff)
    return float(diag @ signs)


def mean_photon(state: FockState, mode: int) -> float:
    """<n> for one mode."""
    diag = np.real(np.diag(_mode_reduced(state, mode)))
    return float(diag @ np.arange(state.cutoff))
