"""Gaussian covariance-matrix representation of bosonic circuits.

Quadrature ordering is (q1, p1, ..., qn, pn) with hbar = 1, so the
vacuum covariance is I/2. Gaussian gates act exactly: mean -> S mean + d,
cov -> S cov S^T. This gives a truncation-free cross-check for the dense
Fock simulator and an exact fast path for circuits made only of Gaussian
gates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import UsageError, ValidationError
from .fock import BosonicGate

SYM_TOL = 1e-10
PHYS_TOL = -1e-9


def _omega(n: int) -> np.ndarray:
    """Symplectic form for n modes in (q, p) interleaved ordering."""
    w = np.zeros((2 * n, 2 * n))
    for i in range(n):
        w[2 * i, 2 * i + 1] = 1.0
        w[2 * i + 1, 2 * i] = -1.0
    return w


@dataclass
class GaussianMoments:
    """First and second moments of an n-mode state."""

    modes: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.modes = int(self.modes)
        if self.modes < 1:
            raise UsageError("need at least one mode")
        n2 = 2 * self.modes
        self.mean = np.asarray(self.mean, dtype=float).reshape(n2)
        self.cov = np.asarray(self.cov, dtype=float)
        if self.cov.shape != (n2, n2):
            raise ValidationError(
                f"covariance shape {self.cov.shape}, expected {(n2, n2)}"
            )
        if np.abs(self.cov - self.cov.T).max() > SYM_TOL:
            raise ValidationError("covariance not symmetric")

    def validate(self) -> "GaussianMoments":
        """Check the uncertainty relation cov + i Omega/2 >= 0."""
        m = self.cov + 0.5j * _omega(self.modes)
        wmin = np.linalg.eigvalsh(m).min()
        if wmin < PHYS_TOL:
            raise ValidationError(
                f"uncertainty relation violated: min eigenvalue {wmin:.3e}"
            )
        return self


def vacuum_moments(modes: int) -> GaussianMoments:
    n = int(modes)
    return GaussianMoments(n, np.zeros(2 * n), 0.5 * np.eye(2 * n))


def thermal_moments(n_bar: float) -> GaussianMoments:
    n_bar = float(n_bar)
    if n_bar < 0:
        raise UsageError(f"mean occupation {n_bar} negative")
    return GaussianMoments(1, np.zeros(2), (n_bar + 0.5) * np.eye(2))


def tensor_moments(a: GaussianMoments, b: GaussianMoments) -> GaussianMoments:
    n = a.modes + b.modes
    mean = np.concatenate([a.mean, b.mean])
    cov = np.zeros((2 * n, 2 * n))
    cov[:2 * a.modes, :2 * a.modes] = a.cov
    cov[2 * a.modes:, 2 * a.modes:] = b.cov
    return GaussianMoments(n, mean, cov)


def reduce_moments(m: GaussianMoments, keep: Sequence[int]) -> GaussianMoments:
    keep = sorted({int(k) for k in keep})
    if not keep:
        raise UsageError("keep must be non-empty")
    if keep[0] < 0 or keep[-1] >= m.modes:
        raise UsageError(f"keep {keep} out of range for {m.modes} modes")
    idx = []
    for k in keep:
        idx += [2 * k, 2 * k + 1]
    return GaussianMoments(len(keep), m.mean[idx], m.cov[np.ix_(idx, idx)])


def _rot2(c: complex) -> np.ndarray:
    """2x2 block for a complex annihilation-operator coefficient."""
    return np.array([[c.real, -c.imag], [c.imag, c.real]])


def _conj2(c: complex) -> np.ndarray:
    """2x2 block for a creation-operator coefficient (a' = ... + c b^dag)."""
    return np.array([[c.real, c.imag], [c.imag, -c.real]])


def gate_symplectic(gate: BosonicGate) -> tuple[np.ndarray, np.ndarray]:
    """(S, d) acting on the gate's own modes in listed order."""
    kind, p = gate.kind, gate.params
    if kind == "displacement":
        alpha = p[0] + 1j * p[1]
        d = math.sqrt(2.0) * np.array([alpha.real, alpha.imag])
        return np.eye(2), d
    if kind == "phase_rotation":
        phi = p[0]
        return _rot2(np.exp(1j * phi)), np.zeros(2)
    if kind == "beam_splitter":
        theta, phi = p
        c, s = math.cos(theta), math.sin(theta)
        blk = np.zeros((4, 4))
        blk[:2, :2] = c * np.eye(2)
        blk[:2, 2:] = _rot2(np.exp(1j * phi) * s)
        blk[2:, :2] = _rot2(-np.exp(-1j * phi) * s)
        blk[2:, 2:] = c * np.eye(2)
        return blk, np.zeros(4)
    if kind == "two_mode_squeeze":
        r, phi = p
        ch, sh = math.cosh(r), math.sinh(r)
        blk = np.zeros((4, 4))
        blk[:2, :2] = ch * np.eye(2)
        blk[:2, 2:] = _conj2(np.exp(1j * phi) * sh)
        blk[2:, :2] = _conj2(np.exp(1j * phi) * sh)
        blk[2:, 2:] = ch * np.eye(2)
        return blk, np.zeros(4)
    if kind == "controlled_phase":
        s = p[0]
        blk = np.eye(4)
        blk[1, 2] = s   # p_a += s q_b
        blk[3, 0] = s   # p_b += s q_a
        return blk, np.zeros(4)
    raise UsageError(f"unknown gate kind {kind!r}")  # pragma: no cover


def apply_gate_moments(m: GaussianMoments,
                       gate: BosonicGate) -> GaussianMoments:
    for t in gate.modes:
        if not 0 <= t < m.modes:
            raise UsageError(f"gate mode {t} outside state with "
                             f"{m.modes} modes")
    s_loc, d_loc = gate_symplectic(gate)
    n2 = 2 * m.modes
    s = np.eye(n2)
    d = np.zeros(n2)
    idx = []
    for t in gate.modes:
        idx += [2 * t, 2 * t + 1]
    s[np.ix_(idx, idx)] = s_loc
    d[idx] = d_loc
    return GaussianMoments(m.modes, s @ m.mean + d, s @ m.cov @ s.T)


def gaussian_moments_from_circuit(gates: Sequence[BosonicGate],
                                  modes: int) -> GaussianMoments:
    """Propagate vacuum through a circuit of Gaussian gates."""
    m = vacuum_moments(modes)
    for g in gates:
        m = apply_gate_moments(m, g)
    return m


def illumination_moments(m: GaussianMoments, eta: float,
                         n_b: float) -> GaussianMoments:
    """Moments-level twin of the Fock illumination channel.

    Input modes (signal, idler); output modes (returned, idler).
    """
    eta = float(eta)
    n_b = float(n_b)
    if m.modes != 2:
        raise UsageError("illumination channel expects (signal, idler)")
    if not 0.0 <= eta <= 1.0:
        raise UsageError(f"reflectivity {eta} outside [0, 1]")
    if n_b < 0:
        raise UsageError(f"background occupation {n_b} negative")
    # order modes (signal, idler, bath) then mix (signal, bath)
    big = tensor_moments(m, thermal_moments(n_b))
    bs = BosonicGate("beam_splitter", (0, 2), (math.asin(eta), math.pi / 2.0))
    big = apply_gate_moments(big, bs)
    out = reduce_moments(big, [1, 2])     # (idler, bath->returned)
    # reorder to (returned, idler)
    perm = [2, 3, 0, 1]
    return GaussianMoments(2, out.mean[perm], out.cov[np.ix_(perm, perm)])


def vacuum_overlap_gaussian(m: GaussianMoments) -> float:
    """<0...0| rho |0...0> from the moments.

    det(cov + I/2)^(-1/2) exp(-mean^T (cov + I/2)^(-1) mean / 2).
    """
    n2 = 2 * m.modes
    a = m.cov + 0.5 * np.eye(n2)
    sign, logdet = np.linalg.slogdet(a)
    if sign <= 0:
        raise ValidationError("covariance + I/2 not positive definite")
    sol = np.linalg.solve(a, m.mean)
    val = math.exp(-0.5 * float(m.mean @ sol) - 0.5 * logdet)
    return float(val)


def mean_photon_moments(m: GaussianMoments, mode: int) -> float:
    """<n> of one mode from its quadrature moments."""
    mode = int(mode)
    if not 0 <= mode < m.modes:
        raise UsageError(f"mode {mode} outside state with {m.modes} modes")
    i = 2 * mode
    return float(0.5 * (m.cov[i, i] + m.cov[i + 1, i + 1]
                        + m.mean[i] ** 2 + m.mean[i + 1] ** 2 - 1.0))


def total_photon_moments(m: GaussianMoments) -> float:
    return sum(mean_photon_moments(m, k) for k in range(m.modes))
