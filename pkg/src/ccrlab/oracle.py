"""Brute-force truncated-Fock-space propagation used to check the closed forms.

Nothing here goes through the branch tables or the circle formulas: the
effective Hamiltonian is assembled as a matrix on qubits x Fock space and
evolved with exact exponentials, pulses are applied as explicit X operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hilbert import HilbertSpec, SystemSpec, expm_hermitian, fock_cutoff_for, lowering_operators, pauli


@dataclass(frozen=True)
class OracleResult:
    """Per-branch phase, final coherent amplitude(s) and leakage out of |z', vac>."""

    phases: dict
    amplitudes: dict
    leakage: dict

    def nonlinear_phase(self, gate_qubits=(0, 1), spectators: Sequence[int] | None = None) -> float:
        n = len(next(iter(self.phases)))
        i, j = gate_qubits
        others = [q for q in range(n) if q not in (i, j)]
        vals = [1] * len(others) if spectators is None else list(spectators)

        def lab(a, b):
            z = [0] * n
            z[i], z[j] = a, b
            for q, v in zip(others, vals):
                z[q] = v
            return tuple(z)

        p = self.phases
        return p[lab(1, 1)] + p[lab(-1, -1)] - p[lab(1, -1)] - p[lab(-1, 1)]

    def max_closure(self) -> float:
        return max(float(np.max(np.abs(a))) for a in self.amplitudes.values())


def _qubit_state(z: Sequence[int]) -> tuple[int, ...]:
    # Z = 2n - 1: excited level carries Z = +1
    return tuple(1 if v > 0 else 0 for v in z)


def effective_operators(n_qubits: int, eps: Sequence[float], f: np.ndarray, gA: np.ndarray, cutoff: int):
    """Matrices for H = sum_k eps_k n_k + sum_ik f_ik Z_i n_k and the drive sum_ik gA_ik Z_i (b_k + b_k^dag) / 2."""
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    f = np.asarray(f, dtype=float).reshape(n_qubits, eps.size)
    gA = np.asarray(gA, dtype=float).reshape(n_qubits, eps.size)
    space = HilbertSpec(qubit_levels=[2] * n_qubits, fock_cutoff=[cutoff] * eps.size)
    ops = lowering_operators(space)
    Zs = [pauli(space, i, "z") for i in range(n_qubits)]
    Xs = [pauli(space, i, "x") for i in range(n_qubits)]
    H0 = np.zeros((space.dim, space.dim), dtype=complex)
    drive = np.zeros_like(H0)
    for k in range(eps.size):
        b = ops[n_qubits + k]
        n = b.conj().T @ b
        H0 += eps[k] * n
        for i in range(n_qubits):
            if f[i, k]:
                H0 += f[i, k] * Zs[i] @ n
            if gA[i, k]:
                drive += 0.5 * gA[i, k] * Zs[i] @ (b + b.conj().T)
    return space, H0, drive, Xs, ops[n_qubits:]


def propagate_segments(n_qubits: int, eps, f, gA, segments, cutoff: int | None = None,
                       labels: Sequence[Sequence[int]] | None = None) -> OracleResult:
    """Evolve every branch |z> x |vac> through (duration, flip mask, drive sign) segments.

    Before segment s the qubits whose cumulative flip mask changed get an X
    pulse; ``segments`` uses the same frame-sign convention as
    :func:`ccrlab.phasespace.segment_arrays`. A final X restores the labels.
    """
    if cutoff is None:
        ga = np.abs(np.asarray(gA, dtype=float))
        e = np.min(np.abs(np.atleast_1d(eps)) - np.sum(np.abs(np.asarray(f, dtype=float)), axis=0))
        amp = 2.0 * float(np.max(ga.sum(axis=0))) / max(e, 1e-3)
        cutoff = min(fock_cutoff_for(amp), 80)
    space, H0, drive, Xs, modes = effective_operators(n_qubits, eps, f, gA, cutoff)
    if labels is None:
        labels = [tuple(1 if (r >> (n_qubits - 1 - q)) & 1 == 0 else -1 for q in range(n_qubits))
                  for r in range(2**n_qubits)]
    n_modes = len(modes)
    vac = (0,) * n_modes
    phases, amps, leak = {}, {}, {}
    cache = {}
    for z in labels:
        psi = space.basis(_qubit_state(z) + vac)
        current = np.ones(n_qubits, dtype=int)
        for dur, sigma, wsign in segments:
            sigma = np.asarray(sigma, dtype=int)
            for q in np.flatnonzero(sigma != current):
                psi = Xs[q] @ psi
            current = sigma
            key = (float(dur), float(wsign))
            if key not in cache:
                cache[key] = expm_hermitian(H0 + wsign * drive, dur)
            psi = cache[key] @ psi
        for q in np.flatnonzero(current != 1):
            psi = Xs[q] @ psi
        ref = space.index(_qubit_state(z) + vac)
        overlap = psi[ref]
        phases[tuple(z)] = float(np.angle(overlap))
        amps[tuple(z)] = np.array([np.vdot(psi, b @ psi) for b in modes])
        leak[tuple(z)] = float(max(0.0, 1.0 - abs(overlap) ** 2))
    return OracleResult(phases, amps, leak)


def unwrap_to(reference: dict, phases: dict) -> dict:
    """Shift oracle phases (defined mod 2 pi) onto the branch of a reference dict."""
    out = {}
    for k, v in phases.items():
        r = reference[k]
        out[k] = v + 2 * math.pi * round((r - v) / (2 * math.pi))
    return out


def oracle_for_spec(spec: SystemSpec, schedule, f_coeffs=None, cutoff: int | None = None,
                    semantics: str | None = None) -> OracleResult:
    """Fock-space check of a gate: ``schedule`` is a duration or a pulse schedule."""
    from .phasespace import dress

    a = dress(spec).a_coeff
    gA = spec.g * a[:, None]
    f = np.zeros_like(gA) if f_coeffs is None else np.asarray(f_coeffs, dtype=float).reshape(gA.shape)
    if hasattr(schedule, "segments"):
        segs = schedule.segments(spec.n_qubits, semantics) if semantics else schedule.segments(spec.n_qubits)
    else:
        segs = [(float(schedule), np.ones(spec.n_qubits, dtype=int), 1.0)]
    return propagate_segments(spec.n_qubits, spec.eps, f, gA, segs, cutoff)


def single_oscillator(eps_eff: Sequence[float], m: Sequence[float], durations: Sequence[float],
                      cutoff: int = 40) -> tuple[complex, float]:
    """One driven oscillator, H_s = eps_s n + m_s (b + b^dag) on consecutive intervals.

    Returns (final <b>, phase of <vac|U|vac>).
    """
    space = HilbertSpec(fock_cutoff=[cutoff])
    b = lowering_operators(space)[0]
    n = b.conj().T @ b
    x = b + b.conj().T
    psi = space.basis([0])
    for e, mm, d in zip(eps_eff, m, durations):
        psi = expm_hermitian(e * n + mm * x, d) @ psi
    return complex(np.vdot(psi, b @ psi)), float(np.angle(psi[0]))


@dataclass(frozen=True)
class GateComparison:
    tau: float
    eps: float
    closed_phases: dict
    oracle_phases: dict
    max_phase_error: float
    closed_closure: float
    oracle_closure: float
    closed_nonlinear_phase: float
    oracle_nonlinear_phase: float


def cz_gate_comparison(spec: SystemSpec, n_loops: int = 1, cutoff: int | None = None) -> GateComparison:
    """Single-mode CZ (f = 0, eps tau = 2 pi n) from the circle formulas and from Fock propagation.

    The mode frequency is moved to omega_d + eps so that the drive detunings,
    and hence the dressing, stay as given.
    """
    from .phasespace import cz_time, run_gate

    tau, eps = cz_time(spec, n_loops)
    s = spec.replace(nu=(spec.omega_d + eps,))
    gate, _ = run_gate(s, tau, n_samples=8)
    orc = oracle_for_spec(s, tau, cutoff=cutoff)
    ph = unwrap_to(gate.phases, orc.phases)
    err = max(abs(ph[k] - gate.phases[k]) for k in gate.phases)
    return GateComparison(tau, eps, dict(gate.phases), ph, float(err), gate.max_residual(), orc.max_closure(),
                          gate.signed_nonlinear_phase(), orc.nonlinear_phase())
