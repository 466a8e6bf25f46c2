"""Closed-form dynamics of the qubit-state-dependent displaced oscillator.

Once the qubits are dressed and the single-qubit terms are dropped, every
computational branch z (a vector of Z eigenvalues) sees a driven oscillator

    H_z = eps'(z) b^dag b + M(z) (b + b^dag),
    eps'(z) = eps + sum_i f_i z_i,    M(z) = 1/2 sum_i g_i A_i z_i.

Its coherent amplitude runs counterclockwise on a circle of radius M/eps'
(for eps' > 0), and after a closed loop the branch picks up a phase equal to
twice the enclosed area. The functions here evaluate all of that directly,
branch by branch and mode by mode.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .hilbert import SystemSpec

BranchLabel = tuple[int, ...]
Segment = tuple[float, np.ndarray, float]  # (duration, Pauli-frame signs, drive sign)


@dataclass(frozen=True)
class BranchHamiltonian:
    eps_eff: float
    m_coeff: float
    mode_id: int = 0


@dataclass(frozen=True)
class DressingAngles:
    theta: np.ndarray
    sin: np.ndarray
    cos: np.ndarray
    a_coeff: np.ndarray


def dress(spec: SystemSpec) -> DressingAngles:
    """Dressing angles of the driven qubits and the effective drive matrix elements.

    For two-level qubits ``A_i = sin(theta_i)``. For transmons with finite
    anharmonicity ``A_i = -Omega_i eta_i / (Delta_i (Delta_i - eta_i))``,
    which vanishes at zero anharmonicity and tends to Omega_i/Delta_i as
    eta_i grows.
    """
    Delta = spec.Delta
    Omega = np.array(spec.Omega)
    theta = np.zeros(spec.n_qubits)
    a = np.zeros(spec.n_qubits)
    for i in range(spec.n_qubits):
        if spec.is_two_level(i):
            if Delta[i] == 0 and Omega[i] == 0:
                raise ValueError(f"qubit {i}: dressing undefined for Delta = Omega = 0")
            theta[i] = math.atan2(Omega[i], Delta[i])
            a[i] = math.sin(theta[i])
        else:
            eta = spec.eta[i]
            if Delta[i] == 0 or Delta[i] == eta:
                raise ValueError(f"transmon {i}: resonant detuning (Delta = 0 or Delta = eta)")
            theta[i] = math.atan2(Omega[i], Delta[i])
            a[i] = -Omega[i] * eta / (Delta[i] * (Delta[i] - eta))
    return DressingAngles(theta=theta, sin=np.sin(theta), cos=np.cos(theta), a_coeff=a)


def all_labels(n: int) -> np.ndarray:
    """All 2^n branch labels, ordered (+1,...,+1) first and (-1,...,-1) last."""
    return np.array(list(itertools.product((1, -1), repeat=n)), dtype=np.int64).reshape(-1, n)


class BranchTable(Mapping):
    """(eps', M) for every branch and mode, stored as dense arrays.

    Acts as a mapping BranchLabel -> list[BranchHamiltonian] (one per mode).
    """

    def __init__(self, labels: np.ndarray, eps_eff: np.ndarray, m_coeff: np.ndarray):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.eps_eff = np.asarray(eps_eff, dtype=float)
        self.m_coeff = np.asarray(m_coeff, dtype=float)
        self._index = {tuple(int(v) for v in row): r for r, row in enumerate(self.labels)}

    @classmethod
    def from_couplings(cls, eps: Sequence[float], f: np.ndarray, gA: np.ndarray) -> "BranchTable":
        """eps_k, dispersive f[i, k] and drive couplings gA[i, k] = g_ik A_i."""
        f = np.asarray(f, dtype=float)
        gA = np.asarray(gA, dtype=float)
        labels = all_labels(f.shape[0])
        eps_eff = np.asarray(eps, dtype=float)[None, :] + labels @ f
        m = 0.5 * labels @ gA
        return cls(labels, eps_eff, m)

    @property
    def n_qubits(self) -> int:
        return self.labels.shape[1]

    @property
    def n_modes(self) -> int:
        return self.eps_eff.shape[1]

    def row(self, label: Sequence[int]) -> int:
        return self._index[tuple(int(v) for v in label)]

    def __getitem__(self, label) -> list[BranchHamiltonian]:
        r = self.row(label)
        return [BranchHamiltonian(float(self.eps_eff[r, k]), float(self.m_coeff[r, k]), k) for k in range(self.n_modes)]

    def __iter__(self) -> Iterator[BranchLabel]:
        return (tuple(int(v) for v in row) for row in self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def select_modes(self, modes: Sequence[int]) -> "BranchTable":
        modes = list(modes)
        return BranchTable(self.labels, self.eps_eff[:, modes], self.m_coeff[:, modes])


def branch_hamiltonians(spec: SystemSpec, angles: DressingAngles | None = None, f_coeffs=None) -> BranchTable:
    """Per-branch, per-mode (eps', M) for the dressed, dispersively shifted model."""
    if angles is None:
        angles = dress(spec)
    if f_coeffs is None:
        f = np.zeros((spec.n_qubits, spec.n_modes))
    else:
        f = np.asarray(f_coeffs, dtype=float)
        if f.ndim == 1:
            f = f[:, None] if spec.n_modes == 1 else f[None, :]
    if f.shape != (spec.n_qubits, spec.n_modes):
        raise ValueError("f_coeffs must have one entry per (qubit, mode)")
    gA = spec.g * angles.a_coeff[:, None]
    return BranchTable.from_couplings(spec.eps, f, gA)


def evolve_closed_form(bh: BranchHamiltonian, t: float) -> tuple[complex, float]:
    """Displacement and phase after time t starting from vacuum.

    displacement = (M/eps')(1 - e^{i eps' t}) and
    phase = (M/eps')^2 (eps' t - sin eps' t); at eps' -> 0 the series limits
    -i M t and 0 are used.
    """
    e, m = float(bh.eps_eff), float(bh.m_coeff)
    y = e * t
    if abs(y) < kernels.SERIES_CUTOFF:
        h = -1j + y / 2 + 1j * y * y / 6 - y**3 / 24
        p = y / 6 - y**3 / 120
    else:
        h = (1 - complex(math.cos(y), math.sin(y))) / y
        p = (y - math.sin(y)) / (y * y)
    return m * t * h, m * m * t * t * p


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


def _label_str(label) -> str:
    return "".join("+" if v > 0 else "-" for v in label)


@dataclass
class TrajectoryResult:
    """Sampled phase-space paths for every branch and mode.

    ``samples[b, k, :]`` is the amplitude of mode k in branch b in the frame
    co-rotating with the accumulated free evolution. ``area`` is the shoelace
    area of the sampled polygon, ``phase`` the analytic branch phase summed
    over modes.
    """

    labels: np.ndarray
    times: np.ndarray
    samples: np.ndarray
    closure_residual: np.ndarray
    area: np.ndarray
    mode_phase: np.ndarray
    degenerate: np.ndarray = field(default=None)

    @property
    def phase(self) -> np.ndarray:
        return self.mode_phase.sum(axis=1)

    def branch(self, label) -> int:
        for r, row in enumerate(self.labels):
            if tuple(int(v) for v in row) == tuple(int(v) for v in label):
                return r
        raise KeyError(label)

    def to_csv(self, fh=None) -> str | None:
        """Write rows (branch, mode, t, re_b, im_b); returns text if fh is None."""
        own = fh is None
        buf = io.StringIO() if own else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["branch", "mode", "t", "re_b", "im_b"])
        for b, lab in enumerate(self.labels):
            name = _label_str(lab)
            for k in range(self.samples.shape[1]):
                for t, z in zip(self.times, self.samples[b, k]):
                    w.writerow([name, k, repr(float(t)), repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue() if own else None


@dataclass
class ConditionalGate:
    phases: dict
    residual_entanglement: dict
    gate_qubits: tuple[int, int] = (0, 1)

    @property
    def nonlinear_phase(self) -> float:
        return abs(self.signed_nonlinear_phase())

    def signed_nonlinear_phase(self, spectators: Sequence[int] | None = None) -> float:
        """phi(++) + phi(--) - phi(+-) - phi(-+) for the gate pair.

        Spectator qubits are held at ``spectators`` (default all +1).
        """
        n = len(next(iter(self.phases)))
        i, j = self.gate_qubits
        others = [q for q in range(n) if q not in (i, j)]
        spec_vals = [1] * len(others) if spectators is None else list(spectators)

        def lab(zi, zj):
            z = [0] * n
            z[i], z[j] = zi, zj
            for q, v in zip(others, spec_vals):
                z[q] = v
            return tuple(z)

        p = self.phases
        return p[lab(1, 1)] + p[lab(-1, -1)] - p[lab(1, -1)] - p[lab(-1, 1)]

    def max_residual(self) -> float:
        return max(self.residual_entanglement.values())

    def is_cz(self, phase_tol: float = 1e-6, closure_tol: float = 1e-6) -> bool:
        d = (self.nonlinear_phase - math.pi + math.pi) % (2 * math.pi) - math.pi
        return abs(d) < phase_tol and self.max_residual() < closure_tol


# ---------------------------------------------------------------------------
# tracing
# ---------------------------------------------------------------------------


def segment_arrays(table: BranchTable, segments: Sequence[Segment]):
    """Expand (duration, frame signs, drive sign) segments into per-trajectory arrays.

    Returns eps, m of shape (n_branches * n_modes, n_segments) and durations.
    In segment s branch z evolves with the table row of sigma_s * z and its
    M multiplied by the drive sign.
    """
    nb, nk = len(table), table.n_modes
    ns = len(segments)
    eps = np.empty((nb, nk, ns))
    m = np.empty((nb, nk, ns))
    dur = np.empty(ns)
    for s, (d, sigma, wsign) in enumerate(segments):
        sigma = np.asarray(sigma, dtype=np.int64)
        rows = [table.row(lab * sigma) for lab in table.labels]
        eps[:, :, s] = table.eps_eff[rows]
        m[:, :, s] = wsign * table.m_coeff[rows]
        dur[s] = d
    return eps.reshape(nb * nk, ns), m.reshape(nb * nk, ns), dur


def trace_segments(table: BranchTable, segments: Sequence[Segment], n_samples: int = 512) -> TrajectoryResult:
    """Trace every branch and mode through piecewise-constant segments."""
    eps, m, dur = segment_arrays(table, segments)
    samples, end, phase = kernels.trace_piecewise(eps, m, dur, n_samples)
    nb, nk = len(table), table.n_modes
    starts = np.concatenate([[0.0], np.cumsum(dur)[:-1]])
    times = (starts[:, None] + dur[:, None] * (np.arange(n_samples) / n_samples)[None, :]).reshape(-1)
    times = np.append(times, dur.sum())
    closed_pts = samples[:, :-1]
    area = kernels.shoelace_area(closed_pts)
    if n_samples % 2 == 0 and n_samples >= 4:
        # polygon error is O(h^2) on every smooth arc; one Richardson step removes it
        coarse = kernels.shoelace_area(closed_pts[:, ::2])
        area = (4.0 * area - coarse) / 3.0
    area = area.reshape(nb, nk)
    degenerate = np.any((np.abs(eps) < 1e-14) & (np.abs(m) > 0), axis=1).reshape(nb, nk)
    return TrajectoryResult(
        labels=table.labels.copy(),
        times=times,
        samples=samples.reshape(nb, nk, -1),
        closure_residual=np.abs(end).reshape(nb, nk),
        area=area,
        mode_phase=phase.reshape(nb, nk),
        degenerate=degenerate,
    )


def gate_from_trajectory(traj: TrajectoryResult, gate_qubits=(0, 1)) -> ConditionalGate:
    phases = {tuple(int(v) for v in lab): float(p) for lab, p in zip(traj.labels, traj.phase)}
    resid = {tuple(int(v) for v in lab): float(np.sqrt(np.sum(traj.closure_residual[b] ** 2)))
             for b, lab in enumerate(traj.labels)}
    return ConditionalGate(phases=phases, residual_entanglement=resid, gate_qubits=tuple(gate_qubits))


def run_gate(spec: SystemSpec, schedule, modes: Sequence[int] | None = None, f_coeffs=None,
             n_samples: int = 512, table: BranchTable | None = None):
    """Evolve every branch under a pulse schedule or a plain duration.

    ``schedule`` is either a float (free evolution for that long) or an object
    with a ``segments(n_qubits)`` method such as :class:`ccrlab.flowers.PulseSchedule`.
    Returns (ConditionalGate, TrajectoryResult). Branches with eps' = 0 do not
    close; they are reported through the residuals and ``degenerate`` flags.
    """
    if table is None:
        table = branch_hamiltonians(spec, f_coeffs=f_coeffs)
    if modes is not None:
        table = table.select_modes(modes)
    if hasattr(schedule, "segments"):
        segments = schedule.segments(table.n_qubits)
    else:
        T = float(schedule)
        if T <= 0:
            raise ValueError("gate duration must be positive")
        segments = [(T, np.ones(table.n_qubits, dtype=np.int64), 1.0)]
    traj = trace_segments(table, segments, n_samples)
    return gate_from_trajectory(traj), traj


def cz_time(spec: SystemSpec, n: int = 1) -> tuple[float, float]:
    """Gate time and detuning of the single-mode CZ with n full loops.

    Closing n circles needs eps tau = 2 pi n; the pi conditional phase then
    requires tau = pi sqrt(n / (g1 g2 A1 A2)).
    """
    a = dress(spec).a_coeff
    s = spec.g[0, 0] * a[0] * spec.g[1, 0] * a[1]
    if s <= 0:
        raise ValueError("CZ condition needs g1 A1 g2 A2 > 0")
    tau = math.pi * math.sqrt(n / s)
    return tau, 2 * math.pi * n / tau


def qubit_mediator_phase(M: float, eps: float) -> tuple[float, float]:
    """Gate phase and time when the mediator is a two-level system.

    The mediator returns to its ground state after pi / sqrt(M^2 + eps^2/4),
    leaving the phase pi (1 - eps / sqrt(eps^2 + 4 M^2)).
    """
    Mp = math.hypot(M, eps / 2)
    if Mp == 0:
        raise ValueError("M and eps cannot both vanish")
    return math.pi * (1 - eps / math.sqrt(eps * eps + 4 * M * M)), math.pi / Mp


def integer_conditions_ok(n_eps: int, n1: int, n2: int) -> bool:
    """Parity and non-degeneracy of an integer triple."""
    if (n_eps + n1 + n2) % 2:
        return False
    return all(n_eps + s1 * n1 + s2 * n2 != 0 for s1 in (1, -1) for s2 in (1, -1))


def integers_phase(spec: SystemSpec, n_eps: int, n1: int, n2: int, tau: float, f_coeffs=None) -> ConditionalGate:
    """Branch phases of an undecoupled gate whose durations satisfy the integer conditions.

    When eps tau = pi n_eps and f_i tau = pi n_i with a valid triple, every
    branch closes and acquires M^2 tau / eps'. Phases are evaluated with the
    exact open-path expression, so a mistuned tau shows up as nonzero
    residuals rather than being hidden.
    """
    if not integer_conditions_ok(n_eps, n1, n2):
        raise ValueError(f"invalid integer triple ({n_eps}, {n1}, {n2})")
    gate, _ = run_gate(spec, tau, f_coeffs=f_coeffs, n_samples=1)
    return gate
