"""Chains of coupled cavities: normal modes, pair feasibility and spectator errors.

A tight-binding chain h = nu I + J (nearest-neighbour hopping) has eigenmodes
b_k with frequencies nu_k; a qubit sitting on cavity c couples to mode k with
g_ik = g_i eta[c, k]. Each simultaneous two-qubit gate uses its own mode.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .flowers import FLIP_Z, make_flower_schedule, multimode_closure_check, solve_cz_flower
from .hilbert import SystemSpec
from .perturbation import jzz_equal_eta, zero_zz_cavity_frequency, zz_numerator_equal_eta
from .phasespace import BranchTable, ConditionalGate, dress, run_gate, segment_arrays
from . import kernels

MAX_SCALING_QUBITS = 10


# ---------------------------------------------------------------------------
# chain and modes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainSpec:
    """N cavities at nu_local with hopping J; attachments are (qubit, cavity, g)."""

    N_cavities: int
    nu_local: float
    J: float
    attachments: tuple[tuple[int, int, float], ...] = ()
    boundary: str = "open"

    def __post_init__(self):
        if int(self.N_cavities) != self.N_cavities or self.N_cavities < 1:
            raise ValueError("N_cavities must be a positive integer")
        if self.boundary not in ("open", "periodic"):
            raise ValueError("boundary must be 'open' or 'periodic'")
        att = tuple((int(q), int(c), float(g)) for q, c, g in self.attachments)
        qubits = [a[0] for a in att]
        if len(set(qubits)) != len(qubits):
            raise ValueError("each qubit attaches to exactly one cavity")
        for q, c, _ in att:
            if q < 0 or not 0 <= c < self.N_cavities:
                raise ValueError(f"attachment ({q}, {c}) references a missing cavity")
        object.__setattr__(self, "attachments", att)

    @property
    def n_qubits(self) -> int:
        return 1 + max((a[0] for a in self.attachments), default=-1)

    def hopping_matrix(self) -> np.ndarray:
        n = self.N_cavities
        h = np.diag(np.full(n, float(self.nu_local)))
        for i in range(n - 1):
            h[i, i + 1] = h[i + 1, i] = self.J
        if self.boundary == "periodic" and n > 2:
            h[0, n - 1] = h[n - 1, 0] = self.J
        return h


@dataclass(frozen=True)
class ModeStructure:
    """Eigenfrequencies (ascending), cavity-by-mode matrix eta and qubit couplings g_ik."""

    nu_k: np.ndarray
    eta: np.ndarray
    g_ik: np.ndarray
    qubit_cavity: tuple[int, ...] = ()

    def orthogonality_error(self) -> float:
        return float(np.max(np.abs(self.eta.T @ self.eta - np.eye(len(self.nu_k)))))

    def spacing_stats(self) -> dict[str, float]:
        if len(self.nu_k) < 2:
            return {"min": math.inf, "mean": math.inf, "max": math.inf}
        d = np.diff(self.nu_k)
        return {"min": float(d.min()), "mean": float(d.mean()), "max": float(d.max())}

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("k,nu_k," + ",".join(f"g_{i}" for i in range(self.g_ik.shape[0])) + "\n")
        for k, nu in enumerate(self.nu_k):
            out.write(f"{k},{nu!r}" + "".join(f",{float(v)!r}" for v in self.g_ik[:, k]) + "\n")
        return out.getvalue()


def analytic_open_chain(N: int, nu: float, J: float) -> tuple[np.ndarray, np.ndarray]:
    """nu + 2 J cos(k pi/(N+1)) and sqrt(2/(N+1)) sin(i k pi/(N+1)), sorted by frequency."""
    k = np.arange(1, N + 1)
    freqs = nu + 2 * J * np.cos(k * np.pi / (N + 1))
    i = np.arange(1, N + 1)[:, None]
    vecs = math.sqrt(2.0 / (N + 1)) * np.sin(i * k[None, :] * np.pi / (N + 1))
    order = np.argsort(freqs, kind="stable")
    return freqs[order], vecs[:, order]


def diagonalize_chain(chain: ChainSpec) -> ModeStructure:
    h = chain.hopping_matrix()
    nu_k, eta = np.linalg.eigh(h)
    # fix signs so the first non-negligible cavity amplitude is positive
    for k in range(eta.shape[1]):
        col = eta[:, k]
        j = int(np.argmax(np.abs(col) > 1e-9))
        if col[j] < 0:
            eta[:, k] = -col
    nq = chain.n_qubits
    g = np.zeros((nq, len(nu_k)))
    cav = [0] * nq
    for q, c, gq in chain.attachments:
        g[q] = gq * eta[c]
        cav[q] = c
    return ModeStructure(nu_k=nu_k, eta=eta, g_ik=g, qubit_cavity=tuple(cav))


# ---------------------------------------------------------------------------
# simultaneous pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriveParams:
    """Qubit frequencies and drive amplitudes; ``eps`` is each pair's drive detuning from its mode."""

    omega: tuple[float, ...]
    Omega: tuple[float, ...]
    eps: tuple[float, ...] | float = 0.0


@dataclass
class PairMargins:
    pair: tuple[int, int, int]
    drive_frequency: float
    coupling_to_spacing: float
    drive_collision: float
    worst_mode: int


@dataclass
class FeasibilityReport:
    pairs: list[PairMargins]
    dispersive_margin: float
    dispersive_worst: tuple[int, int, int, int] | None
    factor: float
    feasible: bool

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"feasible: {self.feasible}\n")
        out.write(f"factor: {self.factor:g}\n")
        out.write(f"dispersive_margin: {self.dispersive_margin:.6g}\n")
        for p in self.pairs:
            i, j, k = p.pair
            out.write(f"pair_{i}_{j}_mode_{k}_coupling_to_spacing: {p.coupling_to_spacing:.6g}\n")
            out.write(f"pair_{i}_{j}_mode_{k}_drive_collision: {p.drive_collision:.6g}\n")
        return out.getvalue()


def _check_pairs(pairs, n_modes: int, n_qubits: int):
    seen_q, seen_k = set(), set()
    for i, j, k in pairs:
        if i == j:
            raise ValueError(f"pair ({i}, {j}) repeats a qubit")
        for q in (i, j):
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q} is not attached to the chain")
            if q in seen_q:
                raise ValueError(f"qubit {q} appears in more than one pair")
            seen_q.add(q)
        if not 0 <= k < n_modes:
            raise ValueError(f"mode {k} does not exist")
        if k in seen_k:
            raise ValueError(f"mode {k} is assigned to more than one pair")
        seen_k.add(k)


def pair_assignment_check(modes: ModeStructure, pairs: Sequence[tuple[int, int, int]], drive: DriveParams,
                          factor: float = 10.0) -> FeasibilityReport:
    """Margins for driving every pair near its own mode at the same time.

    coupling_to_spacing: distance from the pair's drive to the nearest other
    mode over the strongest "good" coupling g_ik Omega_i / Delta_i of the pair.
    drive_collision: distance to the nearest other pair's drive over the same
    coupling. dispersive_margin: min over (i, j, p, k) of
    |omega_i + nu_p - omega_j - nu_k| / (g_ik g_jp / min detuning); only the
    flip-flop processes with i != j or p != k enter.
    """
    pairs = [tuple(int(v) for v in p) for p in pairs]
    nq, nm = modes.g_ik.shape
    _check_pairs(pairs, nm, nq)
    omega = np.asarray(drive.omega, dtype=float)
    Omega = np.asarray(drive.Omega, dtype=float)
    if omega.size != nq or Omega.size != nq:
        raise ValueError("omega and Omega need one entry per attached qubit")
    eps = np.broadcast_to(np.asarray(drive.eps, dtype=float), (len(pairs),))
    wd = np.array([modes.nu_k[k] + e for (_, _, k), e in zip(pairs, eps)])
    out = []
    for p, (i, j, k) in enumerate(pairs):
        s = max(abs(modes.g_ik[q, k] * Omega[q] / (omega[q] - wd[p])) for q in (i, j))
        others = [abs(wd[p] - modes.nu_k[r]) for r in range(nm) if r != k]
        near = min(others) if others else math.inf
        worst = -1 if not others else [r for r in range(nm) if r != k][int(np.argmin(others))]
        coll = [abs(wd[p] - wd[q]) for q in range(len(pairs)) if q != p]
        ratio = (lambda d: math.inf if s == 0 else d / s)
        out.append(PairMargins((i, j, k), float(wd[p]), ratio(near), ratio(min(coll) if coll else math.inf), worst))
    # dispersive flip-flop resonances sigma_i^+ b_k sigma_j^- b_p^dag
    g = modes.g_ik
    det = omega[:, None] - modes.nu_k[None, :]
    margin, arg = math.inf, None
    for i, j in itertools.product(range(nq), repeat=2):
        for k, p in itertools.product(range(nm), repeat=2):
            if i == j and k == p:
                continue
            gg = abs(g[i, k] * g[j, p])
            if gg == 0:
                continue
            rhs = max(gg / abs(det[i, k]), gg / abs(det[j, p]))
            lhs = abs(omega[i] + modes.nu_k[p] - omega[j] - modes.nu_k[k])
            r = lhs / rhs
            if r < margin:
                margin, arg = r, (i, j, p, k)
    feasible = margin > factor and all(m.coupling_to_spacing > factor and m.drive_collision > factor for m in out)
    return FeasibilityReport(out, float(margin), arg, float(factor), bool(feasible))


# ---------------------------------------------------------------------------
# error estimates and the spectator scaling experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingParams:
    """N qubits on one mode with coupling g, detuning Delta and drive Omega."""

    N: int
    g: float
    Delta: float
    Omega: float
    eps0: float | None = None

    @property
    def eps(self) -> float:
        return self.g * self.Omega / self.Delta if self.eps0 is None else self.eps0


def infidelity_estimates(params: ScalingParams, scheme: str, case: str = "worst") -> float:
    """Unit-prefactor order-of-magnitude estimate of the spectator-induced infidelity.

    uncancelled and integers: (N g^2 / (Delta eps0))^2; flowers: (N g / Omega)^4.
    The average case replaces N by sqrt(N).
    """
    if case not in ("worst", "average"):
        raise ValueError("case must be 'worst' or 'average'")
    n = params.N if case == "worst" else math.sqrt(params.N)
    if scheme in ("uncancelled", "integers"):
        return (n * params.g**2 / (params.Delta * params.eps)) ** 2
    if scheme == "flowers":
        return (n * params.g / params.Omega) ** 4
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class BranchOverlaps:
    """<ideal_z|actual_z> factors for every branch, split into log-modulus and phase."""

    labels: np.ndarray
    log_modulus: np.ndarray
    phase_error: np.ndarray

    def pair_infidelity(self, a: int, b: int) -> float:
        """1 - |(<a> + <b>)/2|^2 for the equal superposition of branches a and b."""
        la, lb = self.log_modulus[a], self.log_modulus[b]
        d = self.phase_error[a] - self.phase_error[b]
        t = -np.expm1(2 * la) - np.expm1(2 * lb) - 2 * np.expm1(la + lb)
        return float(0.25 * t + math.exp(la + lb) * math.sin(0.5 * d) ** 2)

    def worst_pair(self) -> tuple[float, tuple[int, int]]:
        la = self.log_modulus
        ph = self.phase_error
        L = la[:, None] + la[None, :]
        t = -np.expm1(2 * la)[:, None] - np.expm1(2 * la)[None, :] - 2 * np.expm1(L)
        infid = 0.25 * t + np.exp(L) * np.sin(0.5 * (ph[:, None] - ph[None, :])) ** 2
        idx = np.unravel_index(int(np.argmax(infid)), infid.shape)
        return float(infid[idx]), (int(idx[0]), int(idx[1]))


def _final_states(table: BranchTable, segments):
    eps, m, dur = segment_arrays(table, segments)
    _, end, phase = kernels.trace_piecewise(eps, m, dur, 2)
    nb, nk = len(table), table.n_modes
    return end.reshape(nb, nk), phase.reshape(nb, nk).sum(axis=1)


def _overlaps(ideal: BranchTable, actual: BranchTable, segments) -> BranchOverlaps:
    i_end, i_ph = _final_states(ideal, segments)
    if np.max(np.abs(i_end)) > 1e-8:
        raise ValueError("the reference gate must return every branch to vacuum")
    a_end, a_ph = _final_states(actual, segments)
    # <vac| e^{i phi} D(alpha) |vac> = exp(i phi - |alpha|^2 / 2)
    logmod = -0.5 * np.sum(np.abs(a_end) ** 2, axis=1)
    return BranchOverlaps(actual.labels.copy(), logmod, a_ph - i_ph)


def _scaling_table(n_spec: int, g: float, Delta: float, Omega: float, eps: float, f_gate: bool,
                   f_spec: bool) -> BranchTable:
    n = n_spec + 2
    sin = Omega / math.hypot(Omega, Delta)
    f = np.zeros((n, 1))
    if f_gate:
        f[:2] = g * g / Delta
    if f_spec:
        f[2:] = g * g / Delta
    gA = np.zeros((n, 1))
    gA[:2, 0] = g * sin
    return BranchTable.from_couplings([eps], f, gA)


def _construction_rows(labels: np.ndarray, scheme: str) -> tuple[int, int]:
    """Two branches of the worst-case construction, gate qubits both +1."""
    n_spec = labels.shape[1] - 2
    up = np.ones(n_spec, dtype=int)
    if scheme == "flowers":
        # x = 0 from the spectators against the fully aligned state
        low = np.array([1 if q % 2 == 0 else -1 for q in range(n_spec)])
    else:
        low = -up
    rows = []
    for spect in (up, low):
        target = np.concatenate([[1, 1], spect])
        rows.append(int(np.flatnonzero(np.all(labels == target, axis=1))[0]))
    return rows[0], rows[1]


def scaling_branch_overlaps(scheme: str, n_spectators: int, lam: float, Delta: float = 10.0,
                            Omega: float = 1.0, P: int = 4) -> BranchOverlaps:
    """Exact per-branch overlaps with the spectator-free gate at small parameter lam = N g / Omega.

    N = n_spectators + 2 counts every qubit on the mode. uncancelled: one loop
    at eps tau = 2 pi, compared with the f = 0 gate. integers: closure assumed,
    phase M^2 tau / eps' compared with the gate-qubit-only eps'. flowers: the
    P-petal CZ schedule for the driven pair, global flips, compared with the
    same schedule without spectator shifts.
    """
    n_tot = n_spectators + 2
    if n_tot > MAX_SCALING_QUBITS:
        raise ValueError(f"branch budget exceeded: {n_tot} qubits > {MAX_SCALING_QUBITS}")
    g = lam * Omega / n_tot
    sin = Omega / math.hypot(Omega, Delta)
    gA = g * sin
    fq = g * g / Delta
    if scheme in ("uncancelled", "integers"):
        eps = 2 * gA
        tau = 2 * math.pi / eps
        actual = _scaling_table(n_spectators, g, Delta, Omega, eps, True, True)
        if scheme == "uncancelled":
            ideal = _scaling_table(n_spectators, g, Delta, Omega, eps, False, False)
            return _overlaps(ideal, actual, [(tau, np.ones(n_tot, dtype=np.int64), 1.0)])
        ideal = _scaling_table(n_spectators, g, Delta, Omega, eps, True, False)
        ph = tau * (actual.m_coeff[:, 0] ** 2 / actual.eps_eff[:, 0] - ideal.m_coeff[:, 0] ** 2 / ideal.eps_eff[:, 0])
        return BranchOverlaps(actual.labels.copy(), np.zeros(len(actual)), ph)
    if scheme == "flowers":
        pair = SystemSpec.from_detunings([Delta, Delta], [0.0], [g, g], Omega=[Omega, Omega])
        eps, _, _ = solve_cz_flower(pair, P, f_coeffs=[fq, fq], n_samples=2)
        seg = make_flower_schedule(P, eps).segments(n_tot)
        ideal = _scaling_table(n_spectators, g, Delta, Omega, eps, True, False)
        actual = _scaling_table(n_spectators, g, Delta, Omega, eps, True, True)
        return _overlaps(ideal, actual, seg)
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class ScalingResult:
    scheme: str
    lambdas: tuple[float, ...]
    n_spectators: tuple[int, ...]
    construction: dict[int, tuple[float, ...]]
    enumerated: dict[int, tuple[float, ...]]
    exponents: dict[int, float]
    enumerated_exponents: dict[int, float] = field(default_factory=dict)

    @property
    def exponent(self) -> float:
        return float(np.mean(list(self.exponents.values())))

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"scheme: {self.scheme}\n")
        out.write(f"exponent: {self.exponent:.6f}\n")
        for n in self.n_spectators:
            out.write(f"exponent_N{n}: {self.exponents[n]:.6f}\n")
            for lam, a, b in zip(self.lambdas, self.construction[n], self.enumerated[n]):
                out.write(f"infidelity_N{n}_lambda{lam:g}: {a:.6e} (worst pair {b:.6e})\n")
        return out.getvalue()


def _slope(x, y) -> float:
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def scaling_experiment(scheme: str, n_spectators: Sequence[int] = (4, 6, 8),
                       lambdas: Sequence[float] = (0.02, 0.04, 0.08), Delta: float = 10.0,
                       Omega: float = 1.0) -> ScalingResult:
    """Fit log(1 - F) against log(N g / Omega) from exact branch-by-branch evolution.

    The construction state is an equal superposition of two branches with the
    driven pair in |++>: spectators all up against all down (uncancelled,
    integers) or all up against a zero-sum pattern (flowers). The worst pair
    over all 2^N branches is reported alongside.
    """
    cons, enum, ex, ex_enum = {}, {}, {}, {}
    for n in n_spectators:
        c_row, e_row = [], []
        for lam in lambdas:
            ov = scaling_branch_overlaps(scheme, int(n), float(lam), Delta, Omega)
            a, b = _construction_rows(ov.labels, scheme)
            c_row.append(ov.pair_infidelity(a, b))
            e_row.append(ov.worst_pair()[0])
        cons[int(n)] = tuple(c_row)
        enum[int(n)] = tuple(e_row)
        ex[int(n)] = _slope(lambdas, c_row)
        ex_enum[int(n)] = _slope(lambdas, e_row)
    return ScalingResult(scheme, tuple(float(x) for x in lambdas), tuple(int(n) for n in n_spectators), cons, enum,
                         ex, ex_enum)


# ---------------------------------------------------------------------------
# gates through several modes
# ---------------------------------------------------------------------------


def chain_system(modes: ModeStructure, omega: Sequence[float], Omega: Sequence[float], omega_d: float,
                 qubits: Sequence[int] | None = None, eta=None) -> SystemSpec:
    """SystemSpec for the chosen qubits coupled to every chain mode."""
    qs = list(range(modes.g_ik.shape[0])) if qubits is None else list(qubits)
    return SystemSpec(omega=tuple(omega[q] for q in qs), nu=tuple(modes.nu_k), g=modes.g_ik[qs],
                      omega_d=omega_d, Omega=tuple(Omega[q] for q in qs), eta=eta)


@dataclass
class MultimodeGateReport:
    gate: ConditionalGate
    mode_closure: dict[int, float]
    mode_phase: dict[int, float]
    nonlinear_phase: float

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"nonlinear_phase: {self.nonlinear_phase:.15g}\n")
        out.write(f"max_residual: {self.gate.max_residual():.3e}\n")
        for k in sorted(self.mode_closure):
            out.write(f"mode_{k}_closure: {self.mode_closure[k]:.3e}\n")
            out.write(f"mode_{k}_nonlinear_phase: {self.mode_phase[k]:.15g}\n")
        return out.getvalue()


def multimode_gate_report(spec: SystemSpec, schedule, f_coeffs=None, n_samples: int = 64) -> MultimodeGateReport:
    """Run a (possibly pulsed) gate through every mode; per-mode closure and phase contributions."""
    gate, traj = run_gate(spec, schedule, f_coeffs=f_coeffs, n_samples=n_samples)
    closure = {k: float(np.max(traj.closure_residual[:, k])) for k in range(traj.closure_residual.shape[1])}
    phase = {}
    for k in range(traj.mode_phase.shape[1]):
        p = {tuple(int(v) for v in lab): float(traj.mode_phase[b, k]) for b, lab in enumerate(traj.labels)}
        phase[k] = ConditionalGate(p, {}, gate.gate_qubits).signed_nonlinear_phase()
    return MultimodeGateReport(gate, closure, phase, gate.signed_nonlinear_phase())


def esa_phase(s1: float, s2: float, eps_s: float, eps_a: float, tau: float) -> float:
    """s1 s2 tau (1/eps_s - 1/eps_a) with s_i = g_i A_i: the closed two-mode CZ phase."""
    return s1 * s2 * tau * (1.0 / eps_s - 1.0 / eps_a)


@dataclass
class TwoModeCZ:
    spec: SystemSpec
    eps_s: float
    eps_a: float
    tau: float
    n_a: int
    drive_scale: float
    phase: float
    g: tuple[float, float]

    def single_mode_time(self) -> float:
        a = dress(self.spec).a_coeff
        return math.pi / math.sqrt(abs(self.g[0] * a[0] * self.g[1] * a[1]))

    def slowdown(self) -> float:
        """tau over the single-mode time pi / sqrt(g1 g2 A1 A2) with the bare cavity couplings."""
        return self.tau / self.single_mode_time()


def two_mode_cz(omega: Sequence[float], g: Sequence[float], nu: float, g_tilde: float, Omega: Sequence[float],
                n_a: int, drive_range: tuple[float, float] = (1e-6, 50.0)) -> TwoModeCZ:
    """Single loop on the symmetric mode, n_a loops on the antisymmetric one, CZ via the drive scale.

    eps_s tau = 2 pi and eps_a = n_a eps_s with eps_a - eps_s = -2 g_tilde fix
    eps_s = 2 g_tilde / (1 - n_a) and the drive frequency.
    """
    if n_a == 1 or g_tilde == 0:
        raise ValueError("n_a = 1 or g_tilde = 0 leaves the two modes degenerate")
    eps_s = 2 * g_tilde / (1 - n_a)
    if eps_s <= 0:
        raise ValueError("choose the sign of n_a so that eps_s > 0")
    eps_a = n_a * eps_s
    tau = 2 * math.pi / eps_s
    chain = ChainSpec(2, nu, g_tilde, ((0, 0, g[0]), (1, 1, g[1])))
    modes = diagonalize_chain(chain)
    omega_d = nu + g_tilde - eps_s
    base = chain_system(modes, omega, Omega, omega_d)

    def phase(lam):
        s = base.replace(Omega=tuple(lam * o for o in base.Omega))
        gA = s.g * dress(s).a_coeff[:, None]
        tot = 0.0
        for z in itertools.product((1, -1), repeat=2):
            M = 0.5 * (np.array(z) @ gA)
            tot += z[0] * z[1] * float(np.sum(M**2 * tau / np.array(s.eps)))
        return tot

    grid = np.geomspace(*drive_range, 200)
    vals = [abs(phase(x)) - math.pi for x in grid]
    lam = None
    for a, b, va, vb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if va * vb <= 0:
            lam = brentq(lambda x: abs(phase(x)) - math.pi, a, b, xtol=1e-15, rtol=1e-15)
            break
    if lam is None:
        raise RuntimeError("no drive scale gives a pi phase")
    spec = base.replace(Omega=tuple(lam * o for o in base.Omega))
    return TwoModeCZ(spec, eps_s, eps_a, tau, int(n_a), float(lam), phase(lam), (float(g[0]), float(g[1])))


def adjacent_mode_closure(n_a: int, x_a: float, P: int = 4, eps_s: float = 1.0, M: float = 0.1,
                          style: str = "cpmg_shifted") -> float:
    """Closure residual of the mode at eps_a = n_a eps_s under the P-petal flower built for eps_s."""
    sched = make_flower_schedule(P, eps_s, style=style, action=FLIP_Z)
    eps_a = n_a * eps_s
    table = BranchTable(np.array([[1], [-1]]), np.array([[eps_a * (1 + x_a)], [eps_a * (1 - x_a)]]),
                        np.array([[M], [-M]]))
    return multimode_closure_check(table, sched)[0]


# ---------------------------------------------------------------------------
# square grid frequency pattern for zero always-on ZZ
# ---------------------------------------------------------------------------


@dataclass
class GridEdge:
    site_a: tuple[int, int]
    site_b: tuple[int, int]
    omega_a: float
    omega_b: float
    nu: float
    label: str
    jzz: float
    numerator: float


@dataclass
class GridAssignment:
    omegas: tuple[float, float, float, float]
    eta: float
    frequencies: dict[str, float]
    edges: list[GridEdge]

    def max_abs_jzz(self) -> float:
        return max(abs(e.jzz) for e in self.edges)

    def min_adjacent_separation(self) -> float:
        """Smallest |nu_e - nu_e'| over edges sharing a site."""
        by_site: dict = {}
        for e in self.edges:
            by_site.setdefault(e.site_a, []).append(e)
            by_site.setdefault(e.site_b, []).append(e)
        best = math.inf
        for es in by_site.values():
            for a, b in itertools.combinations(es, 2):
                best = min(best, abs(a.nu - b.nu))
        return best


def _site_type(x: int, y: int) -> int:
    return (x % 2) + 2 * (y % 2)


def grid_zero_zz_assignment(omegas: Sequence[float], eta: float, g: float = 0.05, size: int = 4) -> GridAssignment:
    """Mode frequencies on every edge of a periodic square lattice from the zero-ZZ roots.

    Transmon types 1..4 sit on a 2 x 2 unit cell (1 2 / 3 4). Horizontal
    bonds pair types (1,2) and (3,4), vertical bonds (1,3) and (2,4); each pair
    has two roots which alternate along the bond direction, giving the eight
    frequencies nu_1..nu_4 and their tilde partners.
    """
    w = [float(v) for v in omegas]
    if len(w) != 4:
        raise ValueError("four transmon frequencies are needed")
    if size < 2 or size % 2:
        raise ValueError("size must be an even number >= 2")
    names = {(0, 1): ("nu1", "nu3"), (2, 3): ("nu1~", "nu3~"), (0, 2): ("nu2", "nu4"), (1, 3): ("nu2~", "nu4~")}
    freq: dict[str, float] = {}
    for (i, j), (lo, hi) in names.items():
        roots = zero_zz_cavity_frequency(w[i], w[j], eta)
        usable = roots.usable()
        if len(usable) < 2:
            raise ValueError(f"types {i + 1},{j + 1}: need eta > |omega_i - omega_j| and two non-resonant roots")
        freq[lo], freq[hi] = usable[0], usable[1]
    edges = []
    for x, y in itertools.product(range(size), repeat=2):
        for dx, dy in ((1, 0), (0, 1)):
            a, b = (x, y), ((x + dx) % size, (y + dy) % size)
            ta, tb = _site_type(*a), _site_type(*b)
            key = (min(ta, tb), max(ta, tb))
            # the root alternates between consecutive bonds of the same type
            first = (x if dx else y) % 2 == 0
            label = names[key][0] if first else names[key][1]
            nu = freq[label]
            edges.append(GridEdge(a, b, w[ta], w[tb], nu, label,
                                  jzz_equal_eta(g, g, w[ta] - nu, w[tb] - nu, eta),
                                  zz_numerator_equal_eta(nu, w[ta], w[tb], eta)))
    return GridAssignment(tuple(w), float(eta), freq, edges)
