"""Pulse schedules that close every branch despite the dispersive shift.

Periodic pi-pulse pairs flip the sign of both M and the dispersive ratio x, so
a branch alternates between circles of radius M/(eps(1+x)) and M/(eps(1-x)).
With spacing tau = pi/eps + 2 pi/(P eps) the resulting P-petal "flower"
returns to the origin for any x, and its area fixes the conditional phase.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import kernels
from .hilbert import SystemSpec
from .phasespace import BranchTable, TrajectoryResult, dress, run_gate, trace_segments

FLIP_Z = "flip_Z_all_gate_qubits"
FLIP_OMEGA = "flip_Omega_sign"
FLIP_Z_SPECTATORS = "flip_Z_spectators"
ACTIONS = (FLIP_Z, FLIP_OMEGA, FLIP_Z_SPECTATORS)
STYLES = ("original", "cpmg_shifted", "uhrig", "custom")


@dataclass(frozen=True)
class PulseEvent:
    time: float
    action: str = FLIP_Z


@dataclass(frozen=True)
class PulseSchedule:
    """Instantaneous flip events on [0, total_time].

    ``flip_Z_all_gate_qubits`` is a global pi pulse (every qubit in the branch
    table flips, spectators included); ``flip_Z_spectators`` flips only qubits
    outside ``gate_qubits``; ``flip_Omega_sign`` reverses the drive sign.
    """

    events: tuple[PulseEvent, ...]
    total_time: float
    style: str = "custom"
    params: dict = field(default_factory=dict)
    gate_qubits: tuple[int, int] = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        if self.style not in STYLES:
            raise ValueError(f"unknown schedule style {self.style!r}")
        last = 0.0
        for ev in self.events:
            if ev.action not in ACTIONS:
                raise ValueError(f"unknown action {ev.action!r}")
            if not (last < ev.time <= self.total_time * (1 + 1e-14)):
                raise ValueError("event times must be strictly increasing inside (0, T]")
            last = ev.time

    @property
    def times(self) -> np.ndarray:
        return np.array([ev.time for ev in self.events])

    def with_action(self, action: str) -> "PulseSchedule":
        evs = tuple(PulseEvent(ev.time, action) for ev in self.events)
        return PulseSchedule(evs, self.total_time, self.style, dict(self.params), self.gate_qubits)

    def segments(self, n_qubits: int, semantics: str | None = None):
        """(duration, Pauli-frame signs, drive sign) for each free-evolution interval.

        ``semantics`` reinterprets every event: ``"z_flip"`` as a global Z flip,
        ``"omega_sign_flip"`` as a drive-sign flip.
        """
        override = {None: None, "z_flip": FLIP_Z, "omega_sign_flip": FLIP_OMEGA}[semantics]
        sigma = np.ones(n_qubits, dtype=np.int64)
        wsign = 1.0
        out = []
        t = 0.0
        spect = np.array([q not in self.gate_qubits for q in range(n_qubits)])
        for ev in self.events:
            if ev.time > t:
                out.append((ev.time - t, sigma.copy(), wsign))
            t = ev.time
            action = override or ev.action
            if action == FLIP_Z:
                sigma = -sigma
            elif action == FLIP_OMEGA:
                wsign = -wsign
            else:
                sigma = np.where(spect, -sigma, sigma)
        if self.total_time > t * (1 + 1e-14):
            out.append((self.total_time - t, sigma.copy(), wsign))
        return out

    def frame_signs(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints and the Z-frame sign of a flipped qubit on each interval."""
        edges = [0.0]
        signs = []
        s = 1
        for ev in self.events:
            if ev.time > edges[-1]:
                edges.append(ev.time)
                signs.append(s)
            if ev.action != FLIP_OMEGA:
                s = -s
        if self.total_time > edges[-1]:
            edges.append(self.total_time)
            signs.append(s)
        return np.array(edges), np.array(signs, dtype=float)

    def to_text(self) -> str:
        data = {
            "style": self.style,
            "total_time": self.total_time,
            "gate_qubits": list(self.gate_qubits),
            "params": self.params,
            "events": [{"time": ev.time, "action": ev.action} for ev in self.events],
        }
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_text(cls, text: str) -> "PulseSchedule":
        data = json.loads(text)
        evs = tuple(PulseEvent(float(e["time"]), e["action"]) for e in data["events"])
        return cls(evs, float(data["total_time"]), data.get("style", "custom"), data.get("params", {}),
                   tuple(data.get("gate_qubits", (0, 1))))


def petal_spacing(P: int, eps: float, m: int = 0) -> float:
    """tau = pi/|eps| + 2 pi/(P |eps|) + 2 pi m/|eps|."""
    return (math.pi + 2 * math.pi / P + 2 * math.pi * m) / abs(eps)


def make_flower_schedule(P: int, eps: float, style: str = "original", m: int = 0,
                         tilde_tau: float | None = None, action: str = FLIP_Z,
                         allow_p2: bool = False) -> PulseSchedule:
    """P flips at spacing tau; the cpmg_shifted style places the first one at tilde_tau."""
    if P % 2:
        raise ValueError("P must be even")
    if P < 2 or (P == 2 and not allow_p2):
        raise ValueError("P must be at least 4 (P = 2 only with allow_p2)")
    if eps == 0:
        raise ValueError("eps must be nonzero")
    if m < 0:
        raise ValueError("m must be non-negative")
    tau = petal_spacing(P, eps, m)
    T = P * tau
    params = {"P": P, "eps": eps, "m": m, "tau": tau}
    if style == "original":
        times = [k * tau for k in range(1, P + 1)]
    elif style == "cpmg_shifted":
        tt = tau / 2 if tilde_tau is None else float(tilde_tau)
        if not 0 < tt <= tau:
            raise ValueError("tilde_tau must lie in (0, tau]")
        times = [tt + k * tau for k in range(P)]
        params["tilde_tau"] = tt
    else:
        raise ValueError("make_flower_schedule supports the original and cpmg_shifted styles")
    return PulseSchedule(tuple(PulseEvent(t, action) for t in times), T, style, params)


def single_branch_table(eps: float, x: float, M: float) -> BranchTable:
    """One flipped qubit: the +1 branch sees (eps(1+x), M), the -1 branch (eps(1-x), -M)."""
    return BranchTable(np.array([[1], [-1]]), np.array([[eps * (1 + x)], [eps * (1 - x)]]),
                       np.array([[M], [-M]]))


def trace_flower(bh_per_branch: BranchTable, schedule: PulseSchedule, flip_semantics: str | None = "z_flip",
                 n_samples: int = 512) -> TrajectoryResult:
    """Trace all branches and modes through the schedule."""
    segs = schedule.segments(bh_per_branch.n_qubits, flip_semantics)
    return trace_segments(bh_per_branch, segs, n_samples)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowerGeometry:
    """Closed P-petal flower of one branch: dispersive ratio x, coupling M, detuning eps."""

    P: int
    x: float
    M: float = 1.0
    eps: float = 1.0
    m: int = 0

    def __post_init__(self):
        if self.P % 2 or self.P < 4:
            raise ValueError("flower geometry needs an even P >= 4")
        if abs(self.x) >= 1:
            raise ValueError("|x| must be below 1")

    @property
    def tau(self) -> float:
        return petal_spacing(self.P, self.eps, self.m)

    @property
    def r1(self) -> float:
        return self.M / (abs(self.eps) * (1 + self.x))

    @property
    def r2(self) -> float:
        return self.M / (abs(self.eps) * (1 - self.x))

    @property
    def beta1(self) -> float:
        e = abs(self.eps)
        return (2 * math.pi * (self.m + 1) - e * (1 + self.x) * self.tau) / 2

    @property
    def beta2(self) -> float:
        e = abs(self.eps)
        return (2 * math.pi * (self.m + 1) - e * (1 - self.x) * self.tau) / 2

    @property
    def A_p(self) -> float:
        r = self.r1 + self.r2
        return math.copysign(1, self.eps) * self.P * r * r / 2 * math.sin(self.beta1) * math.sin(self.beta2) \
            / math.sin(2 * math.pi / self.P)

    @property
    def A_c(self) -> float:
        e = abs(self.eps)
        arcs = self.r1**2 * e * (1 + self.x) * self.tau + self.r2**2 * e * (1 - self.x) * self.tau
        return math.copysign(1, self.eps) * self.P / 4 * arcs


def flower_areas(geom: FlowerGeometry) -> tuple[float, float, float]:
    """(polygon area, circular-part area, branch phase = 2 * total area)."""
    ap, ac = geom.A_p, geom.A_c
    return ap, ac, 2 * (ap + ac)


def _pair_couplings(spec: SystemSpec, f_coeffs):
    a = dress(spec).a_coeff
    s1, s2 = spec.g[0, 0] * a[0], spec.g[1, 0] * a[1]
    f = np.zeros(2) if f_coeffs is None else np.asarray(f_coeffs, dtype=float).reshape(-1)[:2]
    return s1, s2, f


def flower_nonlinear_phase(s1: float, s2: float, f1: float, f2: float, eps: float, P: int = 4, m: int = 0) -> float:
    """phi(++) + phi(--) - phi(+-) - phi(-+) from the area formulas."""
    tot = 0.0
    for z1, z2, w in ((1, 1, 1), (-1, -1, 1), (1, -1, -1), (-1, 1, -1)):
        M = 0.5 * (s1 * z1 + s2 * z2)
        x = (f1 * z1 + f2 * z2) / eps
        tot += w * flower_areas(FlowerGeometry(P, x, M, eps, m))[2]
    return tot


def solve_cz_flower(spec: SystemSpec, P: int = 4, f_coeffs=None, m: int = 0, n_samples: int = 512):
    """Detuning eps that makes the P-petal flower a CZ; returns (eps, T_tot, gate).

    The area formulas give the nonlinear phase as a function of eps (with
    x = sum f z / eps); a scalar root finder sets it to pi. The returned gate
    comes from tracing the schedule, not from the area formulas.
    """
    s1, s2, f = _pair_couplings(spec, f_coeffs)
    if s1 * s2 <= 0:
        raise ValueError("flower CZ needs g1 A1 g2 A2 > 0")
    K = P / math.tan(math.pi / P) + (P + 2) * math.pi / 2 + P * math.pi * m
    eps0 = math.sqrt(4 * K * s1 * s2 / math.pi)
    floor = (abs(f[0]) + abs(f[1])) * 1.05

    def fn(e):
        return flower_nonlinear_phase(s1, s2, f[0], f[1], e, P, m) - math.pi

    lo, hi = max(eps0 / 4, floor), eps0 * 4
    if fn(lo) * fn(hi) > 0:
        raise RuntimeError("could not bracket the flower CZ detuning")
    eps = brentq(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    sched = make_flower_schedule(P, eps, m=m)
    spec_e = spec.replace(nu=tuple(np.array(spec.nu) - spec.eps[0] + eps))
    fk = None if f_coeffs is None else np.asarray(f_coeffs, dtype=float).reshape(spec.n_qubits, spec.n_modes)
    gate, _ = run_gate(spec_e, sched, f_coeffs=fk, n_samples=n_samples)
    return eps, sched.total_time, gate


def flower_slowdown(P: int) -> float:
    """T_tot / (pi / sqrt(g1 g2 A1 A2)) for the undispersed P-petal CZ."""
    K = P / math.tan(math.pi / P) + (P + 2) * math.pi / 2
    return (P + 2) * math.sqrt(math.pi) / (2 * math.sqrt(K))


# ---------------------------------------------------------------------------
# several modes
# ---------------------------------------------------------------------------


def multimode_closure_check(tables: BranchTable | Sequence[BranchTable], schedule: PulseSchedule,
                            flip_semantics: str | None = "z_flip") -> dict[int, float]:
    """Worst closure residual over branches for every mode."""
    if isinstance(tables, BranchTable):
        tables = [tables.select_modes([k]) for k in range(tables.n_modes)]
    out = {}
    for k, tab in enumerate(tables):
        traj = trace_flower(tab, schedule, flip_semantics, n_samples=1)
        out[k] = float(np.max(traj.closure_residual))
    return out


@dataclass(frozen=True)
class MultimodeAssignment:
    P: tuple[int, ...]
    m: tuple[int, ...]
    tau: float
    intervals: int

    @property
    def total_time(self) -> float:
        return self.intervals * self.tau


def _fit_mode(eps: float, tau: float, P_max: int, tol: float):
    y = abs(eps) * tau / math.pi - 1
    if y <= 0:
        return None
    mk = math.floor(y / 2 + tol)
    r = y - 2 * mk
    if r <= tol:
        return None
    Pk = 2 / r
    Pr = round(Pk)
    if abs(Pk - Pr) > tol * Pk * Pk or Pr % 2 or Pr < 4 or Pr > P_max:
        return None
    return Pr, mk


def schedule_multimode(eps_list: Sequence[float], P_max: int = 64, m_max: int = 8,
                       max_intervals: int = 512, tol: float = 1e-9) -> MultimodeAssignment | None:
    """Common spacing tau with tau |eps_k| = pi + 2 pi/P_k + 2 pi m_k for every mode.

    Candidate spacings come from the first mode's (P, m) choices; every other
    mode must then fit with an even P_k >= 4. Among feasible assignments the
    one with the shortest total time lcm(P_k) * tau is returned, or None.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e == 0 for e in eps_list):
        raise ValueError("mode detunings must be nonzero")
    if len({abs(e) for e in eps_list}) != len(eps_list):
        raise ValueError("mode detunings must be distinct")
    best = None
    for P0 in range(4, P_max + 1, 2):
        for m0 in range(m_max + 1):
            tau = petal_spacing(P0, eps_list[0], m0)
            Ps, ms = [P0], [m0]
            for e in eps_list[1:]:
                fit = _fit_mode(e, tau, P_max, tol)
                if fit is None or fit[1] > m_max:
                    break
                Ps.append(fit[0])
                ms.append(fit[1])
            else:
                L = math.lcm(*Ps)
                if L > max_intervals:
                    continue
                cand = MultimodeAssignment(tuple(Ps), tuple(ms), tau, L)
                if best is None or cand.total_time < best.total_time - 1e-12:
                    best = cand
    return best


def multimode_schedule(assign: MultimodeAssignment, action: str = FLIP_Z) -> PulseSchedule:
    times = [k * assign.tau for k in range(1, assign.intervals + 1)]
    return PulseSchedule(tuple(PulseEvent(t, action) for t in times), assign.intervals * assign.tau, "custom",
                         {"P": list(assign.P), "m": list(assign.m), "tau": assign.tau})


# ---------------------------------------------------------------------------
# Uhrig flowers
# ---------------------------------------------------------------------------


def uhrig_fractions(p: int) -> np.ndarray:
    """0, sin^2(pi i / (2(p+1))) for i = 1..p+1 (the last one is 1)."""
    i = np.arange(0, p + 2)
    fr = np.sin(np.pi * i / (2 * (p + 1))) ** 2
    fr[-1] = 1.0
    return fr


def uhrig_schedule(p: int, tau_c: float, action: str = FLIP_Z) -> PulseSchedule:
    fr = uhrig_fractions(p)
    return PulseSchedule(tuple(PulseEvent(float(tau_c * f), action) for f in fr[1:]), tau_c, "uhrig",
                         {"p": p, "tau_c": tau_c})


def _uhrig_reduced(p: int, eps: float):
    fr = uhrig_fractions(p)
    signs = np.array([(-1.0) ** i for i in range(p + 1)])

    def fn(tc):
        tc = np.atleast_1d(np.asarray(tc, dtype=float))
        d = kernels.switch_scan(fr, signs, eps, tc) * np.exp(-0.5j * eps * tc)
        return d.real if p % 2 else d.imag

    return fn


def uhrig_closing_time(p: int, eps: float, start: float = 0.25, stop: float = 20.0, tol: float = 1e-12) -> float:
    """Smallest tau_c > 0 at which the Uhrig-timed flower closes (x = 0).

    The end displacement times e^{-i eps tau_c / 2} is purely real (odd p) or
    imaginary (even p), so closing reduces to a scalar root. The scan uses a
    step of 0.01 * 2 pi / eps; sign changes are refined by bisection and
    touching zeros by bounded minimisation.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    if eps == 0:
        raise ValueError("eps must be nonzero")
    unit = 2 * math.pi / abs(eps)
    e = abs(eps)
    fn = _uhrig_reduced(p, e)
    grid = np.arange(start, stop, 0.01) * unit
    vals = fn(grid)
    absd = np.abs(vals)
    for j in range(1, len(grid) - 1):
        if vals[j - 1] == 0:
            return float(grid[j - 1]) * 1.0
        if vals[j - 1] * vals[j] < 0:
            return float(brentq(lambda t: fn(t)[0], grid[j - 1], grid[j], xtol=tol * unit, rtol=1e-15, maxiter=200))
        if absd[j] <= absd[j - 1] and absd[j] <= absd[j + 1] and vals[j - 1] * vals[j + 1] > 0:
            res = minimize_scalar(lambda t: abs(fn(t)[0]), bounds=(grid[j - 1], grid[j + 1]), method="bounded",
                                  options={"xatol": tol * unit})
            if abs(fn(res.x)[0]) < 1e-9:
                return float(res.x)
    raise RuntimeError(f"no Uhrig closing time found for p={p} below {stop} periods")


def uhrig_flower(p: int, eps: float, x: float = 0.0, M: float = 1.0, n_samples: int = 512):
    """(tau_c, trajectory) of the p-pulse Uhrig flower; x != 0 leaves it open."""
    tc = uhrig_closing_time(p, eps)
    traj = trace_flower(single_branch_table(eps, x, M), uhrig_schedule(p, tc), "z_flip", n_samples)
    return tc, traj


# ---------------------------------------------------------------------------
# ZZ echo
# ---------------------------------------------------------------------------


def no_pulse_schedule(T: float) -> PulseSchedule:
    return PulseSchedule((), T, "custom", {})


def zz_echo_factor(schedule_a: PulseSchedule, schedule_b: PulseSchedule) -> float:
    """Time average of s_a(t) s_b(t), the sign of a ZZ term between the two pulsed qubits."""
    Ta, Tb = schedule_a.total_time, schedule_b.total_time
    if abs(Ta - Tb) > 1e-12 * max(Ta, Tb):
        raise ValueError("schedules must have the same total time")
    ea, sa = schedule_a.frame_signs()
    eb, sb = schedule_b.frame_signs()
    edges = np.unique(np.concatenate([ea, eb]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    ia = np.clip(np.searchsorted(ea, mids, side="right") - 1, 0, len(sa) - 1)
    ib = np.clip(np.searchsorted(eb, mids, side="right") - 1, 0, len(sb) - 1)
    return float(np.sum(sa[ia] * sb[ib] * np.diff(edges)) / Ta)
