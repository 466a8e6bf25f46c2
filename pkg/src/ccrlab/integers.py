"""Integer-commensurate gate times that close every branch despite dispersive shifts.

With eps tau = pi n_eps and f_i tau = pi n_i (n_eps + n1 + n2 even, no
vanishing n_eps +- n1 +- n2) every branch detuning eps' is a nonzero multiple
of 2 pi / tau. Two continuous knobs (tau, omega_d) plus one tunable hardware
parameter fix the three integers; the drive amplitudes then set the phase.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .hilbert import SystemSpec
from .perturbation import dispersive_shift
from .phasespace import ConditionalGate, dress, integer_conditions_ok, integers_phase

KNOBS = ("g1", "g2", "omega1", "omega2", "nu")


class NoSolutionError(RuntimeError):
    pass


def default_shifts(spec: SystemSpec) -> np.ndarray:
    return np.array([dispersive_shift(spec, i, 0) for i in range(spec.n_qubits)])


def apply_knob(spec: SystemSpec, name: str, value: float) -> SystemSpec:
    if name == "g1" or name == "g2":
        g = spec.g.copy()
        g[int(name[1]) - 1, 0] = value
        return spec.replace(g=g)
    if name == "omega1" or name == "omega2":
        om = list(spec.omega)
        om[int(name[-1]) - 1] = value
        return spec.replace(omega=tuple(om))
    if name == "nu":
        return spec.replace(nu=(value,))
    raise ValueError(f"unknown knob {name!r}; choose from {KNOBS}")


def knob_value(spec: SystemSpec, name: str) -> float:
    if name in ("g1", "g2"):
        return float(spec.g[int(name[1]) - 1, 0])
    if name in ("omega1", "omega2"):
        return spec.omega[int(name[-1]) - 1]
    if name == "nu":
        return spec.nu[0]
    raise ValueError(f"unknown knob {name!r}; choose from {KNOBS}")


def _scale_drives(spec: SystemSpec, lam: float) -> SystemSpec:
    return spec.replace(Omega=tuple(lam * o for o in spec.Omega))


def analytic_nonlinear_phase(spec: SystemSpec, tau: float, f: Sequence[float]) -> float:
    """phi(++) + phi(--) - phi(+-) - phi(-+) with phi = M^2 tau / eps' (closed branches)."""
    a = dress(spec).a_coeff
    gA = spec.g[:, 0] * a
    eps = spec.eps[0]
    total = 0.0
    for z1, z2 in itertools.product((1, -1), repeat=2):
        M = 0.5 * (gA[0] * z1 + gA[1] * z2)
        ep = eps + f[0] * z1 + f[1] * z2
        total += z1 * z2 * M * M * tau / ep
    return total


@dataclass
class IntegerSolution:
    tau: float
    omega_d: float
    knob: tuple[str, float]
    n_eps: int
    n1: int
    n2: int
    achieved_phase: float
    residuals: dict[str, float]
    spec: SystemSpec
    f: tuple[float, ...]
    drive_scale: float
    gate: ConditionalGate | None = field(default=None, repr=False)

    def fastest_time(self) -> float:
        """Single-loop time pi / sqrt(g1 g2 A1 A2) at the solution's drives, ignoring f."""
        a = dress(self.spec).a_coeff
        s = self.spec.g[0, 0] * a[0] * self.spec.g[1, 0] * a[1]
        return math.pi / math.sqrt(abs(s))

    def slowdown(self) -> float:
        return self.tau / self.fastest_time()

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"tau: {self.tau:.15g}\n")
        out.write(f"omega_d: {self.omega_d:.15g}\n")
        out.write(f"knob: {self.knob[0]} = {self.knob[1]:.15g}\n")
        out.write(f"integers: n_eps={self.n_eps} n1={self.n1} n2={self.n2}\n")
        out.write(f"f: {', '.join(f'{x:.15g}' for x in self.f)}\n")
        out.write(f"drive_scale: {self.drive_scale:.15g}\n")
        out.write(f"Omega: {', '.join(f'{x:.15g}' for x in self.spec.Omega)}\n")
        out.write(f"achieved_phase: {self.achieved_phase:.15g}\n")
        out.write(f"slowdown: {self.slowdown():.15g}\n")
        for k, v in self.residuals.items():
            out.write(f"residual_{k}: {v:.3e}\n")
        return out.getvalue()


def _conditions(spec: SystemSpec, x: np.ndarray, knob: str | None, ns, shifts) -> np.ndarray:
    tau, wd, kv = x
    s = spec.replace(omega_d=wd)
    if knob is not None:
        s = apply_knob(s, knob, kv)
    f = shifts(s)
    eps = s.eps[0]
    return np.array([eps * tau / math.pi - ns[0], f[0] * tau / math.pi - ns[1], f[1] * tau / math.pi - ns[2]])


def _damped_newton(fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, tol: float, scale: np.ndarray,
                   max_iter: int = 60) -> np.ndarray | None:
    x = np.array(x0, dtype=float)
    r = fun(x)
    for _ in range(max_iter):
        # polish well below tol; stop early only when no further progress is possible
        if np.all(np.abs(r) < 1e-3 * tol * scale):
            return x
        J = np.empty((3, 3))
        for j in range(3):
            h = 1e-7 * max(abs(x[j]), 1e-3)
            xp = x.copy()
            xp[j] += h
            xm = x.copy()
            xm[j] -= h
            J[:, j] = (fun(xp) - fun(xm)) / (2 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        norm = np.linalg.norm(r)
        while lam > 1e-6:
            xn = x + lam * step
            try:
                rn = fun(xn)
            except (ValueError, ZeroDivisionError):
                rn = None
            if rn is not None and np.all(np.isfinite(rn)) and np.linalg.norm(rn) < norm:
                x, r = xn, rn
                break
            lam *= 0.5
        else:
            break
    return x if np.all(np.abs(r) < tol * scale) else None


def _candidate_triples(f0: np.ndarray, eps_sign: int, n_eps_max: int, n_max: int):
    s1 = 1 if f0[0] >= 0 else -1
    s2 = 1 if f0[1] >= 0 else -1
    for ne in range(1, n_eps_max + 1):
        for a in range(1, n_max + 1):
            for b in range(1, n_max + 1):
                triple = (eps_sign * ne, s1 * a, s2 * b)
                if integer_conditions_ok(*triple):
                    yield triple


def solve_integers(spec: SystemSpec, knob_name: str = "g2", target_ns: tuple[int, int, int] | None = None,
                   tol: float = 1e-8, knob_range: tuple[float, float] | None = None,
                   shifts: Callable[[SystemSpec], np.ndarray] = default_shifts,
                   n_eps_max: int = 200, n_max: int = 2, drive_range: tuple[float, float] = (1e-6, 50.0)
                   ) -> IntegerSolution:
    """Find (tau, omega_d, knob) meeting the integer conditions, then drives for a pi phase.

    Triples are tried in increasing |n_eps| unless ``target_ns`` is given. The
    three integer conditions are solved by damped Newton with a
    finite-difference Jacobian; the overall drive scale is then set by
    bracketing root search on the nonlinear phase.
    """
    if spec.n_qubits != 2 or spec.n_modes != 1:
        raise ValueError("the integers scheme is set up for two qubits and one mode")
    f0 = np.asarray(shifts(spec), dtype=float)
    if np.allclose(f0, 0.0):
        return _solve_no_dispersion(spec, target_ns, tol, n_eps_max, drive_range)
    if knob_name not in KNOBS:
        raise ValueError(f"unknown knob {knob_name!r}; choose from {KNOBS}")
    k0 = knob_value(spec, knob_name)
    if knob_range is None:
        knob_range = tuple(sorted((0.5 * k0, 1.5 * k0))) if k0 else (-1.0, 1.0)
    eps_sign = 1 if spec.eps[0] >= 0 else -1
    if target_ns is not None:
        if not integer_conditions_ok(*target_ns):
            raise NoSolutionError(f"parity / non-zero conditions fail for {target_ns}")
        triples = [tuple(int(v) for v in target_ns)]
    else:
        triples = _candidate_triples(f0, eps_sign, n_eps_max, n_max)
    nu = spec.nu[0]
    for ns in triples:
        if ns[1] * f0[0] < 0 or ns[2] * f0[1] < 0:
            continue
        tau0 = math.pi * ns[1] / f0[0] if ns[1] else math.pi * ns[2] / f0[1]
        if tau0 <= 0:
            continue
        wd0 = nu - math.pi * ns[0] / tau0
        x = _damped_newton(lambda v: _conditions(spec, v, knob_name, ns, shifts), np.array([tau0, wd0, k0]),
                           tol, np.maximum(1.0, np.abs(np.array(ns, dtype=float))))
        if x is None:
            continue
        tau, wd, kv = x
        if tau <= 0 or not knob_range[0] <= kv <= knob_range[1]:
            continue
        base = apply_knob(spec.replace(omega_d=wd), knob_name, kv)
        sol = _fix_phase(base, tau, ns, shifts, drive_range, tol)
        if sol is not None:
            sol.knob = (knob_name, kv)
            return sol
    raise NoSolutionError("no integer solution found in the search region")


def _fix_phase(base: SystemSpec, tau: float, ns, shifts, drive_range, tol) -> IntegerSolution | None:
    f = np.asarray(shifts(base), dtype=float)
    if not any(base.Omega):
        raise ValueError("drive amplitudes are all zero; the phase cannot be tuned")

    def nl(lam):
        return abs(analytic_nonlinear_phase(_scale_drives(base, lam), tau, f)) - math.pi

    lo, hi = drive_range
    grid = np.geomspace(lo, hi, 200)
    vals = []
    for lam in grid:
        try:
            vals.append(nl(lam))
        except ValueError:
            vals.append(math.nan)
    lam = None
    for a, b, va, vb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if np.isfinite(va) and np.isfinite(vb) and va * vb <= 0:
            lam = brentq(nl, a, b, xtol=1e-15, rtol=1e-15)
            break
    if lam is None:
        return None
    solved = _scale_drives(base, lam)
    gate = integers_phase(solved, ns[0], ns[1], ns[2], tau, f_coeffs=f)
    r = _conditions(solved, np.array([tau, solved.omega_d, 0.0]), None, ns, shifts)
    residuals = {"eps": float(r[0]), "f1": float(r[1]), "f2": float(r[2]),
                 "phase": gate.nonlinear_phase - math.pi, "closure": gate.max_residual()}
    return IntegerSolution(tau=float(tau), omega_d=float(solved.omega_d), knob=("", math.nan), n_eps=int(ns[0]),
                           n1=int(ns[1]), n2=int(ns[2]), achieved_phase=gate.nonlinear_phase, residuals=residuals,
                           spec=solved, f=tuple(float(v) for v in f), drive_scale=float(lam), gate=gate)


def _solve_no_dispersion(spec: SystemSpec, target_ns, tol, n_eps_max=200,
                         drive_range=(1e-6, 50.0)) -> IntegerSolution:
    # f = 0: eps tau = pi n_eps (n_eps even) closes every branch; the drive scale sets the phase
    eps = spec.eps[0]
    if eps == 0:
        raise NoSolutionError("eps must be nonzero")
    sign = 1 if eps > 0 else -1
    if target_ns is not None:
        ne, a, b = (int(v) for v in target_ns)
        if a or b or ne % 2 or ne * sign <= 0:
            raise NoSolutionError("with zero dispersive shift n1 = n2 = 0 and n_eps must be even with the sign of eps")
        candidates = [ne]
    else:
        candidates = [sign * n for n in range(2, n_eps_max + 1, 2)]
    zero = lambda s: np.zeros(2)  # noqa: E731
    sol = None
    for ne in candidates:
        sol = _fix_phase(spec, math.pi * ne / eps, (ne, 0, 0), zero, drive_range, tol)
        if sol is not None:
            break
    if sol is None:
        raise NoSolutionError("no drive scale reaches a pi phase")
    sol.knob = ("none", math.nan)
    return sol


# ---------------------------------------------------------------------------
# sensitivity
# ---------------------------------------------------------------------------

PARAMETERS = ("tau", "omega_d", "g1", "g2", "omega1", "omega2", "nu", "Omega1", "Omega2", "eta_mode")


def _bump(x: float, rel: float) -> float:
    # relative change, measured against 1 for parameters sitting at zero
    return x + rel * max(abs(x), 1.0)


def _perturbed(sol: IntegerSolution, name: str, rel: float):
    spec, tau = sol.spec, sol.tau
    if name == "tau":
        return spec, _bump(tau, rel)
    if name == "omega_d":
        return spec.replace(omega_d=_bump(spec.omega_d, rel)), tau
    if name in KNOBS:
        return apply_knob(spec, name, _bump(knob_value(spec, name), rel)), tau
    if name in ("Omega1", "Omega2"):
        om = list(spec.Omega)
        om[int(name[-1]) - 1] = _bump(om[int(name[-1]) - 1], rel)
        return spec.replace(Omega=tuple(om)), tau
    if name == "eta_mode":
        return spec.replace(eta_mode=spec.eta_mode + rel), tau
    raise ValueError(f"unknown parameter {name!r}")


def sensitivity(sol: IntegerSolution, deltas: dict[str, float] | None = None,
                shifts: Callable[[SystemSpec], np.ndarray] = default_shifts) -> dict[str, dict[str, float]]:
    """Closure and phase drift under relative parameter changes (absolute for zero-valued ones).

    For each parameter returns the drifts, their finite-difference
    derivatives and the ratio of drifts at delta and delta / 2 (linearity
    check; 2 for a linear response).
    """
    from .phasespace import run_gate

    deltas = {p: 1e-4 for p in PARAMETERS} if deltas is None else deltas
    base_gate, _ = run_gate(sol.spec, sol.tau, f_coeffs=np.asarray(sol.f), n_samples=1)
    base_phase = base_gate.nonlinear_phase
    base_res = base_gate.max_residual()

    def drift(name, d):
        spec, tau = _perturbed(sol, name, d)
        gate, _ = run_gate(spec, tau, f_coeffs=shifts(spec), n_samples=1)
        return gate.max_residual() - base_res, gate.nonlinear_phase - base_phase

    out = {}
    for name, d in deltas.items():
        c1, p1 = drift(name, d)
        c2, p2 = drift(name, d / 2)
        out[name] = {
            "delta": d,
            "closure_drift": c1,
            "phase_drift": p1,
            "d_closure": c1 / d,
            "d_phase": p1 / d,
            "closure_ratio": c1 / c2 if c2 else (math.nan if c1 else 0.0),
            "phase_ratio": p1 / p2 if p2 else (math.nan if p1 else 0.0),
        }
    return out
