"""Batch front-end: ``ccr-lab run|validate|list``.

A scenario is a YAML mapping with ``schema_version``, ``name``, ``task``, an
optional ``system`` block, task ``options`` and an ``outputs.dir`` relative to
``--out``. Exit codes: 0 success, 1 task failure, 2 parse error, 3 validation
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import yaml

SCHEMA_VERSION = 1
EXIT_OK, EXIT_TASK, EXIT_PARSE, EXIT_VALIDATION = 0, 1, 2, 3
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")

# fields scaled by 2 pi when a config declares ``units: cyclic``
FREQ_SYSTEM_KEYS = {"omega", "nu", "g", "omega_d", "Omega", "eta", "eta_mode", "g_tilde", "g_direct", "Delta", "eps"}
FREQ_OPTION_KEYS = {"eps", "M", "eps_s", "nu", "g", "g_tilde", "Omega", "omega", "omegas", "eta", "J", "nu_local",
                    "Delta", "drive_eps"}


class ConfigParseError(Exception):
    pass


class ConfigValidationError(Exception):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class TaskFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# option schema
# ---------------------------------------------------------------------------


@dataclass
class Opt:
    kind: str
    default: Any = None
    required: bool = False
    choices: tuple | None = None
    check: Callable[[Any], str | None] | None = None


def _even_p(v):
    return None if v >= 4 and v % 2 == 0 else "must be an even integer >= 4"


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be non-negative"


def _all_even_p(vs):
    return None if all(v >= 4 and v % 2 == 0 for v in vs) else "must contain even integers >= 4"


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(kind: str, value):
    """Return (value, error)."""
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            return None, "must be an integer"
        return value, None
    if kind == "float":
        if not _is_number(value):
            return None, "must be a number"
        return float(value), None
    if kind == "bool":
        if not isinstance(value, bool):
            return None, "must be true or false"
        return value, None
    if kind == "str":
        if not isinstance(value, str):
            return None, "must be a string"
        return value, None
    if kind in ("list[int]", "list[float]"):
        if not isinstance(value, list) or not value:
            return None, "must be a non-empty list"
        inner = kind[5:-1]
        out = []
        for v in value:
            c, err = _coerce(inner, v)
            if err:
                return None, f"entries {err[5:] if err.startswith('must ') else err}"
            out.append(c)
        return out, None
    if kind == "list[list[float]]":
        if not isinstance(value, list) or not value:
            return None, "must be a non-empty list of lists"
        out = []
        for row in value:
            c, err = _coerce("list[float]", row)
            if err:
                return None, "must be a list of numeric lists"
            out.append(c)
        return out, None
    if kind == "any":
        return value, None
    raise AssertionError(kind)


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


@dataclass
class Context:
    out_dir: Path
    seed: int
    tol: float | None
    files: list[str] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)
    report: dict[str, Any] = field(default_factory=dict)

    def write(self, name: str, text: str):
        if os.path.isabs(name) or ".." in Path(name).parts:
            raise TaskFailure(f"refusing to write outside the output directory: {name}")
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        self.files.append(name)

    def check(self, name: str, ok: bool):
        self.checks[name] = bool(ok)

    def tolerance(self, default: float) -> float:
        return default if self.tol is None else self.tol


def _report_text(d: dict[str, Any]) -> str:
    lines = []
    for k, v in d.items():
        if isinstance(v, float):
            lines.append(f"{k}: {v:.15g}")
        else:
            lines.append(f"{k}: {v}")
    return "\n".join(lines) + "\n"


def _system_spec(sys_cfg: dict):
    from .hilbert import SystemSpec

    cfg = dict(sys_cfg)
    eta = cfg.pop("eta", None)
    if eta is not None:
        eta = [math.inf if v is None else v for v in eta]
    if "Delta" in cfg or "eps" in cfg:
        return SystemSpec.from_detunings(cfg.pop("Delta"), cfg.pop("eps"), cfg.pop("g"), eta=eta, **cfg)
    return SystemSpec(eta=eta, **cfg)


SYSTEM_KEYS = {"omega", "nu", "g", "omega_d", "Omega", "eta", "eta_mode", "g_tilde", "g_direct", "Delta", "eps"}


def _validate_system(block, errors: list[str]):
    if not isinstance(block, dict):
        errors.append("system: must be a mapping")
        return
    for k in block:
        if k not in SYSTEM_KEYS:
            errors.append(f"system.{k}: unknown field")
    detuned = "Delta" in block or "eps" in block
    need = ("Delta", "eps", "g") if detuned else ("omega", "nu", "g")
    for k in need:
        if k not in block:
            errors.append(f"system.{k}: required")
    if errors:
        return
    try:
        _system_spec(block)
    except (TypeError, ValueError) as exc:
        errors.append(f"system: {exc}")


def task_gate(o, system, ctx: Context):
    import numpy as np

    from .oracle import cz_gate_comparison
    from .phasespace import cz_time, run_gate

    if o["random_sets"]:
        from .hilbert import SystemSpec

        rng = np.random.default_rng(ctx.seed)
        rows = ["set,Delta1,Delta2,g1,g2,Omega1,Omega2,max_phase_error,oracle_closure"]
        worst = 0.0
        for r in range(o["random_sets"]):
            D = rng.uniform(0.8, 1.5, 2)
            g = rng.uniform(0.02, 0.1, 2) * D
            Om = rng.uniform(0.2, 0.5, 2)
            spec = SystemSpec.from_detunings(D, [0.0], g, Omega=Om, omega_d=5.0)
            c = cz_gate_comparison(spec, o["loops"], cutoff=o["cutoff"])
            worst = max(worst, c.max_phase_error, c.oracle_closure)
            rows.append(f"{r},{D[0]!r},{D[1]!r},{g[0]!r},{g[1]!r},{Om[0]!r},{Om[1]!r},"
                        f"{c.max_phase_error:.6e},{c.oracle_closure:.6e}")
        ctx.write("oracle_sets.csv", "\n".join(rows) + "\n")
        ctx.report["worst_oracle_deviation"] = worst
        ctx.check("oracle_agreement", worst < ctx.tolerance(1e-6))
        return
    spec = _system_spec(system)
    tau, eps = cz_time(spec, o["loops"])
    spec = spec.replace(nu=(spec.omega_d + eps,))
    gate, traj = run_gate(spec, tau, n_samples=o["n_samples"])
    ctx.write("trajectory.csv", traj.to_csv())
    ctx.report.update(tau=tau, eps=eps, nonlinear_phase=gate.signed_nonlinear_phase(),
                      max_residual=gate.max_residual())
    ctx.check("closure", gate.max_residual() < ctx.tolerance(1e-10))
    ctx.check("cz_phase", abs(abs(gate.signed_nonlinear_phase()) - math.pi) < 1e-8)
    if o["oracle"]:
        c = cz_gate_comparison(spec.replace(nu=(spec.omega_d,)), o["loops"], cutoff=o["cutoff"])
        ctx.report.update(oracle_max_phase_error=c.max_phase_error, oracle_closure=c.oracle_closure)
        ctx.check("oracle_agreement", max(c.max_phase_error, c.oracle_closure) < 1e-6)


def task_flower(o, system, ctx: Context):
    from .flowers import (FlowerGeometry, flower_areas, flower_slowdown, make_flower_schedule, single_branch_table,
                          trace_flower)

    P, x, eps, M, m = o["P"], o["x"], o["eps"], o["M"], o["m"]
    sched = make_flower_schedule(P, eps, style=o["style"], m=m)
    traj = trace_flower(single_branch_table(eps, x, M), sched, o["semantics"], o["n_samples"])
    ctx.write("trajectory.csv", traj.to_csv())
    ctx.write("schedule.json", sched.to_text() + "\n")
    closure = float(traj.closure_residual.max())
    ap, ac, phase = flower_areas(FlowerGeometry(P, x, M, eps, m))
    ctx.report.update(P=P, x=x, eps=eps, M=M, total_time=sched.total_time, closure=closure,
                      polygon_area=ap, circle_area=ac, formula_phase=phase,
                      traced_phase=float(traj.phase[0]), traced_area=float(traj.area[0, 0]))
    ctx.check("closure", closure < ctx.tolerance(1e-10))
    if o["style"] == "original" and o["semantics"] == "z_flip":
        ctx.check("phase_area_law", abs(phase - float(traj.phase[0])) < 1e-6)
    if o["slowdown_P"]:
        rows = ["P,slowdown"] + [f"{p},{flower_slowdown(p)!r}" for p in o["slowdown_P"]]
        ctx.write("slowdown.csv", "\n".join(rows) + "\n")


def task_uhrig(o, system, ctx: Context):
    from .flowers import uhrig_closing_time, uhrig_flower

    eps = o["eps"]
    rows = ["p,tau_c,tau_c_in_units_of_2pi_over_eps"]
    for p in o["p_values"]:
        tc = uhrig_closing_time(p, eps)
        unit = tc * abs(eps) / (2 * math.pi)
        rows.append(f"{p},{tc!r},{unit:#.5g}")
        ctx.report[f"tau_c_p{p}"] = unit
    ctx.write("uhrig_table.csv", "\n".join(rows) + "\n")
    if o["trajectory_p"]:
        tc, traj = uhrig_flower(o["trajectory_p"], eps, 0.0, o["M"], o["n_samples"])
        ctx.write("trajectory.csv", traj.to_csv())
        closure = float(traj.closure_residual.max())
        ctx.report["trajectory_closure"] = closure
        ctx.check("closure", closure < ctx.tolerance(1e-10))


def task_integers(o, system, ctx: Context):
    from .integers import solve_integers
    from .oracle import oracle_for_spec

    spec = _system_spec(system)
    target = tuple(o["target"]) if o["target"] else None
    sol = solve_integers(spec, o["knob"], target_ns=target, tol=o["solve_tol"])
    text = sol.to_text()
    ctx.report.update(tau=sol.tau, omega_d=sol.omega_d, knob=f"{sol.knob[0]}={sol.knob[1]:.15g}",
                      integers=f"{sol.n_eps},{sol.n1},{sol.n2}", achieved_phase=sol.achieved_phase,
                      slowdown=sol.slowdown())
    ctx.check("phase", abs(sol.achieved_phase - math.pi) < ctx.tolerance(1e-8))
    ctx.check("closure", sol.residuals["closure"] < 1e-6)
    if o["oracle"]:
        orc = oracle_for_spec(sol.spec, sol.tau, f_coeffs=list(sol.f), cutoff=o["cutoff"])
        nl = orc.nonlinear_phase()
        d = (abs(nl) - math.pi + math.pi) % (2 * math.pi) - math.pi
        text += f"oracle_nonlinear_phase: {nl:.15g}\noracle_closure: {orc.max_closure():.3e}\n"
        ctx.check("oracle_phase", abs(d) < 1e-4)
        ctx.check("oracle_closure", orc.max_closure() < 1e-5)
    ctx.write("solution.txt", text)


def task_zz(o, system, ctx: Context):
    from . import perturbation as pt

    kind = o["kind"]
    if kind == "zero_zz_roots":
        r = pt.zero_zz_cavity_frequency(o["omega_i"], o["omega_j"], o["eta"])
        rows = ["root,resonant,numerator"]
        for nu, bad in zip(r.roots, r.resonant):
            num = pt.zz_numerator_equal_eta(nu, o["omega_i"], o["omega_j"], o["eta"])
            rows.append(f"{nu!r},{bad},{num:.3e}")
            ctx.check(f"numerator_{nu:.6f}", abs(num) < 1e-12)
        ctx.write("roots.csv", "\n".join(rows) + "\n")
        ctx.report["n_roots"] = len(r.roots)
        return
    if kind == "echo":
        from .flowers import FLIP_Z, make_flower_schedule, zz_echo_factor

        a = make_flower_schedule(o["P"], o["eps"], style="original", action=FLIP_Z)
        b = make_flower_schedule(o["P"], o["eps"], style="cpmg_shifted", action=FLIP_Z)
        f = zz_echo_factor(a, b)
        ctx.report["echo_factor"] = f
        ctx.check("echo_cancels", abs(f) < 1e-12)
        return
    spec = _system_spec(system)
    fn = {"single_cavity": pt.zz_single_cavity, "direct_coupling": pt.zz_direct_coupling,
          "two_oscillators": pt.zz_two_oscillators, "eta_expansion": pt.zz_eta_expansion}[kind]
    rep = fn(spec, exact=o["exact"], n_grid=o["n_grid"])
    ctx.write("zz.txt", rep.to_text())
    ctx.report.update({k: float(v) for k, v in rep.values.items()})


def task_sw_order_fit(o, system, ctx: Context):
    from . import perturbation as pt

    rows = ["study,order,problem,slope"]
    if o["kind"] == "random":
        for order in o["orders"]:
            fits = pt.sw_order_study(order, seed=ctx.seed, n_problems=o["n_problems"])
            for i, f in enumerate(fits):
                rows.append(f"random,{order},{i},{f.slope:.6f}")
            worst = min(f.slope for f in fits)
            ctx.report[f"min_slope_order{order}"] = worst
            ctx.check(f"order{order}", worst >= order + 1 - 0.2)
    else:
        f = pt.zz_order_study(o["kind"])
        rows.append(f"{o['kind']},,0,{f.slope:.6f}")
        ctx.write("residuals.csv", f.to_csv())
        ctx.report["slope"] = f.slope
        if o["expected_slope"] is not None:
            ctx.check("slope", abs(f.slope - o["expected_slope"]) <= o["slope_tol"])
    ctx.write("fits.csv", "\n".join(rows) + "\n")


def task_metamaterial(o, system, ctx: Context):
    import numpy as np

    from . import metamaterial as mm

    kind = o["kind"]
    if kind in ("chain", "pairs"):
        att = tuple(tuple(a) for a in o["attachments"]) if o["attachments"] else ()
        chain = mm.ChainSpec(o["N"], o["nu_local"], o["J"], att, o["boundary"])
        modes = mm.diagonalize_chain(chain)
        ctx.write("spectrum.csv", modes.to_csv())
        ctx.report.update(orthogonality_error=modes.orthogonality_error(), **{
            f"spacing_{k}": v for k, v in modes.spacing_stats().items()})
        ctx.check("orthogonal", modes.orthogonality_error() < 1e-10)
        if o["boundary"] == "open":
            f, _ = mm.analytic_open_chain(o["N"], o["nu_local"], o["J"])
            err = float(np.max(np.abs(f - modes.nu_k)))
            ctx.report["analytic_spectrum_error"] = err
            ctx.check("analytic_spectrum", err < 1e-10)
        if kind == "pairs":
            pairs = [tuple(int(v) for v in p) for p in o["pairs"]]
            drive = mm.DriveParams(tuple(o["omega"]), tuple(o["Omega"]), tuple(o["drive_eps"]))
            rep = mm.pair_assignment_check(modes, pairs, drive, o["factor"])
            ctx.write("feasibility.txt", rep.to_text())
            ctx.report["feasible"] = rep.feasible
        return
    if kind == "two_mode":
        from .oracle import oracle_for_spec

        cz = mm.two_mode_cz(o["omega"], o["g"], o["nu"], o["g_tilde"], o["Omega"], o["n_a"])
        rep = mm.multimode_gate_report(cz.spec, cz.tau)
        text = rep.to_text() + f"eps_s: {cz.eps_s:.15g}\neps_a: {cz.eps_a:.15g}\ntau: {cz.tau:.15g}\n"
        text += f"slowdown: {cz.slowdown():.15g}\n"
        ctx.report.update(tau=cz.tau, eps_s=cz.eps_s, eps_a=cz.eps_a, nonlinear_phase=rep.nonlinear_phase,
                          slowdown=cz.slowdown(), closure=rep.gate.max_residual())
        ctx.check("closure", rep.gate.max_residual() < ctx.tolerance(1e-10))
        ctx.check("cz_phase", abs(abs(rep.nonlinear_phase) - math.pi) < 1e-6)
        if o["oracle"]:
            orc = oracle_for_spec(cz.spec, cz.tau, cutoff=o["cutoff"])
            text += f"oracle_nonlinear_phase: {orc.nonlinear_phase():.15g}\n"
            ctx.check("oracle_phase", abs(orc.nonlinear_phase() - rep.nonlinear_phase) < 1e-4)
        ctx.write("two_mode.txt", text)
        return
    if kind == "adjacent_closure":
        rows = ["n_a,x_a,closure"]
        for na in o["n_a_values"]:
            for x in o["x_values"]:
                c = mm.adjacent_mode_closure(na, x)
                rows.append(f"{na},{x!r},{c:.6e}")
                if na % 2:
                    ctx.check(f"odd_n_a_{na}_x_{x:g}", c < ctx.tolerance(1e-10))
        ctx.write("closure.csv", "\n".join(rows) + "\n")
        return
    if kind == "grid_zero_zz":
        ga = mm.grid_zero_zz_assignment(o["omegas"], o["eta"], 0.05 if o["g"] is None else o["g"][0], o["size"])
        rows = ["site_a,site_b,label,nu,jzz"]
        for e in ga.edges:
            rows.append(f"\"{e.site_a}\",\"{e.site_b}\",{e.label},{e.nu!r},{e.jzz:.3e}")
        ctx.write("edges.csv", "\n".join(rows) + "\n")
        ctx.report.update(max_abs_jzz=ga.max_abs_jzz(), min_adjacent_separation=ga.min_adjacent_separation())
        ctx.check("zero_zz", ga.max_abs_jzz() < 1e-12)
        return
    raise TaskFailure(f"unknown metamaterial kind {kind}")


def task_scaling(o, system, ctx: Context):
    from . import metamaterial as mm

    res = mm.scaling_experiment(o["scheme"], o["n_spectators"], o["lambdas"], o["Delta"], o["Omega"])
    rows = ["n_spectators,lambda,construction_infidelity,worst_pair_infidelity,estimate"]
    for n in res.n_spectators:
        for lam, a, b in zip(res.lambdas, res.construction[n], res.enumerated[n]):
            g = lam * o["Omega"] / (n + 2)
            est = mm.infidelity_estimates(mm.ScalingParams(n + 2, g, o["Delta"], o["Omega"]), o["scheme"])
            rows.append(f"{n},{lam!r},{a:.6e},{b:.6e},{est:.6e}")
    ctx.write("scaling.csv", "\n".join(rows) + "\n")
    ctx.write("scaling.txt", res.to_text())
    ctx.report["exponent"] = res.exponent
    if o["expected_exponent"] is not None:
        ctx.check("exponent", all(abs(e - o["expected_exponent"]) <= 0.3 for e in res.exponents.values()))


@dataclass
class TaskDef:
    run: Callable
    options: dict[str, Opt]
    needs_system: bool = False


_FLOWER_STYLES = ("original", "cpmg_shifted")

TASKS: dict[str, TaskDef] = {
    "gate": TaskDef(task_gate, {
        "loops": Opt("int", 1, check=lambda v: None if v >= 1 else "must be >= 1"),
        "n_samples": Opt("int", 256, check=_positive),
        "oracle": Opt("bool", False),
        "cutoff": Opt("int", None, check=_positive),
        "random_sets": Opt("int", 0, check=_nonneg),
    }),
    "flower": TaskDef(task_flower, {
        "P": Opt("int", required=True, check=_even_p),
        "x": Opt("float", 0.0, check=lambda v: None if abs(v) < 1 else "must satisfy |x| < 1"),
        "eps": Opt("float", 1.0, check=_positive),
        "M": Opt("float", 0.25),
        "m": Opt("int", 0, check=_nonneg),
        "style": Opt("str", "original", choices=_FLOWER_STYLES),
        "semantics": Opt("str", "z_flip", choices=("z_flip", "omega_sign_flip")),
        "n_samples": Opt("int", 512, check=lambda v: None if v >= 4 and v % 2 == 0 else "must be even and >= 4"),
        "slowdown_P": Opt("list[int]", None, check=_all_even_p),
    }),
    "uhrig": TaskDef(task_uhrig, {
        "p_values": Opt("list[int]", [1, 3, 4, 5, 6], check=lambda v: None if min(v) >= 1 else "entries must be >= 1"),
        "eps": Opt("float", 1.0, check=_positive),
        "M": Opt("float", 0.25),
        "trajectory_p": Opt("int", None, check=_positive),
        "n_samples": Opt("int", 512, check=_positive),
    }),
    "integers": TaskDef(task_integers, {
        "knob": Opt("str", "g2", choices=("g1", "g2", "omega1", "omega2", "nu")),
        "target": Opt("list[int]", None, check=lambda v: None if len(v) == 3 else "must have three entries"),
        "solve_tol": Opt("float", 1e-8, check=_positive),
        "oracle": Opt("bool", True),
        "cutoff": Opt("int", None, check=_positive),
    }, needs_system=True),
    "zz": TaskDef(task_zz, {
        "kind": Opt("str", required=True, choices=("single_cavity", "direct_coupling", "two_oscillators",
                                                   "eta_expansion", "zero_zz_roots", "echo")),
        "exact": Opt("bool", True),
        "n_grid": Opt("int", 50, check=_positive),
        "omega_i": Opt("float"),
        "omega_j": Opt("float"),
        "eta": Opt("float"),
        "P": Opt("int", 4, check=_even_p),
        "eps": Opt("float", 1.0, check=_positive),
    }),
    "sw_order_fit": TaskDef(task_sw_order_fit, {
        "kind": Opt("str", "random", choices=("random", "single_cavity", "two_osc_sixth", "eta_expansion")),
        "orders": Opt("list[int]", [2, 4, 6], check=lambda v: None if all(1 <= x <= 6 for x in v) else
                      "entries must lie in 1..6"),
        "n_problems": Opt("int", 5, check=_positive),
        "expected_slope": Opt("float", None),
        "slope_tol": Opt("float", 0.3, check=_positive),
    }),
    "metamaterial": TaskDef(task_metamaterial, {
        "kind": Opt("str", required=True, choices=("chain", "pairs", "two_mode", "adjacent_closure", "grid_zero_zz")),
        "N": Opt("int", 2, check=_positive),
        "nu_local": Opt("float", 5.0),
        "J": Opt("float", 0.1),
        "boundary": Opt("str", "open", choices=("open", "periodic")),
        "attachments": Opt("list[list[float]]", None),
        "pairs": Opt("list[list[float]]", None),
        "omega": Opt("list[float]", None),
        "Omega": Opt("list[float]", None),
        "drive_eps": Opt("list[float]", [0.0]),
        "factor": Opt("float", 10.0, check=_positive),
        "g": Opt("list[float]", None),
        "nu": Opt("float", 5.0),
        "g_tilde": Opt("float", 0.05),
        "n_a": Opt("int", -99),
        "oracle": Opt("bool", False),
        "cutoff": Opt("int", None, check=_positive),
        "n_a_values": Opt("list[int]", [1, 2, 3, 4]),
        "x_values": Opt("list[float]", [0.0]),
        "omegas": Opt("list[float]", None),
        "eta": Opt("float", 0.3),
        "size": Opt("int", 4, check=lambda v: None if v >= 2 and v % 2 == 0 else "must be even and >= 2"),
    }),
    "scaling": TaskDef(task_scaling, {
        "scheme": Opt("str", required=True, choices=("uncancelled", "integers", "flowers")),
        "n_spectators": Opt("list[int]", [4, 6, 8], check=lambda v: None if all(0 <= x <= 8 for x in v) else
                            "entries must lie in 0..8 (branch budget of 10 qubits)"),
        "lambdas": Opt("list[float]", [0.02, 0.04, 0.08], check=lambda v: None if all(x > 0 for x in v) else
                       "entries must be positive"),
        "Delta": Opt("float", 10.0, check=_positive),
        "Omega": Opt("float", 1.0, check=_positive),
        "expected_exponent": Opt("float", None),
    }),
}

# per-kind required options for tasks with sub-kinds
KIND_REQUIRES = {
    ("zz", "zero_zz_roots"): ("omega_i", "omega_j", "eta"),
    ("zz", "single_cavity"): ("@system",),
    ("zz", "direct_coupling"): ("@system",),
    ("zz", "two_oscillators"): ("@system",),
    ("zz", "eta_expansion"): ("@system",),
    ("metamaterial", "pairs"): ("attachments", "pairs", "omega", "Omega"),
    ("metamaterial", "two_mode"): ("omega", "g", "Omega"),
    ("metamaterial", "grid_zero_zz"): ("omegas",),
}

TOP_KEYS = {"schema_version", "name", "task", "description", "units", "seed", "system", "options", "outputs"}


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------


def bundled_dir() -> Path:
    return Path(str(resources.files("ccrlab") / "scenarios"))


def bundled_scenarios() -> dict[str, Path]:
    return {p.stem: p for p in sorted(bundled_dir().glob("*.yaml"))}


def resolve_config(path_or_name: str) -> Path:
    p = Path(path_or_name)
    if p.exists():
        return p
    named = bundled_scenarios().get(path_or_name)
    if named is not None:
        return named
    raise ConfigParseError(f"config not found: {path_or_name}")


def load_config(path: Path) -> tuple[dict, bytes]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"{path}: YAML parse error: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigParseError(f"{path}: top level must be a mapping")
    return data, raw


def _scale_units(cfg: dict) -> dict:
    if cfg.get("units", "angular") != "cyclic":
        return cfg
    two_pi = 2 * math.pi

    def scale(v):
        if isinstance(v, list):
            return [scale(x) for x in v]
        if _is_number(v):
            return v * two_pi
        return v

    out = dict(cfg)
    if isinstance(cfg.get("system"), dict):
        out["system"] = {k: scale(v) if k in FREQ_SYSTEM_KEYS else v for k, v in cfg["system"].items()}
    if isinstance(cfg.get("options"), dict):
        out["options"] = {k: scale(v) if k in FREQ_OPTION_KEYS else v for k, v in cfg["options"].items()}
    return out


@dataclass
class Scenario:
    name: str
    task: str
    seed: int
    system: dict | None
    options: dict
    out_subdir: str
    description: str = ""


def validate_config(cfg: dict) -> Scenario:
    errors: list[str] = []
    for k in cfg:
        if k not in TOP_KEYS:
            errors.append(f"{k}: unknown top-level field")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        errors.append(f"schema_version: must be {SCHEMA_VERSION} (got {cfg.get('schema_version')!r})")
    name = cfg.get("name")
    if not isinstance(name, str) or not name or "/" in name or name.startswith("."):
        errors.append("name: must be a non-empty string without '/'")
    task = cfg.get("task")
    if task not in TASKS:
        errors.append(f"task: must be one of {sorted(TASKS)} (got {task!r})")
    units = cfg.get("units", "angular")
    if units not in ("angular", "cyclic"):
        errors.append("units: must be 'angular' or 'cyclic'")
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        errors.append("seed: must be a non-negative integer")
    outputs = cfg.get("outputs", {}) or {}
    sub = name if isinstance(name, str) else ""
    if not isinstance(outputs, dict):
        errors.append("outputs: must be a mapping")
    else:
        for k in outputs:
            if k != "dir":
                errors.append(f"outputs.{k}: unknown field")
        sub = outputs.get("dir", sub)
        if not isinstance(sub, str) or not sub or os.path.isabs(sub) or ".." in Path(sub).parts:
            errors.append("outputs.dir: must be a relative path inside the output directory")
    options_raw = cfg.get("options", {}) or {}
    if not isinstance(options_raw, dict):
        errors.append("options: must be a mapping")
        options_raw = {}
    if errors and task not in TASKS:
        raise ConfigValidationError(errors)
    cfg = _scale_units(cfg)
    options_raw = cfg.get("options", {}) or {}
    opts: dict[str, Any] = {}
    if task in TASKS:
        schema = TASKS[task].options
        for k in options_raw:
            if k not in schema:
                errors.append(f"options.{k}: unknown option for task {task}")
        for k, spec in schema.items():
            if k not in options_raw or options_raw[k] is None:
                if spec.required:
                    errors.append(f"options.{k}: required")
                opts[k] = spec.default
                continue
            val, err = _coerce(spec.kind, options_raw[k])
            if err is None and spec.choices is not None and val not in spec.choices:
                err = f"must be one of {list(spec.choices)}"
            if err is None and spec.check is not None:
                err = spec.check(val)
            if err:
                errors.append(f"options.{k}: {err} (got {options_raw[k]!r})")
            opts[k] = val
        system = cfg.get("system")
        kind_req = KIND_REQUIRES.get((task, opts.get("kind")), ())
        if TASKS[task].needs_system or "@system" in kind_req:
            if system is None:
                errors.append("system: required for this task")
        for k in kind_req:
            if k != "@system" and opts.get(k) is None:
                errors.append(f"options.{k}: required when kind = {opts.get('kind')}")
        if system is not None:
            _validate_system(system, errors)
    if errors:
        raise ConfigValidationError(errors)
    return Scenario(name, task, seed, cfg.get("system"), opts, sub, str(cfg.get("description", "")))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _package_version() -> str:
    from . import __version__

    return __version__


def run_scenario(sc: Scenario, raw_config: bytes, out_root: Path, seed: int | None = None,
                 tol: float | None = None) -> tuple[int, Path | None]:
    """Run in a staging directory and move it into place; nothing is left behind on a crash."""
    out_root.mkdir(parents=True, exist_ok=True)
    final = out_root / sc.out_subdir
    stage = Path(tempfile.mkdtemp(prefix=f".{Path(sc.out_subdir).name}.", dir=out_root))
    ctx = Context(out_dir=stage, seed=sc.seed if seed is None else seed, tol=tol)
    try:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            TASKS[sc.task].run(sc.options, sc.system, ctx)
        status = "pass" if all(ctx.checks.values()) else "fail"
        rep = {"scenario": sc.name, "task": sc.task, "status": status}
        rep.update(ctx.report)
        for k, v in ctx.checks.items():
            rep[f"check_{k}"] = "pass" if v else "fail"
        ctx.write("report.txt", _report_text(rep))
        manifest = {
            "scenario": sc.name,
            "task": sc.task,
            "seed": ctx.seed,
            "tol": tol,
            "status": status,
            "version": _package_version(),
            "config_sha256": hashlib.sha256(raw_config).hexdigest(),
            "files": [{"path": f, "sha256": _sha256(stage / f), "bytes": (stage / f).stat().st_size}
                      for f in sorted(ctx.files)],
        }
        with open(stage / "manifest.json", "w", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except Exception:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    if final.exists():
        shutil.rmtree(final)
    final.parent.mkdir(parents=True, exist_ok=True)
    os.replace(stage, final)
    return (EXIT_OK if status == "pass" else EXIT_TASK), final


def _apply_thread_cap():
    n = os.environ.get("CCR_LAB_THREADS")
    if not n:
        return
    try:
        k = max(1, int(n))
    except ValueError:
        return
    for var in THREAD_VARS:
        os.environ[var] = str(k)


def cmd_list(args) -> int:
    for name, path in bundled_scenarios().items():
        try:
            cfg, _ = load_config(path)
            print(f"{name}\t{cfg.get('task', '?')}\t{cfg.get('description', '')}")
        except ConfigParseError:
            print(f"{name}\t?\tunreadable")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        path = resolve_config(args.config)
        cfg, _ = load_config(path)
        sc = validate_config(cfg)
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigValidationError as exc:
        for e in exc.errors:
            print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"ok: {sc.name} ({sc.task})")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        path = resolve_config(args.config)
        cfg, raw = load_config(path)
        sc = validate_config(cfg)
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigValidationError as exc:
        for e in exc.errors:
            print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        code, final = run_scenario(sc, raw, Path(args.out), args.seed, args.tol)
    except Exception as exc:  # any task crash maps to exit 1
        print(f"task failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TASK
    print(f"{'ok' if code == EXIT_OK else 'FAILED CHECKS'}: {sc.name} -> {final}")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccr-lab", description="Run cavity-gate scenarios and write CSV/text reports.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("--config", required=True, help="YAML file or bundled scenario name")
    r.add_argument("--out", default="ccr_lab_out", help="output root directory")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--tol", type=float, default=None, help="override the main check tolerance")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a scenario without running it")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv: list[str] | None = None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
