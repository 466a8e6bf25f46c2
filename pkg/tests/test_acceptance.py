"""Acceptance criteria 1-9, each at its stated tolerance.

Every test prints a single [PASS]/[FAIL] line before asserting. Criterion 10
lists exclusions only and has no test.
"""

import math
import time

import numpy as np
import pytest

from ccrlab import metamaterial as mm
from ccrlab import perturbation as pt
from ccrlab.flowers import (FlowerGeometry, FLIP_Z, flower_areas, flower_slowdown, make_flower_schedule,
                            single_branch_table, trace_flower, uhrig_closing_time, zz_echo_factor)
from ccrlab.hilbert import SystemSpec
from ccrlab.integers import solve_integers
from ccrlab.oracle import cz_gate_comparison, oracle_for_spec
from ccrlab.phasespace import cz_time, integer_conditions_ok, run_gate

pytestmark = pytest.mark.acceptance


def test_criterion_1_gate_core_oracle(verdict):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_phase = worst_closure = 0.0
    for _ in range(5):
        D = rng.uniform(0.8, 1.5, 2)
        g = rng.uniform(0.02, 0.1, 2) * D
        Om = rng.uniform(0.2, 0.5, 2)
        spec = SystemSpec.from_detunings(D, [0.0], g, Omega=Om, omega_d=5.0)
        c = cz_gate_comparison(spec)
        assert c.eps * c.tau == pytest.approx(2 * math.pi, rel=1e-12)
        worst_phase = max(worst_phase, c.max_phase_error)
        worst_closure = max(worst_closure, c.oracle_closure, c.closed_closure)
    elapsed = time.perf_counter() - t0
    ok = worst_phase < 1e-6 and worst_closure < 1e-6 and elapsed < 30
    verdict("criterion 1", ok, f"max |dphi| {worst_phase:.1e}, closure {worst_closure:.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_cz_condition(verdict):
    Delta, g, Om = np.array([1.0, 1.25]), np.array([0.07, 0.09]), np.array([0.3, 0.4])
    spec = SystemSpec.from_detunings(Delta, [0.0], g, Omega=Om, omega_d=5.0)
    tau, eps = cz_time(spec)
    spec = spec.replace(nu=(spec.omega_d + eps,))
    gate, _ = run_gate(spec, tau, n_samples=16)
    analytic = abs(abs(gate.signed_nonlinear_phase()) - math.pi)
    orc = oracle_for_spec(spec, tau)
    oracle_err = abs(abs(orc.nonlinear_phase()) - math.pi)
    sin_theta = Om / np.sqrt(Delta**2 + Om**2)
    fastest = math.pi / math.sqrt(g[0] * g[1] * sin_theta[0] * sin_theta[1])
    time_err = abs(tau - fastest) / fastest
    ok = analytic < 1e-8 and oracle_err < 1e-4 and time_err < 1e-10 and gate.max_residual() < 1e-10
    verdict("criterion 2", ok, f"phase err {analytic:.1e} (oracle {oracle_err:.1e}), time rel err {time_err:.1e}")
    assert ok


def test_criterion_3_flower_closure(verdict):
    eps, M = 1.0, 0.25
    worst = {"z_flip": 0.0, "omega_sign_flip": 0.0}
    worst_law = 0.0
    for P in (4, 6, 8):
        sched = make_flower_schedule(P, eps)
        for x in (0.0, 0.1, -0.1, 0.2, -0.2, 0.3, -0.3):
            table = single_branch_table(eps, x, M)
            for sem in worst:
                traj = trace_flower(table, sched, sem, 1024)
                worst[sem] = max(worst[sem], float(traj.closure_residual.max()))
                if sem == "z_flip":
                    # two independent routes: analytic branch phase vs twice the traced polygon area
                    law = np.abs(traj.phase - 2 * traj.area[:, 0]).max()
                    formula = abs(flower_areas(FlowerGeometry(P, x, M, eps, 0))[2] - traj.phase[0])
                    worst_law = max(worst_law, law, formula)
    p2 = trace_flower(single_branch_table(eps, 0.1, M), make_flower_schedule(2, eps, allow_p2=True), "z_flip")
    p2_res = float(p2.closure_residual.max())
    ok_z = worst["z_flip"] < 1e-10
    ok_om = worst["omega_sign_flip"] < 1e-10
    ok_p2 = p2_res > 1e-3 * abs(M / eps)
    ok = ok_z and ok_om and ok_p2 and worst_law < 1e-6
    verdict("criterion 3", ok, f"z_flip {worst['z_flip']:.1e}, omega_sign_flip {worst['omega_sign_flip']:.2f} "
            f"(does not close for x != 0), P=2 residual {p2_res:.2f}, phase-area {worst_law:.1e}")
    assert ok


def test_criterion_4_reference_constants(verdict):
    s4 = flower_slowdown(4)
    trend = [flower_slowdown(p) for p in (4, 8, 16, 32)]
    monotone = all(a < b < math.pi / 2 for a, b in zip(trend, trend[1:]))
    ok_slow = abs(s4 - 3 / math.sqrt(3 + 4 / math.pi)) < 1e-12 and abs(s4 - 1.4512) < 1e-3 and round(s4, 2) == 1.45
    # quoted values are truncated, so compare the digits that are given
    quoted = {3: "2.42259", 4: "2.79084", 5: "3.1629", 6: "3.52887"}
    eps = 1.0
    digits_ok = True
    got = {}
    for p, text in quoted.items():
        unit = uhrig_closing_time(p, eps) * eps / (2 * math.pi)
        got[p] = unit
        n = len(text.split(".")[1])
        digits_ok &= math.floor(unit * 10**n) / 10**n == pytest.approx(float(text), abs=1e-12)
    p1 = uhrig_closing_time(1, eps)
    p1_ok = abs(p1 - 4 * math.pi / eps) < 1e-9
    ok = ok_slow and monotone and digits_ok and p1_ok
    verdict("criterion 4", ok, f"P=4 slowdown {s4:.5f}, trend {[round(t, 4) for t in trend]}, "
            f"uhrig {', '.join(f'p{p}={v:.6f}' for p, v in got.items())}, p1 = {p1 * eps / math.pi:.6f} pi/eps")
    assert ok


def test_criterion_5_integers(verdict):
    spec = SystemSpec(omega=[8.0, 8.2], nu=[0.0], g=[0.5, 0.5], Omega=[1.0, 1.0], omega_d=-1.2)
    sol = solve_integers(spec, "g2", target_ns=(40, 1, 1))
    ratio = np.array(sol.f) / sol.spec.eps[0]
    conds = integer_conditions_ok(sol.n_eps, sol.n1, sol.n2)
    products = np.array([sol.spec.eps[0], *sol.f]) * sol.tau / math.pi
    exact_ints = np.allclose(products, [sol.n_eps, sol.n1, sol.n2], atol=1e-8, rtol=0)
    orc = oracle_for_spec(sol.spec, sol.tau, f_coeffs=list(sol.f))
    nl_err = abs(abs(orc.nonlinear_phase()) - math.pi)
    closure = orc.max_closure()
    slowdown = sol.slowdown()
    need = math.sqrt(40) * 0.8
    ok_core = conds and exact_ints and closure < 1e-5 and nl_err < 1e-4 and np.allclose(ratio, 1 / 40)
    ok = ok_core and slowdown >= need
    verdict("criterion 5", ok, f"conditions {conds}, oracle closure {closure:.1e}, phase err {nl_err:.1e}, "
            f"slowdown {slowdown:.4f} vs required {need:.4f} (closed form sqrt(n_eps/2) = {math.sqrt(20):.4f})")
    assert ok


def test_criterion_6_order_fits(verdict):
    t0 = time.perf_counter()
    mins = {k: min(f.slope for f in pt.sw_order_study(k, seed=0, n_problems=5)) for k in (2, 4, 6)}
    ok_a = mins[2] >= 2.8 and mins[4] >= 4.8 and mins[6] >= 6.8
    b = pt.zz_order_study("single_cavity").slope
    c = pt.zz_order_study("two_osc_sixth").slope
    d = pt.zz_order_study("eta_expansion").slope
    elapsed = time.perf_counter() - t0
    ok = ok_a and abs(b - 6) <= 0.3 and abs(c - 8) <= 0.5 and abs(d - 3) <= 0.3 and elapsed < 120
    verdict("criterion 6", ok, f"SW min slopes {mins[2]:.2f}/{mins[4]:.2f}/{mins[6]:.2f}, "
            f"single cavity {b:.2f}, sixth order {c:.2f}, eta expansion {d:.2f}, {elapsed:.1f}s")
    assert ok


def test_criterion_7_consistency_web(verdict):
    spec = SystemSpec(omega=[6.0, 6.35], nu=[5.0], g=[0.05, 0.06], eta=[0.25, 0.3])
    single = pt.zz_single_cavity(spec, exact=False)["formula_4th"]
    direct = pt.zz_direct_coupling(spec.replace(g_direct=0.0), exact=False)["formula_direct_g"]
    e_direct = abs(single - direct)
    args = (0.05, 0.06, 1.0, 1.35)
    e_eq = abs(pt.jzz_equal_eta(*args, 0.3) - pt.jzz_fourth(*args, 0.3, 0.3))
    e_eq2 = abs(pt.jzz_two_osc_fourth_equal_eta(0.05, 0.06, 0.04, 1.0, 1.35, 0.3)
                - pt.jzz_two_osc_fourth(0.05, 0.06, 0.04, 1.0, 1.35, 0.3, 0.3))
    roots = pt.zero_zz_cavity_frequency(5.0, 5.12, 0.3).usable()
    e_root = max(abs(pt.zz_numerator_equal_eta(nu, 5.0, 5.12, 0.3)) for nu in roots)
    gt, D1 = 0.06, 0.05
    D2 = math.sqrt(2 * gt**2 - D1**2)
    e_zero = abs(pt.jzz_two_osc_fourth_qubit(0.01, 0.02, gt, D1, D2))
    ok = (e_direct < 1e-12 and e_eq < 1e-12 and e_eq2 < 1e-12 and len(roots) == 2 and e_root < 1e-12
          and e_zero < 1e-10)
    verdict("criterion 7", ok, f"direct {e_direct:.1e}, equal eta {max(e_eq, e_eq2):.1e}, "
            f"roots {e_root:.1e}, qubit-limit zero {e_zero:.1e}")
    assert ok


def test_criterion_8_two_mode_gate(verdict):
    odd = max(mm.adjacent_mode_closure(n, x) for n in (1, 3, 5, 7, -1, -3) for x in (0.0, 1 / 15))
    # even n_a: closure fails for at least one x_a of the grid (n_a = 0 mod 4 happens to close at x_a = 0)
    even = min(max(mm.adjacent_mode_closure(n, x) for x in (0.0, 1 / 15)) for n in (2, 4, 6, 8, -2))
    cz = mm.two_mode_cz([6.0, 6.0], [0.05, 0.05], 5.0, 0.05, [0.3, 0.3], -3)
    rep = mm.multimode_gate_report(cz.spec, cz.tau)
    orc = oracle_for_spec(cz.spec, cz.tau, cutoff=16)
    phase_err = abs(orc.nonlinear_phase() - rep.nonlinear_phase)
    slow = mm.two_mode_cz([6.0, 6.0], [0.05, 0.05], 5.0, 0.05, [0.3, 0.3], -99).slowdown()
    ok = odd < 1e-10 and even > 1e-3 and phase_err < 1e-4 and abs(slow / math.sqrt(2) - 1) < 0.01
    verdict("criterion 8", ok, f"odd closure {odd:.1e}, even min residual {even:.3f}, "
            f"oracle phase err {phase_err:.1e}, slowdown {slow:.4f}")
    assert ok


def test_criterion_9_scaling_exponents(verdict):
    out = {}
    for scheme, target in (("uncancelled", 2.0), ("integers", 2.0), ("flowers", 4.0)):
        res = mm.scaling_experiment(scheme, (4, 6, 8))
        out[scheme] = (target, res.exponents)
    ok_exp = all(abs(e - t) <= 0.3 for t, ex in out.values() for e in ex.values())
    a = make_flower_schedule(4, 1.0, style="original", action=FLIP_Z)
    b = make_flower_schedule(4, 1.0, style="cpmg_shifted", action=FLIP_Z)
    echo = zz_echo_factor(a, b)
    ok = ok_exp and echo == 0.0
    detail = ", ".join(f"{s} " + "/".join(f"{e:.2f}" for e in ex.values()) for s, (_, ex) in out.items())
    verdict("criterion 9", ok, f"exponents {detail}, echo factor {echo}")
    assert ok
