import math

import numpy as np
import pytest

from ccrlab.hilbert import SystemSpec
from ccrlab.integers import (KNOBS, NoSolutionError, analytic_nonlinear_phase, apply_knob, knob_value,
                             sensitivity, solve_integers)
from ccrlab.oracle import oracle_for_spec
from ccrlab.phasespace import integer_conditions_ok


@pytest.fixture(scope="module")
def base():
    return SystemSpec(omega=[8.0, 8.2], nu=[0.0], g=[0.5, 0.5], Omega=[1.0, 1.0], omega_d=-1.2)


@pytest.fixture(scope="module")
def solution(base):
    return solve_integers(base, "g2", target_ns=(40, 1, 1))


def test_solution_meets_integer_conditions(solution):
    s = solution
    assert integer_conditions_ok(s.n_eps, s.n1, s.n2)
    assert s.spec.eps[0] * s.tau / math.pi == pytest.approx(40, abs=1e-8)
    assert s.f[0] * s.tau / math.pi == pytest.approx(1, abs=1e-8)
    assert s.f[1] * s.tau / math.pi == pytest.approx(1, abs=1e-8)
    assert s.achieved_phase == pytest.approx(math.pi, abs=1e-8)
    assert s.residuals["closure"] < 1e-10


def test_solution_against_oracle(solution):
    orc = oracle_for_spec(solution.spec, solution.tau, f_coeffs=list(solution.f))
    assert orc.max_closure() < 1e-5
    assert abs(abs(orc.nonlinear_phase()) - math.pi) < 1e-4


def test_slowdown_follows_loop_count(solution):
    # n_eps / 2 loops at fixed phase: tau grows like sqrt(n_eps / 2) up to the f corrections
    assert solution.slowdown() == pytest.approx(math.sqrt(20), rel=2e-3)


def test_free_search_finds_smallest_triple(base):
    sol = solve_integers(base, "g2")
    assert integer_conditions_ok(sol.n_eps, sol.n1, sol.n2)
    assert sol.residuals["closure"] < 1e-10
    assert abs(sol.n_eps) <= 40


def test_zero_dispersion_path(base):
    sol = solve_integers(base, shifts=lambda s: np.zeros(2))
    assert sol.knob[0] == "none" and sol.n1 == sol.n2 == 0 and sol.n_eps % 2 == 0
    orc = oracle_for_spec(sol.spec, sol.tau)
    assert orc.max_closure() < 1e-8
    assert abs(abs(orc.nonlinear_phase()) - math.pi) < 1e-6


def test_invalid_target_rejected(base):
    with pytest.raises(NoSolutionError):
        solve_integers(base, "g2", target_ns=(3, 1, 1))


def test_knob_roundtrip(base):
    for k in KNOBS:
        v = knob_value(base, k)
        assert knob_value(apply_knob(base, k, v + 0.01), k) == pytest.approx(v + 0.01)
    with pytest.raises(ValueError):
        apply_knob(base, "eta", 1.0)


def test_analytic_phase_linear_in_tau_when_closed(solution):
    p1 = analytic_nonlinear_phase(solution.spec, solution.tau, solution.f)
    p2 = analytic_nonlinear_phase(solution.spec, 2 * solution.tau, solution.f)
    assert p2 == pytest.approx(2 * p1, rel=1e-12)


def test_sensitivity_reports_every_parameter(solution):
    s = sensitivity(solution)
    assert {"tau", "omega_d", "g2", "nu"} <= set(s)
    for name, v in s.items():
        assert math.isfinite(v["closure_drift"]) and math.isfinite(v["phase_drift"]), name
    # small perturbations respond linearly: halving the step halves the phase drift
    assert s["g2"]["phase_ratio"] == pytest.approx(2.0, rel=1e-2)
    assert s["nu"]["closure_drift"] > 0
