import math

import numpy as np
import pytest

from ccrlab.flowers import (FLIP_OMEGA, FLIP_Z, FLIP_Z_SPECTATORS, FlowerGeometry, PulseEvent, PulseSchedule,
                            flower_areas, flower_nonlinear_phase, flower_slowdown, make_flower_schedule,
                            multimode_closure_check, no_pulse_schedule, single_branch_table, solve_cz_flower,
                            trace_flower, uhrig_closing_time, uhrig_flower, uhrig_fractions, uhrig_schedule,
                            zz_echo_factor)
from ccrlab.hilbert import SystemSpec
from ccrlab.oracle import oracle_for_spec, single_oscillator


@pytest.mark.parametrize("P", [4, 6, 8, 10])
@pytest.mark.parametrize("style", ["original", "cpmg_shifted"])
def test_flowers_close_for_any_x(P, style):
    sched = make_flower_schedule(P, 1.3, style=style)
    for x in (0.0, 0.15, -0.25):
        traj = trace_flower(single_branch_table(1.3, x, 0.2), sched)
        assert traj.closure_residual.max() < 1e-12


def test_flower_against_fock_oracle():
    P, eps, x, M = 4, 1.0, 0.2, 0.25
    sched = make_flower_schedule(P, eps)
    tau = sched.params["tau"]
    traj = trace_flower(single_branch_table(eps, x, M), sched, n_samples=8)
    epsl = [eps * (1 + x * (-1) ** k) for k in range(P)]
    ml = [M * (-1) ** k for k in range(P)]
    b, ph = single_oscillator(epsl, ml, [tau] * P, cutoff=30)
    assert abs(b) < 1e-10
    # the Fock phase includes the free-rotation reference only through <vac|U|vac>
    assert ph == pytest.approx(traj.phase[0], abs=1e-9)


def test_formula_phase_matches_trace_for_m1():
    geom = FlowerGeometry(4, 0.1, 0.2, 1.0, 1)
    sched = make_flower_schedule(4, 1.0, m=1)
    traj = trace_flower(single_branch_table(1.0, 0.1, 0.2), sched, n_samples=512)
    assert flower_areas(geom)[2] == pytest.approx(traj.phase[0], abs=1e-9)


def test_slowdown_values():
    assert flower_slowdown(4) == pytest.approx(3 / math.sqrt(3 + 4 / math.pi), rel=1e-14)
    vals = [flower_slowdown(p) for p in (4, 6, 8, 16, 64, 256)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < math.pi / 2 and math.pi / 2 - vals[-1] < 5e-3


def test_odd_or_short_schedules_rejected():
    with pytest.raises(ValueError):
        make_flower_schedule(5, 1.0)
    with pytest.raises(ValueError):
        make_flower_schedule(2, 1.0)
    make_flower_schedule(2, 1.0, allow_p2=True)


def test_schedule_validation_and_text_roundtrip():
    with pytest.raises(ValueError):
        PulseSchedule((PulseEvent(2.0), PulseEvent(1.0)), 3.0)
    with pytest.raises(ValueError):
        PulseSchedule((PulseEvent(1.0, "bogus"),), 3.0)
    s = make_flower_schedule(6, 0.7, style="cpmg_shifted")
    back = PulseSchedule.from_text(s.to_text())
    assert np.allclose(back.times, s.times) and back.total_time == s.total_time


def test_spectator_flip_only_touches_spectators():
    s = PulseSchedule((PulseEvent(1.0, FLIP_Z_SPECTATORS),), 2.0)
    segs = s.segments(3)
    assert list(segs[1][1]) == [1, 1, -1]
    o = PulseSchedule((PulseEvent(1.0, FLIP_OMEGA),), 2.0).segments(2)
    assert o[1][2] == -1.0 and list(o[1][1]) == [1, 1]


def test_solve_cz_flower_matches_oracle():
    spec = SystemSpec.from_detunings([1.0, 1.2], [0.0], [0.05, 0.05], Omega=[0.3, 0.3], omega_d=5.0)
    f = [0.002, 0.0015]
    eps, T, gate = solve_cz_flower(spec, 4, f_coeffs=f)
    assert gate.is_cz(1e-8, 1e-10)
    s = spec.replace(nu=(spec.omega_d + eps,))
    sched = make_flower_schedule(4, eps)
    orc = oracle_for_spec(s, sched, f_coeffs=f, cutoff=20)
    assert orc.max_closure() < 1e-8
    assert abs(abs(orc.nonlinear_phase()) - math.pi) < 1e-6


def test_flower_nonlinear_phase_symmetric_in_qubits():
    a = flower_nonlinear_phase(0.1, 0.2, 0.01, 0.02, 1.0)
    b = flower_nonlinear_phase(0.2, 0.1, 0.02, 0.01, 1.0)
    assert a == pytest.approx(b, rel=1e-12)


def test_multimode_closure_check_commensurate_modes():
    sched = make_flower_schedule(4, 1.0, style="cpmg_shifted")
    tables = [single_branch_table(1.0, 0.1, 0.2), single_branch_table(3.0, 0.1, 0.2)]
    res = multimode_closure_check(tables, sched)
    assert max(res.values()) < 1e-12


def test_uhrig_fractions_and_closure():
    fr = uhrig_fractions(3)
    assert fr[0] == 0 and fr[-1] == pytest.approx(1.0)
    assert np.all(np.diff(fr) > 0)
    for p in (2, 3, 4, 5, 6):
        tc, traj = uhrig_flower(p, 1.0, 0.0, 0.3, 256)
        assert traj.closure_residual.max() < 1e-10
        assert tc == pytest.approx(uhrig_closing_time(p, 1.0))


def test_uhrig_does_not_cancel_dispersion():
    tc = uhrig_closing_time(3, 1.0)
    traj = trace_flower(single_branch_table(1.0, 0.1, 0.3), uhrig_schedule(3, tc))
    assert traj.closure_residual.max() > 1e-3


def test_echo_factor_pairings():
    a = make_flower_schedule(4, 1.0, action=FLIP_Z)
    b = make_flower_schedule(4, 1.0, style="cpmg_shifted", action=FLIP_Z)
    assert zz_echo_factor(a, b) == 0.0
    assert zz_echo_factor(a, a) == pytest.approx(1.0)
    assert zz_echo_factor(no_pulse_schedule(a.total_time), no_pulse_schedule(a.total_time)) == 1.0
