import math

import numpy as np
import pytest

from ccrlab.hilbert import SystemSpec
from ccrlab.oracle import cz_gate_comparison, oracle_for_spec, single_oscillator, unwrap_to


def test_unwrap_to_moves_onto_reference_branch():
    ref = {"a": 6.0, "b": -3.0}
    out = unwrap_to(ref, {"a": 6.0 - 2 * math.pi, "b": -3.0 + 4 * math.pi})
    assert out["a"] == pytest.approx(6.0) and out["b"] == pytest.approx(-3.0)


def test_single_oscillator_displacement():
    # static drive: <b>(t) = m / eps (e^{-i eps t} - 1)
    e, m, t = 0.7, 0.05, 2.3
    b, _ = single_oscillator([e], [m], [t], cutoff=20)
    assert b == pytest.approx(m / e * (np.exp(-1j * e * t) - 1), abs=1e-12)


def test_single_oscillator_full_loop_phase():
    e, m = 1.1, 0.08
    b, ph = single_oscillator([e], [m], [2 * math.pi / e], cutoff=20)
    assert abs(b) < 1e-12
    assert ph == pytest.approx(2 * math.pi * m * m / (e * e), abs=1e-12)


@pytest.mark.parametrize("loops", [1, 2])
def test_cz_comparison_two_routes_agree(loops):
    spec = SystemSpec.from_detunings([1.0, 1.2], [0.0], [0.05, 0.06], Omega=[0.3, 0.3], omega_d=5.0)
    cmp = cz_gate_comparison(spec, loops, cutoff=16)
    assert cmp.max_phase_error < 1e-10
    assert cmp.closed_closure < 1e-12 and cmp.oracle_closure < 1e-10
    assert abs(abs(cmp.oracle_nonlinear_phase) - math.pi) < 1e-10


def test_oracle_leaves_vacuum_for_off_loop_time():
    spec = SystemSpec.from_detunings([1.0, 1.2], [0.3], [0.05, 0.06], Omega=[0.3, 0.3], omega_d=5.0)
    res = oracle_for_spec(spec, 1.7, cutoff=16)
    assert res.max_closure() > 1e-3
    assert set(res.phases) == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
