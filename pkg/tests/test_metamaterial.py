import math

import numpy as np
import pytest

from ccrlab import metamaterial as mm
from ccrlab.oracle import oracle_for_spec


def test_two_cavity_modes():
    modes = mm.diagonalize_chain(mm.ChainSpec(2, 5.0, 0.1, ((0, 0, 0.05), (1, 1, 0.05))))
    assert np.allclose(modes.nu_k, [4.9, 5.1])
    assert modes.orthogonality_error() < 1e-14
    # one mode couples the two qubits with equal, the other with opposite sign
    prods = modes.g_ik[0] * modes.g_ik[1]
    assert sorted(np.sign(prods)) == [-1.0, 1.0]


@pytest.mark.parametrize("N", [3, 7, 20])
def test_open_chain_matches_analytic(N):
    modes = mm.diagonalize_chain(mm.ChainSpec(N, 5.0, 0.1))
    freqs, _ = mm.analytic_open_chain(N, 5.0, 0.1)
    assert np.max(np.abs(np.sort(freqs) - modes.nu_k)) < 1e-12


def test_periodic_chain_degeneracies():
    modes = mm.diagonalize_chain(mm.ChainSpec(6, 5.0, 0.1, boundary="periodic"))
    expect = np.sort(5.0 + 2 * 0.1 * np.cos(2 * np.pi * np.arange(6) / 6))
    assert np.allclose(modes.nu_k, expect)


def test_chain_spec_validation():
    with pytest.raises(ValueError):
        mm.ChainSpec(0, 5.0, 0.1)
    with pytest.raises(ValueError):
        mm.ChainSpec(3, 5.0, 0.1, ((0, 0, 0.1), (0, 1, 0.1)))
    with pytest.raises(ValueError):
        mm.ChainSpec(3, 5.0, 0.1, ((0, 5, 0.1),))


def test_mode_csv():
    modes = mm.diagonalize_chain(mm.ChainSpec(3, 5.0, 0.1, ((0, 0, 0.05),)))
    lines = modes.to_csv().strip().splitlines()
    assert len(lines) == 4


def test_pair_assignment_margins():
    chain = mm.ChainSpec(10, 5.0, 0.1, ((0, 0, 0.01), (1, 9, 0.01), (2, 4, 0.01), (3, 5, 0.01)))
    modes = mm.diagonalize_chain(chain)
    rep = mm.pair_assignment_check(modes, [(0, 1, 0), (2, 3, 9)],
                                   mm.DriveParams((6.0, 6.1, 6.2, 6.3), (0.1,) * 4, 0.001))
    assert len(rep.pairs) == 2
    assert "feasible" in rep.to_text()
    with pytest.raises(ValueError):
        mm.pair_assignment_check(modes, [(0, 1, 0), (1, 2, 3)], mm.DriveParams((6.0,) * 4, (0.1,) * 4))


def test_adjacent_mode_parity():
    for n in (1, 3, 5, -1, -3):
        for x in (0.0, 1 / 15):
            assert mm.adjacent_mode_closure(n, x) < 1e-12
    for n in (2, 6, -2):
        assert mm.adjacent_mode_closure(n, 0.0) > 1e-3
    # multiples of four close at x = 0 only, where every interval holds whole turns
    assert mm.adjacent_mode_closure(4, 0.0) < 1e-12
    assert mm.adjacent_mode_closure(4, 1 / 15) > 1e-3


def test_two_mode_cz_against_oracle():
    cz = mm.two_mode_cz([6.0, 6.0], [0.05, 0.05], 5.0, 0.05, [0.3, 0.3], -3)
    assert cz.eps_a == pytest.approx(-3 * cz.eps_s)
    rep = mm.multimode_gate_report(cz.spec, cz.tau)
    assert abs(abs(rep.nonlinear_phase) - math.pi) < 1e-10
    assert rep.gate.max_residual() < 1e-10
    a = oracle_for_spec(cz.spec, cz.tau, cutoff=16)
    b = oracle_for_spec(cz.spec, cz.tau, cutoff=20)
    assert abs(a.nonlinear_phase() - b.nonlinear_phase()) < 1e-10
    assert abs(a.nonlinear_phase() - rep.nonlinear_phase) < 1e-8


def test_two_mode_slowdown_tends_to_sqrt2():
    s = [mm.two_mode_cz([6.0, 6.0], [0.05, 0.05], 5.0, 0.05, [0.3, 0.3], n).slowdown() for n in (-9, -29, -99)]
    assert all(abs(b - math.sqrt(2)) < abs(a - math.sqrt(2)) for a, b in zip(s, s[1:]))
    assert s[-1] == pytest.approx(math.sqrt(2), rel=1e-2)


def test_two_mode_invalid_inputs():
    with pytest.raises(ValueError):
        mm.two_mode_cz([6.0, 6.0], [0.05, 0.05], 5.0, 0.05, [0.3, 0.3], 1)
    with pytest.raises(ValueError):
        mm.two_mode_cz([6.0, 6.0], [0.05, 0.05], 5.0, 0.05, [0.3, 0.3], 3)


def test_esa_phase_constructive():
    # eps_a < 0 enters with a minus sign, so both modes add
    assert mm.esa_phase(0.1, 0.1, 0.01, -0.5, 100.0) > mm.esa_phase(0.1, 0.1, 0.01, 1e12, 100.0)


def test_grid_zero_zz():
    ga = mm.grid_zero_zz_assignment([5.0, 5.12, 5.2, 5.07], 0.3)
    assert ga.max_abs_jzz() < 1e-12
    assert len(ga.edges) == 32
    assert len(set(round(v, 9) for v in ga.frequencies.values())) == 8
    assert ga.min_adjacent_separation() > 0


def test_infidelity_estimates():
    p = mm.ScalingParams(6, 0.01, 10.0, 1.0)
    assert mm.infidelity_estimates(p, "flowers") == pytest.approx((6 * 0.01) ** 4)
    assert mm.infidelity_estimates(p, "flowers", "average") < mm.infidelity_estimates(p, "flowers")
    with pytest.raises(ValueError):
        mm.infidelity_estimates(p, "magic")


def test_scaling_without_spectators_is_exact():
    for scheme in ("integers", "flowers"):
        ov = mm.scaling_branch_overlaps(scheme, 0, 0.04)
        assert ov.worst_pair()[0] < 1e-20


@pytest.mark.parametrize("scheme,target", [("uncancelled", 2.0), ("integers", 2.0), ("flowers", 4.0)])
def test_scaling_exponents(scheme, target):
    res = mm.scaling_experiment(scheme, (4,))
    assert abs(res.exponent - target) <= 0.3
    assert "exponent" in res.to_text()


def test_scaling_branch_budget():
    with pytest.raises(ValueError):
        mm.scaling_branch_overlaps("flowers", mm.MAX_SCALING_QUBITS, 0.04)
