import math
import warnings

import numpy as np
import pytest

from ccrlab import perturbation as pt
from ccrlab.hilbert import SystemSpec


def test_two_level_shift_series():
    x, W = 0.1, 1.0
    exact = 0.5 * (W - math.sqrt(W * W + 4 * x * x))
    H = np.array([[0.0, x], [x, W]])
    assert pt.sw_shift(H, 0, order=2) == pytest.approx(-x * x / W, rel=1e-14)
    assert pt.sw_shift(H, 0, order=4) == pytest.approx(-x * x / W + x**4 / W**3, rel=1e-14)
    six = pt.sw_shift(H, 0, order=6)
    assert six == pytest.approx(-x * x / W + x**4 / W**3 - 2 * x**6 / W**5, rel=1e-13)
    # what is left is the eighth-order term 5 x^8 / W^7
    assert six - exact == pytest.approx(-5 * x**8 / W**7, rel=0.05)


def test_sw_order_validation():
    p = pt.SWProblem([1.0], [[0.1]], [[0.0]])
    with pytest.raises(ValueError):
        pt.schrieffer_wolff(p, 7)
    with pytest.raises(ValueError):
        pt.SWProblem([0.0], [[0.1]], [[0.0]])


def test_sw_effective_hamiltonian_is_hermitian():
    rng = np.random.default_rng(4)
    res = pt.schrieffer_wolff(pt.random_sw_problem(rng).scaled(0.05), 6)
    H = res.effective_low_hamiltonian
    assert np.allclose(H, H.conj().T)


@pytest.mark.parametrize("order,floor", [(2, 2.8), (4, 4.8), (6, 6.8)])
def test_random_order_slopes(order, floor):
    fits = pt.sw_order_study(order, seed=11, n_problems=4)
    assert min(f.slope for f in fits) >= floor


def test_dispersive_shift_conventions():
    q = SystemSpec(omega=[6.0], nu=[5.0], g=[0.05])
    assert pt.dispersive_shift(q) == pytest.approx(0.05**2 / 1.0)
    t = q.replace(eta=(0.3,))
    assert pt.dispersive_shift(t) == pytest.approx(-0.05**2 * 0.3 / (1.0 * 0.7))


def test_dispersive_shift_against_diagonalisation():
    t = SystemSpec(omega=[6.0], nu=[5.0], g=[0.02], eta=[0.3])
    exact = pt.exact_dispersive_shift(t)
    assert exact == pytest.approx(pt.dispersive_shift(t), rel=5e-3)


def test_zz_qubit_limit_against_exact():
    s = SystemSpec(omega=[6.0, 6.35], nu=[5.0], g=[0.03, 0.03])
    exact, _ = pt.exact_zz(s)
    closed = pt.jzz_qubit_limit(0.03, 0.03, 1.0, 1.35)
    assert exact == pytest.approx(closed, rel=2e-2)


def test_zz_single_cavity_report_contents():
    s = SystemSpec(omega=[6.0, 6.35], nu=[5.0], g=[0.05, 0.05], eta=[0.25, 0.3])
    rep = pt.zz_single_cavity(s)
    assert rep["formula_4th"] == pytest.approx(rep["exact"], rel=5e-2)
    assert "[values]" in rep.to_text()


def test_sw_single_cavity_matches_closed_form():
    args = (0.02, 0.02, 1.0, 1.35, 0.25, 0.3)
    assert pt.sw_zz_single_cavity(*args, order=4) == pytest.approx(pt.jzz_fourth(*args), rel=1e-6)


def test_direct_coupling_reduces_to_single_cavity():
    s = SystemSpec(omega=[6.0, 6.35], nu=[5.0], g=[0.05, 0.05], eta=[0.25, 0.3])
    a = pt.zz_single_cavity(s, exact=False)["formula_4th"]
    b = pt.zz_direct_coupling(s, exact=False)["formula_direct_g"]
    assert a == b


def test_two_oscillator_qubit_zero_line():
    gt, D1 = 0.06, 0.05
    D2 = math.sqrt(2 * gt * gt - D1 * D1)
    assert abs(pt.jzz_two_osc_fourth_qubit(0.01, 0.02, gt, D1, D2)) < 1e-15
    assert abs(pt.jzz_two_osc_fourth_qubit(0.01, 0.02, gt, D1, 1.1 * D2)) > 1e-5


def test_zero_zz_roots_and_resonance_flags():
    r = pt.zero_zz_cavity_frequency(5.0, 5.12, 0.3)
    assert len(r.usable()) == 2
    for nu in r.roots:
        assert abs(pt.zz_numerator_equal_eta(nu, 5.0, 5.12, 0.3)) < 1e-12
    assert pt.zero_zz_cavity_frequency(5.0, 6.0, 0.3).roots == ()


@pytest.mark.parametrize("kind,target,tol", [("single_cavity", 6, 0.3), ("two_osc_sixth", 8, 0.5),
                                              ("eta_expansion", 3, 0.3)])
def test_zz_order_studies(kind, target, tol):
    assert abs(pt.zz_order_study(kind).slope - target) <= tol


def test_order_fit_csv_and_zero_residual():
    f = pt.order_fit([1.0, 0.5], [1.0, 0.25])
    assert f.slope == pytest.approx(2.0)
    assert f.to_csv().startswith("scale,residual")
    with pytest.raises(ValueError):
        pt.order_fit([1.0, 0.5], [0.0, 1.0])


def test_transmon_effective_couplings_warns_outside_regime():
    s = SystemSpec(omega=[6.0, 6.2], nu=[5.9], g=[0.3, 0.3], eta=[0.3, 0.3], Omega=[0.05, 0.05], omega_d=5.9)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        pt.transmon_effective_couplings(s)
    assert any(issubclass(x.category, pt.PerturbativeWarning) for x in w)
