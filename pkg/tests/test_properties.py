import math

import numpy as np
from hypothesis import given, settings, strategies as st

from ccrlab import kernels, perturbation as pt
from ccrlab import metamaterial as mm
from ccrlab.flowers import make_flower_schedule, single_branch_table, trace_flower
from ccrlab.hilbert import SystemSpec
from ccrlab.oracle import single_oscillator
from ccrlab.phasespace import BranchHamiltonian, evolve_closed_form, integer_conditions_ok, run_gate

fast = settings(max_examples=40, deadline=None)
finite = dict(allow_nan=False, allow_infinity=False)


@fast
@given(P=st.sampled_from([4, 6, 8, 12]), x=st.floats(-0.49, 0.49, **finite), eps=st.floats(0.3, 3.0, **finite),
       M=st.floats(0.01, 0.5, **finite), style=st.sampled_from(["original", "cpmg_shifted"]))
def test_flowers_close_for_any_dispersion(P, x, eps, M, style):
    traj = trace_flower(single_branch_table(eps, x, M), make_flower_schedule(P, eps, style=style), n_samples=4)
    assert traj.closure_residual.max() < 1e-11 * max(1.0, M / eps)


@fast
@given(e=st.floats(-3, 3, **finite), m=st.floats(-1, 1, **finite), t=st.floats(0.01, 10, **finite))
def test_closed_form_matches_kernel(e, m, t):
    d, p = evolve_closed_form(BranchHamiltonian(e, m), t)
    _, end, phase = kernels.trace_piecewise([[e]], [[m]], [t], 2, use_numba=False)
    assert abs(d - end[0]) < 1e-10 * max(1.0, abs(m * t))
    assert abs(p - phase[0]) < 1e-9 * max(1.0, (m * t) ** 2)


@settings(max_examples=15, deadline=None)
@given(e=st.floats(0.3, 2.0, **finite), m=st.floats(-0.3, 0.3, **finite), t=st.floats(0.1, 5, **finite))
def test_closed_form_matches_fock_phase(e, m, t):
    d, p = evolve_closed_form(BranchHamiltonian(e, m), t)
    b, ph = single_oscillator([e], [m], [t], cutoff=24)
    # the oracle reports <b>, which is minus the conjugate of the closed-form displacement
    assert abs(b + np.conj(d)) < 1e-9
    assert abs(math.remainder(ph - p, 2 * math.pi)) < 1e-9


@fast
@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 0.2, **finite))
def test_sw_hamiltonian_hermitian(seed, scale):
    prob = pt.random_sw_problem(np.random.default_rng(seed)).scaled(scale)
    H = pt.schrieffer_wolff(prob, 4).effective_low_hamiltonian
    assert np.allclose(H, H.conj().T, atol=1e-12)


@fast
@given(n=st.integers(-30, 30), a=st.integers(-5, 5), b=st.integers(-5, 5))
def test_integer_conditions_parity(n, a, b):
    ok = integer_conditions_ok(n, a, b)
    if (n + a + b) % 2:
        assert not ok
    assert ok == integer_conditions_ok(-n, a, b) == integer_conditions_ok(n, -a, b) == integer_conditions_ok(n, b, a)


@fast
@given(d1=st.floats(0.6, 2.0, **finite), d2=st.floats(0.6, 2.0, **finite), g1=st.floats(0.01, 0.1, **finite),
       g2=st.floats(0.01, 0.1, **finite), t=st.floats(0.5, 20, **finite))
def test_branch_phase_symmetry_under_qubit_swap(d1, d2, g1, g2, t):
    a = SystemSpec.from_detunings([d1, d2], [0.4], [g1, g2], Omega=[0.3, 0.25], omega_d=5.0)
    b = SystemSpec.from_detunings([d2, d1], [0.4], [g2, g1], Omega=[0.25, 0.3], omega_d=5.0)
    pa = run_gate(a, t, n_samples=4)[0].signed_nonlinear_phase()
    pb = run_gate(b, t, n_samples=4)[0].signed_nonlinear_phase()
    assert abs(pa - pb) < 1e-10 * max(1.0, abs(pa))


@fast
@given(s=st.floats(0.1, 10, **finite), n=st.integers(3, 50), seed=st.integers(0, 1000))
def test_shoelace_scales_quadratically(s, n, seed):
    pts = np.random.default_rng(seed).normal(size=n) + 1j * np.random.default_rng(seed + 1).normal(size=n)
    a = kernels.shoelace_area(pts, use_numba=False)
    assert math.isclose(kernels.shoelace_area(s * pts, use_numba=False), s * s * a, rel_tol=1e-9, abs_tol=1e-12)
    assert math.isclose(kernels.shoelace_area(pts[::-1], use_numba=False), -a, rel_tol=1e-9, abs_tol=1e-12)


@fast
@given(N=st.integers(1, 40), nu=st.floats(3, 8, **finite), J=st.floats(-0.3, 0.3, **finite),
       boundary=st.sampled_from(["open", "periodic"]))
def test_chain_modes_orthonormal(N, nu, J, boundary):
    modes = mm.diagonalize_chain(mm.ChainSpec(N, nu, J, boundary=boundary))
    assert modes.orthogonality_error() < 1e-12
    assert np.all(np.diff(modes.nu_k) >= -1e-12)
    assert abs(modes.nu_k.sum() - N * nu) < 1e-10 * N


@fast
@given(w1=st.floats(4.5, 5.5, **finite), dw=st.floats(0.02, 0.2, **finite), eta=st.floats(0.15, 0.35, **finite))
def test_zero_zz_roots_are_roots(w1, dw, eta):
    r = pt.zero_zz_cavity_frequency(w1, w1 + dw, eta)
    for nu in r.roots:
        assert abs(pt.zz_numerator_equal_eta(nu, w1, w1 + dw, eta)) < 1e-9
