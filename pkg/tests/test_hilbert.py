import math

import numpy as np
import pytest

from ccrlab.hilbert import (HilbertSpec, SystemSpec, TimeDependentHamiltonian, expm_hermitian, fock_cutoff_for,
                            lowering_operators, pauli, propagate)


def test_system_spec_detunings_roundtrip():
    s = SystemSpec.from_detunings([1.0, 1.3], [0.1], [0.05, 0.06], Omega=[0.3, 0.4], omega_d=5.0)
    assert np.allclose(s.Delta, [1.0, 1.3])
    assert np.allclose(s.eps, [0.1])
    assert s.n_qubits == 2 and s.n_modes == 1
    assert s.g.shape == (2, 1)
    assert s.is_two_level(0) and s.is_two_level(1)


def test_replace_keeps_other_fields():
    s = SystemSpec(omega=[6.0, 6.2], nu=[5.0], g=[0.05, 0.05], eta=[0.25, 0.3])
    t = s.replace(omega_d=5.5)
    assert t.omega == s.omega and t.omega_d == 5.5
    assert not t.is_two_level(0)


def test_lowering_operator_algebra():
    space = HilbertSpec(qubit_levels=[2], fock_cutoff=[6])
    b = lowering_operators(space)[1]
    comm = b @ b.conj().T - b.conj().T @ b
    # [b, b^dag] = 1 except on the truncated top level
    d = np.real(np.diag(comm)).reshape(2, 6)
    assert np.allclose(d[:, :-1], 1.0)
    z = pauli(space, 0, "z")
    assert np.allclose(z @ z, np.eye(space.dim))


def test_excited_state_has_positive_z():
    space = HilbertSpec(qubit_levels=[2])
    z = pauli(space, 0, "z")
    e = space.basis([1])
    assert np.vdot(e, z @ e).real == pytest.approx(1.0)


def test_expm_hermitian_unitary_and_matches_scipy():
    from scipy.linalg import expm

    rng = np.random.default_rng(1)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    H = a + a.conj().T
    U = expm_hermitian(H, 0.7)
    assert np.allclose(U @ U.conj().T, np.eye(5), atol=1e-12)
    assert np.allclose(U, expm(-0.7j * H), atol=1e-12)


def test_fock_cutoff_grows_with_amplitude():
    assert fock_cutoff_for(0.0) < fock_cutoff_for(1.0) < fock_cutoff_for(2.0)


def test_propagate_time_dependent_matches_rotating_frame():
    # driven two-level system: H = w/2 Z + a cos(w t) X; compare with a fine midpoint integration
    Z = np.diag([1.0, -1.0]).astype(complex)
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    H = TimeDependentHamiltonian(0.5 * Z, np.array([0.1 * X]), np.array([1.0]), np.array([0.0]))
    psi = np.array([1.0, 0.0], dtype=complex)
    out = propagate(H, psi, [0.0, 3.0], tol=1e-11)[-1]
    ref = propagate(lambda t: 0.5 * Z + 0.1 * math.cos(t) * X, psi, [0.0, 3.0], tol=1e-10)[-1]
    assert np.linalg.norm(out - ref) < 1e-8


def test_propagate_rejects_bad_input():
    with pytest.raises(ValueError):
        propagate(np.eye(2), np.array([1.0, 1.0]), [0.0, 1.0])
    with pytest.raises(ValueError):
        propagate(np.array([[0, 1], [0, 0]], dtype=complex), np.array([1.0, 0.0]), [0.0, 1.0])
