import os
import subprocess
import sys

import numpy as np
import pytest

from ccrlab import _accel, kernels

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not importable")


def _trace_inputs():
    rng = np.random.default_rng(3)
    eps = rng.uniform(-1.5, 1.5, (6, 5))
    eps[0, 2] = 1e-9  # exercise the series branch
    return eps, rng.normal(size=(6, 5)), rng.uniform(0.1, 2.0, 5)


@needs_numba
def test_trace_piecewise_backends_agree():
    eps, m, dur = _trace_inputs()
    a = kernels.trace_piecewise(eps, m, dur, 16, use_numba=True)
    b = kernels.trace_piecewise(eps, m, dur, 16, use_numba=False)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-13, rtol=1e-12)


def test_trace_piecewise_matches_single_segment_closed_form():
    samples, end, phase = kernels.trace_piecewise([[0.5]], [[0.2]], [3.0], 8, use_numba=False)
    y = 0.5 * 3.0
    assert abs(end[0] - 0.2 / 0.5 * (1 - np.exp(1j * y))) < 1e-14
    assert phase[0] == pytest.approx((0.2 / 0.5) ** 2 * (y - np.sin(y)), rel=1e-13)
    assert samples.shape == (1, 9)


@needs_numba
def test_shoelace_backends_agree():
    pts = np.exp(2j * np.pi * np.linspace(0, 1, 100, endpoint=False))[None, :] * np.array([[1.0], [2.0]])
    a = kernels.shoelace_area(pts, use_numba=True)
    b = kernels.shoelace_area(pts, use_numba=False)
    assert np.allclose(a, b, rtol=1e-13)
    assert a[1] == pytest.approx(4 * a[0])


def test_shoelace_unit_square():
    assert kernels.shoelace_area(np.array([0, 1, 1 + 1j, 1j])) == pytest.approx(1.0)


@needs_numba
def test_magnus_backends_agree():
    rng = np.random.default_rng(5)
    h0 = np.diag(rng.normal(size=4)).astype(complex)
    d = rng.normal(size=(1, 4, 4))
    d = d + d.transpose(0, 2, 1)
    psi = np.zeros(4, complex)
    psi[0] = 1
    a = kernels.magnus_propagate(h0, d, [1.3], [0.2], psi, 0.0, 2.0, 50, use_numba=True)
    b = kernels.magnus_propagate(h0, d, [1.3], [0.2], psi, 0.0, 2.0, 50, use_numba=False)
    assert np.allclose(a, b, atol=1e-12)
    assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)


@needs_numba
def test_switch_scan_backends_agree():
    fr = np.array([0.0, 0.3, 0.7, 1.0])
    sg = np.array([1.0, -1.0, 1.0])
    tt = np.linspace(1, 10, 50)
    assert np.allclose(kernels.switch_scan(fr, sg, 1.1, tt, use_numba=True),
                       kernels.switch_scan(fr, sg, 1.1, tt, use_numba=False), atol=1e-13)


def test_shape_validation():
    with pytest.raises(ValueError):
        kernels.trace_piecewise(np.ones((2, 3)), np.ones((2, 2)), np.ones(3))
    with pytest.raises(ValueError):
        kernels.switch_scan([0.0, 1.0], [1.0, -1.0], 1.0, [1.0])


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, CCR_LAB_DISABLE_NUMBA="1")
    code = ("from ccrlab import _accel, phasespace, hilbert;"
            "s = hilbert.SystemSpec.from_detunings([1.0, 1.2], [0.0], [0.05, 0.06], Omega=[0.3, 0.3], omega_d=5);"
            "t, e = phasespace.cz_time(s);"
            "g, _ = phasespace.run_gate(s.replace(nu=(5 + e,)), t, n_samples=16);"
            "print(_accel.backend(), repr(g.signed_nonlinear_phase()))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, phase = out.stdout.split()
    assert backend == "numpy"
    assert abs(abs(float(phase)) - np.pi) < 1e-10
