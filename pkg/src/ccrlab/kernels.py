"""Hot loops shared by the phase-space, flower and propagation code.

Every kernel has a numba implementation (explicit loops) and a vectorised numpy
implementation. ``CCR_LAB_DISABLE_NUMBA=1`` selects the numpy versions. Both
paths are exercised by the test-suite and compared in ``benchmarks/``.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, jit

# below this |eps' t| the circle formulas switch to their Taylor series
SERIES_CUTOFF = 1e-4


# ---------------------------------------------------------------------------
# piecewise displaced-oscillator tracing
# ---------------------------------------------------------------------------


@jit
def _trace_numba(eps, m, dur, n_samples):
    nb, ns = eps.shape
    npts = ns * n_samples + 1
    samples = np.zeros((nb, npts), dtype=np.complex128)
    end = np.zeros(nb, dtype=np.complex128)
    phase = np.zeros(nb)
    for b in range(nb):
        beta = 0.0 + 0.0j
        theta = 0.0
        acc = 0.0
        idx = 0
        for s in range(ns):
            e = eps[b, s]
            mm = m[b, s]
            d = dur[s]
            rot = np.cos(theta) + 1j * np.sin(theta)
            for k in range(n_samples):
                u = d * k / n_samples
                y = e * u
                if abs(y) < SERIES_CUTOFF:
                    h = -1j + y / 2.0 + 1j * y * y / 6.0 - y * y * y / 24.0
                else:
                    h = (1.0 - (np.cos(y) + 1j * np.sin(y))) / y
                samples[b, idx] = beta + mm * rot * u * h
                idx += 1
            y = e * d
            if abs(y) < SERIES_CUTOFF:
                h = -1j + y / 2.0 + 1j * y * y / 6.0 - y * y * y / 24.0
                p = y / 6.0 - y * y * y / 120.0
            else:
                h = (1.0 - (np.cos(y) + 1j * np.sin(y))) / y
                p = (y - np.sin(y)) / (y * y)
            chord = mm * rot * d * h
            acc += mm * mm * d * d * p + (np.conj(beta) * chord).imag
            beta = beta + chord
            theta += y
        samples[b, idx] = beta
        end[b] = beta
        phase[b] = acc
    return samples, end, phase


def _h_series(y):
    small = np.abs(y) < SERIES_CUTOFF
    safe = np.where(small, 1.0, y)
    h = (1.0 - np.exp(1j * safe)) / safe
    hs = -1j + y / 2.0 + 1j * y**2 / 6.0 - y**3 / 24.0
    return np.where(small, hs, h)


def _p_series(y):
    small = np.abs(y) < SERIES_CUTOFF
    safe = np.where(small, 1.0, y)
    p = (safe - np.sin(safe)) / safe**2
    return np.where(small, y / 6.0 - y**3 / 120.0, p)


def _trace_numpy(eps, m, dur, n_samples):
    nb, ns = eps.shape
    theta = np.zeros((nb, ns))
    theta[:, 1:] = np.cumsum(eps[:, :-1] * dur[None, :-1], axis=1)
    rot = np.exp(1j * theta)
    y_end = eps * dur[None, :]
    chord = m * rot * dur[None, :] * _h_series(y_end)
    start = np.zeros((nb, ns), dtype=np.complex128)
    start[:, 1:] = np.cumsum(chord[:, :-1], axis=1)
    seg_phase = m**2 * dur[None, :] ** 2 * _p_series(y_end) + np.imag(np.conj(start) * chord)
    u = dur[None, :, None] * (np.arange(n_samples)[None, None, :] / n_samples)
    y = eps[:, :, None] * u
    pts = start[:, :, None] + (m * rot)[:, :, None] * u * _h_series(y)
    end = start[:, -1] + chord[:, -1]
    samples = np.concatenate([pts.reshape(nb, ns * n_samples), end[:, None]], axis=1)
    return samples, end, seg_phase.sum(axis=1)


def trace_piecewise(eps, m, dur, n_samples=64, use_numba=None):
    """Trace coherent displacements for piecewise-constant (eps', M) segments.

    ``eps`` and ``m`` have shape (n_traj, n_segments); ``dur`` has shape
    (n_segments,). Within a segment the amplitude in the co-rotating frame
    moves as ``beta_s + M e^{i Theta_s} (1 - e^{i eps' u}) / eps'``, with
    ``Theta_s`` the rotation angle accumulated by earlier segments.

    Returns (samples, end, phase). ``samples`` has n_segments*n_samples + 1
    points per trajectory; ``phase`` is the exact geometric phase, including
    the cross terms from composing displacements.
    """
    eps = np.ascontiguousarray(np.atleast_2d(eps), dtype=np.float64)
    m = np.ascontiguousarray(np.atleast_2d(m), dtype=np.float64)
    dur = np.ascontiguousarray(np.atleast_1d(dur), dtype=np.float64)
    if eps.shape != m.shape or eps.shape[1] != dur.shape[0]:
        raise ValueError("eps, m and dur shapes are inconsistent")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _trace_numba(eps, m, dur, int(n_samples))
    return _trace_numpy(eps, m, dur, int(n_samples))


# ---------------------------------------------------------------------------
# polygon areas
# ---------------------------------------------------------------------------


@jit
def _shoelace_numba(pts):
    nb, n = pts.shape
    out = np.zeros(nb)
    for b in range(nb):
        s = 0.0
        for k in range(n):
            z0 = pts[b, k]
            z1 = pts[b, (k + 1) % n]
            s += z0.real * z1.imag - z1.real * z0.imag
        out[b] = 0.5 * s
    return out


def _shoelace_numpy(pts):
    nxt = np.roll(pts, -1, axis=1)
    return 0.5 * np.sum(pts.real * nxt.imag - nxt.real * pts.imag, axis=1)


def shoelace_area(points, use_numba=None):
    """Signed area of closed polygons given as complex vertices along the last axis."""
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.complex128)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        res = _shoelace_numba(pts)
    else:
        res = _shoelace_numpy(pts)
    return res if np.ndim(points) > 1 else float(res[0])


# ---------------------------------------------------------------------------
# fourth-order Magnus stepping for H(t) = H0 + sum_j cos(w_j t + p_j) D_j
# ---------------------------------------------------------------------------

_GAUSS = 0.5 / np.sqrt(3.0)
_MAG = np.sqrt(3.0) / 12.0


@jit
def _magnus_numba(h0, drives, freqs, phases, psi, t0, t1, nsteps):
    h = (t1 - t0) / nsteps
    dim = h0.shape[0]
    out = psi.copy()
    for n in range(nsteps):
        tm = t0 + (n + 0.5) * h
        ta = tm - _GAUSS * h
        tb = tm + _GAUSS * h
        ha = h0.copy()
        hb = h0.copy()
        for j in range(drives.shape[0]):
            ha += np.cos(freqs[j] * ta + phases[j]) * drives[j]
            hb += np.cos(freqs[j] * tb + phases[j]) * drives[j]
        comm = hb @ ha - ha @ hb
        k = 0.5 * h * (ha + hb) - 1j * _MAG * h * h * comm
        k = 0.5 * (k + k.conj().T)
        w, v = np.linalg.eigh(k)
        coef = v.conj().T @ out
        for i in range(dim):
            coef[i] *= np.exp(-1j * w[i])
        out = v @ coef
    return out


def _magnus_numpy(h0, drives, freqs, phases, psi, t0, t1, nsteps):
    h = (t1 - t0) / nsteps
    out = psi.copy()
    for n in range(nsteps):
        tm = t0 + (n + 0.5) * h
        ca = np.cos(freqs * (tm - _GAUSS * h) + phases)
        cb = np.cos(freqs * (tm + _GAUSS * h) + phases)
        ha = h0 + np.tensordot(ca, drives, axes=1)
        hb = h0 + np.tensordot(cb, drives, axes=1)
        k = 0.5 * h * (ha + hb) - 1j * _MAG * h * h * (hb @ ha - ha @ hb)
        w, v = np.linalg.eigh(0.5 * (k + k.conj().T))
        out = v @ (np.exp(-1j * w) * (v.conj().T @ out))
    return out


def magnus_propagate(h0, drives, freqs, phases, psi, t0, t1, nsteps, use_numba=None):
    """Advance ``psi`` from t0 to t1 with ``nsteps`` fourth-order Magnus steps."""
    h0 = np.ascontiguousarray(h0, dtype=np.complex128)
    drives = np.ascontiguousarray(drives, dtype=np.complex128).reshape(-1, *h0.shape)
    freqs = np.ascontiguousarray(freqs, dtype=np.float64).reshape(-1)
    phases = np.ascontiguousarray(phases, dtype=np.float64).reshape(-1)
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _magnus_numba(h0, drives, freqs, phases, psi, float(t0), float(t1), int(nsteps))
    return _magnus_numpy(h0, drives, freqs, phases, psi, float(t0), float(t1), int(nsteps))


# ---------------------------------------------------------------------------
# end displacement of a sign-switched drive over a grid of total durations
# ---------------------------------------------------------------------------


@jit
def _switch_scan_numba(fractions, signs, eps, totals):
    out = np.zeros(totals.shape[0], dtype=np.complex128)
    for j in range(totals.shape[0]):
        acc = 0.0 + 0.0j
        for i in range(signs.shape[0]):
            a = eps * totals[j] * fractions[i]
            b = eps * totals[j] * fractions[i + 1]
            acc += signs[i] * ((np.cos(a) + 1j * np.sin(a)) - (np.cos(b) + 1j * np.sin(b)))
        out[j] = acc
    return out


def _switch_scan_numpy(fractions, signs, eps, totals):
    ph = np.exp(1j * eps * totals[:, None] * fractions[None, :])
    return np.sum(signs[None, :] * (ph[:, :-1] - ph[:, 1:]), axis=1)


def switch_scan(fractions, signs, eps, totals, use_numba=None):
    """End displacement (in units of M/eps) of a sign-switched drive.

    ``fractions`` are switching times as fractions of the total duration,
    starting at 0 and ending at 1; ``signs[i]`` is the drive sign on interval i.
    Evaluated for every total duration in ``totals``.
    """
    fr = np.ascontiguousarray(fractions, dtype=np.float64)
    sg = np.ascontiguousarray(signs, dtype=np.float64)
    tt = np.ascontiguousarray(np.atleast_1d(totals), dtype=np.float64)
    if fr.shape[0] != sg.shape[0] + 1:
        raise ValueError("need one more switching fraction than signs")
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _switch_scan_numba(fr, sg, float(eps), tt)
    return _switch_scan_numpy(fr, sg, float(eps), tt)
