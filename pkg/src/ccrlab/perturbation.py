"""Block Schrieffer-Wolff engine and closed-form dispersive / ZZ expressions.

Every closed form here has an exact counterpart: level shifts are obtained by
restricting the static Hamiltonian to fixed excitation-number sectors and
following the bare states with :func:`ccrlab.hilbert.adiabatic_track`.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .hilbert import (HilbertSpec, SystemSpec, TrackingError, adiabatic_track, build_hamiltonian,
                      lowering_operators)

MAX_ORDER = 6


class PerturbativeWarning(UserWarning):
    """Raised (as a warning) when parameters leave the perturbative regime."""


# ---------------------------------------------------------------------------
# Schrieffer-Wolff
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SWProblem:
    """H = H0 + Hx + Hy with H0 = diag(0, W).

    ``X`` couples the (degenerate, zero-energy) low block to the high block,
    ``Y`` perturbs the high block and ``Z`` (optional) the low block. ``basis``
    records the columns of the original basis when the problem came from a
    rotated matrix; ``offset`` is the energy subtracted to put the low block at 0.
    """

    W: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray | None = None
    basis: np.ndarray | None = None
    offset: float = 0.0

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float).reshape(-1)
        X = np.atleast_2d(np.asarray(self.X, dtype=complex))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=complex))
        if X.shape[1] != W.shape[0] or Y.shape != (W.shape[0], W.shape[0]):
            raise ValueError("block shapes are inconsistent")
        if np.any(W == 0) or not np.all(np.isfinite(W)):
            raise ValueError("all high-block energies W must be finite and nonzero")
        if not np.allclose(Y, Y.conj().T, atol=1e-12):
            raise ValueError("Y must be Hermitian")
        Z = np.zeros((X.shape[0], X.shape[0]), dtype=complex) if self.Z is None else np.atleast_2d(
            np.asarray(self.Z, dtype=complex))
        if Z.shape != (X.shape[0], X.shape[0]) or not np.allclose(Z, Z.conj().T, atol=1e-12):
            raise ValueError("Z must be a Hermitian low-block matrix")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Z", Z)

    @property
    def low_dim(self) -> int:
        return self.X.shape[0]

    @property
    def high_dim(self) -> int:
        return self.X.shape[1]

    def scaled(self, s: float) -> "SWProblem":
        return SWProblem(self.W, s * self.X, s * self.Y, s * self.Z, self.basis, self.offset)

    def full_matrix(self) -> np.ndarray:
        lo, hi = self.low_dim, self.high_dim
        H = np.zeros((lo + hi, lo + hi), dtype=complex)
        H[:lo, :lo] = self.Z
        H[:lo, lo:] = self.X
        H[lo:, :lo] = self.X.conj().T
        H[lo:, lo:] = np.diag(self.W) + self.Y
        return H

    @classmethod
    def from_matrix(cls, H: np.ndarray, low: Sequence[int], H0: np.ndarray | None = None,
                    degeneracy_tol: float = 1e-9) -> "SWProblem":
        """Split a Hermitian matrix into SW blocks.

        ``H0`` is the unperturbed part (default: the diagonal of H). If it is
        not diagonal it is diagonalised first; this is the explicit
        pre-rotation used when a coupling is too strong to be perturbative.
        ``low`` lists basis indices whose (rotated) states form the low block.
        """
        H = np.asarray(H, dtype=complex)
        H0 = np.diag(np.diag(H)) if H0 is None else np.asarray(H0, dtype=complex)
        n = H.shape[0]
        if np.allclose(H0, np.diag(np.diag(H0)), atol=0.0):
            energies, vecs = np.real(np.diag(H0)).copy(), np.eye(n, dtype=complex)
        else:
            energies, vecs = np.linalg.eigh(H0)
        low_cols = []
        for s in low:
            k = int(np.argmax(np.abs(vecs[s, :]) ** 2))
            if k in low_cols:
                raise ValueError("two seeds map onto the same unperturbed state")
            low_cols.append(k)
        high_cols = [k for k in range(n) if k not in low_cols]
        e_low = energies[low_cols]
        scale = max(1.0, float(np.max(np.abs(energies))))
        if np.ptp(e_low) > degeneracy_tol * scale:
            raise ValueError("the low block must be degenerate in H0")
        offset = float(np.mean(e_low))
        V = vecs[:, low_cols + high_cols]
        Hr = V.conj().T @ H @ V - offset * np.eye(n)
        H0r = V.conj().T @ H0 @ V - offset * np.eye(n)
        lo = len(low_cols)
        W = np.real(np.diag(H0r))[lo:]
        pert = Hr - np.diag(np.diag(H0r))
        pert = 0.5 * (pert + pert.conj().T)
        return cls(W=W, X=pert[:lo, lo:], Y=pert[lo:, lo:], Z=pert[:lo, :lo], basis=V, offset=offset)


@dataclass(frozen=True)
class SWResult:
    effective_low_hamiltonian: np.ndarray
    order: int
    contributions: dict[int, np.ndarray]
    offset: float = 0.0

    @property
    def shift(self) -> float:
        """Energy shift for a one-dimensional low block."""
        if self.effective_low_hamiltonian.shape != (1, 1):
            raise ValueError("shift is defined for a one-dimensional low block")
        return float(np.real(self.effective_low_hamiltonian[0, 0]))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.effective_low_hamiltonian) + self.offset


def _graded(order: int, n: int) -> np.ndarray:
    return np.zeros((order + 1, n, n), dtype=complex)


def _comm(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Commutator of graded operators, truncated at the top grade."""
    kmax = A.shape[0] - 1
    out = np.zeros_like(A)
    for a in range(kmax + 1):
        if not A[a].any():
            continue
        for b in range(kmax + 1 - a):
            if B[b].any():
                out[a + b] += A[a] @ B[b] - B[b] @ A[a]
    return out


def _nested(S: np.ndarray, A: np.ndarray, k: int) -> np.ndarray:
    for _ in range(k):
        A = _comm(S, A)
    return A


def schrieffer_wolff(problem: SWProblem, order: int = 6) -> SWResult:
    """Effective low-block Hamiltonian to ``order`` in the perturbation.

    Three successive rotations exp(S), exp(S2), exp(S3) with
    S_j = [H0~, H_jx] and H0~ = diag(0, 1/W), carrying every term of the
    nested-commutator series through sixth order.
    """
    if int(order) != order or not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be an integer between 1 and {MAX_ORDER}")
    order = int(order)
    lo, hi = problem.low_dim, problem.high_dim
    n = lo + hi
    f = math.factorial

    H0t = _graded(order, n)
    H0t[0, lo:, lo:] = np.diag(1.0 / problem.W)
    Hx = _graded(order, n)
    Hx[1, :lo, lo:] = problem.X
    Hx[1, lo:, :lo] = problem.X.conj().T
    Hy = _graded(order, n)
    Hy[1, lo:, lo:] = problem.Y
    Hy[1, :lo, :lo] = problem.Z

    S = _comm(H0t, Hx)
    H2x = _nested(S, Hy, 1) + (1 / f(2) - 1 / f(3)) * _nested(S, Hx, 2) + (1 / f(3)) * _nested(S, Hy, 3) \
        + (1 / f(4) - 1 / f(5)) * _nested(S, Hx, 4) + (1 / f(5)) * _nested(S, Hy, 5)
    H2y = Hy + (1 - 1 / f(2)) * _nested(S, Hx, 1) + (1 / f(2)) * _nested(S, Hy, 2) \
        + (1 / f(3) - 1 / f(4)) * _nested(S, Hx, 3) + (1 / f(4)) * _nested(S, Hy, 4) \
        + (1 / f(5) - 1 / f(6)) * _nested(S, Hx, 5)

    S2 = _comm(H0t, H2x)
    H3x = _comm(S2, H2y) + (1 / f(2) - 1 / f(3)) * _nested(S2, H2x, 2)
    H3y = H2y + (1 - 1 / f(2)) * _comm(S2, H2x) + (1 / f(2)) * _nested(S2, H2y, 2)

    S3 = _comm(H0t, H3x)
    H4y = H3y + (1 - 1 / f(2)) * _comm(S3, H3x)

    contributions = {k: H4y[k, :lo, :lo].copy() for k in range(1, order + 1)}
    eff = sum(contributions.values(), np.zeros((lo, lo), dtype=complex))
    eff = 0.5 * (eff + eff.conj().T)
    return SWResult(eff, order, contributions, problem.offset)


def sw_shift(H: np.ndarray, seed: int, order: int = 4, H0: np.ndarray | None = None) -> float:
    """Shift of the level connected to basis state ``seed``, relative to H[seed, seed]."""
    problem = SWProblem.from_matrix(H, [seed], H0)
    res = schrieffer_wolff(problem, order)
    return res.shift + problem.offset - float(np.real(H[seed, seed]))


# ---------------------------------------------------------------------------
# exact level shifts by adiabatic continuation
# ---------------------------------------------------------------------------


def _static_space(spec: SystemSpec, transmon_levels: int = 3, cutoff: int = 3) -> HilbertSpec:
    levels = [2 if spec.is_two_level(i) else transmon_levels for i in range(spec.n_qubits)]
    return HilbertSpec(qubit_levels=levels, fock_cutoff=[cutoff] * spec.n_modes)


def exact_level_shifts(spec: SystemSpec, states: dict[str, Sequence[int]], n_grid: int = 50) -> dict[str, float]:
    """Coupling-induced shifts of bare product states of the undriven Hamiltonian.

    Every off-diagonal coupling is ramped from 0 to its full value and each
    state is followed within its excitation-number sector.
    """
    bare = spec.replace(omega_d=0.0, Omega=None)
    n_max = max(sum(o) for o in states.values())
    space = _static_space(bare, cutoff=max(3, n_max + 1))
    H = build_hamiltonian(bare, space, frame="rwa")
    occ = np.array(np.unravel_index(np.arange(space.dim), space.dims)).T
    N = occ.sum(axis=1)
    D = np.diag(np.real(np.diag(H)))
    V = H - D
    grid = np.linspace(0.0, 1.0, n_grid)
    out = {}
    for name, o in states.items():
        idx = np.flatnonzero(N == sum(o))
        pos = int(np.flatnonzero(idx == space.index(o))[0])
        Ds = D[np.ix_(idx, idx)]
        Vs = V[np.ix_(idx, idx)]
        energies = adiabatic_track(lambda s: Ds + s * Vs, pos, grid)
        out[name] = float(energies[-1] - Ds[pos, pos])
    return out


def exact_zz(spec: SystemSpec, n_grid: int = 50) -> tuple[float, dict[str, float]]:
    """J_ZZ = (E12 - E1 - E2 + E0) / 4 from exactly tracked levels of qubits 0 and 1."""
    nsite = spec.n_qubits + spec.n_modes
    def occ(*exc):
        o = [0] * nsite
        for i in exc:
            o[i] = 1
        return o
    shifts = exact_level_shifts(spec, {"E0": occ(), "E1": occ(0), "E2": occ(1), "E12": occ(0, 1)}, n_grid)
    J = (shifts["E12"] - shifts["E1"] - shifts["E2"] + shifts["E0"]) / 4
    return J, shifts


def exact_dispersive_shift(spec: SystemSpec, qubit_index: int = 0, mode_index: int = 0, n_grid: int = 50) -> float:
    """Half the exact cross-Kerr chi = E11 - E10 - E01 + E00 of one qubit and one mode."""
    sub = SystemSpec(omega=[spec.omega[qubit_index]], nu=[spec.nu[mode_index]],
                     g=[[spec.g[qubit_index, mode_index]]], eta=[spec.eta[qubit_index]])
    s = exact_level_shifts(sub, {"00": [0, 0], "10": [1, 0], "01": [0, 1], "11": [1, 1]}, n_grid)
    return 0.5 * (s["11"] - s["10"] - s["01"] + s["00"])


# ---------------------------------------------------------------------------
# dispersive shift and effective couplings
# ---------------------------------------------------------------------------


def _warn(msg: str):
    warnings.warn(msg, PerturbativeWarning, stacklevel=3)


def _dispersive(g: float, Delta: float, eta: float) -> float:
    if Delta == 0:
        raise ValueError("qubit resonant with the mode (Delta = 0)")
    if math.isinf(eta):
        return g * g / Delta
    if Delta == eta:
        raise ValueError("two-photon resonance (Delta = eta)")
    return -g * g * eta / (Delta * (Delta - eta))


def dispersive_shift(spec: SystemSpec, qubit_index: int = 0, mode_index: int = 0) -> float:
    """f in H_disp = f Z b^dag b for one qubit-mode pair.

    f = -g^2 eta / (Delta (Delta - eta)) with Delta = omega - nu; the two-level
    limit is +g^2 / Delta.
    """
    g = float(spec.g[qubit_index, mode_index])
    Delta = spec.omega[qubit_index] - spec.nu[mode_index]
    eta = spec.eta[qubit_index]
    f = _dispersive(g, Delta, eta)
    if abs(g) > 0.2 * abs(Delta) or (math.isfinite(eta) and abs(g) > 0.2 * abs(Delta - eta)):
        _warn("dispersive shift used outside |g| << |Delta|, |Delta - eta|")
    for j in range(spec.n_qubits):
        if j == qubit_index or not spec.g[j, mode_index]:
            continue
        exchange = abs(g * spec.g[j, mode_index] / Delta)
        if abs(spec.omega[qubit_index] - spec.omega[j]) < 5 * exchange:
            _warn(f"qubits {qubit_index} and {j} are close to resonant through mode {mode_index}")
    return f


def dispersive_shift_first_order_eta(g: float, Delta: float, eta: float) -> float:
    """|11> level shift to first order in eta, -2 eta (g/Delta)^2."""
    return -2.0 * eta * (g / Delta) ** 2


@dataclass(frozen=True)
class EffectiveCouplings:
    """Weak-dressing coefficients: good = g A / 2 (mode drive), bad = f (dispersive)."""

    A: tuple[float, ...]
    f: tuple[float, ...]
    good: tuple[float, ...]
    bad: tuple[float, ...]
    ratio: tuple[float, ...]


def transmon_effective_couplings(spec: SystemSpec, mode_index: int = 0) -> EffectiveCouplings:
    A, f, good, bad, ratio = [], [], [], [], []
    for i in range(spec.n_qubits):
        D = spec.Delta[i]
        eta = spec.eta[i]
        Om = spec.Omega[i]
        g = float(spec.g[i, mode_index])
        if D == 0:
            raise ValueError("drive resonant with the qubit (Delta = 0)")
        if math.isinf(eta):
            a = Om / D
        else:
            if D == eta:
                raise ValueError("drive at the two-photon resonance (Delta = eta)")
            a = -Om * eta / (D * (D - eta))
        if max(abs(g), abs(Om), abs(spec.eps[mode_index])) > 0.2 * abs(D):
            _warn("effective couplings used outside eps, g, Omega << Delta")
        fi = dispersive_shift(spec, i, mode_index)
        A.append(a)
        f.append(fi)
        good.append(0.5 * g * a)
        bad.append(fi)
        ratio.append(0.5 * g * a / fi if fi else math.inf if a else math.nan)
    return EffectiveCouplings(tuple(A), tuple(f), tuple(good), tuple(bad), tuple(ratio))


# ---------------------------------------------------------------------------
# closed-form ZZ expressions
# ---------------------------------------------------------------------------


def jzz_qubit_limit(g1, g2, D1, D2):
    return (D1 + D2) * g1**2 * g2**2 / (2 * D1**2 * D2**2)


def jzz_fourth(g1, g2, D1, D2, eta1, eta2, eta_mode=0.0):
    """Fourth-order ZZ through one (possibly anharmonic) mode; Delta_i = omega_i - nu."""
    if math.isinf(eta1) and math.isinf(eta2):
        return (D1 + D2) ** 2 * g1**2 * g2**2 / (2 * D1**2 * D2**2 * (eta_mode + D1 + D2))
    if math.isinf(eta1) or math.isinf(eta2):
        raise ValueError("mixed two-level / transmon pairs are not covered by the closed form")
    if eta_mode == 0:
        num = D1**2 * eta1 + D2**2 * eta2 + (D1 + D2) * eta1 * eta2
        return num * g1**2 * g2**2 / (2 * D1**2 * D2**2 * (eta1 + D2 - D1) * (eta2 + D1 - D2))
    num = (D1 + D2) * (D1**2 * eta1 + D2**2 * eta2 + (D1 + D2) * eta1 * eta2) \
        + ((D1 - D2) ** 2 * (D1 + D2) + D2**2 * eta1 + D1**2 * eta2) * eta_mode
    den = 2 * D1**2 * D2**2 * (eta1 + D2 - D1) * (eta2 + D1 - D2) * (eta_mode + D1 + D2)
    return num * g1**2 * g2**2 / den


def jzz_equal_eta(g1, g2, D1, D2, eta):
    num = eta * (D1**2 + D2**2 + (D1 + D2) * eta) * g1**2 * g2**2
    return num / (2 * D1**2 * D2**2 * (eta**2 - (D1 - D2) ** 2))


def jzz_first_order_eta(g1, g2, D1, D2, eta1, eta2, eta_mode=0.0):
    num = (eta1 * D1**2 + eta2 * D2**2 + eta_mode * (D1 - D2) ** 2) * g1**2 * g2**2
    return -num / (2 * D1**2 * D2**2 * (D2 - D1) ** 2)


def jzz_direct_terms(g1, g2, gt, D1, D2, eta1, eta2, eta_mode=0.0) -> dict[str, float]:
    """ZZ with a direct qubit-qubit exchange gt, split by powers of gt."""
    a = D2 - D1 + eta1
    b = D1 - D2 + eta2
    J0 = ((D1 + D2) * (D1**2 * eta1 + D2**2 * eta2 + (D1 + D2) * eta1 * eta2)
          + ((D1 - D2) ** 2 * (D1 + D2) + D2**2 * eta1 + D1**2 * eta2) * eta_mode) * g1**2 * g2**2 \
        / (2 * D1**2 * D2**2 * (eta1 + D2 - D1) * (eta2 + D1 - D2) * (eta_mode + D1 + D2))
    J1 = -(D1 * eta1 + D2 * eta2 + eta1 * eta2) * g1 * g2 * gt / (D1 * D2 * (D1 - D2 - eta1) * (D1 - D2 + eta2))
    J2_quad = gt**2 / (2 * a) + gt**2 / (2 * b)
    J2_quart = gt**2 * g1**2 / (2 * D1**2) * ((2 * D1 - D2) * (D2 + eta1) / (D2 * a**2) - D1 / b**2 - 1 / b) \
        + gt**2 * g2**2 / (2 * D2**2) * ((2 * D2 - D1) * (D1 + eta2) / (D1 * b**2) - D2 / a**2 - 1 / a)
    J4 = (eta1 + eta2) * (2 * D1**2 + 2 * D2**2 + eta1**2 + eta2**2 + 2 * (D2 - D1) * (eta1 - eta2)
                          - 4 * D1 * D2) * gt**4 / ((D1 - D2 - eta1) ** 3 * (D1 - D2 + eta2) ** 3)
    return {"J0": J0, "J1": J1, "J2": J2_quad + J2_quart, "J2_quadratic": J2_quad,
            "J2_quartic": J2_quart, "J4": J4}


def jzz_two_osc_fourth(g1, g2, gt, D1, D2, eta1, eta2):
    """Two modes at a common frequency coupled by gt; fourth order in g1, g2 only."""
    if math.isinf(eta1) and math.isinf(eta2):
        return jzz_two_osc_fourth_qubit(g1, g2, gt, D1, D2)
    num = -D2**4 * eta2 - eta1 * D1**4 - eta1 * eta2 * (D1 + D2) * (D1**2 + D2**2) \
        + 2 * (D1**2 * eta1 + D2**2 * eta2 + (D1 + D2) * eta1 * eta2) * gt**2 - (eta1 + eta2) * gt**4
    den = 2 * (D1 - D2 - eta1) * (D1 - D2 + eta2) * (D1**2 - gt**2) ** 2 * (D2**2 - gt**2) ** 2
    return g1**2 * g2**2 * gt**2 * num / den


def jzz_two_osc_fourth_equal_eta(g1, g2, gt, D1, D2, eta):
    num = D2**4 + D1**4 + eta * (D1 + D2) * (D1**2 + D2**2) - 2 * (D1**2 + D2**2 + (D1 + D2) * eta) * gt**2 \
        + 2 * gt**4
    den = 2 * (eta**2 - (D1 - D2) ** 2) * (D1**2 - gt**2) ** 2 * (D2**2 - gt**2) ** 2
    return eta * g1**2 * g2**2 * gt**2 * num / den


def jzz_two_osc_fourth_qubit(g1, g2, gt, D1, D2):
    return g1**2 * g2**2 * gt**2 * (D1 + D2) * (D1**2 + D2**2 - 2 * gt**2) \
        / (2 * (D1**2 - gt**2) ** 2 * (D2**2 - gt**2) ** 2)


def jzz_two_osc_sixth(g1, g2, gt, D1, D2, eta1, eta2):
    if math.isinf(eta1) and math.isinf(eta2):
        return (D1 + D2) * (D1**2 + D2**2) * g1**2 * g2**2 * gt**2 / (2 * D1**4 * D2**4)
    num = (D1**4 * eta1 + D2**4 * eta2 + (D1 + D2) * (D1**2 + D2**2) * eta1 * eta2) * g1**2 * g2**2 * gt**2
    return -num / (2 * D1**4 * D2**4 * (D1 - D2 - eta1) * (D1 - D2 + eta2))


def e1_single_cavity(g1, g2, D1, D2):
    return g1**2 / D1 - g1**4 / D1**3 + g1**2 * g2**2 / ((D1 - D2) * D1**2)


def e1_direct_coupling(g1, g2, gt, D1, D2):
    d = D1 - D2
    return g1**2 / D1 + gt**2 / d + 2 * g1 * g2 * gt / (D1 * d) \
        - (d * g1**2 + D1 * gt**2) * (D2**2 * g1**2 + D1 * D2 * (g2**2 - 2 * g1**2) + D1**2 * (g1**2 - g2**2 + gt**2)) \
        / (D1**3 * d**3)


def e1_two_osc_sixth(g1, g2, gt, D1, D2):
    return g1**2 / D1 - g1**2 * (g1**2 - gt**2) / D1**3 + (2 * g1**6 - 4 * g1**4 * gt**2 + g1**2 * gt**4) / D1**5 \
        - g1**2 * g2**2 * gt**2 / (D1**4 * (D2 - D1))


# ---------------------------------------------------------------------------
# sector matrices (energies relative to nu, basis order as in the docstrings)
# ---------------------------------------------------------------------------


def single_cavity_blocks(g1, g2, D1, D2, eta1, eta2, eta_mode=0.0, g_direct=0.0):
    """One- and two-excitation blocks for two transmons and one mode.

    Bases |t1 t2 o>: {100, 010, 001} and {110, 101, 011, 002, 200, 020}.
    """
    r2 = math.sqrt(2.0)
    H1 = np.array([[D1, g_direct, g1], [g_direct, D2, g2], [g1, g2, 0.0]], dtype=float)
    H12 = np.array([
        [D1 + D2, g2, g1, 0, r2 * g_direct, r2 * g_direct],
        [g2, D1, g_direct, r2 * g1, r2 * g1, 0],
        [g1, g_direct, D2, r2 * g2, 0, r2 * g2],
        [0, r2 * g1, r2 * g2, -eta_mode, 0, 0],
        [r2 * g_direct, r2 * g1, 0, 0, 2 * D1 - eta1, 0],
        [r2 * g_direct, 0, r2 * g2, 0, 0, 2 * D2 - eta2],
    ], dtype=float)
    return H1, H12


def two_oscillator_blocks(g1, g2, gt, D1, D2, eta1, eta2):
    """Blocks for two transmons each on its own mode, modes coupled by gt.

    Bases |t1 t2 o1 o2>: {1000, 0100, 0010, 0001} and
    {1100, 1010, 1001, 0110, 0101, 0011, 0020, 0002, 2000, 0200}.
    """
    r2 = math.sqrt(2.0)
    H1 = np.array([[D1, 0, g1, 0], [0, D2, 0, g2], [g1, 0, 0, gt], [0, g2, gt, 0]], dtype=float)
    H12 = np.zeros((10, 10))
    np.fill_diagonal(H12, [D1 + D2, D1, D1, D2, D2, 0, 0, 0, 2 * D1 - eta1, 2 * D2 - eta2])
    for i, j, v in [(0, 2, g2), (0, 3, g1), (1, 2, gt), (1, 6, r2 * g1), (1, 8, r2 * g1), (2, 5, g1),
                    (3, 4, gt), (3, 5, g2), (4, 7, r2 * g2), (4, 9, r2 * g2), (5, 6, r2 * gt), (5, 7, r2 * gt)]:
        H12[i, j] = H12[j, i] = v
    return H1, H12


def _zeroth(H: np.ndarray, keep: Sequence[tuple[int, int]]) -> np.ndarray:
    H0 = np.diag(np.diag(H))
    for i, j in keep:
        H0[i, j] = H[i, j]
        H0[j, i] = H[j, i]
    return H0


def sw_zz_two_oscillators(g1, g2, gt, D1, D2, eta1, eta2, order: int = 6, gt_perturbative: bool = True) -> float:
    """J_ZZ from the SW engine; with ``gt_perturbative=False`` the gt couplings are pre-rotated."""
    H1, H12 = two_oscillator_blocks(g1, g2, gt, D1, D2, eta1, eta2)
    k1 = [] if gt_perturbative else [(2, 3)]
    k12 = [] if gt_perturbative else [(1, 2), (3, 4), (5, 6), (5, 7)]
    E1 = sw_shift(H1, 0, order, _zeroth(H1, k1))
    E2 = sw_shift(H1, 1, order, _zeroth(H1, k1))
    E12 = sw_shift(H12, 0, order, _zeroth(H12, k12))
    return (E12 - E1 - E2) / 4


def sw_zz_single_cavity(g1, g2, D1, D2, eta1, eta2, eta_mode=0.0, g_direct=0.0, order: int = 4,
                        direct_perturbative: bool = True) -> float:
    H1, H12 = single_cavity_blocks(g1, g2, D1, D2, eta1, eta2, eta_mode, g_direct)
    k1 = [] if direct_perturbative else [(0, 1)]
    k12 = [] if direct_perturbative else [(0, 4), (0, 5), (1, 2)]
    E1 = sw_shift(H1, 0, order, _zeroth(H1, k1))
    E2 = sw_shift(H1, 1, order, _zeroth(H1, k1))
    E12 = sw_shift(H12, 0, order, _zeroth(H12, k12))
    return (E12 - E1 - E2) / 4


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class ZZReport:
    values: dict[str, float]
    components: dict[str, float] = field(default_factory=dict)
    terms: dict[str, float] = field(default_factory=dict)
    regime: str | None = None
    flags: tuple[str, ...] = ()

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def to_text(self) -> str:
        out = io.StringIO()
        out.write("[values]\n")
        for k, v in self.values.items():
            out.write(f"{k} = {v:.15g}\n")
        if self.terms:
            out.write("[terms]\n")
            for k, v in self.terms.items():
                out.write(f"{k} = {v:.15g}\n")
        if self.components:
            out.write("[components]\n")
            for k, v in self.components.items():
                out.write(f"{k} = {v:.15g}\n")
        if self.regime:
            out.write(f"regime = {self.regime}\n")
        if self.flags:
            out.write(f"flags = {', '.join(self.flags)}\n")
        return out.getvalue()


def _pair(spec: SystemSpec, mode_for=(0, 0)):
    if spec.n_qubits != 2:
        raise ValueError("ZZ expressions need exactly two qubits")
    g1 = float(spec.g[0, mode_for[0]])
    g2 = float(spec.g[1, mode_for[1]])
    D1 = spec.omega[0] - spec.nu[mode_for[0]]
    D2 = spec.omega[1] - spec.nu[mode_for[1]]
    return g1, g2, D1, D2, spec.eta[0], spec.eta[1]


def _check_denominators(*dens, names=()):
    for d, name in zip(dens, names):
        if abs(d) < 1e-14:
            raise ValueError(f"resonant denominator: {name} = 0")


def _add_exact(report: ZZReport, spec: SystemSpec, n_grid: int):
    try:
        J, shifts = exact_zz(spec, n_grid)
    except TrackingError:
        report.values["exact"] = math.nan
        report.flags = report.flags + ("tracking_failed",)
        return
    report.values["exact"] = J
    report.components.update(shifts)


def zz_single_cavity(spec: SystemSpec, exact: bool = True, n_grid: int = 50) -> ZZReport:
    """ZZ between two qubits sharing one mode (``spec.eta_mode`` is the mode anharmonicity)."""
    if spec.n_modes != 1:
        raise ValueError("zz_single_cavity needs exactly one mode")
    g1, g2, D1, D2, e1, e2 = _pair(spec)
    et = spec.eta_mode
    _check_denominators(D1, D2, names=("Delta1", "Delta2"))
    flags = []
    scale = max(abs(D1), abs(D2))
    if abs(D1 + D2 + et) < 1e-9 * scale:
        flags.append("two_photon_resonance")
    values = {}
    if math.isinf(e1) and math.isinf(e2):
        if not flags:
            values["formula_4th"] = jzz_fourth(g1, g2, D1, D2, e1, e2, et)
        if et == 0:
            values["formula_qubit_limit"] = jzz_qubit_limit(g1, g2, D1, D2)
    else:
        _check_denominators(e1 + D2 - D1, e2 + D1 - D2, names=("eta1 + Delta2 - Delta1", "eta2 + Delta1 - Delta2"))
        if not flags:
            values["formula_4th"] = jzz_fourth(g1, g2, D1, D2, e1, e2, et)
        if e1 == e2 and et == 0:
            values["formula_equal_eta"] = jzz_equal_eta(g1, g2, D1, D2, e1)
    if max(abs(g1), abs(g2)) > 0.2 * scale:
        _warn("ZZ formulas used outside |g| << |Delta|")
    report = ZZReport(values, flags=tuple(flags))
    if exact:
        _add_exact(report, spec, n_grid)
    return report


def zz_direct_coupling(spec: SystemSpec, exact: bool = True, n_grid: int = 50) -> ZZReport:
    """ZZ with a direct exchange ``spec.g_direct`` between the two transmons."""
    if spec.n_modes != 1:
        raise ValueError("zz_direct_coupling needs exactly one mode")
    g1, g2, D1, D2, e1, e2 = _pair(spec)
    if math.isinf(e1) or math.isinf(e2):
        raise ValueError("the direct-coupling expansion is written for transmons (finite eta)")
    gt = spec.g_direct
    et = spec.eta_mode
    _check_denominators(D1, D2, D1 - D2 - e1, D1 - D2 + e2, et + D1 + D2,
                        names=("Delta1", "Delta2", "Delta1 - Delta2 - eta1", "Delta1 - Delta2 + eta2",
                               "eta_mode + Delta1 + Delta2"))
    terms = jzz_direct_terms(g1, g2, gt, D1, D2, e1, e2, et)
    total = terms["J0"] + terms["J1"] + terms["J2"] + terms["J4"]
    scale = 0.5 * (abs(D1) + abs(D2))
    gg = abs(g1 * g2) / scale if g1 * g2 else 0.0
    if gg == 0:
        regime = "direct_only"
    elif abs(gt) < 0.1 * gg:
        regime = "g_tilde << g^2/Delta"
    elif abs(gt) > 10 * gg:
        regime = "g_tilde >> g^2/Delta"
    else:
        regime = "intermediate"
    report = ZZReport({"formula_direct_g": total}, terms=terms, regime=regime)
    if exact:
        _add_exact(report, spec, n_grid)
    return report


@dataclass(frozen=True)
class NormalModes:
    """Exact diagonalisation of the quadratic part; columns follow (c1, c2, b)."""

    frequencies: np.ndarray
    U: np.ndarray


def quadratic_normal_modes(spec: SystemSpec) -> NormalModes:
    if spec.n_modes != 1 or spec.n_qubits != 2:
        raise ValueError("normal modes are set up for two qubits and one mode")
    h = np.array([[spec.omega[0], spec.g_direct, spec.g[0, 0]],
                  [spec.g_direct, spec.omega[1], spec.g[1, 0]],
                  [spec.g[0, 0], spec.g[1, 0], spec.nu[0]]], dtype=float)
    w, v = np.linalg.eigh(h)
    _, cols = linear_sum_assignment(-np.abs(v) ** 2)
    v = v[:, cols]
    w = w[cols]
    v = v * np.sign(np.diag(v))[None, :]
    return NormalModes(w, v)


def jzz_eta_expansion_terms(nm: NormalModes, eta1: float, eta2: float, eta_mode: float) -> tuple[float, float]:
    """First- and second-order-in-eta ZZ from exact normal modes."""
    U = nm.U
    u = U[:2, :]
    gam = U[2, :]
    et = eta_mode
    eta = np.array([eta1, eta2])
    w1, w2, nu = nm.frequencies
    J1 = -et / 2 * gam[0] ** 2 * gam[1] ** 2 - np.sum(eta / 2 * u[:, 0] ** 2 * u[:, 1] ** 2)

    def amp(p, q, r, s):
        return et * gam[p] * gam[q] * gam[r] * gam[s] + np.sum(eta * u[:, p] * u[:, q] * u[:, r] * u[:, s])

    if min(abs(nu - w1), abs(nu - w2), abs(w1 - w2), abs(2 * nu - w1 - w2)) < 1e-14:
        raise ValueError("degenerate quadratic spectrum")
    J2 = -amp(0, 0, 1, 2) ** 2 / (nu - w2) - amp(0, 1, 1, 2) ** 2 / (nu - w1) \
        - amp(0, 0, 0, 1) ** 2 / (2 * (w1 - w2)) - amp(0, 1, 1, 1) ** 2 / (2 * (w2 - w1)) \
        - amp(0, 1, 2, 2) ** 2 / (2 * (2 * nu - w1 - w2))
    return float(J1), float(J2)


def exact_zz_normal_modes(spec: SystemSpec, n_grid: int = 50) -> float:
    """Exact ZZ with the anharmonic terms ramped in the normal-mode basis."""
    nm = quadratic_normal_modes(spec)
    space = HilbertSpec(fock_cutoff=(3, 3, 3))
    a = lowering_operators(space)
    H2 = sum(w * op.conj().T @ op for w, op in zip(nm.frequencies, a))
    H4 = np.zeros_like(H2)
    etas = [spec.eta[0], spec.eta[1], spec.eta_mode]
    for site in range(3):
        if etas[site] == 0:
            continue
        if math.isinf(etas[site]):
            raise ValueError("normal-mode oracle needs finite anharmonicities")
        c = sum(nm.U[site, k] * a[k] for k in range(3))
        cd = c.conj().T
        H4 = H4 - 0.5 * etas[site] * cd @ cd @ c @ c
    occ = np.array(np.unravel_index(np.arange(space.dim), space.dims)).T
    idx = np.flatnonzero(occ.sum(axis=1) == 2)
    pos = int(np.flatnonzero(idx == space.index([1, 1, 0]))[0])
    A = H2[np.ix_(idx, idx)]
    B = H4[np.ix_(idx, idx)]
    E = adiabatic_track(lambda s: A + s * B, pos, np.linspace(0.0, 1.0, n_grid))
    return float(E[-1] - nm.frequencies[0] - nm.frequencies[1]) / 4


def zz_eta_expansion(spec: SystemSpec, exact: bool = True, n_grid: int = 50) -> ZZReport:
    """ZZ to second order in the anharmonicities and all orders in the couplings."""
    nm = quadratic_normal_modes(spec)
    J1, J2 = jzz_eta_expansion_terms(nm, spec.eta[0], spec.eta[1], spec.eta_mode)
    values = {"formula_eta2_allg": J1 + J2, "formula_eta1_allg": J1}
    if spec.g_direct == 0:
        g1, g2, D1, D2, e1, e2 = _pair(spec)
        if D1 != D2:
            values["formula_eta1_g4"] = jzz_first_order_eta(g1, g2, D1, D2, e1, e2, spec.eta_mode)
    report = ZZReport(values, terms={"J_eta1": J1, "J_eta2": J2})
    if exact:
        try:
            report.values["exact"] = exact_zz_normal_modes(spec, n_grid)
        except TrackingError:
            report.values["exact"] = math.nan
            report.flags = ("tracking_failed",)
    return report


def zz_two_oscillators(spec: SystemSpec, exact: bool = True, n_grid: int = 50) -> ZZReport:
    """ZZ between two qubits on separate modes (equal frequency) coupled by ``spec.g_tilde``."""
    if spec.n_modes != 2 or spec.n_qubits != 2:
        raise ValueError("zz_two_oscillators needs two qubits and two modes")
    if spec.nu[0] != spec.nu[1]:
        raise ValueError("the closed forms assume equal mode frequencies")
    if spec.g[0, 1] or spec.g[1, 0]:
        raise ValueError("each qubit must couple to its own mode only")
    g1, g2, D1, D2, e1, e2 = _pair(spec, (0, 1))
    gt = spec.g_tilde
    _check_denominators(D1, D2, D1**2 - gt**2, D2**2 - gt**2,
                        names=("Delta1", "Delta2", "Delta1^2 - g_tilde^2", "Delta2^2 - g_tilde^2"))
    if not (math.isinf(e1) and math.isinf(e2)):
        _check_denominators(D1 - D2 - e1, D1 - D2 + e2, names=("Delta1 - Delta2 - eta1", "Delta1 - Delta2 + eta2"))
    values = {
        "formula_6th_two_osc": jzz_two_osc_sixth(g1, g2, gt, D1, D2, e1, e2),
        "formula_4th_gtilde": jzz_two_osc_fourth(g1, g2, gt, D1, D2, e1, e2),
    }
    if math.isfinite(e1) and e1 == e2:
        values["formula_4th_gtilde_equal_eta"] = jzz_two_osc_fourth_equal_eta(g1, g2, gt, D1, D2, e1)
    report = ZZReport(values)
    if exact:
        _add_exact(report, spec, n_grid)
    return report


# ---------------------------------------------------------------------------
# zero-ZZ mode frequency and order fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroZZRoots:
    roots: tuple[float, ...]
    resonant: tuple[bool, ...]

    def usable(self) -> tuple[float, ...]:
        return tuple(r for r, bad in zip(self.roots, self.resonant) if not bad)


def zz_numerator_equal_eta(nu: float, omega_i: float, omega_j: float, eta: float) -> float:
    return (omega_i - nu) ** 2 + (omega_j - nu) ** 2 + (omega_i + omega_j - 2 * nu) * eta


def zero_zz_cavity_frequency(omega_i: float, omega_j: float, eta: float, resonance_tol: float = 1e-9) -> ZeroZZRoots:
    """Mode frequencies that cancel the equal-eta fourth-order ZZ numerator."""
    S = omega_i + omega_j
    disc = eta * eta - (omega_i - omega_j) ** 2
    if disc < 0:
        return ZeroZZRoots((), ())
    r = math.sqrt(disc)
    big = 0.5 * (S + eta + math.copysign(r, S + eta))
    c = 0.5 * (omega_i**2 + omega_j**2 + S * eta)
    small = c / big if big != 0 else 0.5 * (S + eta - r)
    roots = tuple(sorted({big, small})) if disc > 0 else (0.5 * (S + eta),)
    scale = max(1.0, abs(omega_i), abs(omega_j))
    resonant = tuple(min(abs(x - omega_i), abs(x - omega_j)) < resonance_tol * scale for x in roots)
    return ZeroZZRoots(roots, resonant)


@dataclass(frozen=True)
class OrderFit:
    scales: tuple[float, ...]
    residuals: tuple[float, ...]
    slope: float

    def to_csv(self) -> str:
        lines = ["scale,residual"] + [f"{s:.12g},{r:.12g}" for s, r in zip(self.scales, self.residuals)]
        return "\n".join(lines) + "\n"


def order_fit(scales: Sequence[float], residuals: Sequence[float]) -> OrderFit:
    """Log-log slope of |residual| against the scaling factor."""
    s = np.asarray(scales, dtype=float)
    r = np.abs(np.asarray(residuals, dtype=float))
    if np.any(r == 0):
        raise ValueError("cannot fit a zero residual")
    slope = float(np.polyfit(np.log(s), np.log(r), 1)[0])
    return OrderFit(tuple(s), tuple(r), slope)


def random_sw_problem(rng: np.random.Generator, low_dim: int = 2, high_dim: int = 6) -> SWProblem:
    """Degenerate low block at 0, high energies of either sign with |W| in [1, 3], unit-size couplings."""
    W = rng.uniform(1.0, 3.0, high_dim) * rng.choice([-1.0, 1.0], high_dim)
    X = rng.normal(size=(low_dim, high_dim)) + 1j * rng.normal(size=(low_dim, high_dim))
    Y = rng.normal(size=(high_dim, high_dim)) + 1j * rng.normal(size=(high_dim, high_dim))
    Z = rng.normal(size=(low_dim, low_dim)) + 1j * rng.normal(size=(low_dim, low_dim))
    return SWProblem(W, 0.5 * X, 0.25 * (Y + Y.conj().T), 0.25 * (Z + Z.conj().T))


def sw_eigenvalue_residual(problem: SWProblem, order: int) -> float:
    """max |eig(H_eff) - exact low eigenvalues|, the exact ones being the low_dim closest to zero."""
    eff = np.sort(schrieffer_wolff(problem, order).eigenvalues() - problem.offset)
    ev = np.linalg.eigvalsh(problem.full_matrix())
    exact = np.sort(ev[np.argsort(np.abs(ev))[:problem.low_dim]])
    return float(np.max(np.abs(eff - exact)))


SW_STUDY_SCALES = {2: (0.005, 0.0025, 0.00125), 4: (0.02, 0.01, 0.005), 6: (0.05, 0.025, 0.0125)}


def sw_order_study(order: int, seed: int = 0, n_problems: int = 5,
                   scales: Sequence[float] | None = None) -> list[OrderFit]:
    """Residual slope for ``n_problems`` random problems scaled by s (Y and Z scale with s too).

    Default scales shrink with the order only as far as the residual stays
    well above rounding.
    """
    if scales is None:
        scales = SW_STUDY_SCALES.get(order, (0.04, 0.02, 0.01))
    rng = np.random.default_rng(seed)
    fits = []
    for _ in range(n_problems):
        p = random_sw_problem(rng)
        fits.append(order_fit(scales, [sw_eigenvalue_residual(p.scaled(s), order) for s in scales]))
    return fits


ZZ_STUDY_DEFAULTS = {
    "single_cavity": dict(nu=5.0, D1=1.0, D2=1.35, eta1=0.25, eta2=0.3, g=0.05, scales=(1.0, 0.5, 0.25)),
    "two_osc_sixth": dict(nu=5.0, D1=1.0, D2=1.35, eta1=0.25, eta2=0.3, g=0.04, scales=(1.0, 0.5, 0.25)),
    "eta_expansion": dict(nu=5.0, D1=1.0, D2=1.35, eta1=0.04, eta2=0.05, g=0.3, scales=(1.0, 0.5, 0.25)),
}
ZZ_STUDY_KEYS = {
    "single_cavity": ("formula_4th", "exact"),
    "two_osc_sixth": ("formula_6th_two_osc", "exact"),
    "eta_expansion": ("formula_eta2_allg", "exact"),
}


def zz_study_spec(kind: str, s: float, nu: float, D1: float, D2: float, eta1: float, eta2: float,
                  g: float) -> SystemSpec:
    """Spec at scale s: couplings scale for the coupling studies, anharmonicities for eta_expansion."""
    omega = (nu + D1, nu + D2)
    if kind == "single_cavity":
        return SystemSpec(omega=omega, nu=(nu,), g=[s * g, s * g], eta=(eta1, eta2))
    if kind == "two_osc_sixth":
        return SystemSpec(omega=omega, nu=(nu, nu), g=np.diag([s * g, s * g]), eta=(eta1, eta2), g_tilde=s * g)
    if kind == "eta_expansion":
        return SystemSpec(omega=omega, nu=(nu,), g=[g, g], eta=(s * eta1, s * eta2))
    raise ValueError(f"unknown study {kind!r}")


def zz_order_study(kind: str, n_grid: int = 50, **overrides) -> OrderFit:
    """|closed form - exact| against the scaled parameter.

    single_cavity: fourth-order single-mode ZZ, couplings scaled (residual ~ g^6).
    two_osc_sixth: sixth-order two-oscillator ZZ, g and g_tilde scaled (~ g^8).
    eta_expansion: second order in the anharmonicities at fixed g (~ eta^3).
    """
    if kind not in ZZ_STUDY_DEFAULTS:
        raise ValueError(f"unknown study {kind!r}; choose from {sorted(ZZ_STUDY_DEFAULTS)}")
    p = dict(ZZ_STUDY_DEFAULTS[kind])
    p.update(overrides)
    scales = tuple(p.pop("scales"))
    report = {"single_cavity": zz_single_cavity, "two_osc_sixth": zz_two_oscillators,
              "eta_expansion": zz_eta_expansion}[kind]
    fkey, ekey = ZZ_STUDY_KEYS[kind]
    res = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PerturbativeWarning)
        for s in scales:
            r = report(zz_study_spec(kind, s, **p), exact=True, n_grid=n_grid)
            res.append(r.values[fkey] - r.values[ekey])
    return order_fit(scales, res)
