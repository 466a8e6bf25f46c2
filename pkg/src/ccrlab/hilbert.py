"""Truncated Fock-space operators and exact numerical evolution.

This module is the brute-force reference that every closed-form result in the
package is checked against. Sites are ordered qubits first, then modes; a site
with ``levels == 2`` is a two-level system, anything larger is a transmon.
Two-level Pauli operators use ``Z = 2 n - 1`` so that the excited state has
``Z = +1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels

DEFAULT_MAX_DIM = 10_000


class ConvergenceError(RuntimeError):
    """Step control could not reach the requested tolerance."""


class TrackingError(RuntimeError):
    """Adiabatic continuation lost the tracked state."""


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HilbertSpec:
    """Tensor-product layout: per-qubit level counts and per-mode Fock levels."""

    qubit_levels: tuple[int, ...] = ()
    fock_cutoff: tuple[int, ...] = ()
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        object.__setattr__(self, "qubit_levels", tuple(int(x) for x in self.qubit_levels))
        object.__setattr__(self, "fock_cutoff", tuple(int(x) for x in self.fock_cutoff))
        if any(lv < 2 for lv in self.qubit_levels):
            raise ValueError("every qubit needs at least 2 levels")
        if any(c < 2 for c in self.fock_cutoff):
            raise ValueError("fock_cutoff must be >= 2")
        if self.dim > self.max_dim:
            raise ValueError(f"Hilbert dimension {self.dim} exceeds cap {self.max_dim}")

    @property
    def qubit_count(self) -> int:
        return len(self.qubit_levels)

    @property
    def mode_count(self) -> int:
        return len(self.fock_cutoff)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.qubit_levels + self.fock_cutoff

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.dims else 1

    def index(self, occupations: Sequence[int]) -> int:
        """Flat basis index of a product state given per-site occupations."""
        if len(occupations) != len(self.dims):
            raise ValueError("one occupation per site expected")
        return int(np.ravel_multi_index(tuple(occupations), self.dims))

    def basis(self, occupations: Sequence[int]) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(occupations)] = 1.0
        return v


def _as_matrix(g, n_q: int, n_m: int) -> np.ndarray:
    arr = np.asarray(g, dtype=float)
    if arr.ndim == 0:
        arr = np.full((n_q, n_m), float(arr))
    elif arr.ndim == 1:
        if n_m == 1 and arr.shape[0] == n_q:
            arr = arr[:, None]
        elif n_q == 1 and arr.shape[0] == n_m:
            arr = arr[None, :]
        else:
            raise ValueError("1-D coupling list must match the qubit count for a single mode")
    if arr.shape != (n_q, n_m):
        raise ValueError(f"coupling matrix must have shape {(n_q, n_m)}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class SystemSpec:
    """Physical parameters (angular frequencies, hbar = 1).

    ``g`` is the qubit-mode coupling matrix g[i, k]; a flat list is accepted for
    a single mode. ``eta[i] = math.inf`` marks a two-level qubit. ``g_tilde``
    is the exchange coupling between neighbouring modes and ``g_direct`` the
    exchange coupling between qubits 0 and 1.
    """

    omega: tuple[float, ...]
    nu: tuple[float, ...]
    g: np.ndarray
    omega_d: float = 0.0
    Omega: tuple[float, ...] | None = None
    eta: tuple[float, ...] | None = None
    eta_mode: float = 0.0
    g_tilde: float = 0.0
    g_direct: float = 0.0

    def __post_init__(self):
        omega = tuple(float(x) for x in np.atleast_1d(self.omega))
        nu = tuple(float(x) for x in np.atleast_1d(self.nu))
        n_q, n_m = len(omega), len(nu)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "nu", nu)
        g = _as_matrix(self.g, n_q, n_m)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)
        Omega = (0.0,) * n_q if self.Omega is None else tuple(float(x) for x in np.atleast_1d(self.Omega))
        eta = (math.inf,) * n_q if self.eta is None else tuple(float(x) for x in np.atleast_1d(self.eta))
        if len(Omega) != n_q or len(eta) != n_q:
            raise ValueError("Omega and eta need one entry per qubit")
        if any(o < 0 for o in Omega):
            raise ValueError("drive amplitudes Omega must be non-negative")
        object.__setattr__(self, "Omega", Omega)
        object.__setattr__(self, "eta", eta)
        vals = list(omega) + list(nu) + list(Omega) + [self.omega_d, self.eta_mode, self.g_tilde, self.g_direct]
        if not all(math.isfinite(v) for v in vals) or not np.all(np.isfinite(g)):
            raise ValueError("all frequencies and couplings must be finite")
        if any(math.isnan(e) for e in eta):
            raise ValueError("anharmonicity cannot be NaN")

    @classmethod
    def from_detunings(cls, Delta, eps, g, Omega=None, eta=None, omega_d: float = 0.0, **kw) -> "SystemSpec":
        """Build a spec from Delta_i = omega_i - omega_d and eps_k = nu_k - omega_d."""
        Delta = np.atleast_1d(np.asarray(Delta, dtype=float))
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        return cls(omega=tuple(Delta + omega_d), nu=tuple(eps + omega_d), g=g, omega_d=omega_d, Omega=Omega, eta=eta, **kw)

    @property
    def n_qubits(self) -> int:
        return len(self.omega)

    @property
    def n_modes(self) -> int:
        return len(self.nu)

    @property
    def Delta(self) -> np.ndarray:
        return np.array(self.omega) - self.omega_d

    @property
    def eps(self) -> np.ndarray:
        return np.array(self.nu) - self.omega_d

    def is_two_level(self, i: int) -> bool:
        return math.isinf(self.eta[i])

    def replace(self, **changes) -> "SystemSpec":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return SystemSpec(**data)


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def _local_lowering(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1).astype(complex)


def embed(space: HilbertSpec, site: int, local: np.ndarray) -> np.ndarray:
    """Lift a single-site operator to the full tensor-product space."""
    out = np.ones((1, 1), dtype=complex)
    for s, d in enumerate(space.dims):
        out = np.kron(out, local if s == site else np.eye(d, dtype=complex))
    return out


def lowering_operators(space: HilbertSpec) -> list[np.ndarray]:
    """Annihilation operators for every site, qubits first then modes."""
    return [embed(space, s, _local_lowering(d)) for s, d in enumerate(space.dims)]


def pauli(space: HilbertSpec, qubit: int, which: str) -> np.ndarray:
    """Pauli X, Y or Z on a two-level site, with Z = +1 on the excited state."""
    if space.qubit_levels[qubit] != 2:
        raise ValueError("Pauli operators require a two-level site")
    c = _local_lowering(2)
    loc = {
        "x": c + c.conj().T,
        "y": -1j * (c.conj().T - c),
        "z": 2 * c.conj().T @ c - np.eye(2),
    }[which.lower()]
    return embed(space, qubit, loc)


def _check_layout(spec: SystemSpec, space: HilbertSpec):
    if space.qubit_count != spec.n_qubits or space.mode_count != spec.n_modes:
        raise ValueError("SystemSpec and HilbertSpec disagree on site counts")
    for i, lv in enumerate(space.qubit_levels):
        if spec.is_two_level(i) and lv != 2:
            raise ValueError(f"qubit {i} has infinite anharmonicity but {lv} levels")


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """H(t) = static + sum_j cos(freqs[j] t + phases[j]) drives[j]."""

    static: np.ndarray
    drives: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray = field(default=None)

    def __post_init__(self):
        drives = np.asarray(self.drives, dtype=complex).reshape(-1, *self.static.shape)
        object.__setattr__(self, "drives", drives)
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=float).reshape(-1))
        ph = np.zeros(len(drives)) if self.phases is None else np.asarray(self.phases, dtype=float).reshape(-1)
        object.__setattr__(self, "phases", ph)

    def __call__(self, t: float) -> np.ndarray:
        c = np.cos(self.freqs * t + self.phases)
        return self.static + np.tensordot(c, self.drives, axes=1)


def _static_part(spec: SystemSpec, space: HilbertSpec, qubit_freq, mode_freq, drive_scale: float):
    ops = lowering_operators(space)
    nq = spec.n_qubits
    dim = space.dim
    H = np.zeros((dim, dim), dtype=complex)
    drive_ops = []
    for i in range(nq):
        c = ops[i]
        cd = c.conj().T
        if spec.is_two_level(i):
            H += 0.5 * qubit_freq[i] * pauli(space, i, "z")
        else:
            H += qubit_freq[i] * cd @ c - 0.5 * spec.eta[i] * cd @ cd @ c @ c
        drive_ops.append(spec.Omega[i] * (c + cd))
        H += drive_scale * spec.Omega[i] * (c + cd)
    for k in range(spec.n_modes):
        b = ops[nq + k]
        bd = b.conj().T
        H += mode_freq[k] * bd @ b
        if spec.eta_mode:
            H += -0.5 * spec.eta_mode * bd @ bd @ b @ b
        for i in range(nq):
            if spec.g[i, k]:
                H += spec.g[i, k] * (ops[i].conj().T @ b + bd @ ops[i])
    for k in range(spec.n_modes - 1):
        if spec.g_tilde:
            b1, b2 = ops[nq + k], ops[nq + k + 1]
            H += spec.g_tilde * (b1.conj().T @ b2 + b2.conj().T @ b1)
    if spec.g_direct:
        if nq < 2:
            raise ValueError("direct coupling needs two qubits")
        c1, c2 = ops[0], ops[1]
        H += spec.g_direct * (c1.conj().T @ c2 + c2.conj().T @ c1)
    return H, drive_ops


def dressing_unitary(spec: SystemSpec, space: HilbertSpec) -> np.ndarray:
    """U = exp(-i sum_j theta_j Y_j / 2) acting on the two-level sites."""
    U = np.eye(space.dim, dtype=complex)
    for i in range(spec.n_qubits):
        if not spec.is_two_level(i):
            raise ValueError("the dressed frame is defined for two-level qubits only")
        th = math.atan2(spec.Omega[i], spec.Delta[i])
        Y = pauli(space, i, "y")
        U = U @ (math.cos(th / 2) * np.eye(space.dim) - 1j * math.sin(th / 2) * Y)
    return U


def build_hamiltonian(spec: SystemSpec, space: HilbertSpec, frame: str = "rwa_rotating"):
    """Assemble the Hamiltonian in the lab, rotating (RWA) or dressed frame.

    The lab frame returns a :class:`TimeDependentHamiltonian` carrying the
    ``Omega cos(omega_d t)`` drive; the other two frames are static matrices.
    """
    _check_layout(spec, space)
    if frame == "lab":
        H0, drive_ops = _static_part(spec, space, spec.omega, spec.nu, 0.0)
        return TimeDependentHamiltonian(H0, np.array(drive_ops), np.full(len(drive_ops), spec.omega_d))
    if frame in ("rwa", "rwa_rotating"):
        H, _ = _static_part(spec, space, spec.Delta, spec.eps, 0.5)
        return H
    if frame == "dressed":
        H, _ = _static_part(spec, space, spec.Delta, spec.eps, 0.5)
        U = dressing_unitary(spec, space)
        Hd = U.conj().T @ H @ U
        return 0.5 * (Hd + Hd.conj().T)
    raise ValueError(f"unknown frame {frame!r}")


def rotating_generator(spec: SystemSpec, space: HilbertSpec) -> np.ndarray:
    """H0 whose interaction picture turns the lab frame into the rotating frame."""
    _check_layout(spec, space)
    ops = lowering_operators(space)
    H0 = np.zeros((space.dim, space.dim), dtype=complex)
    for i in range(spec.n_qubits):
        if spec.is_two_level(i):
            H0 += 0.5 * spec.omega_d * pauli(space, i, "z")
        else:
            H0 += spec.omega_d * ops[i].conj().T @ ops[i]
    for k in range(spec.n_modes):
        b = ops[spec.n_qubits + k]
        H0 += spec.omega_d * b.conj().T @ b
    return H0


def fock_cutoff_for(max_amplitude: float) -> int:
    """Default Fock level count for coherent amplitudes up to ``max_amplitude``."""
    return int(math.ceil(10 + 6 * float(max_amplitude) ** 2)) + 1


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------


def is_hermitian(H: np.ndarray, atol: float = 1e-12) -> bool:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    return bool(np.max(np.abs(H - H.conj().T), initial=0.0) < atol * scale)


def expm_hermitian(H: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) for Hermitian H through its eigendecomposition."""
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def _static_propagate(H, psi0, times):
    w, v = np.linalg.eigh(H)
    coef = v.conj().T @ psi0
    return [v @ (np.exp(-1j * w * (t - times[0])) * coef) for t in times]


def _adaptive(advance, psi, t0, t1, tol, max_steps, n_start):
    n = max(1, n_start)
    prev = advance(psi, t0, t1, n)
    while True:
        n *= 2
        if n > max_steps:
            raise ConvergenceError(f"tolerance {tol:g} not reached within {max_steps} steps on [{t0}, {t1}]")
        cur = advance(psi, t0, t1, n)
        if np.linalg.norm(cur - prev) < tol:
            return cur, n
        prev = cur


def _midpoint_advance(func):
    from scipy.linalg import expm

    def advance(psi, t0, t1, n):
        h = (t1 - t0) / n
        out = psi
        for k in range(n):
            out = expm(-1j * h * func(t0 + (k + 0.5) * h)) @ out
        return out

    return advance


def propagate(H, state, t_grid: Sequence[float], tol: float = 1e-9, max_steps: int = 1 << 20) -> list[np.ndarray]:
    """Evolve ``state`` (given at t_grid[0]) and return it at every grid time.

    Static matrices are exponentiated exactly. A :class:`TimeDependentHamiltonian`
    uses fourth-order Magnus steps and a generic callable uses midpoint
    exponentials; in both cases the step count per output interval doubles
    until halving the step changes the state by less than ``tol``.
    """
    psi0 = np.asarray(state, dtype=complex)
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("t_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(times) < 0):
        raise ValueError("t_grid must be non-decreasing")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("state must be normalised")
    if isinstance(H, np.ndarray):
        if not is_hermitian(H, 1e-10):
            raise ValueError("Hamiltonian is not Hermitian")
        return _static_propagate(H, psi0, times)
    if isinstance(H, TimeDependentHamiltonian):
        def advance(psi, a, b, n):
            return kernels.magnus_propagate(H.static, H.drives, H.freqs, H.phases, psi, a, b, n)
        width = np.max(np.abs(H.freqs), initial=0.0)
    elif callable(H):
        advance = _midpoint_advance(H)
        width = 0.0
    else:
        raise TypeError("H must be a matrix, TimeDependentHamiltonian or callable")
    out = [psi0]
    psi = psi0
    n_hint = 1
    for a, b in zip(times[:-1], times[1:]):
        if b == a:
            out.append(psi)
            continue
        n_start = max(n_hint // 2, int(np.ceil((b - a) * width / np.pi)) + 1)
        psi, n_hint = _adaptive(advance, psi, a, b, tol, max_steps, n_start)
        out.append(psi)
    return out


def evolve_sequence(steps, state) -> np.ndarray:
    """Apply a list of ("evolve", H, duration) and ("apply", U) steps."""
    psi = np.asarray(state, dtype=complex)
    for step in steps:
        kind = step[0]
        if kind == "evolve":
            psi = expm_hermitian(step[1], step[2]) @ psi
        elif kind == "apply":
            psi = step[1] @ psi
        else:
            raise ValueError(f"unknown step kind {kind!r}")
    return psi


def exact_eigen(H: np.ndarray, residual_tol: float = 1e-10):
    """Ascending eigenvalues and column eigenvectors of a Hermitian matrix."""
    H = np.asarray(H)
    if not is_hermitian(H):
        raise ValueError("exact_eigen requires a Hermitian matrix")
    w, v = np.linalg.eigh(H)
    res = np.linalg.norm(H @ v - v * w, axis=0)
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    if np.any(res > residual_tol * scale):
        raise np.linalg.LinAlgError("eigen-decomposition residual above tolerance")
    return w, v


def adiabatic_track(H_of_g: Callable[[float], np.ndarray], seed_index: int, g_grid: Sequence[float],
                    min_overlap: float = 0.5, return_vectors: bool = False):
    """Follow the eigenvalue continuously connected to basis state ``seed_index``.

    ``H_of_g(g_grid[0])`` must be diagonal. At each later grid point the
    eigenvector with the largest overlap with the previous one is selected;
    an overlap below ``min_overlap`` raises :class:`TrackingError`.
    """
    grid = list(g_grid)
    if not grid:
        raise ValueError("empty grid")
    H = np.asarray(H_of_g(grid[0]))
    off = H - np.diag(np.diag(H))
    if np.max(np.abs(off), initial=0.0) > 1e-12:
        raise ValueError("H must be diagonal at the first grid point")
    vec = np.zeros(H.shape[0], dtype=complex)
    vec[seed_index] = 1.0
    energies = [float(np.real(H[seed_index, seed_index]))]
    vectors = [vec]
    for g in grid[1:]:
        w, v = np.linalg.eigh(np.asarray(H_of_g(g)))
        ov = np.abs(v.conj().T @ vec)
        k = int(np.argmax(ov))
        if ov[k] < min_overlap:
            raise TrackingError(f"overlap {ov[k]:.3f} below {min_overlap} at g={g}")
        vec = v[:, k] * np.exp(-1j * np.angle(v[:, k] @ vec.conj()))
        energies.append(float(w[k]))
        vectors.append(vec)
    if return_vectors:
        return energies, vectors
    return energies
