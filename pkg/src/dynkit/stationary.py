"""Grid Hamiltonians, their spectra, and spectra extracted from time propagation.

Finite-difference stencils (forward/backward/central) and the spectral
position-momentum sandwich H = F^-1 diag(K(p)) F + diag(U(x)) are assembled
as dense matrices.  Band structures of lattice potentials come from
diagonalizing H(x, p + hbar k) on a single cell with periodic boundaries,
and eigenvalues can also be located as peaks of the Fourier-transformed
autocorrelation of a propagated state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, HermiticityError
from .grids import UniformGrid, fft_bridge, ifft_bridge

FD_SCHEMES = ("forward", "backward", "central")


@dataclass(frozen=True)
class HamiltonianSpec:
    """H = K(t, p) + U(t, x) through two real-valued callables.

    ``mass`` enters through K by convention; it is kept as metadata for
    diagnostics such as the Ehrenfest check m d<x>/dt = <p>.
    """

    kinetic: Callable[[float, np.ndarray], np.ndarray]
    potential: Callable[[float, np.ndarray], np.ndarray]
    hbar: float = 1.0
    mass: float = 1.0


@dataclass(frozen=True)
class SpectrumResult:
    """Ascending eigenvalues and column eigenvectors (dx-weighted orthonormal)."""

    energies: np.ndarray
    states: np.ndarray


def _potential_values(potential, x):
    if callable(potential):
        u = np.asarray(potential(x), dtype=float)
    else:
        u = np.asarray(potential, dtype=float)
    if u.shape == ():
        u = np.full_like(x, float(u))
    if u.shape != x.shape:
        raise ValueError(f"potential shape {u.shape} does not match grid {x.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("potential is not finite on the grid")
    return u


def build_fd_hamiltonian(grid: UniformGrid, potential, scheme: str = "central",
                         mass: float = 1.0) -> np.ndarray:
    """Finite-difference Hamiltonian -hbar^2/(2m) d^2/dx^2 + U(x) on the grid.

    ``potential`` may be a callable U(x) or an array of values.  The central
    stencil with the boundary condition psi(x_-1) = psi(x_N) = 0 is hermitian;
    the forward/backward stencils (psi vanishing beyond the right/left edge)
    are triangular, so their eigenvalues sit on the stencil diagonal
    -hbar^2/(2 m dx^2) + U(x_k).
    """
    if scheme not in FD_SCHEMES:
        raise ValueError(f"scheme must be one of {FD_SCHEMES}, got {scheme!r}")
    u = _potential_values(potential, grid.x)
    n = grid.n
    c = grid.hbar ** 2 / (2.0 * mass * grid.dx ** 2)
    h = np.zeros((n, n), dtype=complex)
    if scheme == "central":
        idx = np.arange(n)
        h[idx, idx] = 2.0 * c + u
        h[idx[:-1], idx[:-1] + 1] = -c
        h[idx[1:], idx[1:] - 1] = -c
    else:
        idx = np.arange(n)
        h[idx, idx] = -c + u
        step = 1 if scheme == "forward" else -1
        second = np.arange(n)[(idx + step >= 0) & (idx + step < n)]
        h[second, second + step] = 2.0 * c
        third = np.arange(n)[(idx + 2 * step >= 0) & (idx + 2 * step < n)]
        h[third, third + 2 * step] = -c
    return h


def build_spectral_hamiltonian(grid: UniformGrid, spec: HamiltonianSpec,
                               t: float = 0.0) -> np.ndarray:
    """Dense H = F^-1 diag(K(t, p)) F + diag(U(t, x)) via the sign-alternation bridge.

    The kinetic block is a similarity transform of a real diagonal by the
    unitary discrete bridge, so the assembled matrix is hermitian to rounding.
    """
    grid.require_fft_bridge()
    n = grid.n
    kdiag = np.asarray(spec.kinetic(t, grid.p_fft), dtype=float)
    u = np.asarray(spec.potential(t, grid.x), dtype=float)
    m = np.diag(kdiag.astype(complex))
    m = ifft_bridge(m, axis=0)
    m = fft_bridge(m, axis=1)
    m[np.arange(n), np.arange(n)] += u
    return m


def eigensolve(h: np.ndarray, dx: float = 1.0) -> SpectrumResult:
    """Full spectrum of a hermitian matrix, ascending, dx-weighted orthonormal vectors."""
    h = np.asarray(h, dtype=complex)
    scale = max(1.0, np.max(np.abs(h)))
    if np.max(np.abs(h - h.conj().T)) > 1e-10 * scale:
        raise HermiticityError("eigensolve requires a hermitian matrix")
    try:
        energies, states = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
    return SpectrumResult(energies=energies, states=states / np.sqrt(dx))


def band_structure(cell_spec: HamiltonianSpec, lattice_constant: float,
                   n_cell_grid: int, quasimomenta: Sequence[float],
                   n_bands: int) -> np.ndarray:
    """Bloch bands E_n(k) of a potential periodic on [0, a).

    For each quasimomentum k the operator H(x, p + hbar k) is diagonalized on
    a single cell with periodic boundary conditions, using the cell's FFT
    momentum grid p_j = 2 pi hbar j / a directly (no sign alternation is
    needed for a genuinely periodic boundary).  Returns an array of shape
    (len(quasimomenta), n_bands) with the lowest bands in ascending order.
    """
    if lattice_constant <= 0:
        raise ValueError("lattice_constant must be positive")
    if n_bands < 1 or n_cell_grid < 2:
        raise ValueError("need n_bands >= 1 and n_cell_grid >= 2")
    a = float(lattice_constant)
    n = int(n_cell_grid)
    hbar = cell_spec.hbar
    x = np.arange(n) * (a / n)
    p = 2.0 * np.pi * hbar * np.fft.fftfreq(n, d=a / n)
    u = np.asarray(cell_spec.potential(0.0, x), dtype=float)
    fw = np.fft.fft(np.eye(n, dtype=complex), axis=0)
    bands = np.empty((len(quasimomenta), n_bands))
    for i, k in enumerate(quasimomenta):
        kdiag = np.asarray(cell_spec.kinetic(0.0, p + hbar * k), dtype=float)
        h = np.fft.ifft(kdiag[:, None] * fw, axis=0)
        h[np.arange(n), np.arange(n)] += u
        energies = np.linalg.eigvalsh(h)
        bands[i, :] = energies[:n_bands]
    return bands


def spectrum_via_propagation(psi0, spec: HamiltonianSpec, duration: float,
                             dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Spectral density from the autocorrelation of a split-operator propagation.

    Records a(t) = <psi(0)|psi(t)> on t_m = m dt over [0, T) and returns
    (energies, |inverse transform of a|).  Peaks sit at the eigenvalues
    present in psi0 with weights proportional to |c_n|^2, broadened to sinc
    lobes of width 2 pi hbar / T by the finite window.
    """
    from .tdse import split_op_step  # local import: tdse depends on this module

    n_steps = int(round(duration / dt))
    if n_steps < 2 or abs(n_steps * dt - duration) > 1e-9 * max(1.0, abs(duration)):
        raise ValueError("duration must be a positive integer multiple of dt")
    if n_steps % 2 != 0:
        raise ValueError("duration/dt must be even so the energy grid is centered")
    grid = psi0.grid
    hbar = spec.hbar
    auto = np.empty(n_steps, dtype=complex)
    psi = psi0
    ref = np.conj(psi0.values)
    for m in range(n_steps):
        auto[m] = np.sum(ref * psi.values) * grid.dx
        psi = split_op_step(psi, m * dt, dt, spec)
    total = n_steps * dt
    k = np.arange(n_steps)
    energies = (k - n_steps // 2) * (2.0 * np.pi * hbar / total)
    signs = 1.0 - 2.0 * (k % 2)
    density = np.abs(n_steps * np.fft.ifft(signs * auto)) * dt / np.sqrt(2.0 * np.pi * hbar)
    return energies, density


def find_spectral_peaks(energies: np.ndarray, density: np.ndarray,
                        rel_threshold: float = 0.05) -> np.ndarray:
    """Locations of local maxima above ``rel_threshold`` of the global maximum."""
    d = np.asarray(density)
    floor = rel_threshold * d.max()
    interior = np.arange(1, len(d) - 1)
    mask = (d[interior] > d[interior - 1]) & (d[interior] >= d[interior + 1]) \
        & (d[interior] > floor)
    return np.asarray(energies)[interior[mask]]
