"""Symplectic propagation of classical phase-space ensembles.

A Liouville density is represented as a weighted set of trajectories; each
Verlet step is the kick-drift-kick map

    p1 = p - U'(x) dt/2,   x1 = x + K'(p1) dt,   p2 = p1 - U'(x1) dt/2,

which is second-order, time-reversible and area-preserving.  Weights ride
along unchanged.  Explicitly time-dependent forces are handled by a
fictitious coordinate/momentum pair advancing at unit rate; since both
components of the pair grow identically, the ensemble carries them as a
single clock ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class ClassicalSpec:
    """Derivatives of a separable Hamiltonian H = K(p) + U(x).

    ``dk_dp(p, s_p)`` is the velocity, ``du_dx(x, s_x)`` the potential
    gradient (the force is its negative).  Autonomous systems simply ignore
    the second argument.
    """

    dk_dp: Callable[[np.ndarray, float], np.ndarray]
    du_dx: Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ClassicalEnsemble:
    """Weighted phase-space points (x_c, p_c, w_c) plus the fictitious clock s."""

    x: np.ndarray
    p: np.ndarray
    weights: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))
        object.__setattr__(self, "weights",
                           np.atleast_1d(np.asarray(self.weights, dtype=float)))
        if not (self.x.shape == self.p.shape == self.weights.shape):
            raise ValueError("x, p and weights must have equal lengths")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        total = self.weights.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total!r}")


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def extend_time_dependent(dk_dp_t: Callable, du_dx_t: Callable) -> ClassicalSpec:
    """Autonomize dx/dt = K'(p, t), dp/dt = -U'(x, t).

    The returned spec reads the fictitious pair (s_x, s_p) instead of wall
    time; both advance at unit rate from s = 0, so after integrating for a
    time T the ensemble clock equals T.  For callables that ignore their
    second argument the (x, p) dynamics is unchanged.
    """
    return ClassicalSpec(dk_dp=lambda p, s_p: dk_dp_t(p, s_p),
                         du_dx=lambda x, s_x: du_dx_t(x, s_x))


def verlet_step(ensemble: ClassicalEnsemble, dt: float,
                spec: ClassicalSpec) -> ClassicalEnsemble:
    """One kick-drift-kick step; weights are never mutated.

    Forces are evaluated at clock values s, the drift velocity at s + dt/2,
    and the closing kick at s + dt, matching the unit-rate flow of the
    fictitious pair.
    """
    if dt == 0:
        raise ValueError("dt must be nonzero")
    s = ensemble.s
    p1 = ensemble.p - np.asarray(spec.du_dx(ensemble.x, s)) * (dt / 2.0)
    x1 = ensemble.x + np.asarray(spec.dk_dp(p1, s + dt / 2.0)) * dt
    p2 = p1 - np.asarray(spec.du_dx(x1, s + dt)) * (dt / 2.0)
    return replace(ensemble, x=x1, p=p2, s=s + dt)


def multi_dim_verlet_step(x: np.ndarray, p: np.ndarray, dt: float,
                          grad_u: Callable, grad_k: Callable
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise Verlet for vector coordinates and momenta."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if x.shape != p.shape:
        raise ValueError(f"coordinate shape {x.shape} != momentum shape {p.shape}")
    p1 = p - np.asarray(grad_u(x)) * (dt / 2.0)
    x1 = x + np.asarray(grad_k(p1)) * dt
    p2 = p1 - np.asarray(grad_u(x1)) * (dt / 2.0)
    return x1, p2


def propagate_ensemble(ensemble: ClassicalEnsemble, dt: float, n_steps: int,
                       spec: ClassicalSpec, stride: int = 1
                       ) -> list[ClassicalEnsemble]:
    """Verlet trajectory of an ensemble, sampled every ``stride`` steps (incl. start)."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    snapshots = [ensemble]
    for m in range(n_steps):
        ensemble = verlet_step(ensemble, dt, spec)
        if (m + 1) % stride == 0 or m == n_steps - 1:
            snapshots.append(ensemble)
    return snapshots


@dataclass(frozen=True)
class EhrenfestSeries:
    """Weighted first moments along a trajectory of ensembles."""

    times: np.ndarray
    x_mean: np.ndarray
    p_mean: np.ndarray
    force_mean: np.ndarray


def ehrenfest_series(snapshots: Sequence[ClassicalEnsemble],
                     spec: ClassicalSpec) -> EhrenfestSeries:
    """<x>, <p> and <-U'(x)> per snapshot, using the ensemble clock as time."""
    if len(snapshots) == 0:
        raise ValueError("need at least one snapshot")
    times = np.array([e.s for e in snapshots])
    x_mean = np.array([np.sum(e.weights * e.x) for e in snapshots])
    p_mean = np.array([np.sum(e.weights * e.p) for e in snapshots])
    force = np.array([-np.sum(e.weights * np.asarray(spec.du_dx(e.x, e.s)))
                      for e in snapshots])
    return EhrenfestSeries(times=times, x_mean=x_mean, p_mean=p_mean,
                           force_mean=force)
