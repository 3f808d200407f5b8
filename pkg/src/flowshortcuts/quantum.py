"""Quantum counterdiabatic term and fast-forward potential from flow fields.

The counterdiabatic Hamiltonian is the symmetrized product
``(p v + v p)/2 = -i hbar (v d/dq + v'/2)``; the fast-forward potential
satisfies ``-dU_FF/dq = m a``.  Both vanish outside ``(0, tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, GaugeConsistencyError, GridMismatchError, SingularityError
from .flowfields import DensityTrack, FlowFields
from .grid import Grid, TimeMesh, antiderivative_gauged, cumulative_trapezoid, d_spectral, time_derivative

TERM_KINDS = ("cd_momentum_coupling", "ff_potential", "stochastic_cd_potential")


@dataclass(frozen=True)
class ShortcutTerm:
    """Auxiliary term sampled on ``grid`` x ``mesh``.

    ``coefficient`` holds ``v`` for ``cd_momentum_coupling`` and the
    potential values otherwise.
    """

    kind: str
    grid: Grid
    mesh: TimeMesh
    coefficient: np.ndarray
    gauge_note: str = ""

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise DomainError(f"unknown shortcut kind {self.kind!r}")
        c = np.asarray(self.coefficient, dtype=float)
        if c.shape != (self.mesh.n_samples, self.grid.n_points):
            raise GridMismatchError("coefficient shape does not match grid and mesh")
        if not np.all(np.isfinite(c)):
            raise DomainError("shortcut coefficient has non-finite entries")
        object.__setattr__(self, "coefficient", c)

    @cached_property
    def _spline(self):
        return CubicSpline(self.mesh.times, self.coefficient, axis=0)

    def at(self, t: float) -> np.ndarray:
        """Coefficient at time ``t`` (cubic in time, zero outside ``(0, tau)``)."""
        if t <= 0.0 or t >= self.mesh.tau:
            return np.zeros(self.grid.n_points)
        return self._spline(t)


@dataclass(frozen=True)
class PhaseTrack:
    """Dynamical phase ``alpha(t)`` and companion function ``S(q, t)``."""

    times: np.ndarray
    alpha: np.ndarray
    S: np.ndarray
    S_minus: float
    S_plus: float
    hj_residual: float


def _check_core(flow: FlowFields):
    bad = flow.core & ~flow.valid
    if np.any(bad[1:-1]):
        k, j = np.argwhere(bad)[0]
        raise SingularityError(
            f"flow field invalid inside the probability core (t={flow.times[k]:.6g}, "
            f"q={flow.grid.points[j]:.6g})")


def build_cd_term(flow: FlowFields) -> ShortcutTerm:
    """Counterdiabatic coefficient ``v(q, t)`` of ``(p v + v p)/2``."""
    _check_core(flow)
    return ShortcutTerm("cd_momentum_coupling", flow.grid, flow.mesh, flow.v.copy(),
                        "no gauge freedom")


def apply_cd(v: np.ndarray, psi: np.ndarray, k: np.ndarray, hbar: float = 1.0) -> np.ndarray:
    """``-i hbar (v psi' + (v psi)')/2`` with spectral derivatives."""
    return -0.5j * hbar * (v * d_spectral(psi, k) + d_spectral(v * psi, k))


def _phi_array(states) -> np.ndarray:
    if isinstance(states, DensityTrack):
        if states.amplitude is None:
            raise DomainError("track has no amplitude")
        return states.amplitude
    return np.stack([s.phi.values for s in states])


def cd_residual(states, term: ShortcutTerm, hbar: float = 1.0) -> np.ndarray:
    """``||i hbar dphi/dt - H_CD phi|| / ||phi||`` at every time sample.

    ``states`` is a list of snapshots or a track carrying amplitudes.
    Small values certify that ``H_CD`` generates the motion of the
    eigenstate.
    """
    phi = _phi_array(states)
    if phi.shape != term.coefficient.shape:
        raise GridMismatchError("states and term sampled differently")
    h = term.grid.spacing
    k = term.grid.wavenumbers
    dphi = time_derivative(phi, term.mesh.dt, axis=0)
    v = term.coefficient
    kphi = 0.5 * (v * d_spectral(phi, k) + d_spectral(v * phi, k))
    # i hbar dphi - (-i hbar) K phi = i hbar (dphi + K phi)
    num = np.sqrt(np.sum((dphi + kphi) ** 2, axis=1) * h)
    den = np.sqrt(np.sum(phi**2, axis=1) * h)
    return hbar * num / den


def build_ff_potential(flow: FlowFields, mass: float = 1.0) -> ShortcutTerm:
    """Fast-forward potential ``U_FF = -m int a dq``, zero at the median.

    The additive function of time is fixed by ``U_FF(q_median(t), t) = 0``.
    """
    if flow.a is None:
        raise DomainError("acceleration missing; run acceleration_field first")
    _check_core(flow)
    u = -mass * antiderivative_gauged(flow.a, flow.grid.points, flow.median)
    u[0] = 0.0
    u[-1] = 0.0
    return ShortcutTerm("ff_potential", flow.grid, flow.mesh, u, "zero at the probability median")


def build_companion_S(flow: FlowFields, mass: float, uff: ShortcutTerm,
                      energies=None, hbar: float = 1.0, tol: float = 1e-3) -> PhaseTrack:
    """Companion function ``S`` with ``dS/dq = m v`` satisfying the
    Hamilton-Jacobi relation ``dS/dt + (dS/dq)^2/2m + U_FF = 0``.

    The time-dependent offset ``s(t)`` is obtained by enforcing the relation
    at the median and integrating in time.  ``energies`` (per time sample)
    give the dynamical phase ``alpha = -(1/hbar) int E dt``.

    Raises
    ------
    GaugeConsistencyError
        If the relation fails on the probability core by more than
        ``tol * max|U_FF|``.
    """
    g, mesh = flow.grid, flow.mesh
    q = g.points
    times = mesh.times
    # anchored at the median so the extrapolated tails add no offset
    s0 = mass * antiderivative_gauged(flow.v, q, flow.median)
    ds0 = time_derivative(s0, mesh.dt, axis=0)
    hj0 = ds0 + 0.5 * mass * flow.v**2 + uff.coefficient
    sdot = -np.array([np.interp(m, q, row) for m, row in zip(flow.median, hj0)])
    s = cumulative_trapezoid(sdot, mesh.dt)
    S = s0 + s[:, None]
    resid = hj0 + sdot[:, None]
    scale = np.max(np.abs(uff.coefficient))
    core = flow.core.copy()
    core[0] = core[-1] = False
    worst = float(np.max(np.abs(resid[core]))) if core.any() else 0.0
    if scale > 0 and worst > tol * scale:
        raise GaugeConsistencyError(
            f"Hamilton-Jacobi residual {worst:.3e} exceeds {tol:g} x max|U_FF| = {tol * scale:.3e}")
    if energies is None:
        alpha = np.zeros_like(times)
    else:
        alpha = -cumulative_trapezoid(np.asarray(energies, dtype=float), mesh.dt) / hbar
    return PhaseTrack(times.copy(), alpha, S, float(S[0].mean()), float(S[-1].mean()),
                      worst / scale if scale > 0 else 0.0)
