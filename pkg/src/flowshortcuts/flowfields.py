"""Velocity and acceleration flow fields of a time-indexed density.

Given densities ``rho(q, t)`` sampled on a grid and a time mesh, the
integrated distribution ``I = int^q rho`` defines a family of equal-measure
dividers.  Their velocity is ``v = -dI/dt / rho`` and their acceleration is
``a = v' v + dv/dt``.  Time derivatives are taken parametrically between
snapshots, never by dynamical evolution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DomainError,
    GridMismatchError,
    NumericalResolutionError,
    SingularityWarning,
    TopologyError,
)
from .grid import (
    Grid,
    ScalarField,
    TimeMesh,
    antiderivative,
    cumulative_trapezoid,
    d_central4,
    d_spectral,
    invert_monotone,
    time_derivative,
    trapezoid,
)

TRACK_KINDS = ("quantum_eigenstate", "classical_shell", "stochastic_equilibrium")
DEFAULT_FLOOR = 1e-10
DEFAULT_VMAX = 1e3
CORE_TAIL = 1e-6
FLUX_TOL = 1e-6


@dataclass(frozen=True)
class DensityTrack:
    """Densities ``rho[k, j]`` at ``mesh.times[k]`` and ``grid.points[j]``.

    ``amplitude`` optionally holds the signed real wavefunction whose square
    is ``rho``; it is needed to locate nodes.
    """

    grid: Grid
    mesh: TimeMesh
    rho: np.ndarray
    kind: str = "quantum_eigenstate"
    amplitude: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in TRACK_KINDS:
            raise DomainError(f"unknown track kind {self.kind!r}")
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (self.mesh.n_samples, self.grid.n_points):
            raise GridMismatchError(
                f"rho has shape {rho.shape}, expected {(self.mesh.n_samples, self.grid.n_points)}")
        if not np.all(np.isfinite(rho)):
            raise DomainError("density contains non-finite values")
        if np.any(rho < 0):
            raise DomainError("density has negative entries")
        if self.kind != "classical_shell":
            norms = trapezoid(rho, self.grid.spacing)
            if np.max(np.abs(norms - 1.0)) > 1e-8:
                raise DomainError(f"density not normalized (max error {np.max(np.abs(norms - 1)):.2e})")
        object.__setattr__(self, "rho", rho)
        if self.amplitude is not None:
            amp = np.asarray(self.amplitude, dtype=float)
            if amp.shape != rho.shape:
                raise GridMismatchError("amplitude shape differs from rho")
            object.__setattr__(self, "amplitude", amp)

    @classmethod
    def from_snapshots(cls, snaps, mesh: TimeMesh) -> "DensityTrack":
        phi = np.stack([s.phi.values for s in snaps])
        return cls(snaps[0].grid, mesh, phi**2, "quantum_eigenstate", phi)

    @property
    def times(self) -> np.ndarray:
        return self.mesh.times

    def field(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.rho[k])


def _integrate(rho: np.ndarray, grid: Grid, scheme: str) -> np.ndarray:
    if scheme == "spectral":
        return antiderivative(rho, grid.spacing, grid.wavenumbers)
    if scheme == "trapezoid":
        return cumulative_trapezoid(rho, grid.spacing)
    raise DomainError(f"unknown quadrature scheme {scheme!r}")


def integrated_distribution(track: DensityTrack, scheme: str = "trapezoid") -> list[ScalarField]:
    """``I(q, t) = int_{q_min}^q rho`` for every time sample.

    The trapezoid rule keeps ``I`` exactly non-decreasing; ``spectral`` is
    more accurate for smooth densities that vanish at the edges.
    """
    vals = _integrate(track.rho, track.grid, scheme)
    return [ScalarField(track.grid, row) for row in vals]


def _fill_invalid(values: np.ndarray, valid: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = values.copy()
    for k in range(values.shape[0]):
        m = valid[k]
        if m.all():
            continue
        if not m.any():
            out[k] = 0.0
            continue
        out[k] = np.interp(q, q[m], values[k, m])
    return out


@dataclass(frozen=True)
class FlowFields:
    """Flow fields sampled on ``grid`` x ``mesh``.

    Attributes
    ----------
    v, a : ndarray, shape (n_times, n_points)
        Velocity and acceleration; ``a`` is ``None`` until
        :func:`acceleration_field` is applied.  Outside ``valid`` the
        values are extrapolated from the nearest valid points.
    valid : ndarray of bool
        Density above the floor.
    core : ndarray of bool
        Points inside the central ``1 - 1e-6`` probability.
    median : ndarray
        Position of ``I = 1/2`` at each time.
    cap_events : int
        Number of samples where ``|v|`` was clipped to ``v_max``.
    """

    grid: Grid
    mesh: TimeMesh
    v: np.ndarray
    valid: np.ndarray
    core: np.ndarray
    median: np.ndarray
    a: np.ndarray | None = None
    cap_events: int = 0
    v_max: float = DEFAULT_VMAX
    kind: str = "quantum_eigenstate"
    notes: tuple = field(default=())

    @property
    def times(self) -> np.ndarray:
        return self.mesh.times

    @cached_property
    def _v_spline(self):
        return CubicSpline(self.times, self.v, axis=0)

    @cached_property
    def _a_spline(self):
        return CubicSpline(self.times, self.a, axis=0)

    def velocity_at(self, t: float) -> np.ndarray:
        """``v(q, t)`` by cubic interpolation in time; zero outside ``(0, tau)``."""
        if t <= 0.0 or t >= self.mesh.tau:
            return np.zeros(self.grid.n_points)
        return self._v_spline(t)

    def acceleration_at(self, t: float) -> np.ndarray:
        if self.a is None:
            raise DomainError("acceleration not computed; call acceleration_field first")
        if t <= 0.0 or t >= self.mesh.tau:
            return np.zeros(self.grid.n_points)
        return self._a_spline(t)

    def velocity_field(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.v[k])

    def acceleration_field(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.a[k])


def velocity_field(track: DensityTrack, floor: float = DEFAULT_FLOOR, v_max: float = DEFAULT_VMAX,
                   *, scheme: str = "spectral") -> FlowFields:
    """Velocity flow field ``v = -dI/dt / rho``.

    Parameters
    ----------
    track : DensityTrack
        At least 3 time samples.
    floor : float
        Relative density floor; points with ``rho <= floor * max(rho)`` are
        marked invalid.
    v_max : float
        Speed cap.  Clipped samples are counted in ``cap_events``.
    scheme : {"spectral", "trapezoid"}
        Quadrature for ``I``.  The spectral antiderivative is needed near
        nodes, where ``1/rho`` amplifies quadrature error.

    Raises
    ------
    NumericalResolutionError
        If the cap is hit inside the probability core where no probability
        flux passes (the mesh is too coarse).

    Warns
    -----
    SingularityWarning
        If the cap is hit where probability flux crosses a low-density
        point; the construction is then not applicable.
    """
    if not floor > 0:
        raise DomainError("floor must be positive")
    if track.mesh.n_samples < 5:
        raise DomainError("need at least 5 time samples")
    g = track.grid
    rho = track.rho
    I = _integrate(rho, g, scheme)
    # differencing I - I(t=0) keeps static tracks exactly flow-free
    dI = time_derivative(I - I[0], track.mesh.dt, axis=0)
    thresh = floor * rho.max(axis=1, keepdims=True)
    valid = rho > thresh
    v = np.where(valid, -dI / np.where(valid, rho, 1.0), 0.0)

    I_trap = cumulative_trapezoid(rho, g.spacing)
    total = I_trap[:, -1:]
    core = (I_trap >= 0.5 * CORE_TAIL * total) & (I_trap <= (1 - 0.5 * CORE_TAIL) * total)
    median = np.array([invert_monotone(ScalarField(g, row), 0.5 * row[-1]) for row in I_trap])

    capped = valid & (np.abs(v) > v_max)
    n_cap = int(np.count_nonzero(capped))
    notes = []
    if n_cap:
        flux_at_cap = np.abs(dI[capped])
        singular = flux_at_cap > FLUX_TOL
        in_core = core[capped]
        if np.any(singular):
            warnings.warn(
                f"{int(singular.sum())} velocity cap events at flux-carrying low-density points; "
                "the flow field is singular there", SingularityWarning, stacklevel=2)
            notes.append("singular")
        if np.any(~singular & in_core):
            raise NumericalResolutionError(
                f"{int(np.sum(~singular & in_core))} velocity cap events inside the probability "
                "core without probability flux; refine the grid or time mesh")
        v = np.clip(v, -v_max, v_max)

    v = _fill_invalid(v, valid, g.points)
    v[0] = 0.0
    v[-1] = 0.0
    return FlowFields(g, track.mesh, v, valid, core, median, None, n_cap, v_max, track.kind,
                      tuple(notes))


def acceleration_field(flow: FlowFields) -> FlowFields:
    """Fill ``a = v' v + dv/dt`` (spatial fourth-order differences)."""
    g = flow.grid
    v = flow.v
    a = d_central4(v, g.spacing) * v + time_derivative(v, flow.mesh.dt, axis=0)
    a = _fill_invalid(a, flow.valid, g.points)
    a[0] = 0.0
    a[-1] = 0.0
    return replace(flow, a=a)


def flow_fields(track: DensityTrack, floor: float = DEFAULT_FLOOR, v_max: float = DEFAULT_VMAX,
                *, scheme: str = "spectral") -> FlowFields:
    """Velocity and acceleration in one call."""
    return acceleration_field(velocity_field(track, floor, v_max, scheme=scheme))


def continuity_residual(track: DensityTrack, flow: FlowFields) -> float:
    """``max |d rho/dt + d(v rho)/dq| / max |d rho/dt|`` over valid points."""
    drho = time_derivative(track.rho, track.mesh.dt, axis=0)
    div = d_spectral(flow.v * track.rho, track.grid.wavenumbers)
    scale = np.max(np.abs(drho))
    if scale == 0:
        return float(np.max(np.abs(div[flow.valid])))
    return float(np.max(np.abs(drho + div)[flow.valid]) / scale)


@dataclass(frozen=True)
class NodeFluxReport:
    """Node positions, velocities and probability fluxes over a track.

    ``probabilities[k, i]`` is the probability between node ``i-1`` and
    node ``i`` (grid edges at either end).
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    flux: np.ndarray
    probabilities: np.ndarray
    verdict: str

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[1]

    @property
    def max_flux(self) -> float:
        return float(np.max(np.abs(self.flux))) if self.flux.size else 0.0


def locate_nodes(phi: np.ndarray, q: np.ndarray, threshold: float = 1e-6) -> np.ndarray:
    """Interior zeros of ``phi`` by sign change among non-negligible samples."""
    idx = np.flatnonzero(np.abs(phi) > threshold * np.max(np.abs(phi)))
    s = np.sign(phi[idx])
    roots = []
    for m in np.flatnonzero(s[1:] != s[:-1]):
        lo, hi = idx[m], idx[m + 1]
        seg = phi[lo:hi + 1]
        j = lo + int(np.flatnonzero(np.sign(seg[1:]) != np.sign(seg[:-1]))[0]) if hi > lo + 1 else lo
        if phi[j + 1] == 0:
            roots.append(q[j + 1])
            continue
        f0, f1 = phi[j], phi[j + 1]
        roots.append(q[j] + f0 / (f0 - f1) * (q[j + 1] - q[j]))
    return np.array(roots)


def node_flux_report(track: DensityTrack, flow: FlowFields | None = None,
                     tol: float = FLUX_TOL, *, scheme: str = "spectral") -> NodeFluxReport:
    """Probability flux across the nodes of an eigenstate track.

    ``Phi = -d/dt I(q_node(t), t)`` along each moving node.  The verdict
    is ``no_flux_ok`` when every ``|Phi| <= tol`` and the probability
    between consecutive nodes is constant to ``tol``.

    Raises
    ------
    TopologyError
        If the number of nodes changes along the track.
    """
    if track.kind != "quantum_eigenstate" or track.amplitude is None:
        raise DomainError("node flux needs a quantum_eigenstate track with its amplitude")
    g = track.grid
    q = g.points
    roots = [locate_nodes(row, q) for row in track.amplitude]
    counts = {len(r) for r in roots}
    if len(counts) != 1:
        raise TopologyError(f"node count changes along the track: {sorted(counts)}")
    nn = counts.pop()
    nt = track.mesh.n_samples
    pos = np.array(roots).reshape(nt, nn)
    I = _integrate(track.rho, g, scheme)
    at_nodes = np.array([np.interp(pos[k], q, I[k]) for k in range(nt)]).reshape(nt, nn)
    edges = np.concatenate([np.zeros((nt, 1)), at_nodes, I[:, -1:]], axis=1)
    probs = np.diff(edges, axis=1)
    if nn:
        vel = time_derivative(pos, track.mesh.dt, axis=0)
        flux = -time_derivative(at_nodes, track.mesh.dt, axis=0)
    else:
        vel = flux = np.zeros((nt, 0))
    ok = (flux.size == 0 or np.max(np.abs(flux)) <= tol) and np.max(np.abs(probs - probs[0])) <= tol
    return NodeFluxReport(track.times.copy(), pos, vel, flux, probs,
                          "no_flux_ok" if ok else "flux_detected")
