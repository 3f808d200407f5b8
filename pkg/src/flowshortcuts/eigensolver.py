"""Bound eigenstates of ``-(hbar^2/2m) d^2/dq^2 + U(q)`` on a uniform grid.

The default discretization is the sine discrete-variable representation
on the grid interior (Dirichlet at both end points), which converges
exponentially for smooth potentials.  A three-point finite-difference
Laplacian is available as ``scheme="fd3"``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .errors import ConsistencyError, DomainError, TrackingError, TruncationError
from .grid import Grid, ScalarField, TimeMesh, trapezoid
from .models import DrivenPotential, razavy_first_excited

TAIL_TOL = 1e-10
NODE_THRESHOLD = 1e-6


@dataclass(frozen=True)
class Snapshot:
    """Real normalized eigenstate ``phi`` with energy at protocol time ``t``."""

    t: float
    phi: ScalarField
    energy: float
    n: int

    def __post_init__(self):
        nrm = trapezoid(self.phi.values**2, self.phi.grid.spacing)
        if abs(nrm - 1.0) > 1e-8:
            raise ConsistencyError(f"snapshot not normalized: norm^2 = {nrm}")

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @property
    def density(self) -> np.ndarray:
        return self.phi.values**2


@lru_cache(maxsize=8)
def _dvr_kinetic(grid: Grid, mass: float, hbar: float) -> np.ndarray:
    m = grid.n_points - 1
    length = grid.q_max - grid.q_min
    i = np.arange(1, m)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    pref = hbar**2 / (2 * mass) * np.pi**2 / (2 * length**2)
    with np.errstate(divide="ignore"):
        t = pref * (-1.0) ** (ii - jj) * (
            1.0 / np.sin(np.pi * (ii - jj) / (2 * m)) ** 2
            - 1.0 / np.sin(np.pi * (ii + jj) / (2 * m)) ** 2
        )
    t[i - 1, i - 1] = pref * ((2 * m**2 + 1) / 3.0 - 1.0 / np.sin(np.pi * i / m) ** 2)
    t.setflags(write=False)
    return t


def hamiltonian_matrix(grid: Grid, potential: np.ndarray, mass: float = 1.0,
                       hbar: float = 1.0, scheme: str = "sinc") -> np.ndarray:
    """Dense Hamiltonian on the interior points (shape ``(N-2, N-2)``)."""
    u = np.asarray(potential, dtype=float)[1:-1]
    if scheme == "sinc":
        return _dvr_kinetic(grid, mass, hbar) + np.diag(u)
    if scheme == "fd3":
        c = hbar**2 / (2 * mass * grid.spacing**2)
        return np.diag(2 * c + u) + np.diag(-c * np.ones(u.size - 1), 1) + np.diag(-c * np.ones(u.size - 1), -1)
    raise DomainError(f"unknown eigensolver scheme {scheme!r}")


def count_nodes(phi: np.ndarray, threshold: float = NODE_THRESHOLD) -> int:
    """Sign changes among samples with ``|phi| > threshold * max|phi|``."""
    big = phi[np.abs(phi) > threshold * np.max(np.abs(phi))]
    return int(np.count_nonzero(np.diff(np.sign(big)) != 0))


def _fix_sign(phi: np.ndarray) -> np.ndarray:
    first = np.flatnonzero(np.abs(phi) > NODE_THRESHOLD * np.max(np.abs(phi)))[0]
    return -phi if phi[first] < 0 else phi


def solve_stationary(grid: Grid, potential, mass: float = 1.0, hbar: float = 1.0,
                     n: int = 0, *, t: float = 0.0, scheme: str = "sinc") -> Snapshot:
    """The ``n``-th bound eigenpair with Dirichlet boundaries.

    Parameters
    ----------
    grid : Grid
    potential : ScalarField or array
        Potential sampled on ``grid``; must rise toward both edges.
    mass, hbar : float
    n : int
        Number of nodes of the requested state.
    t : float
        Protocol time stored on the snapshot.
    scheme : {"sinc", "fd3"}

    Returns
    -------
    Snapshot
        Normalized, with the first lobe from ``q_min`` positive.

    Raises
    ------
    DomainError
        Non-confining potential or bad ``n``.
    TruncationError
        Eigenstate not negligible at the grid edges.
    ConsistencyError
        Node count differs from ``n``.
    """
    u = potential.values if isinstance(potential, ScalarField) else np.asarray(potential, dtype=float)
    if u.shape != (grid.n_points,) or not np.all(np.isfinite(u)):
        raise DomainError("potential must be finite and sampled on the grid")
    if int(n) != n or n < 0 or n >= grid.n_points - 2:
        raise DomainError(f"invalid quantum number {n}")
    umin = u.min()
    if not (u[0] > umin and u[-1] > umin):
        raise DomainError("potential is not confining on the grid (minimum at an edge)")
    if scheme == "fd3":
        c = hbar**2 / (2 * mass * grid.spacing**2)
        w, vec = eigh_tridiagonal(2 * c + u[1:-1], -c * np.ones(grid.n_points - 3),
                                  select="i", select_range=(n, n))
    else:
        w, vec = eigh(hamiltonian_matrix(grid, u, mass, hbar, scheme), subset_by_index=[n, n])
    phi = np.zeros(grid.n_points)
    phi[1:-1] = vec[:, 0]
    phi /= np.sqrt(trapezoid(phi**2, grid.spacing))
    phi = _fix_sign(phi)
    peak = np.max(np.abs(phi))
    edge = max(np.max(np.abs(phi[1:4])), np.max(np.abs(phi[-4:-1])))
    if edge > TAIL_TOL * peak:
        raise TruncationError(
            f"eigenstate n={n} has edge magnitude {edge / peak:.2e} of peak; widen the grid")
    nodes = count_nodes(phi)
    if nodes != n:
        raise ConsistencyError(f"requested n={n} but eigenvector has {nodes} nodes")
    return Snapshot(t=float(t), phi=ScalarField(grid, phi), energy=float(w[0]), n=int(n))


def residual_norm(snap: Snapshot, potential, mass: float = 1.0, hbar: float = 1.0,
                  scheme: str = "sinc") -> float:
    """``||H phi - E phi|| / ||phi||`` for the discretized operator."""
    u = potential.values if isinstance(potential, ScalarField) else np.asarray(potential)
    h = hamiltonian_matrix(snap.grid, u, mass, hbar, scheme)
    x = snap.phi.values[1:-1]
    return float(np.linalg.norm(h @ x - snap.energy * x) / np.linalg.norm(x))


def eigenstate_track(grid: Grid, driven: DrivenPotential, mesh: TimeMesh, n: int = 0,
                     *, source: str = "numeric", scheme: str = "sinc",
                     min_overlap: float = 0.5) -> list[Snapshot]:
    """Eigenstates at every sample of ``mesh`` with a continuous sign convention.

    Parameters
    ----------
    source : {"numeric", "analytic"}
        ``analytic`` is available for the Razavy family with ``n = 1``.
    min_overlap : float
        Consecutive states must overlap by at least this much in absolute
        value; otherwise the mesh is too coarse (or levels cross).

    Raises
    ------
    TrackingError
        If consecutive overlaps are too small.
    """
    times = mesh.times
    if source == "analytic":
        if driven.potential.kind != "razavy" or n != 1:
            raise DomainError("analytic source only covers the Razavy n=1 state")
        snaps = [razavy_first_excited(grid, driven.params_at(t)["xi"], t=t) for t in times]
    elif source == "numeric":
        snaps = [solve_stationary(grid, driven.evaluate(grid.points, t), driven.mass,
                                  driven.hbar, n, t=t, scheme=scheme) for t in times]
    else:
        raise DomainError(f"unknown eigenstate source {source!r}")
    out = [snaps[0]]
    h = grid.spacing
    for k in range(1, len(snaps)):
        prev, cur = out[-1].phi.values, snaps[k].phi.values
        ov = trapezoid(prev * cur, h)
        if abs(ov) < min_overlap:
            raise TrackingError(
                f"overlap {ov:.3f} between t={times[k - 1]:.6g} and t={times[k]:.6g}; "
                "refine the time mesh")
        if ov < 0:
            snaps[k] = Snapshot(snaps[k].t, ScalarField(grid, -cur), snaps[k].energy, n)
        out.append(snaps[k])
    return out


def stack_track(snaps: list[Snapshot]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(times, phi[n_times, n_points], energies)`` from a snapshot list."""
    return (np.array([s.t for s in snaps]),
            np.stack([s.phi.values for s in snaps]),
            np.array([s.energy for s in snaps]))
