"""Time-dependent Schrodinger propagation on a uniform grid.

``split_step_evolve`` handles potential-only Hamiltonians with a Strang
splitting (kinetic step in Fourier space).  ``crank_nicolson_evolve``
handles the non-local counterdiabatic coupling with a banded implicit
midpoint step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import BoundaryError, GridMismatchError, SingularOperatorError, StepSizeError
from .grid import ComplexField, Grid, trapezoid

NORM_DRIFT_TOL = 1e-6
EDGE_TOL = 1e-6
EDGE_POINTS = 4


@dataclass(frozen=True)
class EvolutionRecord:
    """Stored output of a propagation.

    Attributes
    ----------
    times : ndarray
    psi : ndarray, shape (n_out, n_points)
    fidelity : ndarray
        ``|<phi(t)|psi(t)>|^2`` against the reference (NaN without one).
    overlap : ndarray of complex
        ``<phi(t)|psi(t)>``.
    norm : ndarray
    alpha : ndarray
        Dynamical phase ``-(1/hbar) int E dt`` (zero without energies).
    """

    grid: Grid
    times: np.ndarray
    psi: np.ndarray
    fidelity: np.ndarray
    overlap: np.ndarray
    norm: np.ndarray
    alpha: np.ndarray
    dt: float
    scheme: str

    @property
    def final(self) -> ComplexField:
        return ComplexField(self.grid, self.psi[-1])

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2


def fidelity(psi: ComplexField, phi) -> float:
    """``|<phi|psi>|^2`` by the trapezoid rule.

    ``phi`` may be a snapshot, a field or an array on the same grid.
    """
    vals = getattr(phi, "phi", phi)
    if hasattr(vals, "grid"):
        if vals.grid != psi.grid:
            raise GridMismatchError("fidelity of fields on different grids")
        vals = vals.values
    vals = np.asarray(vals)
    if vals.shape != psi.values.shape:
        raise GridMismatchError("fidelity of fields on different grids")
    return float(abs(trapezoid(np.conj(vals) * psi.values, psi.grid.spacing)) ** 2)


def _output_steps(n_steps: int, n_out: int, t0: float, dt: float, extra) -> np.ndarray:
    steps = set(np.unique(np.rint(np.linspace(0, n_steps, min(n_out, n_steps + 1))).astype(int)))
    for t in extra:
        s = int(round((t - t0) / dt))
        if 0 <= s <= n_steps:
            steps.add(s)
    return np.array(sorted(steps))


class _Recorder:
    def __init__(self, grid, reference, energy, hbar, n_rec):
        self.grid, self.reference, self.energy, self.hbar = grid, reference, energy, hbar
        self.h = grid.spacing
        self.times, self.psi, self.ov, self.norm, self.alpha = [], [], [], [], []

    def record(self, t, psi, alpha):
        nrm = float(np.sqrt(np.sum(np.abs(psi) ** 2) * self.h))
        if abs(nrm - 1.0) > NORM_DRIFT_TOL:
            raise StepSizeError(f"norm drifted to {nrm:.9f} at t={t:.6g}; reduce dt")
        peak = np.max(np.abs(psi))
        edge = max(np.max(np.abs(psi[:EDGE_POINTS])), np.max(np.abs(psi[-EDGE_POINTS:])))
        if edge > EDGE_TOL * peak:
            raise BoundaryError(f"wavefunction reached the grid edge at t={t:.6g} "
                                f"(edge/peak = {edge / peak:.2e}); widen the grid")
        self.times.append(t)
        self.psi.append(psi.copy())
        self.norm.append(nrm)
        self.alpha.append(alpha)
        if self.reference is not None:
            phi = np.asarray(self.reference(t))
            self.ov.append(complex(np.sum(np.conj(phi) * psi) * self.h))
        else:
            self.ov.append(np.nan)

    def finish(self, dt, scheme):
        ov = np.array(self.ov, dtype=complex)
        return EvolutionRecord(self.grid, np.array(self.times), np.array(self.psi), np.abs(ov) ** 2,
                               ov, np.array(self.norm), np.array(self.alpha), dt, scheme)


def _prepare(psi0, t0, t1, dt):
    if not dt > 0:
        raise StepSizeError("dt must be positive")
    n_steps = max(1, int(round(abs(t1 - t0) / dt)))
    step = (t1 - t0) / n_steps
    return np.array(psi0.values, dtype=complex), n_steps, step


def split_step_evolve(psi0: ComplexField, potential: Callable[[float], np.ndarray],
                      mass: float = 1.0, hbar: float = 1.0, dt: float = 2e-5,
                      t0: float = 0.0, t1: float = 1.0, *,
                      reference: Callable[[float], np.ndarray] | None = None,
                      energy: Callable[[float], float] | None = None,
                      n_out: int = 200, extra_times=()) -> EvolutionRecord:
    """Strang split-step propagation from ``t0`` to ``t1``.

    Each step applies ``exp(-i V(t_k) dt/2hbar)``, the kinetic propagator
    in momentum space, then ``exp(-i V(t_{k+1}) dt/2hbar)``, so the scheme
    is exactly time-reversible.  ``t1 < t0`` propagates backward.

    Parameters
    ----------
    psi0 : ComplexField
    potential : callable
        ``potential(t)`` returns the full potential on the grid.
    reference : callable, optional
        ``reference(t)`` returns the state against which fidelity is measured.
    energy : callable, optional
        ``energy(t)``; accumulates the dynamical phase.
    n_out : int
        Approximate number of stored outputs (plus ``extra_times``).

    Raises
    ------
    StepSizeError
        On norm drift beyond 1e-6.
    BoundaryError
        If the wavefunction reaches the grid edges.
    """
    g = psi0.grid
    psi, n_steps, step = _prepare(psi0, t0, t1, dt)
    kin = np.exp(-1j * hbar * g.wavenumbers**2 / (2 * mass) * step)
    out = set(_output_steps(n_steps, n_out, t0, step, extra_times).tolist())
    rec = _Recorder(g, reference, energy, hbar, len(out))
    alpha = 0.0
    e_prev = energy(t0) if energy else 0.0
    half = -0.5j * step / hbar
    v_prev = np.asarray(potential(t0), dtype=float)
    if 0 in out:
        rec.record(t0, psi, alpha)
    for s in range(n_steps):
        t_next = t0 + (s + 1) * step
        v_next = np.asarray(potential(t_next), dtype=float)
        psi *= np.exp(half * v_prev)
        psi = np.fft.ifft(kin * np.fft.fft(psi))
        psi *= np.exp(half * v_next)
        v_prev = v_next
        if energy:
            e_next = energy(t_next)
            alpha -= 0.5 * (e_prev + e_next) * step / hbar
            e_prev = e_next
        if s + 1 in out:
            rec.record(t_next, psi, alpha)
    return rec.finish(step, "split_step")


def cd_banded_hamiltonian(grid: Grid, u: np.ndarray, v: np.ndarray | None,
                          mass: float = 1.0, hbar: float = 1.0):
    """Diagonal and off-diagonals of the tridiagonal ``H0 + H_CD``.

    The kinetic term is the three-point Laplacian; ``H_CD`` uses
    ``A[j, j+1] = -A[j+1, j] = (v_j + v_{j+1})/(4h)`` times ``-i hbar``,
    which is Hermitian for any real ``v``.

    Returns
    -------
    diag, upper, lower : ndarray
        ``upper[j] = H[j, j+1]`` and ``lower[j] = H[j+1, j]``.
    """
    h = grid.spacing
    c = hbar**2 / (2 * mass * h**2)
    diag = 2 * c + np.asarray(u, dtype=float)
    off = -c * np.ones(grid.n_points - 1)
    if v is None:
        return diag.astype(complex), off.astype(complex), off.astype(complex)
    w = (v[1:] + v[:-1]) / (4 * h)
    return diag.astype(complex), off - 1j * hbar * w, off + 1j * hbar * w


def crank_nicolson_evolve(psi0: ComplexField, potential: Callable[[float], np.ndarray],
                          mass: float = 1.0, hbar: float = 1.0, dt: float = 2e-5,
                          t0: float = 0.0, t1: float = 1.0, *,
                          cd_velocity: Callable[[float], np.ndarray] | None = None,
                          reference: Callable[[float], np.ndarray] | None = None,
                          energy: Callable[[float], float] | None = None,
                          n_out: int = 200, extra_times=()) -> EvolutionRecord:
    """Implicit midpoint propagation ``(1 + i dt H/2hbar) psi' = (1 - i dt H/2hbar) psi``.

    ``H`` is evaluated at the step midpoint and includes the
    counterdiabatic coupling when ``cd_velocity(t)`` is supplied.

    Raises
    ------
    SingularOperatorError
        If a banded solve fails.
    """
    g = psi0.grid
    psi, n_steps, step = _prepare(psi0, t0, t1, dt)
    out = set(_output_steps(n_steps, n_out, t0, step, extra_times).tolist())
    rec = _Recorder(g, reference, energy, hbar, len(out))
    alpha = 0.0
    e_prev = energy(t0) if energy else 0.0
    z = 0.5j * step / hbar
    ab = np.zeros((3, g.n_points), dtype=complex)
    if 0 in out:
        rec.record(t0, psi, alpha)
    for s in range(n_steps):
        tm = t0 + (s + 0.5) * step
        v = None if cd_velocity is None else np.asarray(cd_velocity(tm), dtype=float)
        d, up, lo = cd_banded_hamiltonian(g, potential(tm), v, mass, hbar)
        ab[0, 1:] = z * up
        ab[1] = 1 + z * d
        ab[2, :-1] = z * lo
        rhs = (1 - z * d) * psi
        rhs[:-1] -= z * up * psi[1:]
        rhs[1:] -= z * lo * psi[:-1]
        try:
            psi = solve_banded((1, 1), ab, rhs, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularOperatorError(f"banded solve failed at t={tm:.6g}: {exc}") from exc
        if not np.all(np.isfinite(psi)):
            raise SingularOperatorError(f"non-finite solution at t={tm:.6g}")
        t_next = t0 + (s + 1) * step
        if energy:
            e_next = energy(t_next)
            alpha -= 0.5 * (e_prev + e_next) * step / hbar
            e_prev = e_next
        if s + 1 in out:
            rec.record(t_next, psi, alpha)
    return rec.finish(step, "crank_nicolson")
