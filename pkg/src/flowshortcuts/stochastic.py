"""Overdamped stochastic shortcuts.

The equilibrium density ``exp(-beta U0)/Z`` of a driven potential defines a
flow field; the counterdiabatic potential ``U_CD`` satisfies
``-dU_CD/dq = gamma v``.  Dynamics are verified with an Euler-Maruyama
Langevin ensemble and, as a coarse oracle, an explicit flux-conservative
Fokker-Planck integrator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, EscapeWarning
from .flowfields import FlowFields
from .grid import (
    antiderivative_gauged,
    Grid,
    ScalarField,
    TimeMesh,
    cumulative_trapezoid,
    d_central4,
    d_spectral,
    invert_monotone,
    trapezoid,
)
from .models import DrivenPotential
from .quantum import ShortcutTerm

INIT_STREAM = 2**63 - 1
CHUNK = 1 << 16


@dataclass(frozen=True)
class BathSpec:
    """Friction ``gamma`` and temperature ``k_B T``; ``D = k_B T / gamma``."""

    gamma: float = 1.0
    temperature: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and self.temperature > 0):
            raise DomainError("gamma and temperature must be positive")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    @property
    def diffusion(self) -> float:
        return self.temperature / self.gamma


def _values(potential, grid: Grid | None):
    if isinstance(potential, ScalarField):
        return potential.grid, potential.values
    if grid is None:
        raise DomainError("a grid is required for array potentials")
    return grid, np.asarray(potential, dtype=float)


def equilibrium_density(potential, bath: BathSpec, grid: Grid | None = None) -> ScalarField:
    """Normalized Boltzmann density ``exp(-beta U)/Z`` on the grid.

    Raises
    ------
    DomainError
        If the density does not decay toward both grid edges.
    """
    g, u = _values(potential, grid)
    w = np.exp(-bath.beta * (u - u.min()))
    if max(w[0], w[-1]) > 1e-8:
        raise DomainError("equilibrium density not normalizable on the grid (edges not suppressed)")
    return ScalarField(g, w / trapezoid(w, g.spacing))


def stationarity_residual(rho: ScalarField, potential, bath: BathSpec,
                          gradient: np.ndarray | None = None) -> float:
    """Relative size of ``(1/gamma) d[(U') rho]/dq + D rho''``.

    Both terms are computed spectrally (they vanish at the edges); the
    result is normalized by the larger of the two term norms.  ``gradient``
    may supply an analytic ``U'`` on the grid.
    """
    g, u = _values(potential, rho.grid)
    k = g.wavenumbers
    du = d_central4(u, g.spacing) if gradient is None else np.asarray(gradient, dtype=float)
    drift = d_spectral(du * rho.values, k) / bath.gamma
    diff = bath.diffusion * d_spectral(rho.values, k, order=2)
    scale = max(np.linalg.norm(drift), np.linalg.norm(diff))
    return float(np.linalg.norm(drift + diff) / scale) if scale > 0 else 0.0


def equilibrium_track(driven: DrivenPotential, bath: BathSpec, grid: Grid, mesh: TimeMesh):
    """Density track of ``rho_eq(q, t)`` over the mesh."""
    from .flowfields import DensityTrack

    rho = np.stack([equilibrium_density(driven.on_grid(grid, t), bath).values for t in mesh.times])
    return DensityTrack(grid, mesh, rho, "stochastic_equilibrium")


def build_ucd(flow: FlowFields, bath: BathSpec) -> ShortcutTerm:
    """Counterdiabatic potential ``U_CD = -gamma int v dq``, zero at the median."""
    u = -bath.gamma * antiderivative_gauged(flow.v, flow.grid.points, flow.median)
    u[0] = 0.0
    u[-1] = 0.0
    return ShortcutTerm("stochastic_cd_potential", flow.grid, flow.mesh, u,
                        "zero at the median; probability current set to zero")


def esc_stiffness(kappa0, kappa0_dot, gamma: float):
    """Total stiffness ``kappa0 + gamma kappa0_dot / (2 kappa0)`` of the harmonic shortcut."""
    kappa0 = np.asarray(kappa0, dtype=float)
    return kappa0 + gamma * np.asarray(kappa0_dot, dtype=float) / (2 * kappa0)


def harmonic_ucd(q, sigma, sigma_dot, gamma: float):
    """``(gamma sigma_dot / 2 sigma) q^2 / 2`` for a Gaussian of precision ``2 sigma``."""
    return gamma * sigma_dot / (2 * sigma) * np.asarray(q, dtype=float) ** 2 / 2


def swift_equilibration_check(sigma, sigma_dot, kappa, bath: BathSpec) -> np.ndarray:
    """Residual of ``sigma_dot/sigma = 2 kappa/gamma - 4 k_B T sigma/gamma``.

    ``sigma`` is half the inverse variance of the Gaussian density and
    ``kappa`` the total stiffness that is applied.
    """
    sigma = np.asarray(sigma, dtype=float)
    return (np.asarray(sigma_dot, dtype=float) / sigma
            - (2 * np.asarray(kappa, dtype=float) / bath.gamma
               - 4 * bath.temperature * sigma / bath.gamma))


# ---------------------------------------------------------------------------
# Langevin ensemble


def _uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Uniforms in (0, 1] at positions ``start .. start+count`` of a Philox stream.

    Counter block ``c`` holds outputs ``4c .. 4c+3``, so any chunking of a
    stream yields the same numbers.
    """
    block, offset = divmod(start, 4)
    bg = np.random.Philox(key=np.array([seed, stream], dtype=np.uint64),
                          counter=np.array([block, 0, 0, 0], dtype=np.uint64))
    raw = bg.random_raw(offset + count)[offset:]
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def standard_normals(seed: int, stream: int, n: int, chunk: int = CHUNK) -> np.ndarray:
    """Box-Muller normals; particle ``i`` uses stream outputs ``2i`` and ``2i+1``."""
    out = np.empty(n)
    for i0 in range(0, n, chunk):
        m = min(chunk, n - i0)
        u = _uniforms(seed, stream, 2 * i0, 2 * m)
        out[i0:i0 + m] = np.sqrt(-2.0 * np.log(u[0::2])) * np.cos(2.0 * np.pi * u[1::2])
    return out


def sample_density(rho: ScalarField, n: int, seed: int) -> np.ndarray:
    """Inverse-CDF samples from a density (piecewise-linear CDF)."""
    cdf = cumulative_trapezoid(rho.values, rho.grid.spacing)
    cdf = cdf / cdf[-1]
    u = _uniforms(seed, INIT_STREAM, 0, n)
    u = np.minimum(u, 1.0)
    return invert_monotone(ScalarField(rho.grid, cdf), u)


def ks_distance(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Two-sided Kolmogorov-Smirnov statistic against an exact CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def grid_cdf(rho: ScalarField) -> Callable[[np.ndarray], np.ndarray]:
    """Piecewise-linear CDF of a density sampled on a grid."""
    cdf = cumulative_trapezoid(rho.values, rho.grid.spacing)
    cdf = cdf / cdf[-1]
    q = rho.grid.points
    return lambda x: np.interp(x, q, cdf)


@dataclass(frozen=True)
class EnsembleRecord:
    """Langevin ensemble diagnostics at output times.

    ``positions`` holds the full ensemble per output time when requested,
    otherwise only the final ensemble.
    """

    times: np.ndarray
    positions: list
    seed: int
    mean: np.ndarray
    variance: np.ndarray
    ks: np.ndarray
    escapes: int
    dt: float


def langevin_evolve(n_particles: int, driven: DrivenPotential, bath: BathSpec, dt: float,
                    seed: int, grid: Grid, *, ucd: ShortcutTerm | None = None,
                    t0: float = 0.0, t1: float | None = None, n_out: int = 50,
                    extra_times=(), reference_cdf: Callable | None = None,
                    keep_positions: bool = False, chunk: int = CHUNK) -> EnsembleRecord:
    """Euler-Maruyama ensemble ``q += -(dt/gamma) dU/dq + sqrt(2 D dt) xi``.

    Initial positions are drawn from the equilibrium density at ``t0``.
    Noise for step ``k`` comes from the Philox stream keyed by
    ``(seed, k)``, so the result does not depend on ``chunk``.  Particles
    leaving the grid are reflected and counted.

    Parameters
    ----------
    ucd : ShortcutTerm, optional
        Counterdiabatic potential; its gradient is interpolated linearly
        from fourth-order differences on the grid.
    reference_cdf : callable, optional
        ``reference_cdf(t)`` returns a CDF callable for the KS distance;
        defaults to the instantaneous equilibrium CDF.
    """
    t1 = driven.tau if t1 is None else t1
    if not dt > 0:
        raise DomainError("dt must be positive")
    q = grid.points
    rho0 = equilibrium_density(driven.on_grid(grid, t0), bath)
    x = sample_density(rho0, n_particles, seed)
    n_steps = max(1, int(round((t1 - t0) / dt)))
    h = (t1 - t0) / n_steps
    out = set(np.unique(np.rint(np.linspace(0, n_steps, min(n_out, n_steps + 1))).astype(int)).tolist())
    for te in extra_times:
        s = int(round((te - t0) / h))
        if 0 <= s <= n_steps:
            out.add(s)
    amp = np.sqrt(2 * bath.diffusion * h)
    if reference_cdf is None:
        def reference_cdf(t):
            return grid_cdf(equilibrium_density(driven.on_grid(grid, t), bath))
    times, pos, mean, var, ks = [], [], [], [], []
    escapes = 0

    def record(t):
        times.append(t)
        mean.append(float(x.mean()))
        var.append(float(x.var()))
        ks.append(ks_distance(x, reference_cdf(t)))
        if keep_positions:
            pos.append(x.copy())

    if 0 in out:
        record(t0)
    for s in range(n_steps):
        t = t0 + s * h
        force = driven.gradient(x, t)
        if ucd is not None and 0.0 < t < ucd.mesh.tau:
            force = force + np.interp(x, q, d_central4(ucd.at(t), grid.spacing))
        x = x - (h / bath.gamma) * force + amp * standard_normals(seed, s, n_particles, chunk)
        lo, hi = x < grid.q_min, x > grid.q_max
        if lo.any() or hi.any():
            escapes += int(lo.sum() + hi.sum())
            x = np.where(lo, 2 * grid.q_min - x, x)
            x = np.where(hi, 2 * grid.q_max - x, x)
        if s + 1 in out:
            record(t0 + (s + 1) * h)
    if escapes:
        warnings.warn(f"{escapes} particle steps crossed the grid boundary and were reflected",
                      EscapeWarning, stacklevel=2)
    if not keep_positions:
        pos = [x.copy()]
    return EnsembleRecord(np.array(times), pos, int(seed), np.array(mean), np.array(var),
                          np.array(ks), escapes, h)


def fokker_planck_evolve(rho0: ScalarField, driven: DrivenPotential, bath: BathSpec,
                         t0: float, t1: float, *, ucd: ShortcutTerm | None = None,
                         dt: float | None = None, n_out: int = 20):
    """Explicit flux-conservative Fokker-Planck integration (zero-flux walls).

    The flux between cells ``j`` and ``j+1`` is
    ``-(U'_{j+1/2}/gamma) (rho_j + rho_{j+1})/2 - D (rho_{j+1} - rho_j)/h``,
    so total probability is conserved to roundoff.

    Returns
    -------
    times : ndarray
    rho : ndarray, shape (n_out, n_points)
    """
    g = rho0.grid
    h = g.spacing
    qm = 0.5 * (g.points[1:] + g.points[:-1])
    D = bath.diffusion
    if dt is None:
        dt = 0.2 * h**2 / D
    n_steps = max(1, int(np.ceil(abs(t1 - t0) / dt)))
    step = (t1 - t0) / n_steps
    out = set(np.unique(np.rint(np.linspace(0, n_steps, n_out)).astype(int)).tolist())
    rho = rho0.values.copy()
    times, rows = [], []
    if 0 in out:
        times.append(t0)
        rows.append(rho.copy())
    for s in range(n_steps):
        t = t0 + (s + 0.5) * step
        du = driven.gradient(qm, t)
        if ucd is not None and 0.0 < t < ucd.mesh.tau:
            du = du + np.interp(qm, g.points, d_central4(ucd.at(t), h))
        flux = -(du / bath.gamma) * 0.5 * (rho[1:] + rho[:-1]) - D * (rho[1:] - rho[:-1]) / h
        div = np.zeros_like(rho)
        div[:-1] -= flux
        div[1:] += flux
        # boundary cells carry half weight in the trapezoid norm
        div[0] *= 2.0
        div[-1] *= 2.0
        rho = rho + step * div / h
        if s + 1 in out:
            times.append(t0 + (s + 1) * step)
            rows.append(rho.copy())
    return np.array(times), np.array(rows)
