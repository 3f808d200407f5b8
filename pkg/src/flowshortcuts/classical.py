"""Classical shortcuts built from energy shells of a single-well potential.

A shell is parameterized by the angle-like map ``q = c + w sin(theta)``
with ``c, w`` the centre and half-width between the turning points.  In
``theta`` the integrands ``pbar dq`` and ``dq / pbar`` are smooth, so
Gauss-Legendre quadrature and Chebyshev interpolation converge
spectrally despite the inverse-square-root behaviour at turning points.

Flow fields follow a Lagrangian picket fence: dividers with fixed
enclosed-volume fractions are located on every shell of a time track
and differentiated in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import DomainError, EscapeError, TopologyError
from .flowfields import FlowFields
from .grid import Grid, TimeMesh, antiderivative_gauged, time_derivative
from .models import DrivenPotential, PotentialSpec
from .quantum import ShortcutTerm

N_GAUSS = 96
CHEB_DEG = 128
N_FENCE = 96
FIT_DEG = 48
N_PROBE = 4001
_GX, _GW = np.polynomial.legendre.leggauss(N_GAUSS)
_THETA = 0.5 * np.pi * _GX
_TW = 0.5 * np.pi * _GW


class ThetaSeries:
    """Chebyshev series in ``theta`` on ``[-pi/2, pi/2]`` with vectorized evaluation."""

    def __init__(self, coef):
        self.coef = np.asarray(coef, dtype=float)
        self._k = np.arange(self.coef.size)

    @classmethod
    def interpolate(cls, func, deg: int) -> "ThetaSeries":
        return cls(C.Chebyshev.interpolate(func, deg, domain=[-0.5 * np.pi, 0.5 * np.pi]).coef)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        y = np.clip(theta / (0.5 * np.pi), -1.0, 1.0)
        return np.cos(np.multiply.outer(np.arccos(y), self._k)) @ self.coef

    def integral(self) -> "ThetaSeries":
        """Antiderivative vanishing at ``theta = -pi/2``."""
        return ThetaSeries(C.chebint(self.coef, lbnd=-1.0, scl=0.5 * np.pi))

    def derivative(self) -> "ThetaSeries":
        return ThetaSeries(C.chebder(self.coef, scl=2.0 / np.pi))


@dataclass(frozen=True)
class Landscape:
    """A potential ``u(q)`` with gradient ``du(q)`` on a search interval."""

    u: Callable
    du: Callable
    lo: float = -10.0
    hi: float = 10.0

    @classmethod
    def from_driven(cls, driven: DrivenPotential, t: float, bounds=(-10.0, 10.0)) -> "Landscape":
        params = driven.params_at(t)
        pot = driven.potential
        return cls(lambda q: pot.evaluate(q, **params), lambda q: pot.gradient(q, **params), *bounds)

    @classmethod
    def from_potential(cls, pot: PotentialSpec, bounds=(-10.0, 10.0), **params) -> "Landscape":
        return cls(lambda q: pot.evaluate(q, **params), lambda q: pot.gradient(q, **params), *bounds)

    @cached_property
    def probe(self) -> tuple[np.ndarray, np.ndarray]:
        q = np.linspace(self.lo, self.hi, N_PROBE)
        return q, np.asarray(self.u(q), dtype=float)

    @cached_property
    def minimum(self) -> tuple[float, float]:
        """``(q_star, u_min)`` of the global minimum."""
        q, u = self.probe
        j = int(np.argmin(u))
        if j == 0 or j == len(q) - 1:
            raise DomainError("potential minimum lies on the search boundary (not confining)")
        res = minimize_scalar(self.u, bounds=(q[j - 1], q[j + 1]), method="bounded",
                              options={"xatol": 1e-13})
        qs = float(res.x) if res.fun <= u[j] else float(q[j])
        return qs, float(min(res.fun, u[j]))

    def turning_points(self, E) -> tuple[np.ndarray, np.ndarray]:
        """Turning points for each energy, by vectorized bisection.

        Raises
        ------
        EscapeError
            Motion is not bounded inside the search interval.
        TopologyError
            The allowed region is not a single interval.
        DomainError
            Energy below the minimum.
        """
        E = np.atleast_1d(np.asarray(E, dtype=float))
        q, u = self.probe
        qs, umin = self.minimum
        if np.any(E < umin - 1e-12 * max(1.0, abs(umin))):
            raise DomainError(f"energy below the potential minimum {umin}")
        if np.any(E[:, None] >= np.array([u[0], u[-1]])[None, :]):
            raise EscapeError("energy reaches the search boundary: motion not bounded")
        inside = u[None, :] < E[:, None]
        changes = np.count_nonzero(np.diff(inside.astype(np.int8), axis=1), axis=1)
        if np.any(changes > 2):
            raise TopologyError("energy shell is not a single closed curve (multi-well region)")
        j_star = int(np.argmin(u))
        j_star = j_star if q[j_star] < qs else j_star - 1  # last probe point left of qs
        above = u[None, :] >= E[:, None]
        idx = np.arange(len(q))[None, :]
        ja = np.max(np.where(above & (idx <= j_star), idx, -1), axis=1)
        jb = np.min(np.where(above & (idx > j_star), idx, len(q)), axis=1)
        left = _bracketed_root(self.u, self.du, E, q[ja], np.full(E.shape, qs))
        right = _bracketed_root(self.u, self.du, E, q[jb], np.full(E.shape, qs))
        return left, right

    def _pbar_theta(self, E, left, right, mass):
        c = 0.5 * (left + right)
        w = 0.5 * (right - left)
        qq = c[:, None] + w[:, None] * np.sin(_THETA)[None, :]
        p = np.sqrt(np.maximum(2 * mass * (E[:, None] - self.u(qq)), 0.0))
        return p, w

    def action(self, E, mass: float = 1.0) -> np.ndarray:
        """Enclosed phase-space volume ``2 int pbar dq`` for each energy."""
        E = np.atleast_1d(np.asarray(E, dtype=float))
        left, right = self.turning_points(E)
        p, w = self._pbar_theta(E, left, right, mass)
        return 2 * w * ((p * np.cos(_THETA)) @ _TW)

    def action_period(self, E, mass: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
        E = np.atleast_1d(np.asarray(E, dtype=float))
        left, right = self.turning_points(E)
        p, w = self._pbar_theta(E, left, right, mass)
        cs = np.cos(_THETA)
        ratio = np.where(p > 0, cs / np.where(p > 0, p, 1.0), 0.0)
        return 2 * w * ((p * cs) @ _TW), 2 * mass * w * (ratio @ _TW)

    def period(self, E, mass: float = 1.0) -> np.ndarray:
        """``dI/dE = 2 int m / pbar dq`` for each energy."""
        E = np.atleast_1d(np.asarray(E, dtype=float))
        left, right = self.turning_points(E)
        p, w = self._pbar_theta(E, left, right, mass)
        # m cos(theta)/p has a finite limit at both ends
        ratio = np.where(p > 0, np.cos(_THETA) / np.where(p > 0, p, 1.0), 0.0)
        return 2 * mass * w * (ratio @ _TW)


def _bracketed_root(f, df, level, x_out, x_in, iters: int = 60, xtol: float = 4e-16,
                    ftol: float = 0.0):
    """Solve ``f(x) = level`` with ``f(x_out) >= level > f(x_in)`` by safeguarded Newton."""
    a, b = np.array(x_out, dtype=float), np.array(x_in, dtype=float)
    x = 0.5 * (a + b)
    for _ in range(iters):
        fx = f(x) - level
        hi_side = fx >= 0
        a = np.where(hi_side, x, a)
        b = np.where(hi_side, b, x)
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / d
        bad = ~np.isfinite(xn) | ((xn - a) * (xn - b) > 0)
        xn = np.where(bad, 0.5 * (a + b), xn)
        done = (np.abs(xn - x) <= xtol * np.maximum(np.abs(x), 1.0)) | (np.abs(fx) <= ftol)
        x = xn
        if np.all(done):
            break
    return x


def _landscape(potential, bounds) -> Landscape:
    if isinstance(potential, Landscape):
        return potential
    if isinstance(potential, PotentialSpec):
        return Landscape.from_potential(potential, bounds)
    if callable(potential):
        def du(q, h=1e-6):
            return (potential(q + h) - potential(q - h)) / (2 * h)
        return Landscape(potential, du, *bounds)
    raise DomainError("potential must be a Landscape, PotentialSpec or callable")


def action_of_energy(potential, E: float, mass: float = 1.0, bounds=(-10.0, 10.0)) -> float:
    """Classical action ``I(E) = 2 int_{q-}^{q+} sqrt(2m(E - U)) dq``.

    Turning points are found by bisection and the quadrature uses the
    substitution ``q = c + w sin(theta)``, which removes the endpoint
    singularity.

    Raises
    ------
    DomainError, EscapeError, TopologyError
        Energy below the minimum, unbounded motion, or a disconnected shell.
    """
    land = _landscape(potential, bounds)
    _, umin = land.minimum
    if E <= umin:
        if E < umin - 1e-12 * max(1.0, abs(umin)):
            raise DomainError(f"energy {E} below the potential minimum {umin}")
        return 0.0
    return float(land.action(E, mass)[0])


def _solve_energy(land: Landscape, I0: float, mass: float, guess: float | None,
                  rtol: float = 1e-13) -> float:
    qs, umin = land.minimum
    lo = umin
    _, u = land.probe
    hi = float(min(u[0], u[-1]))
    top = hi - 1e-9 * (hi - lo)
    if land.action(top, mass)[0] < I0:
        raise DomainError(f"action {I0} not attainable inside the search interval")
    if guess is not None and lo < guess < hi:
        E = guess
    else:
        # harmonic estimate from the curvature at the minimum
        eps = 1e-4
        curv = (land.du(qs + eps) - land.du(qs - eps)) / (2 * eps)
        E = lo + I0 * np.sqrt(max(curv, 0.0) / mass) / (2 * np.pi)
        if not lo < E < hi:
            E = 0.5 * (lo + hi)
    for _ in range(300):
        act, per = land.action_period(E, mass)
        val = act[0] - I0
        if abs(val) <= rtol * I0:
            return float(E)
        if val > 0:
            hi = E
        else:
            lo = E
        step = val / per[0]
        E_new = E - step
        E = E_new if lo < E_new < hi else 0.5 * (lo + hi)
    raise DomainError("adiabatic energy did not converge")


@dataclass(frozen=True)
class EnergyShell:
    """Adiabatic energy shell enclosing phase-space volume ``I0``.

    ``s_cheb`` maps ``theta`` to the enclosed-volume fraction ``S/I0``;
    ``sc_cheb`` maps ``theta`` to the microcanonical fraction (time
    fraction of the orbit).
    """

    t: float
    I0: float
    Ebar: float
    q_left: float
    q_right: float
    mass: float
    s_cheb: ThetaSeries
    sc_cheb: ThetaSeries
    landscape: Landscape = field(repr=False)

    @property
    def center(self) -> float:
        return 0.5 * (self.q_left + self.q_right)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.q_right - self.q_left)

    def pbar(self, q) -> np.ndarray:
        """Upper-branch momentum, zero outside the turning points."""
        q = np.asarray(q, dtype=float)
        p = np.sqrt(np.maximum(2 * self.mass * (self.Ebar - self.landscape.u(q)), 0.0))
        return np.where((q >= self.q_left) & (q <= self.q_right), p, 0.0)

    def theta_of(self, q) -> np.ndarray:
        x = (np.asarray(q, dtype=float) - self.center) / self.half_width
        return np.arcsin(np.clip(x, -1.0, 1.0))

    def fraction(self, q, measure: str = "volume") -> np.ndarray:
        cheb = self.s_cheb if measure == "volume" else self.sc_cheb
        return cheb(self.theta_of(q))


def energy_shell(potential, I0: float, mass: float = 1.0, t: float = 0.0,
                 bounds=(-10.0, 10.0), guess: float | None = None) -> EnergyShell:
    """Shell of the potential at one time enclosing volume ``I0``."""
    if not I0 > 0:
        raise DomainError("I0 must be positive")
    land = _landscape(potential, bounds)
    E = _solve_energy(land, I0, mass, guess)
    left, right = (float(x[0]) for x in land.turning_points(E))
    c, w = 0.5 * (left + right), 0.5 * (right - left)
    period = float(land.period(E, mass)[0])

    def pbar_theta(th):
        return np.sqrt(np.maximum(2 * mass * (E - land.u(c + w * np.sin(th))), 0.0))

    def vol(th):
        return 2 * pbar_theta(th) * w * np.cos(th) / I0

    def micro(th):
        p = pbar_theta(th)
        cs = np.cos(th)
        return np.where(p > 0, 2 * mass * w * cs / np.where(p > 0, p, 1.0), 0.0) / period

    s = ThetaSeries.interpolate(vol, CHEB_DEG).integral()
    sc = ThetaSeries.interpolate(micro, CHEB_DEG).integral()
    return EnergyShell(float(t), float(I0), E, left, right, mass, s, sc, land)


def adiabatic_energy(driven: DrivenPotential, I0: float, times, mass: float | None = None,
                     bounds=(-10.0, 10.0)) -> np.ndarray:
    """Energy ``Ebar(t)`` of the shell enclosing ``I0`` at each time."""
    m = driven.mass if mass is None else mass
    out, guess = [], None
    for t in np.atleast_1d(times):
        land = Landscape.from_driven(driven, float(t), bounds)
        guess = _solve_energy(land, I0, m, guess)
        out.append(guess)
    return np.array(out)


def shell_volume(shell: EnergyShell, q: float) -> float:
    """Volume ``2 int_{q_left}^q pbar dq'`` enclosed up to ``q``."""
    if q < shell.q_left or q > shell.q_right:
        raise DomainError(f"q={q} outside turning points [{shell.q_left}, {shell.q_right}]")
    return float(shell.I0 * shell.s_cheb(shell.theta_of(q)))


@dataclass(frozen=True)
class ShellTrack:
    """Energy shells at every sample of a time mesh."""

    driven: DrivenPotential
    mesh: TimeMesh
    I0: float
    shells: tuple
    bounds: tuple = (-10.0, 10.0)

    @property
    def mass(self) -> float:
        return self.driven.mass

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.Ebar for s in self.shells])


def shell_track(driven: DrivenPotential, I0: float, mesh: TimeMesh,
                bounds=(-10.0, 10.0)) -> ShellTrack:
    """Shells along the protocol, each seeded with the previous energy."""
    shells, guess = [], None
    for t in mesh.times:
        sh = energy_shell(Landscape.from_driven(driven, float(t), bounds), I0, driven.mass,
                          float(t), bounds, guess)
        guess = sh.Ebar
        shells.append(sh)
    return ShellTrack(driven, mesh, float(I0), tuple(shells), tuple(bounds))


def _invert_fraction(series: ThetaSeries, levels: np.ndarray, power: int = 3) -> np.ndarray:
    """``theta`` with ``series(theta) = level`` for a monotone fraction series.

    The fraction behaves like ``(theta +- pi/2)^power`` at the ends; Newton
    iteration runs on its ``1/power`` root (taken from the nearer end) so
    that it converges quadratically everywhere.
    """
    levels = np.asarray(levels, dtype=float)
    deriv = series.derivative()
    lower = levels <= 0.5
    r = 1.0 / power

    def f(th):
        s = np.clip(series(th), 0.0, 1.0)
        return np.where(lower, s**r, -((1.0 - s) ** r))

    def df(th):
        s = np.clip(series(th), 0.0, 1.0)
        base = np.where(lower, s, 1.0 - s)
        with np.errstate(divide="ignore"):
            return r * deriv(th) * np.where(base > 0, base ** (r - 1.0), np.inf)

    target = np.where(lower, levels**r, -((1.0 - levels) ** r))
    return _bracketed_root(f, df, target, np.full(levels.shape, 0.5 * np.pi),
                           np.full(levels.shape, -0.5 * np.pi), iters=100, xtol=1e-14,
                           ftol=1e-12)


@dataclass(frozen=True)
class ClassicalFlow:
    """Shell flow fields as Chebyshev series in ``x = (q - c(t))/w(t)``.

    ``coef_v`` and ``coef_a`` have one row per mesh sample; evaluation
    between samples uses cubic splines of the coefficients, and beyond
    ``|x| = 1`` the series is continued linearly.  Fields vanish outside
    ``(0, tau)``.
    """

    mesh: TimeMesh
    centers: np.ndarray
    widths: np.ndarray
    coef_v: np.ndarray
    coef_a: np.ndarray
    measure: str
    fence_x: np.ndarray = field(repr=False)
    fence_v: np.ndarray = field(repr=False)
    medians: np.ndarray = field(repr=False)

    @cached_property
    def _splines(self):
        t = self.mesh.times
        dv = np.array([np.append(C.chebder(c), 0.0) for c in self.coef_v])
        da = np.array([np.append(C.chebder(c), 0.0) for c in self.coef_a])
        packed = np.concatenate([self.centers[:, None], self.widths[:, None], self.coef_v, dv,
                                 self.coef_a, da], axis=1)
        return CubicSpline(t, packed, axis=0)

    @staticmethod
    def _series(x, cv, dv, ca, da):
        xc = np.clip(x, -1.0, 1.0)
        basis = np.cos(np.multiply.outer(np.arccos(xc), np.arange(cv.size)))
        dx = x - xc
        slope = basis @ dv
        return basis @ cv + slope * dx, slope, basis @ ca + (basis @ da) * dx

    def evaluate(self, q, t: float):
        """``(v, dv/dq, a)`` at positions ``q`` and time ``t``."""
        q = np.asarray(q, dtype=float)
        if t <= 0.0 or t >= self.mesh.tau:
            z = np.zeros_like(q)
            return z, z, z
        row = self._splines(t)
        n = self.coef_v.shape[1]
        c, w = row[0], row[1]
        parts = [row[2 + i * n:2 + (i + 1) * n] for i in range(4)]
        v, dvx, a = self._series((q - c) / w, *parts)
        return v, dvx / w, a

    def sample(self, k: int, q):
        """Fields at mesh sample ``k`` without time interpolation."""
        q = np.asarray(q, dtype=float)
        cv, ca = self.coef_v[k], self.coef_a[k]
        dv, da = np.append(C.chebder(cv), 0.0), np.append(C.chebder(ca), 0.0)
        v, dvx, a = self._series((q - self.centers[k]) / self.widths[k], cv, dv, ca, da)
        return v, dvx / self.widths[k], a

    def on_grid(self, grid: Grid) -> FlowFields:
        q = grid.points
        nt = self.mesh.n_samples
        v = np.zeros((nt, grid.n_points))
        a = np.zeros_like(v)
        for k in range(1, nt - 1):
            v[k], _, a[k] = self.sample(k, q)
        lo = (self.centers - self.widths)[:, None]
        hi = (self.centers + self.widths)[:, None]
        inside = (q[None, :] > lo) & (q[None, :] < hi)
        return FlowFields(grid, self.mesh, v, inside, inside.copy(), self.medians.copy(), a, 0,
                          np.inf, "classical_shell")


def _fence_flow(track: ShellTrack, measure: str) -> ClassicalFlow:
    mesh = track.mesh
    shells = track.shells
    j = np.arange(N_FENCE)
    x0 = np.sort(np.cos(np.pi * (j + 0.5) / N_FENCE))
    sh0 = shells[0]
    labels = sh0.fraction(sh0.center + sh0.half_width * x0, measure)
    pos = np.empty((mesh.n_samples, N_FENCE))
    medians = np.empty(mesh.n_samples)
    centers = np.array([s.center for s in shells])
    widths = np.array([s.half_width for s in shells])
    for k, sh in enumerate(shells):
        cheb = sh.s_cheb if measure == "volume" else sh.sc_cheb
        th = _invert_fraction(cheb, np.append(labels, 0.5), 3 if measure == "volume" else 1)
        pos[k] = sh.center + sh.half_width * np.sin(th[:-1])
        medians[k] = sh.center + sh.half_width * np.sin(th[-1])
    vel = time_derivative(pos, mesh.dt, axis=0)
    acc = time_derivative(vel, mesh.dt, axis=0)
    deg = min(FIT_DEG, N_FENCE - 1)
    coef_v = np.zeros((mesh.n_samples, deg + 1))
    coef_a = np.zeros_like(coef_v)
    xk = (pos - centers[:, None]) / widths[:, None]
    for k in range(1, mesh.n_samples - 1):
        coef_v[k] = C.chebfit(xk[k], vel[k], deg)
        coef_a[k] = C.chebfit(xk[k], acc[k], deg)
    return ClassicalFlow(mesh, centers, widths, coef_v, coef_a, measure, xk, vel, medians)


def classical_flow_fields(track: ShellTrack) -> ClassicalFlow:
    """Flow fields of the enclosed phase-space volume.

    Dividers with fixed volume fractions ``S/I0`` are followed from
    shell to shell; their velocities and accelerations (fourth-order
    differences in time) are fitted by Chebyshev series on each shell.
    The acceleration is the time derivative of the divider velocity,
    i.e. the convective derivative ``v' v + dv/dt``.
    """
    return _fence_flow(track, "volume")


def microcanonical_velocity(track: ShellTrack) -> ClassicalFlow:
    """Flow fields of the microcanonical density ``mu ~ 1/pbar`` on each shell."""
    return _fence_flow(track, "microcanonical")


def classical_shortcuts(flow: ClassicalFlow, grid: Grid, mass: float = 1.0):
    """Counterdiabatic ``H_CD = p v`` and fast-forward ``U_FF`` on a grid.

    ``U_FF = -m int a dq`` with the additive function of time fixed by
    ``U_FF = 0`` at the shell centre.

    Returns
    -------
    cd, ff : ShortcutTerm
    """
    ff_grid = flow.on_grid(grid)
    u = -mass * antiderivative_gauged(ff_grid.a, grid.points, flow.centers)
    u[0] = 0.0
    u[-1] = 0.0
    cd = ShortcutTerm("cd_momentum_coupling", grid, flow.mesh, ff_grid.v, "H_CD = p v (unsymmetrized)")
    ff = ShortcutTerm("ff_potential", grid, flow.mesh, u, "zero at the shell centre")
    return cd, ff


@dataclass(frozen=True)
class PhasePoint:
    q: float
    p: float


def shell_ensemble(shell: EnergyShell, n: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """``n`` points on a shell, uniform in the volume fraction, alternating branches.

    Point ``i`` sits at fraction ``(i + 1/2)/n`` on the upper branch for
    even ``i`` and the lower branch for odd ``i``.
    """
    frac = (np.arange(n) + 0.5) / n
    th = _invert_fraction(shell.s_cheb, frac)
    q = shell.center + shell.half_width * np.sin(th)
    p = shell.pbar(q) * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return q, p


@dataclass(frozen=True)
class TrajectoryRecord:
    """Trajectory ensemble sampled at output times.

    ``q``, ``p``, ``action`` and ``boosted_action`` have shape
    ``(n_out, n_trajectories)``.
    """

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    action: np.ndarray
    boosted_action: np.ndarray
    hamiltonian: str
    dt: float

    def states(self, k: int) -> list[PhasePoint]:
        return [PhasePoint(float(a), float(b)) for a, b in zip(self.q[k], self.p[k])]


def _actions_at(driven, t, q, p, mass, bounds):
    land = Landscape.from_driven(driven, t, bounds)
    E = p**2 / (2 * mass) + land.u(q)
    try:
        return land.action(E, mass)
    except EscapeError:
        q_, u_ = land.probe
        bad = np.flatnonzero(E >= min(u_[0], u_[-1]))
        raise EscapeError(f"trajectory {int(bad[0])} left the bound region at t={t:.6g}") from None


def evolve_trajectories(q0, p0, driven: DrivenPotential, flow: ClassicalFlow | None = None,
                        hamiltonian: str = "bare", dt: float = 2e-5, t0: float = 0.0,
                        t1: float | None = None, n_out: int = 200, extra_times=(),
                        bounds=(-10.0, 10.0)) -> TrajectoryRecord:
    """Integrate an ensemble under ``H0``, ``H0 + p v`` or ``H0 + U_FF``.

    ``bare`` and ``ff`` use velocity Verlet; ``cd`` uses classical RK4 on
    ``dq/dt = p/m + v``, ``dp/dt = -U0' - p v'``.  The action ``I`` and
    the boosted action ``J = I(q, p - m v)`` are recorded at output times.

    Raises
    ------
    EscapeError
        When a trajectory's energy leaves the bound range.
    """
    if hamiltonian not in ("bare", "cd", "ff"):
        raise DomainError(f"unknown hamiltonian {hamiltonian!r}")
    if hamiltonian != "bare" and flow is None:
        raise DomainError("cd and ff dynamics need flow fields")
    t1 = driven.tau if t1 is None else t1
    m = driven.mass
    q = np.array(q0, dtype=float)
    p = np.array(p0, dtype=float)
    n_steps = max(1, int(round((t1 - t0) / dt)))
    h = (t1 - t0) / n_steps
    out = set(np.unique(np.rint(np.linspace(0, n_steps, min(n_out, n_steps + 1))).astype(int)).tolist())
    for te in extra_times:
        s = int(round((te - t0) / h))
        if 0 <= s <= n_steps:
            out.add(s)
    pot = driven.potential

    def grad(x, t):
        return pot.gradient(x, **driven.params_at(t))

    def field(x, t):
        if flow is None:
            z = np.zeros_like(x)
            return z, z, z
        return flow.evaluate(x, t)

    rec_t, rec_q, rec_p, rec_i, rec_j = [], [], [], [], []

    def record(t):
        v, _, _ = field(q, t)
        rec_t.append(t)
        rec_q.append(q.copy())
        rec_p.append(p.copy())
        rec_i.append(_actions_at(driven, t, q, p, m, bounds))
        rec_j.append(_actions_at(driven, t, q, p - m * v, m, bounds))

    def force(x, t):
        f = -grad(x, t)
        if hamiltonian == "ff":
            f = f + m * field(x, t)[2]
        return f

    def rhs(x, y, t):
        v, dv, _ = field(x, t)
        return y / m + v, -grad(x, t) - y * dv

    if 0 in out:
        record(t0)
    f_now = force(q, t0) if hamiltonian != "cd" else None
    for s in range(n_steps):
        t = t0 + s * h
        if hamiltonian == "cd":
            k1q, k1p = rhs(q, p, t)
            k2q, k2p = rhs(q + 0.5 * h * k1q, p + 0.5 * h * k1p, t + 0.5 * h)
            k3q, k3p = rhs(q + 0.5 * h * k2q, p + 0.5 * h * k2p, t + 0.5 * h)
            k4q, k4p = rhs(q + h * k3q, p + h * k3p, t + h)
            q = q + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
            p = p + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        else:
            p_half = p + 0.5 * h * f_now
            q = q + h * p_half / m
            f_now = force(q, t + h)
            p = p_half + 0.5 * h * f_now
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            bad = int(np.flatnonzero(~(np.isfinite(q) & np.isfinite(p)))[0])
            raise EscapeError(f"trajectory {bad} diverged at t={t + h:.6g}")
        if s + 1 in out:
            record(t0 + (s + 1) * h)
    return TrajectoryRecord(np.array(rec_t), np.array(rec_q), np.array(rec_p), np.array(rec_i),
                            np.array(rec_j), hamiltonian, h)
