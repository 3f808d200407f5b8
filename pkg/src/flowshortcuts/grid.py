"""Uniform one-dimensional grids and the calculus kernels shared by all modules.

Array-level helpers (``d_spectral``, ``d_central4``, ``antiderivative``,
``time_derivative``) act along the last (or a chosen) axis so that whole
time tracks of shape ``(n_times, n_points)`` can be processed at once.
The field-level wrappers validate their inputs and return new fields.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (
    DomainError,
    GridMismatchError,
    OutOfRangeError,
    SpectralBoundaryWarning,
)

SPECTRAL_BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class Grid:
    """Uniform spatial mesh including both end points.

    Parameters
    ----------
    q_min, q_max : float
        Domain end points, ``q_min < q_max``.
    n_points : int
        Number of mesh points (at least 16).
    """

    q_min: float
    q_max: float
    n_points: int

    def __post_init__(self):
        if not (np.isfinite(self.q_min) and np.isfinite(self.q_max)):
            raise DomainError("grid end points must be finite")
        if not self.q_min < self.q_max:
            raise DomainError(f"need q_min < q_max, got {self.q_min} >= {self.q_max}")
        if int(self.n_points) != self.n_points or self.n_points < 16:
            raise DomainError(f"n_points must be an integer >= 16, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return (self.q_max - self.q_min) / (self.n_points - 1)

    @cached_property
    def points(self) -> np.ndarray:
        q = np.linspace(self.q_min, self.q_max, self.n_points)
        q.setflags(write=False)
        return q

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the periodic embedding (period ``n_points*spacing``)."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
        k.setflags(write=False)
        return k

    def refined(self, factor: int = 2) -> "Grid":
        """Same interval with ``factor`` times as many intervals."""
        return Grid(self.q_min, self.q_max, factor * (self.n_points - 1) + 1)

    def index_of(self, q: float) -> int:
        """Index of the mesh point nearest to ``q``."""
        return int(np.clip(np.rint((q - self.q_min) / self.spacing), 0, self.n_points - 1))


@dataclass(frozen=True)
class TimeMesh:
    """Uniform protocol-time samples ``0, tau/n_steps, ..., tau``."""

    tau: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise DomainError(f"tau must be positive, got {self.tau}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps must be an integer >= 2, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.tau / self.n_steps

    @property
    def n_samples(self) -> int:
        return self.n_steps + 1

    @cached_property
    def times(self) -> np.ndarray:
        t = np.linspace(0.0, self.tau, self.n_steps + 1)
        t[0], t[-1] = 0.0, self.tau
        t.setflags(write=False)
        return t


def _check_values(grid: Grid, values, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.shape != (grid.n_points,):
        raise GridMismatchError(
            f"field has shape {arr.shape}, grid expects ({grid.n_points},)"
        )
    if not np.all(np.isfinite(arr)):
        raise DomainError("field contains non-finite values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarField:
    """Real samples on a grid; ``flags`` records diagnostics such as
    ``"spectral_boundary"``."""

    grid: Grid
    values: np.ndarray
    flags: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, float))

    def __call__(self, q):
        """Piecewise-linear evaluation at arbitrary positions."""
        return np.interp(q, self.grid.points, self.values)


@dataclass(frozen=True)
class ComplexField:
    """Complex samples (wavefunctions) on a grid."""

    grid: Grid
    values: np.ndarray
    flags: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, complex))

    def norm(self) -> float:
        return float(np.sqrt(trapezoid(np.abs(self.values) ** 2, self.grid.spacing)))


# ---------------------------------------------------------------------------
# array kernels


def trapezoid(f: np.ndarray, h: float, axis: int = -1):
    """Trapezoid integral over the full uniform mesh."""
    return np.trapezoid(f, dx=h, axis=axis) if hasattr(np, "trapezoid") else np.trapz(f, dx=h, axis=axis)


def cumulative_trapezoid(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Cumulative trapezoid integral starting at zero."""
    f = np.moveaxis(np.asarray(f), axis, -1)
    out = np.zeros(f.shape, dtype=np.result_type(f, float))
    out[..., 1:] = np.cumsum(0.5 * h * (f[..., 1:] + f[..., :-1]), axis=-1)
    return np.moveaxis(out, -1, axis)


def antiderivative_gauged(f: np.ndarray, q: np.ndarray, x0) -> np.ndarray:
    """Cumulative trapezoid integral of each row, shifted to vanish at ``x0``.

    The value at ``x0`` integrates the linear interpolant of ``f`` exactly,
    so a linear integrand yields the exact quadratic antiderivative.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    h = q[1] - q[0]
    cum = cumulative_trapezoid(f, h)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), f.shape[:1])
    j = np.clip(((x0 - q[0]) // h).astype(int), 0, q.size - 2)
    rows = np.arange(f.shape[0])
    d = x0 - q[j]
    fx = f[rows, j] + (f[rows, j + 1] - f[rows, j]) * d / h
    return cum - (cum[rows, j] + 0.5 * d * (f[rows, j] + fx))[:, None]


def d_spectral(f: np.ndarray, k: np.ndarray, order: int = 1) -> np.ndarray:
    """Fourier derivative along the last axis (periodic embedding)."""
    n = f.shape[-1]
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult = mult.copy()
        mult[n // 2] = 0.0  # Nyquist mode has no odd derivative
    out = np.fft.ifft(mult * np.fft.fft(f, axis=-1), axis=-1)
    return out if np.iscomplexobj(f) else out.real


def d_central4(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite difference along the last axis.

    Interior points use the centred five-point stencil; the two points at
    each end use one-sided fourth-order stencils.
    """
    f = np.asarray(f)
    if f.shape[-1] < 5:
        raise DomainError("central4 needs at least 5 points")
    d = np.empty(f.shape, dtype=np.result_type(f, float))
    d[..., 2:-2] = (f[..., :-4] - 8 * f[..., 1:-3] + 8 * f[..., 3:-1] - f[..., 4:]) / (12 * h)
    d[..., 0] = (-25 * f[..., 0] + 48 * f[..., 1] - 36 * f[..., 2] + 16 * f[..., 3] - 3 * f[..., 4]) / (12 * h)
    d[..., 1] = (-3 * f[..., 0] - 10 * f[..., 1] + 18 * f[..., 2] - 6 * f[..., 3] + f[..., 4]) / (12 * h)
    d[..., -1] = (25 * f[..., -1] - 48 * f[..., -2] + 36 * f[..., -3] - 16 * f[..., -4] + 3 * f[..., -5]) / (12 * h)
    d[..., -2] = (3 * f[..., -1] + 10 * f[..., -2] - 18 * f[..., -3] + 6 * f[..., -4] - f[..., -5]) / (12 * h)
    return d


def antiderivative(f: np.ndarray, h: float, k: np.ndarray) -> np.ndarray:
    """Spectral antiderivative along the last axis, zero at the first point.

    The mean is integrated exactly as a linear ramp; the remainder is
    integrated in Fourier space.  Accurate to roundoff for smooth fields
    that vanish at both ends.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[-1]
    mean = f.mean(axis=-1, keepdims=True)
    F = np.fft.fft(f - mean, axis=-1)
    kk = k.copy()
    kk[0] = 1.0
    G = F / (1j * kk)
    G[..., 0] = 0.0
    if n % 2 == 0:
        G[..., n // 2] = 0.0
    g = np.fft.ifft(G, axis=-1).real
    g -= g[..., :1]
    return g + mean * (h * np.arange(n))


def time_derivative(a: np.ndarray, dt: float, axis: int = 0) -> np.ndarray:
    """Fourth-order time derivative along ``axis``.

    Centred five-point stencil inside, one-sided fourth-order stencils at
    the two samples nearest each end, so no sample outside ``[0, tau]`` is
    used (schedules are generally not smooth across the end points).
    """
    a = np.moveaxis(np.asarray(a), axis, -1)
    if a.shape[-1] < 5:
        raise DomainError("need at least 5 time samples")
    return np.moveaxis(d_central4(a, dt), -1, axis)


def spectral_boundary_flag(f: np.ndarray) -> bool:
    """True when the periodic embedding of ``f`` is questionable."""
    scale = np.max(np.abs(f))
    if scale == 0:
        return False
    return max(abs(f[..., 0]).max(), abs(f[..., -1]).max()) > SPECTRAL_BOUNDARY_TOL * scale


# ---------------------------------------------------------------------------
# field-level operations


def derivative(f: ScalarField, scheme: str = "spectral") -> ScalarField:
    """Spatial derivative of a field.

    Parameters
    ----------
    f : ScalarField
    scheme : {"spectral", "central4"}
        ``spectral`` is exact for band-limited fields that vanish at the
        edges; when they do not, a :class:`SpectralBoundaryWarning` is
        issued and the result carries the ``"spectral_boundary"`` flag.
    """
    if scheme == "spectral":
        flags = ()
        if spectral_boundary_flag(f.values):
            warnings.warn(
                "field does not vanish at the grid edges; spectral derivative "
                "is unreliable", SpectralBoundaryWarning, stacklevel=2)
            flags = ("spectral_boundary",)
        return ScalarField(f.grid, d_spectral(f.values, f.grid.wavenumbers), flags)
    if scheme == "central4":
        return ScalarField(f.grid, d_central4(f.values, f.grid.spacing))
    raise DomainError(f"unknown derivative scheme {scheme!r}")


def cumulative_integral(f: ScalarField, scheme: str = "trapezoid") -> ScalarField:
    """Running integral from ``q_min``; ``result[0] == 0``.

    ``trapezoid`` (default) pairs exactly with :func:`invert_monotone`;
    ``spectral`` is far more accurate for smooth fields decaying at the edges.
    """
    g = f.grid
    if scheme == "trapezoid":
        vals = cumulative_trapezoid(f.values, g.spacing)
    elif scheme == "spectral":
        vals = antiderivative(f.values, g.spacing, g.wavenumbers)
    else:
        raise DomainError(f"unknown quadrature scheme {scheme!r}")
    return ScalarField(g, vals)


def invert_monotone(F: ScalarField, level):
    """Position where the piecewise-linear interpolant of ``F`` reaches ``level``.

    ``F`` must be non-decreasing; flat stretches (vanishing density tails)
    are allowed, and the first crossing is returned.  Accepts scalar or
    array levels.

    Raises
    ------
    DomainError
        If ``F`` decreases anywhere.
    OutOfRangeError
        If any level is outside ``[F.min, F.max]``.
    """
    x = F.values
    if np.any(np.diff(x) < 0):
        raise DomainError("values are not monotone non-decreasing")
    lev = np.asarray(level, dtype=float)
    if np.any(lev < x[0]) or np.any(lev > x[-1]) or not np.all(np.isfinite(lev)):
        raise OutOfRangeError(f"level outside [{x[0]}, {x[-1]}]")
    q = F.grid.points
    j = np.searchsorted(x, lev, side="left")
    jj = np.clip(j, 1, len(x) - 1)
    x0, x1 = x[jj - 1], x[jj]
    frac = np.where(x1 > x0, (lev - x0) / np.where(x1 > x0, x1 - x0, 1.0), 1.0)
    out = q[jj - 1] + frac * (q[jj] - q[jj - 1])
    out = np.where(j == 0, q[0], out)
    return float(out) if out.ndim == 0 else out


def resample(f: ScalarField, grid: Grid) -> ScalarField:
    """Monotone cubic (Fritsch-Carlson) resampling onto another grid.

    Points of ``grid`` outside the source interval take the end values.
    """
    interp = PchipInterpolator(f.grid.points, f.values, extrapolate=False)
    vals = interp(grid.points)
    vals = np.where(grid.points < f.grid.q_min, f.values[0], vals)
    vals = np.where(grid.points > f.grid.q_max, f.values[-1], vals)
    return ScalarField(grid, vals)


def inner(a: np.ndarray, b: np.ndarray, h: float) -> complex:
    """Trapezoid inner product ``<a|b>`` (conjugating ``a``)."""
    return complex(trapezoid(np.conj(a) * b, h))

