"""Potentials, time schedules and analytic reference states.

Units are dimensionless with hbar = m = k_B T = 1 unless overridden.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DomainError, TruncationError
from .grid import Grid, ScalarField, trapezoid

POTENTIAL_KINDS = ("razavy", "harmonic", "scale_invariant", "tabulated", "morph")
SCHEDULE_KINDS = ("razavy_xivar", "polynomial_smoothstep", "constant", "custom_samples")

_DEFAULTS = {
    "razavy": {"xi": 0.5},
    "harmonic": {"kappa": 1.0, "center": 0.0},
    "scale_invariant": {"gamma": 1.0, "f": 0.0},
    "tabulated": {},
    "morph": {"quartic": 1.0, "kappa": 4.0, "lam": 0.0, "tilt": 0.0},
}


def razavy_potential(q, xi: float):
    """Razavy potential ``xi^2/16 (cosh 4q - 1) - (3 xi/2) cosh 2q``."""
    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")
    q = np.asarray(q, dtype=float)
    return xi**2 / 16.0 * (np.cosh(4 * q) - 1.0) - 1.5 * xi * np.cosh(2 * q)


def _razavy_gradient(q, xi):
    return xi**2 / 4.0 * np.sinh(4 * q) - 3.0 * xi * np.sinh(2 * q)


@dataclass(frozen=True)
class PotentialSpec:
    """A static potential family with reference parameters.

    Parameters
    ----------
    kind : str
        One of ``razavy`` (``xi``), ``harmonic`` (``kappa``, ``center``),
        ``scale_invariant`` (``gamma``, ``f`` applied to ``base``),
        ``tabulated`` (samples in ``table``) or ``morph``
        (``(1-lam) quartic q^4 + lam kappa q^2/2 + tilt q``).
    parameters : mapping
        Reference values; missing entries take the kind's defaults.
    base : PotentialSpec, optional
        Reference potential for ``scale_invariant``.
    table : (q, U) pair of arrays, optional
        Samples for ``tabulated``; interpolated by a cubic spline.
    """

    kind: str
    parameters: Mapping[str, float] = field(default_factory=dict)
    mass: float = 1.0
    hbar: float = 1.0
    base: "PotentialSpec | None" = None
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"potential.kind: unknown kind {self.kind!r}")
        if not (self.mass > 0 and self.hbar > 0):
            raise DomainError("mass and hbar must be positive")
        unknown = set(self.parameters) - set(_DEFAULTS[self.kind])
        if unknown:
            raise ConfigError(f"potential.parameters: unknown keys {sorted(unknown)} for {self.kind}")
        params = {**_DEFAULTS[self.kind], **{k: float(v) for k, v in self.parameters.items()}}
        object.__setattr__(self, "parameters", params)
        self._check(params)
        if self.kind == "scale_invariant" and self.base is None:
            raise ConfigError("potential.base: scale_invariant needs a base potential")
        if self.kind == "tabulated":
            if self.table is None:
                raise ConfigError("potential.table: tabulated potential needs samples")
            tq, tu = (np.asarray(a, dtype=float) for a in self.table)
            if tq.ndim != 1 or tq.shape != tu.shape or tq.size < 4 or np.any(np.diff(tq) <= 0):
                raise ConfigError("potential.table: need >= 4 increasing samples")
            object.__setattr__(self, "_spline", CubicSpline(tq, tu))

    def _check(self, p):
        if self.kind == "razavy" and not p["xi"] > 0:
            raise DomainError(f"razavy xi must be positive, got {p['xi']}")
        if self.kind == "harmonic" and not p["kappa"] > 0:
            raise DomainError(f"harmonic kappa must be positive, got {p['kappa']}")
        if self.kind == "scale_invariant" and not p["gamma"] > 0:
            raise DomainError(f"gamma must be positive, got {p['gamma']}")
        if self.kind == "morph" and not (p["quartic"] > 0 and p["kappa"] > 0 and 0 <= p["lam"] <= 1):
            raise DomainError("morph needs quartic > 0, kappa > 0, 0 <= lam <= 1")

    def params(self, **overrides) -> dict:
        p = dict(self.parameters)
        p.update(overrides)
        self._check(p)
        return p

    def evaluate(self, q, **overrides):
        """Potential at ``q`` with optional parameter overrides."""
        p = self.params(**overrides)
        q = np.asarray(q, dtype=float)
        k = self.kind
        if k == "razavy":
            return razavy_potential(q, p["xi"])
        if k == "harmonic":
            return 0.5 * p["kappa"] * (q - p["center"]) ** 2
        if k == "scale_invariant":
            g, f = p["gamma"], p["f"]
            return self.base.evaluate((q - f) / g) / g**2
        if k == "morph":
            lam = p["lam"]
            return (1 - lam) * p["quartic"] * q**4 + lam * 0.5 * p["kappa"] * q**2 + p["tilt"] * q
        return self._spline(q)

    def gradient(self, q, **overrides):
        """Analytic ``dU/dq``."""
        p = self.params(**overrides)
        q = np.asarray(q, dtype=float)
        k = self.kind
        if k == "razavy":
            return _razavy_gradient(q, p["xi"])
        if k == "harmonic":
            return p["kappa"] * (q - p["center"])
        if k == "scale_invariant":
            g, f = p["gamma"], p["f"]
            return self.base.gradient((q - f) / g) / g**3
        if k == "morph":
            lam = p["lam"]
            return 4 * (1 - lam) * p["quartic"] * q**3 + lam * p["kappa"] * q + p["tilt"]
        return self._spline(q, 1)

    def on_grid(self, grid: Grid, **overrides) -> ScalarField:
        return ScalarField(grid, self.evaluate(grid.points, **overrides))


def scale_invariant_potential(q, gamma: float, f: float, base: PotentialSpec):
    """``U0((q - f)/gamma) / gamma^2`` for a reference potential ``base``."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    return base.evaluate((np.asarray(q, dtype=float) - f) / gamma) / gamma**2


# ---------------------------------------------------------------------------
# schedules


def _smoothstep(x):
    return x**3 * (10 - 15 * x + 6 * x**2)


@dataclass(frozen=True)
class ScheduleSpec:
    """Time dependence of one potential parameter on ``[0, tau]``.

    The value is held at its end values outside ``[0, tau]``.  Kinds:

    ``razavy_xivar``
        ``4.5 + cos(pi t/tau)(cos(2 pi t/tau) - 5)``, from 0.5 to 8.5.
    ``polynomial_smoothstep``
        ``start + (end - start) S(t/tau)`` with ``S = 10x^3 - 15x^4 + 6x^5``.
    ``constant``
        ``value`` for all times.
    ``custom_samples``
        Clamped cubic spline through ``(times, values)``; must pass
        :func:`smoothness_gate` to be usable.
    """

    kind: str
    tau: float
    start: float = 0.0
    end: float = 1.0
    value_const: float = 0.0
    samples: tuple | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"schedule.kind: unknown kind {self.kind!r}")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise DomainError(f"tau must be positive, got {self.tau}")
        if self.kind == "custom_samples":
            if self.samples is None:
                raise ConfigError("schedule.samples: custom_samples needs (times, values)")
            ts, vs = (np.asarray(a, dtype=float) for a in self.samples)
            if ts.shape != vs.shape or ts.size < 4 or np.any(np.diff(ts) <= 0):
                raise ConfigError("schedule.samples: need >= 4 increasing time samples")
            if not (np.isclose(ts[0], 0.0) and np.isclose(ts[-1], self.tau)):
                raise ConfigError("schedule.samples: times must span [0, tau]")
            object.__setattr__(self, "_spline", CubicSpline(ts, vs, bc_type="clamped"))

    @classmethod
    def constant(cls, value: float, tau: float = 1.0) -> "ScheduleSpec":
        return cls("constant", tau, value_const=value)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, 0.0, self.tau)
        k = self.kind
        if k == "razavy_xivar":
            u = np.pi * tc / self.tau
            out = 4.5 + np.cos(u) * (np.cos(2 * u) - 5.0)
        elif k == "polynomial_smoothstep":
            out = self.start + (self.end - self.start) * _smoothstep(tc / self.tau)
        elif k == "constant":
            out = np.full_like(tc, self.value_const)
        else:
            out = self._spline(tc)
        return float(out) if out.ndim == 0 else out

    def derivative(self, t, order: int = 1):
        """First or second time derivative; zero outside ``(0, tau)``."""
        if order not in (1, 2):
            raise DomainError("order must be 1 or 2")
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t < self.tau)
        tc = np.clip(t, 0.0, self.tau)
        k = self.kind
        if k == "razavy_xivar":
            w = np.pi / self.tau
            u = w * tc
            # d/du of the schedule is 6 sin^3 u
            out = 6 * w * np.sin(u) ** 3 if order == 1 else 18 * w**2 * np.sin(u) ** 2 * np.cos(u)
        elif k == "polynomial_smoothstep":
            x = tc / self.tau
            span = self.end - self.start
            if order == 1:
                out = span * 30 * x**2 * (1 - x) ** 2 / self.tau
            else:
                out = span * 60 * x * (1 - x) * (1 - 2 * x) / self.tau**2
        elif k == "constant":
            out = np.zeros_like(tc)
        else:
            out = self._spline(tc, order)
        out = np.where(inside, out, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def endpoints(self) -> tuple[float, float]:
        return float(self.value(0.0)), float(self.value(self.tau))


def smoothness_gate(schedule: ScheduleSpec, rel_step: float = 1e-3) -> tuple[bool, str]:
    """Check that a schedule starts and stops with zero first and second derivatives.

    The one-sided increment ``|x(t_end +- h) - x(t_end)|`` must shrink at
    least like ``h^3`` (observed order > 2.5 between ``h`` and ``h/2``) or
    be negligible relative to the schedule range.

    Returns
    -------
    ok : bool
    message : str
        Empty when ``ok``.
    """
    tau = schedule.tau
    x0, x1 = schedule.endpoints
    ts = np.linspace(0, tau, 2001)
    xs = schedule.value(ts)
    scale = max(np.ptp(xs), abs(x0), abs(x1), 1e-300)
    problems = []
    for label, te, sgn in (("t=0", 0.0, 1.0), ("t=tau", tau, -1.0)):
        h = rel_step * tau
        d1 = abs(schedule.value(te + sgn * h) - schedule.value(te))
        d2 = abs(schedule.value(te + sgn * h / 2) - schedule.value(te))
        if d1 <= 1e-12 * scale:
            continue
        order = np.log2(d1 / max(d2, 1e-300))
        if order < 2.5:
            problems.append(f"{label}: increment scales as h^{order:.2f}; "
                            "first or second derivative does not vanish")
    return (not problems), "; ".join(problems)


@dataclass(frozen=True)
class DrivenPotential:
    """Potential family whose parameters follow schedules.

    Parameters without a schedule keep their reference values.
    """

    potential: PotentialSpec
    schedules: Mapping[str, ScheduleSpec] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.schedules:
            if name not in self.potential.parameters:
                raise ConfigError(f"schedule.{name}: not a parameter of {self.potential.kind}")

    @property
    def tau(self) -> float:
        return max((s.tau for s in self.schedules.values()), default=1.0)

    @property
    def mass(self) -> float:
        return self.potential.mass

    @property
    def hbar(self) -> float:
        return self.potential.hbar

    def params_at(self, t: float) -> dict:
        return {k: float(s.value(t)) for k, s in self.schedules.items()}

    def evaluate(self, q, t: float):
        return self.potential.evaluate(q, **self.params_at(t))

    def gradient(self, q, t: float):
        return self.potential.gradient(q, **self.params_at(t))

    def on_grid(self, grid: Grid, t: float) -> ScalarField:
        return ScalarField(grid, self.evaluate(grid.points, t))

    def as_callable(self, grid: Grid) -> Callable[[float], np.ndarray]:
        q = grid.points
        return lambda t: self.evaluate(q, t)

    def is_static(self) -> bool:
        return all(s.kind == "constant" or (s.kind == "polynomial_smoothstep" and s.start == s.end)
                   for s in self.schedules.values())


def razavy_driven(tau: float, mass: float = 1.0, hbar: float = 1.0) -> DrivenPotential:
    """Razavy potential with the standard xi schedule."""
    return DrivenPotential(PotentialSpec("razavy", {"xi": 0.5}, mass, hbar),
                           {"xi": ScheduleSpec("razavy_xivar", tau)})


def razavy_schedule(t, tau: float):
    """``4.5 + cos(pi t/tau)(cos(2 pi t/tau) - 5)``, held constant outside [0, tau]."""
    return ScheduleSpec("razavy_xivar", tau).value(t)


def razavy_first_excited(grid: Grid, xi: float, t: float = 0.0):
    """Analytic first excited Razavy eigenstate, ``kappa sinh(2q) exp(-xi cosh(2q)/4)``.

    The energy is exactly -2 for every ``xi``.  The sign of ``kappa`` is
    chosen so that the first lobe from ``q_min`` is positive, matching
    :func:`flowshortcuts.eigensolver.solve_stationary`.

    Raises
    ------
    TruncationError
        If the edge magnitude exceeds ``1e-12`` of the peak.
    """
    from .eigensolver import Snapshot

    if not xi > 0:
        raise DomainError(f"xi must be positive, got {xi}")
    q = grid.points
    # factor out exp(-xi/4) scale to avoid underflow of the peak at large xi
    phi = np.sinh(2 * q) * np.exp(-0.25 * xi * (np.cosh(2 * q) - 1.0))
    peak = np.max(np.abs(phi))
    if max(abs(phi[0]), abs(phi[-1])) > 1e-12 * peak:
        raise TruncationError(f"grid [{grid.q_min}, {grid.q_max}] too narrow for xi={xi}")
    phi = -phi / np.sqrt(trapezoid(phi**2, grid.spacing))
    return Snapshot(t=t, phi=ScalarField(grid, phi), energy=-2.0, n=1)
