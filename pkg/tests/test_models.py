import numpy as np
import pytest
from hypothesis import given, strategies as st

from flowshortcuts.errors import ConfigError, DomainError, TruncationError
from flowshortcuts.grid import Grid, trapezoid
from flowshortcuts.models import (
    DrivenPotential,
    PotentialSpec,
    ScheduleSpec,
    razavy_first_excited,
    razavy_potential,
    razavy_schedule,
    scale_invariant_potential,
    smoothness_gate,
)


def n_minima(u):
    return int(np.sum((u[1:-1] < u[:-2]) & (u[1:-1] <= u[2:])))


class TestRazavy:
    @pytest.mark.parametrize("xi, expected", [(0.5, -0.75), (6.0, -9.0)])
    def test_origin_value(self, xi, expected):
        assert razavy_potential(0.0, xi) == pytest.approx(expected, abs=1e-14)

    def test_double_to_single_well(self):
        q = np.linspace(-4, 4, 1024)
        counts = [n_minima(razavy_potential(q, xi)) for xi in (0.1, 0.5, 1.0, 3.0, 6.0)]
        assert counts[0] == 2 and counts[-1] == 1
        assert counts == sorted(counts, reverse=True)

    def test_rejects_nonpositive_xi(self):
        with pytest.raises(DomainError):
            razavy_potential(0.0, 0.0)

    def test_schedule_endpoints(self):
        assert razavy_schedule(0.0, 0.2) == pytest.approx(0.5)
        assert razavy_schedule(0.2, 0.2) == pytest.approx(8.5)
        assert razavy_schedule(0.1, 0.2) == pytest.approx(4.5, abs=1e-14)

    def test_schedule_monotone_and_flat_ends(self):
        s = ScheduleSpec("razavy_xivar", 0.2)
        t = np.linspace(0, 0.2, 2001)
        assert np.all(np.diff(s.value(t)) > 0)
        for order in (1, 2):
            assert s.derivative(0.0, order) == 0.0 and s.derivative(0.2, order) == 0.0
            assert s.derivative(-1.0, order) == 0.0 and s.derivative(1.0, order) == 0.0

    def test_schedule_derivative_matches_finite_difference(self):
        s = ScheduleSpec("razavy_xivar", 0.2)
        t, h = 0.07, 1e-6
        assert s.derivative(t) == pytest.approx((s.value(t + h) - s.value(t - h)) / (2 * h), rel=1e-7)
        assert s.derivative(t, 2) == pytest.approx(
            (s.derivative(t + h) - s.derivative(t - h)) / (2 * h), rel=1e-6)

    @pytest.mark.parametrize("xi", [0.5, 2.0, 4.5, 8.5])
    def test_first_excited(self, xi):
        g = Grid(-4, 4, 1024)
        snap = razavy_first_excited(g, xi)
        assert snap.energy == -2.0
        phi = snap.phi.values
        assert trapezoid(phi**2, g.spacing) == pytest.approx(1.0, abs=1e-12)
        # antisymmetric: node at the origin, half the probability on each side
        assert np.allclose(phi, -phi[::-1], atol=1e-14)
        half = np.sum(phi[: g.n_points // 2] ** 2) * g.spacing
        assert half == pytest.approx(0.5, abs=1e-10)

    def test_first_excited_odd_grid_node(self):
        g = Grid(-4, 4, 1025)
        assert razavy_first_excited(g, 2.0).phi.values[512] == 0.0

    def test_first_excited_truncation(self):
        with pytest.raises(TruncationError):
            razavy_first_excited(Grid(-1, 1, 128), 0.5)


class TestPotentialSpec:
    def test_invalid(self):
        with pytest.raises(ConfigError):
            PotentialSpec("banana")
        with pytest.raises(DomainError):
            PotentialSpec("harmonic", {"kappa": -1.0})
        with pytest.raises(DomainError):
            PotentialSpec("harmonic", mass=0.0)

    def test_scale_invariant_identity(self):
        base = PotentialSpec("razavy", {"xi": 2.0})
        q = np.linspace(-2, 2, 41)
        assert np.allclose(scale_invariant_potential(q, 1.0, 0.0, base), base.evaluate(q))

    @given(st.floats(0.3, 3.0), st.floats(-2.0, 2.0), st.floats(0.1, 5.0))
    def test_scale_invariant_harmonic_stiffness(self, gamma, f, kappa):
        base = PotentialSpec("harmonic", {"kappa": kappa})
        q = np.linspace(-3, 3, 31)
        expected = kappa * (q - f) ** 2 / (2 * gamma**4)
        assert np.allclose(scale_invariant_potential(q, gamma, f, base), expected, rtol=1e-12, atol=1e-14)

    def test_gradient_matches_evaluate(self):
        q = np.linspace(-1.5, 1.5, 7)
        for spec in (PotentialSpec("razavy", {"xi": 3.0}),
                     PotentialSpec("morph", {"lam": 0.3, "tilt": 0.2}),
                     PotentialSpec("scale_invariant", {"gamma": 1.3, "f": 0.2},
                                   base=PotentialSpec("harmonic"))):
            h = 1e-6
            fd = (spec.evaluate(q + h) - spec.evaluate(q - h)) / (2 * h)
            assert np.allclose(spec.gradient(q), fd, rtol=1e-6, atol=1e-6)


class TestSchedules:
    def test_smoothstep(self):
        s = ScheduleSpec("polynomial_smoothstep", 2.0, 1.0, 4.0)
        assert s.endpoints == (1.0, 4.0)
        assert s.value(1.0) == pytest.approx(2.5)
        assert s.value(5.0) == 4.0
        assert smoothness_gate(s)[0]

    def test_gate_rejects_linear_start(self):
        s = ScheduleSpec("custom_samples", 1.0, samples=(np.linspace(0, 1, 11), np.linspace(0, 1, 11)))
        ok, msg = smoothness_gate(s)
        assert not ok and msg

    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 10))
    def test_smoothstep_bounded(self, a, b, tau):
        s = ScheduleSpec("polynomial_smoothstep", tau, a, b)
        v = s.value(np.linspace(-tau, 2 * tau, 301))
        assert np.all(v >= min(a, b) - 1e-12) and np.all(v <= max(a, b) + 1e-12)

    def test_driven_static(self):
        d = DrivenPotential(PotentialSpec("harmonic"), {"kappa": ScheduleSpec.constant(2.0)})
        assert d.is_static()
        assert d.evaluate(np.array([1.0]), 0.3)[0] == pytest.approx(1.0)
