import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from flowshortcuts.errors import DomainError, EscapeWarning
from flowshortcuts.flowfields import flow_fields
from flowshortcuts.grid import Grid, ScalarField, TimeMesh, trapezoid
from flowshortcuts.models import DrivenPotential, PotentialSpec, ScheduleSpec, razavy_potential
from flowshortcuts.stochastic import (
    BathSpec,
    build_ucd,
    equilibrium_density,
    equilibrium_track,
    esc_stiffness,
    fokker_planck_evolve,
    grid_cdf,
    harmonic_ucd,
    ks_distance,
    langevin_evolve,
    sample_density,
    standard_normals,
    stationarity_residual,
    swift_equilibration_check,
)

BATH = BathSpec()
GRID = Grid(-8, 8, 1024)


def ramp(tau=0.25, k0=2.0, k1=8.0):
    return DrivenPotential(PotentialSpec("harmonic", {"kappa": k0}),
                           {"kappa": ScheduleSpec("polynomial_smoothstep", tau, k0, k1)})


def static(kappa=2.0):
    return DrivenPotential(PotentialSpec("harmonic", {"kappa": kappa}), {"kappa": ScheduleSpec.constant(kappa, 1.0)})


class TestEquilibrium:
    @pytest.mark.parametrize("kappa, temperature", [(1.0, 1.0), (4.0, 0.5), (3.0, 2.0)])
    def test_harmonic_gaussian(self, kappa, temperature):
        bath = BathSpec(1.0, temperature)
        rho = equilibrium_density(ScalarField(GRID, 0.5 * kappa * GRID.points**2), bath)
        var = trapezoid(GRID.points**2 * rho.values, GRID.spacing)
        assert var == pytest.approx(temperature / kappa, rel=1e-8)
        sigma = kappa / temperature / 2
        exact = np.sqrt(sigma / np.pi) * np.exp(-sigma * GRID.points**2)
        assert np.max(np.abs(rho.values - exact)) < 1e-8

    def test_low_temperature_concentrates(self):
        u = ScalarField(GRID, (GRID.points - 1.3) ** 2)
        rho = equilibrium_density(u, BathSpec(1.0, 1e-3))
        assert trapezoid(GRID.points * rho.values, GRID.spacing) == pytest.approx(1.3, abs=1e-6)

    def test_symmetric_double_well(self):
        g = Grid(-4, 4, 1025)
        rho = equilibrium_density(ScalarField(g, razavy_potential(g.points, 2.0)), BATH)
        assert abs(trapezoid(g.points * rho.values, g.spacing)) < 1e-10

    def test_not_normalizable(self):
        with pytest.raises(DomainError):
            equilibrium_density(ScalarField(Grid(-1, 1, 64), np.zeros(64)), BATH)

    def test_stationarity(self):
        u = 0.5 * GRID.points**2
        rho = equilibrium_density(ScalarField(GRID, u), BATH)
        assert stationarity_residual(rho, u, BATH, gradient=GRID.points) <= 1e-8
        bent = rho.values * (1 + 0.1 * GRID.points)
        assert stationarity_residual(ScalarField(GRID, bent), u, BATH) > 1e-2
        g = Grid(-4, 4, 1024)
        ur = razavy_potential(g.points, 2.0)
        rr = equilibrium_density(ScalarField(g, ur), BATH)
        assert stationarity_residual(rr, ur, BATH) <= 1e-6


class TestShortcut:
    def test_static_zero(self):
        flow = flow_fields(equilibrium_track(static(), BATH, GRID, TimeMesh(1.0, 10)))
        assert np.max(np.abs(build_ucd(flow, BATH).coefficient)) < 1e-12

    def test_harmonic_ucd(self):
        d = ramp()
        mesh = TimeMesh(0.25, 400)
        flow = flow_fields(equilibrium_track(d, BATH, GRID, mesh))
        ucd = build_ucd(flow, BATH).coefficient
        t = mesh.times[:, None]
        s = d.schedules["kappa"]
        sigma, sigma_dot = s.value(t) / 2, s.derivative(t) / 2
        exact = harmonic_ucd(GRID.points, sigma, sigma_dot, BATH.gamma)
        core = flow.core
        assert np.max(np.abs(ucd - exact)[core]) <= 1e-6 * np.max(np.abs(exact[core]))

    def test_esc_stiffness_example(self):
        assert esc_stiffness(1.0, 2.0, 1.0) == 2.0

    @given(st.floats(0.5, 10), st.floats(-20, 20), st.floats(0.2, 5), st.floats(0.2, 5))
    def test_swift_equilibration_roundoff(self, k0, k0dot, gamma, temperature):
        bath = BathSpec(gamma, temperature)
        sigma = k0 / temperature / 2
        sigma_dot = k0dot / temperature / 2
        res = swift_equilibration_check(sigma, sigma_dot, esc_stiffness(k0, k0dot, gamma), bath)
        assert abs(res) <= 1e-12 * (1 + abs(k0dot / k0) + k0 / gamma)

    def test_swift_equilibration_mismatch(self):
        sigma, sigma_dot = 1.0, 3.0
        res = swift_equilibration_check(sigma, sigma_dot, 2.0, BATH)
        assert res == pytest.approx(sigma_dot / sigma)
        assert swift_equilibration_check(1.0, 0.0, 2.0, BATH) == 0.0


class TestSampling:
    def test_normals_moments(self):
        z = standard_normals(7, 0, 1_000_000)
        assert abs(z.mean()) < 0.01 and z.var() == pytest.approx(1.0, rel=0.01)

    def test_seed_determinism_and_chunking(self):
        a = standard_normals(3, 11, 10_000, chunk=1 << 16)
        b = standard_normals(3, 11, 10_000, chunk=777)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, standard_normals(4, 11, 10_000))
        assert not np.array_equal(a, standard_normals(3, 12, 10_000))

    def test_sample_density(self):
        rho = equilibrium_density(ScalarField(GRID, 0.5 * GRID.points**2), BATH)
        x = sample_density(rho, 200_000, seed=5)
        assert x.var() == pytest.approx(1.0, rel=0.01)
        assert ks_distance(x, norm.cdf) < 0.005
        assert np.array_equal(x, sample_density(rho, 200_000, seed=5))

    def test_ks_distance(self):
        assert ks_distance(np.array([0.0]), norm.cdf) == pytest.approx(0.5)
        rho = equilibrium_density(ScalarField(GRID, 0.5 * GRID.points**2), BATH)
        x = np.linspace(-3, 3, 7)
        assert np.allclose(grid_cdf(rho)(x), norm.cdf(x), atol=2e-5)


class TestLangevin:
    def test_reproducible_and_chunk_invariant(self):
        kw = dict(n_particles=5000, driven=ramp(), bath=BATH, dt=1e-3, seed=9, grid=GRID, n_out=5)
        a = langevin_evolve(**kw)
        b = langevin_evolve(**kw, chunk=1000)
        assert np.array_equal(a.positions[-1], b.positions[-1])
        c = langevin_evolve(**{**kw, "seed": 10})
        assert not np.array_equal(a.positions[-1], c.positions[-1])

    def test_reflection_warns(self):
        g = Grid(-3, 3, 256)
        # the well softens until the ensemble no longer fits on the grid
        d = DrivenPotential(PotentialSpec("harmonic", {"kappa": 8.0}),
                            {"kappa": ScheduleSpec("polynomial_smoothstep", 0.5, 8.0, 0.05)})
        with pytest.warns(EscapeWarning):
            rec = langevin_evolve(20000, d, BATH, 5e-3, 1, g, t1=4.0, n_out=3,
                                  reference_cdf=lambda t: norm.cdf)
        assert rec.escapes > 0
        assert np.all(np.abs(rec.positions[-1]) <= 3)

    @pytest.mark.slow
    def test_static_variance_preserved(self):
        rec = langevin_evolve(100_000, static(2.0), BATH, 1e-3, 21, GRID, n_out=11)
        assert np.all(np.abs(rec.variance / 0.5 - 1) <= 0.02)


class TestFokkerPlanck:
    def test_conserves_probability_and_equilibrium(self):
        g = Grid(-8, 8, 321)
        rho0 = equilibrium_density(ScalarField(g, 0.5 * g.points**2), BATH)
        times, rows = fokker_planck_evolve(rho0, static(1.0), BATH, 0.0, 0.5, n_out=3)
        norms = trapezoid(rows, g.spacing)
        assert np.allclose(norms, 1.0, atol=1e-12)
        assert np.max(np.abs(rows[-1] - rho0.values)) < 1e-3

    def test_relaxes_to_new_equilibrium(self):
        g = Grid(-8, 8, 321)
        rho0 = equilibrium_density(ScalarField(g, 0.5 * g.points**2), BATH)
        _, rows = fokker_planck_evolve(rho0, static(4.0), BATH, 0.0, 3.0, n_out=2)
        var = trapezoid(g.points**2 * rows[-1], g.spacing)
        # second-order spatial bias of the flux discretization
        assert var == pytest.approx(0.25, rel=5e-3)
