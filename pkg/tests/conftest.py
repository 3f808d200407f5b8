import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flowshortcuts.grid import Grid, TimeMesh
from flowshortcuts.models import DrivenPotential, PotentialSpec, ScheduleSpec, razavy_driven

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def razavy_grid():
    return Grid(-4.0, 4.0, 1024)


@pytest.fixture(scope="session")
def razavy():
    return razavy_driven(0.2)


@pytest.fixture(scope="session")
def razavy_mesh():
    return TimeMesh(0.2, 400)


def breathing(tau=0.2, g1=1.5, f1=0.5, kappa=1.0):
    """Harmonic well dilated by gamma 1 -> g1 and translated by f 0 -> f1."""
    base = PotentialSpec("harmonic", {"kappa": kappa})
    pot = PotentialSpec("scale_invariant", {"gamma": 1.0, "f": 0.0}, base=base)
    return DrivenPotential(pot, {"gamma": ScheduleSpec("polynomial_smoothstep", tau, 1.0, g1),
                                 "f": ScheduleSpec("polynomial_smoothstep", tau, 0.0, f1)})


def breathing_fields(driven, t, q):
    """Analytic v and a of a scale-invariant track."""
    sg, sf = driven.schedules["gamma"], driven.schedules["f"]
    g, gd, gdd = sg.value(t), sg.derivative(t), sg.derivative(t, 2)
    f, fd, fdd = sf.value(t), sf.derivative(t), sf.derivative(t, 2)
    return gd / g * (q - f) + fd, gdd / g * (q - f) + fdd


@pytest.fixture(scope="session")
def breathing_driven():
    return breathing()


def gaussian(q, center=0.0, width=1.0):
    return np.exp(-((q - center) ** 2) / (2 * width**2)) / np.sqrt(2 * np.pi * width**2)


def breathing_track(driven, grid, mesh):
    """Exact ground-state density track of the breathing harmonic well."""
    from flowshortcuts.flowfields import DensityTrack

    t = mesh.times[:, None]
    g = driven.schedules["gamma"].value(t)
    f = driven.schedules["f"].value(t)
    amp = np.exp(-(((grid.points - f) / g) ** 2) / 2) / np.sqrt(g * np.sqrt(np.pi))
    return DensityTrack(grid, mesh, amp**2, "quantum_eigenstate", amp)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
