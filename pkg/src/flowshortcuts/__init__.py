"""Shortcuts to adiabaticity built from velocity and acceleration flow fields.

Quantum, classical and overdamped stochastic systems in one dimension share
one construction: a time-indexed probability density defines a flow
field ``v`` (and acceleration ``a``), from which counterdiabatic and
fast-forward terms follow by integration.  Each shortcut is verified by
direct simulation.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DomainError,
    FlowShortcutError,
    SingularityWarning,
)
from .grid import ComplexField, Grid, ScalarField, TimeMesh  # noqa: E402
from .models import (  # noqa: E402
    DrivenPotential,
    PotentialSpec,
    ScheduleSpec,
    razavy_driven,
    razavy_first_excited,
)
from .eigensolver import Snapshot, eigenstate_track, solve_stationary  # noqa: E402
from .flowfields import (  # noqa: E402
    DensityTrack,
    FlowFields,
    acceleration_field,
    flow_fields,
    node_flux_report,
    velocity_field,
)
from .quantum import ShortcutTerm, build_cd_term, build_companion_S, build_ff_potential  # noqa: E402
from .propagator import crank_nicolson_evolve, fidelity, split_step_evolve  # noqa: E402
from .classical import (  # noqa: E402
    classical_flow_fields,
    classical_shortcuts,
    evolve_trajectories,
    microcanonical_velocity,
    shell_ensemble,
    shell_track,
)
from .stochastic import (  # noqa: E402
    BathSpec,
    build_ucd,
    equilibrium_density,
    langevin_evolve,
    swift_equilibration_check,
)

__all__ = [
    "__version__", "ConfigError", "DomainError", "FlowShortcutError", "SingularityWarning",
    "ComplexField", "Grid", "ScalarField", "TimeMesh", "DrivenPotential", "PotentialSpec",
    "ScheduleSpec", "razavy_driven", "razavy_first_excited", "Snapshot", "eigenstate_track",
    "solve_stationary", "DensityTrack", "FlowFields", "acceleration_field", "flow_fields",
    "node_flux_report", "velocity_field", "ShortcutTerm", "build_cd_term", "build_companion_S",
    "build_ff_potential", "crank_nicolson_evolve", "fidelity", "split_step_evolve",
    "classical_flow_fields", "classical_shortcuts", "evolve_trajectories",
    "microcanonical_velocity", "shell_ensemble", "shell_track", "BathSpec", "build_ucd",
    "equilibrium_density", "langevin_evolve", "swift_equilibration_check",
]
