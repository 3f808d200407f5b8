"""Experiment orchestration: config -> track -> flow -> shortcut -> dynamics -> CSV.

Each stage is a plain function so scripts and tests can stop at any
point.  :func:`run` executes a full configured experiment and writes the
requested artifacts plus a manifest; :func:`reproduce` runs the built-in
presets that regenerate the figure data.
"""

from __future__ import annotations

import contextlib
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import norm

from . import __version__
from .classical import (
    Landscape,
    classical_flow_fields,
    classical_shortcuts,
    energy_shell,
    evolve_trajectories,
    shell_ensemble,
    shell_track,
)
from .config import ExperimentConfig, config_to_dict, loads
from .eigensolver import eigenstate_track, solve_stationary, stack_track
from .errors import FlowShortcutError
from .flowfields import DensityTrack, continuity_residual, flow_fields, node_flux_report
from .grid import ComplexField, Grid, TimeMesh, trapezoid
from .io import RunManifest, long_table, write_csv
from .models import razavy_first_excited, razavy_potential, smoothness_gate
from .propagator import crank_nicolson_evolve, split_step_evolve
from .quantum import build_cd_term, build_companion_S, build_ff_potential, cd_residual
from .stochastic import (
    build_ucd,
    equilibrium_density,
    equilibrium_track,
    esc_stiffness,
    fokker_planck_evolve,
    langevin_evolve,
    swift_equilibration_check,
)


class StageError(FlowShortcutError):
    """A module error annotated with the pipeline stage that raised it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except FlowShortcutError as exc:
        raise StageError(name, exc) from exc


# ---------------------------------------------------------------------------
# presets

RAZAVY = """\
schema_version = 1
setting = "quantum"
shortcut = "ff"

[potential]
kind = "razavy"

[schedule.xi]
kind = "razavy_xivar"
tau = 0.2

[numerics]
q_min = -4.0
q_max = 4.0
n_points = 1024
n_times = 400
dt = 2e-5
n_out = 201
state = 1

[outputs]
files = ["fidelity", "snapshots"]
snapshot_times = [0.05, 0.1, 0.2]
"""

MORPH = """\
schema_version = 1
setting = "classical"
shortcut = "ff"

[potential]
kind = "morph"
parameters = { quartic = 1.0, kappa = 4.0, lam = 0.0 }

[schedule.lam]
kind = "polynomial_smoothstep"
tau = 0.2
start = 0.0
end = 1.0

[numerics]
q_min = -3.0
q_max = 3.0
n_points = 512
n_times = 400
dt = 2e-5
n_out = 101
action = 2.0
n_trajectories = 50

[outputs]
files = ["actions", "trajectories", "shell"]
snapshot_times = [0.0, 0.1, 0.2]
"""

HARMONIC_ESE = """\
schema_version = 1
setting = "stochastic"
shortcut = "ucd"

[potential]
kind = "harmonic"
parameters = { kappa = 2.0 }

[schedule.kappa]
kind = "polynomial_smoothstep"
tau = 0.25
start = 2.0
end = 8.0

[bath]
gamma = 1.0
temperature = 1.0

[numerics]
q_min = -8.0
q_max = 8.0
n_points = 1024
n_times = 400
dt = 1e-4
n_out = 26
seed = 2024
n_particles = 100000

[outputs]
files = ["ensemble"]
"""

PRESETS = {"razavy": RAZAVY, "morph": MORPH, "harmonic-ese": HARMONIC_ESE}
FIGURES = ("fig2", "fig3", "fig4", "fig5", "harmonic-ese")


def preset(name: str, **numerics) -> ExperimentConfig:
    """Built-in config by name with optional numerics overrides."""
    cfg = loads(PRESETS[name])
    if numerics:
        cfg = replace(cfg, numerics=replace(cfg.numerics, **numerics))
    return cfg


# ---------------------------------------------------------------------------
# quantum


@dataclass
class QuantumResult:
    cfg: ExperimentConfig
    grid: Grid
    mesh: TimeMesh
    snaps: list
    track: DensityTrack
    flow: object
    term: object = None
    record: object = None
    diagnostics: dict = field(default_factory=dict)


def _is_razavy_analytic(cfg: ExperimentConfig) -> bool:
    return cfg.potential.kind == "razavy" and cfg.numerics.state == 1 and set(cfg.schedules) <= {"xi"}


def quantum_track(cfg: ExperimentConfig):
    grid, mesh, driven = cfg.numerics.grid(), cfg.mesh(), cfg.driven
    source = "analytic" if _is_razavy_analytic(cfg) else "numeric"
    with stage("eigensolve"):
        snaps = eigenstate_track(grid, driven, mesh, cfg.numerics.state, source=source,
                                 scheme=cfg.numerics.scheme)
    return grid, mesh, snaps, DensityTrack.from_snapshots(snaps, mesh)


def reference_state(cfg: ExperimentConfig, grid: Grid, snaps):
    """``phi(t)`` and ``E(t)`` callables for fidelity and phase bookkeeping."""
    driven = cfg.driven
    if _is_razavy_analytic(cfg):
        return (lambda t: razavy_first_excited(grid, driven.params_at(t)["xi"]).phi.values,
                lambda t: -2.0)
    times, phi, energy = stack_track(snaps)
    sp = CubicSpline(times, phi, axis=0)
    se = CubicSpline(times, energy)
    tau = times[-1]
    return (lambda t: sp(np.clip(t, 0.0, tau)), lambda t: float(se(np.clip(t, 0.0, tau))))


def run_quantum(cfg: ExperimentConfig, shortcut: str | None = None, extra_times=()) -> QuantumResult:
    """Full quantum pipeline for one shortcut (``none``, ``cd`` or ``ff``)."""
    shortcut = cfg.shortcut if shortcut is None else shortcut
    num = cfg.numerics
    grid, mesh, snaps, track = quantum_track(cfg)
    res = QuantumResult(cfg, grid, mesh, snaps, track, None)
    with stage("flow"):
        res.flow = flow_fields(track, num.floor, num.v_max)
    res.diagnostics["continuity_residual"] = continuity_residual(track, res.flow)
    res.diagnostics["cap_events"] = res.flow.cap_events
    with stage("shortcut"):
        if shortcut == "cd":
            res.term = build_cd_term(res.flow)
            res.diagnostics["cd_residual_max"] = float(np.max(cd_residual(snaps, res.term, cfg.potential.hbar)))
        elif shortcut == "ff":
            res.term = build_ff_potential(res.flow, cfg.potential.mass)
            S = build_companion_S(res.flow, cfg.potential.mass, res.term, [s.energy for s in snaps],
                                  cfg.potential.hbar)
            res.diagnostics["hj_residual"] = S.hj_residual
    ref, energy = reference_state(cfg, grid, snaps)
    u0 = cfg.driven.as_callable(grid)
    pot = u0 if shortcut != "ff" else (lambda t: u0(t) + res.term.at(t))
    psi0 = ComplexField(grid, snaps[0].phi.values)
    kw = dict(mass=cfg.potential.mass, hbar=cfg.potential.hbar, dt=num.dt, t0=0.0, t1=cfg.tau,
              reference=ref, energy=energy, n_out=num.n_out, extra_times=extra_times)
    with stage("evolve"):
        if shortcut == "cd":
            res.record = crank_nicolson_evolve(psi0, pot, cd_velocity=res.flow.velocity_at, **kw)
        elif num.propagator == "crank_nicolson":
            res.record = crank_nicolson_evolve(psi0, pot, **kw)
        else:
            res.record = split_step_evolve(psi0, pot, **kw)
    rec = res.record
    rho_ref = np.array([ref(t) ** 2 for t in rec.times])
    res.diagnostics.update(
        final_fidelity=float(rec.fidelity[-1]), min_fidelity=float(rec.fidelity.min()),
        final_overlap_abs=float(abs(rec.overlap[-1])),
        max_density_l1=float(np.max(trapezoid(np.abs(rec.density() - rho_ref), grid.spacing))),
        max_norm_drift=float(np.max(np.abs(rec.norm - 1))))
    return res


# ---------------------------------------------------------------------------
# classical


@dataclass
class ClassicalResult:
    cfg: ExperimentConfig
    track: object
    flow: object
    record: object
    diagnostics: dict = field(default_factory=dict)


def run_classical(cfg: ExperimentConfig, shortcut: str | None = None, extra_times=(),
                  track=None, flow=None) -> ClassicalResult:
    """Shell track, flow fields and a trajectory ensemble for one shortcut."""
    shortcut = cfg.shortcut if shortcut is None else shortcut
    num = cfg.numerics
    with stage("shell"):
        track = track or shell_track(cfg.driven, num.action, cfg.mesh())
    with stage("flow"):
        flow = flow or classical_flow_fields(track)
    q0, p0 = shell_ensemble(track.shells[0], num.n_trajectories)
    ham = {"none": "bare", "cd": "cd", "ff": "ff"}[shortcut]
    with stage("evolve"):
        rec = evolve_trajectories(q0, p0, cfg.driven, flow, ham, dt=num.dt, n_out=num.n_out,
                                  extra_times=extra_times)
    I0 = num.action
    dI = np.abs(rec.action - I0) / I0
    dJ = np.abs(rec.boosted_action - I0) / I0
    diag = {"final_action_dev": float(dI[-1].max()), "max_action_dev": float(dI.max()),
            "max_boosted_dev": float(dJ.max())}
    return ClassicalResult(cfg, track, flow, rec, diag)


# ---------------------------------------------------------------------------
# stochastic


@dataclass
class StochasticResult:
    cfg: ExperimentConfig
    flow: object
    term: object
    record: object
    diagnostics: dict = field(default_factory=dict)


def harmonic_reference_cdf(cfg: ExperimentConfig):
    """Exact Gaussian CDF of the instantaneous equilibrium for harmonic configs."""
    driven, beta = cfg.driven, cfg.bath.beta

    def cdf(t):
        p = driven.params_at(t)
        kappa = p.get("kappa", cfg.potential.parameters["kappa"])
        center = p.get("center", cfg.potential.parameters["center"])
        s = 1.0 / np.sqrt(beta * kappa)
        return lambda x: norm.cdf((x - center) / s)

    return cdf


def run_stochastic(cfg: ExperimentConfig, shortcut: str | None = None, keep_positions=False,
                   flow_term=None) -> StochasticResult:
    shortcut = cfg.shortcut if shortcut is None else shortcut
    num = cfg.numerics
    grid, mesh = num.grid(), cfg.mesh()
    flow = term = None
    diag = {}
    if shortcut == "ucd":
        if flow_term is None:
            with stage("equilibrium"):
                track = equilibrium_track(cfg.driven, cfg.bath, grid, mesh)
            with stage("flow"):
                flow = flow_fields(track, num.floor, num.v_max)
            diag["continuity_residual"] = continuity_residual(track, flow)
            with stage("shortcut"):
                term = build_ucd(flow, cfg.bath)
        else:
            flow, term = flow_term
    ref = harmonic_reference_cdf(cfg) if cfg.potential.kind == "harmonic" else None
    with stage("evolve"), warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rec = langevin_evolve(num.n_particles, cfg.driven, cfg.bath, num.dt, num.seed, grid,
                              ucd=term, n_out=num.n_out, reference_cdf=ref,
                              keep_positions=keep_positions)
    diag.update(max_ks=float(rec.ks.max()), escapes=rec.escapes,
                warnings=[str(w.message) for w in caught])
    return StochasticResult(cfg, flow, term, rec, diag)


# ---------------------------------------------------------------------------
# validation


@dataclass
class Check:
    name: str
    ok: bool
    message: str = ""
    severity: str = "error"


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks if c.severity == "error")

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            tag = "PASS" if c.ok else ("FAIL" if c.severity == "error" else "WARN")
            out.append(f"{tag} {c.name}" + (f": {c.message}" if c.message else ""))
        return out


def validate(cfg: ExperimentConfig, coarse_points: int = 256, coarse_times: int = 40) -> ValidationReport:
    """Static checks that need no dynamics.

    Schedules must pass the smoothness gate; end-point states must be
    contained by the grid; for excited quantum states a coarse node-flux
    pre-screen warns when the no-flux criterion fails.
    """
    checks = []
    for name, sched in cfg.schedules.items():
        ok, msg = smoothness_gate(sched)
        checks.append(Check(f"smoothness[{name}]", ok, msg))
    grid = cfg.numerics.grid()
    driven = cfg.driven
    for t in (0.0, cfg.tau):
        label = f"grid_tail[t={t:g}]"
        try:
            if cfg.setting == "quantum":
                solve_stationary(grid, driven.evaluate(grid.points, t), driven.mass, driven.hbar,
                                 cfg.numerics.state, scheme=cfg.numerics.scheme)
            elif cfg.setting == "stochastic":
                equilibrium_density(driven.on_grid(grid, t), cfg.bath)
            else:
                sh = energy_shell(Landscape.from_driven(driven, t), cfg.numerics.action, driven.mass, t)
                if not (grid.q_min < sh.q_left and sh.q_right < grid.q_max):
                    raise FlowShortcutError(f"shell [{sh.q_left:.3g}, {sh.q_right:.3g}] exceeds the grid")
            checks.append(Check(label, True))
        except FlowShortcutError as exc:
            checks.append(Check(label, False, str(exc)))
    if cfg.setting == "quantum" and cfg.numerics.state > 0:
        coarse = Grid(grid.q_min, grid.q_max, coarse_points)
        try:
            snaps = eigenstate_track(coarse, driven, TimeMesh(cfg.tau, coarse_times), cfg.numerics.state,
                                     scheme=cfg.numerics.scheme)
            rep = node_flux_report(DensityTrack.from_snapshots(snaps, TimeMesh(cfg.tau, coarse_times)))
            checks.append(Check("no_flux_prescreen", rep.verdict == "no_flux_ok",
                                f"max flux {rep.max_flux:.2e}" if rep.verdict != "no_flux_ok" else "",
                                severity="warning"))
        except FlowShortcutError as exc:
            checks.append(Check("no_flux_prescreen", False, str(exc), severity="warning"))
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# artifact writers


def _meta(cfg: ExperimentConfig, **extra) -> dict:
    meta = {"tool": f"flowshortcuts {__version__}", "setting": cfg.setting,
            "potential": cfg.potential.kind, "tau": f"{cfg.tau:.12g}"}
    meta.update({k: v for k, v in extra.items()})
    return meta


def _time_subsample(n: int, k: int = 21) -> np.ndarray:
    return np.unique(np.rint(np.linspace(0, n - 1, min(k, n))).astype(int))


def write_quantum(res: QuantumResult, out: Path, name: str, files) -> list[str]:
    written = []
    cfg, rec = res.cfg, res.record
    meta = _meta(cfg, shortcut=cfg.shortcut)
    if rec is not None:
        meta.update(propagator=rec.scheme, dt=f"{rec.dt:.12g}")
    if "fidelity" in files:
        written.append(write_csv(out / f"{name}_fidelity.csv",
                                 {"t": rec.times, "fidelity": rec.fidelity,
                                  "overlap_abs": np.abs(rec.overlap), "norm": rec.norm}, meta))
    if "snapshots" in files:
        ref, _ = reference_state(cfg, res.grid, res.snaps)
        idx = [int(np.argmin(np.abs(rec.times - t))) for t in cfg.outputs.snapshot_times]
        rows = [rec.psi[i] * np.exp(-1j * rec.alpha[i]) for i in idx]
        t = rec.times[idx]
        written.append(write_csv(out / f"{name}_snapshots.csv", long_table(
            t, res.grid.points, {"re_psi": np.real(rows), "im_psi": np.imag(rows),
                                 "phi": np.array([ref(x) for x in t])}), meta))
    if "eigen" in files:
        times, phi, energy = stack_track(res.snaps)
        written.append(write_csv(out / f"{name}_energies.csv", {"t": times, "energy": energy}, meta))
        k = _time_subsample(times.size)
        written.append(write_csv(out / f"{name}_eigenstates.csv",
                                 long_table(times[k], res.grid.points, {"phi": phi[k]}), meta))
    if "flow" in files:
        written.append(write_flow(res.flow, out / f"{name}_flow.csv", meta))
    if "shortcut" in files and res.term is not None:
        written.append(write_term(res.term, out / f"{name}_shortcut.csv", meta))
    return [str(p) for p in written]


def write_flow(flow, path, meta) -> Path:
    k = _time_subsample(flow.mesh.n_samples)
    a = flow.a if flow.a is not None else np.zeros_like(flow.v)
    return write_csv(path, long_table(flow.mesh.times[k], flow.grid.points,
                                      {"v": flow.v[k], "a": a[k], "valid": flow.valid[k]}), meta)


def write_term(term, path, meta) -> Path:
    k = _time_subsample(term.mesh.n_samples)
    meta = {**meta, "kind": term.kind, "gauge": term.gauge_note}
    return write_csv(path, long_table(term.mesh.times[k], term.grid.points,
                                      {"coefficient": term.coefficient[k]}), meta)


def write_classical(res: ClassicalResult, out: Path, name: str, files) -> list[str]:
    rec, cfg = res.record, res.cfg
    meta = _meta(cfg, shortcut=cfg.shortcut, action=f"{cfg.numerics.action:.12g}", dt=f"{rec.dt:.12g}")
    written = []
    n_t, n_p = rec.q.shape
    if "actions" in files:
        written.append(write_csv(out / f"{name}_actions.csv", {
            "t": rec.times, "action_max_dev": np.max(np.abs(rec.action - cfg.numerics.action), axis=1),
            "boosted_max_dev": np.max(np.abs(rec.boosted_action - cfg.numerics.action), axis=1),
            "action_mean": rec.action.mean(axis=1)}, meta))
    if "trajectories" in files:
        written.append(write_csv(out / f"{name}_trajectories.csv", {
            "t": np.repeat(rec.times, n_p), "trajectory": np.tile(np.arange(n_p), n_t),
            "q": rec.q.ravel(), "p": rec.p.ravel(), "I": rec.action.ravel(),
            "J": rec.boosted_action.ravel()}, meta))
    if "shell" in files:
        written.append(write_shell(res.track, out / f"{name}_shell.csv", meta))
    if "flow" in files:
        written.append(write_flow(res.flow.on_grid(cfg.numerics.grid()), out / f"{name}_flow.csv", meta))
    if "shortcut" in files:
        cd, ff = classical_shortcuts(res.flow, cfg.numerics.grid(), cfg.potential.mass)
        term = ff if cfg.shortcut == "ff" else cd
        written.append(write_term(term, out / f"{name}_shortcut.csv", meta))
    return [str(p) for p in written]


def write_shell(track, path, meta, n_q: int = 101) -> Path:
    """Upper-branch momentum of the adiabatic shell at a subsample of times."""
    k = _time_subsample(track.mesh.n_samples)
    th = np.linspace(-np.pi / 2, np.pi / 2, n_q)
    t, q, p = [], [], []
    for i in k:
        sh = track.shells[i]
        x = sh.center + sh.half_width * np.sin(th)
        t.append(np.full(n_q, track.mesh.times[i]))
        q.append(x)
        p.append(sh.pbar(x))
    meta = {**meta, "I0": f"{track.I0:.12g}"}
    return write_csv(path, {"t": np.concatenate(t), "q": np.concatenate(q), "pbar": np.concatenate(p)}, meta)


def write_stochastic(res: StochasticResult, out: Path, name: str, files) -> list[str]:
    rec, cfg = res.record, res.cfg
    meta = _meta(cfg, shortcut=cfg.shortcut, seed=rec.seed, n_particles=cfg.numerics.n_particles,
                 dt=f"{rec.dt:.12g}")
    written = []
    if "ensemble" in files:
        written.append(write_csv(out / f"{name}_ensemble.csv",
                                 {"t": rec.times, "mean": rec.mean, "variance": rec.variance,
                                  "ks_distance": rec.ks}, meta))
    if "positions" in files:
        pos = np.array(rec.positions)
        times = rec.times if pos.shape[0] == rec.times.size else rec.times[-1:]
        written.append(write_csv(out / f"{name}_positions.csv", {
            "t": np.repeat(times, pos.shape[1]), "particle": np.tile(np.arange(pos.shape[1]), len(times)),
            "q": pos.ravel()}, meta))
    if "flow" in files and res.flow is not None:
        written.append(write_flow(res.flow, out / f"{name}_flow.csv", meta))
    if "shortcut" in files and res.term is not None:
        written.append(write_term(res.term, out / f"{name}_shortcut.csv", meta))
    return [str(p) for p in written]


# ---------------------------------------------------------------------------
# run / reproduce


def run(cfg: ExperimentConfig, out_dir, name: str = "run") -> RunManifest:
    """Execute a configured experiment and write its artifacts and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    manifest = RunManifest(name, config_to_dict(cfg), __version__)
    try:
        files = cfg.outputs.files
        if cfg.setting == "quantum":
            res = run_quantum(cfg, extra_times=cfg.outputs.snapshot_times)
            manifest.outputs = write_quantum(res, out, name, files)
        elif cfg.setting == "classical":
            res = run_classical(cfg, extra_times=cfg.outputs.snapshot_times)
            manifest.outputs = write_classical(res, out, name, files)
        else:
            res = run_stochastic(cfg, keep_positions="positions" in files)
            manifest.outputs = write_stochastic(res, out, name, files)
        manifest.diagnostics = res.diagnostics
    except FlowShortcutError as exc:
        manifest.status = f"error: {exc}"
        manifest.wall_time = time.perf_counter() - t0
        manifest.write(out)
        raise
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(out)
    return manifest


def reproduce(figure: str, out_dir, **numerics) -> RunManifest:
    """Regenerate the data behind one figure; ``numerics`` override preset values."""
    if figure not in FIGURES:
        raise FlowShortcutError(f"unknown figure {figure!r}; choose from {list(FIGURES)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    fn = {"fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "harmonic-ese": _harmonic_ese}[figure]
    cfg = preset("morph" if figure == "fig5" else "harmonic-ese" if figure == "harmonic-ese" else "razavy",
                 **numerics)
    manifest = RunManifest(figure, config_to_dict(cfg), __version__)
    manifest.outputs, manifest.diagnostics, manifest.acceptance = fn(cfg, out)
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(out)
    return manifest


def _fig2(cfg, out):
    q = cfg.numerics.grid().points
    xis = (0.5, 1.0, 3.0, 6.0, 8.5)
    cols = {"q": q}
    cols.update({f"U_xi_{x:g}": razavy_potential(q, x) for x in xis})
    paths = [write_csv(out / "fig2_potential.csv", cols, _meta(cfg, content="U0(q; xi)"))]
    # flow fields and U_FF along the Razavy protocol
    grid, mesh, snaps, track = quantum_track(cfg)
    flow = flow_fields(track, cfg.numerics.floor, cfg.numerics.v_max)
    ff = build_ff_potential(flow)
    meta = _meta(cfg, content="v, a, U_FF")
    k = _time_subsample(mesh.n_samples, 9)
    paths.append(write_csv(out / "fig2_fields.csv", long_table(
        mesh.times[k], grid.points, {"phi": track.amplitude[k], "v": flow.v[k], "a": flow.a[k],
                                     "U_FF": ff.coefficient[k]}), meta))
    n_minima = [int(np.sum((cols[c][1:-1] < cols[c][:-2]) & (cols[c][1:-1] <= cols[c][2:])))
                for c in cols if c != "q"]
    return [str(p) for p in paths], {"n_minima": n_minima}, {
        "double_to_single_well": n_minima[0] == 2 and n_minima[-1] == 1}


def _fig3_4_runs(cfg):
    times = cfg.outputs.snapshot_times
    bare = run_quantum(cfg, "none", extra_times=times)
    ff = run_quantum(cfg, "ff", extra_times=times)
    return bare, ff


def _fig3(cfg, out):
    bare, ff = _fig3_4_runs(cfg)
    paths = write_quantum(bare, out, "fig3_bare", ("snapshots",))
    paths += write_quantum(ff, out, "fig3_ff", ("snapshots",))
    return paths, {"bare": bare.diagnostics, "ff": ff.diagnostics}, {
        "ff_density_l1_le_1e-3": ff.diagnostics["max_density_l1"] <= 1e-3}


def _fig4(cfg, out):
    bare, ff = _fig3_4_runs(cfg)
    rb, rf = bare.record, ff.record
    meta = _meta(cfg, content="fidelity |<phi|psi>|^2 for H0 and H0+U_FF", dt=f"{rb.dt:.12g}")
    path = write_csv(out / "fig4_fidelity.csv", {
        "t": rb.times, "fidelity_bare": rb.fidelity, "fidelity_ff": rf.fidelity,
        "overlap_abs_bare": np.abs(rb.overlap), "overlap_abs_ff": np.abs(rf.overlap)}, meta)
    fb, ffin, dip = rb.fidelity[-1], rf.fidelity[-1], rf.fidelity.min()
    return [str(path)], {"bare": bare.diagnostics, "ff": ff.diagnostics}, {
        "bare_final_in_0.25_0.35": bool(0.25 <= fb <= 0.35),
        "ff_final_ge_0.99": bool(ffin >= 0.99), "ff_dip_lt_0.1": bool(dip < 0.1)}


def _fig5(cfg, out):
    tau = cfg.tau
    times = (0.0, tau / 2, tau)
    res = run_classical(cfg, "ff", extra_times=times)
    rec, track, flow = res.record, res.track, res.flow
    idx = [int(np.argmin(np.abs(rec.times - t))) for t in times]
    n_p = rec.q.shape[1]
    meta = _meta(cfg, content="trajectory ring under H0 + U_FF")
    paths = [write_csv(out / "fig5_ring.csv", {
        "t": np.repeat(rec.times[idx], n_p), "trajectory": np.tile(np.arange(n_p), len(idx)),
        "q": rec.q[idx].ravel(), "p": rec.p[idx].ravel()}, meta)]
    # adiabatic shell and boosted shell at the same times
    cols = {"t": [], "q": [], "p_shell": [], "p_boosted_upper": [], "p_boosted_lower": []}
    for t in rec.times[idx]:
        k = int(round(t / track.mesh.dt))
        sh = track.shells[k]
        th = np.linspace(-np.pi / 2, np.pi / 2, 201)
        q = sh.center + sh.half_width * np.sin(th)
        p = sh.pbar(q)
        v = flow.evaluate(q, t)[0]
        m = cfg.potential.mass
        cols["t"].append(np.full(q.size, t))
        cols["q"].append(q)
        cols["p_shell"].append(p)
        cols["p_boosted_upper"].append(p + m * v)
        cols["p_boosted_lower"].append(-p + m * v)
    paths.append(write_csv(out / "fig5_shell.csv", {k: np.concatenate(v) for k, v in cols.items()},
                           _meta(cfg, content="adiabatic shell and shell boosted by m v")))
    d = res.diagnostics
    return [str(p) for p in paths], d, {
        "ring_returns": d["final_action_dev"] <= 1e-3, "ring_departs": d["max_action_dev"] >= 0.1,
        "boosted_action_conserved": d["max_boosted_dev"] <= 1e-3}


def _harmonic_ese(cfg, out):
    ucd = run_stochastic(cfg, "ucd")
    bare = run_stochastic(cfg, "none")
    sched = cfg.schedules["kappa"]
    t = cfg.mesh().times
    k0, kd = sched.value(t), sched.derivative(t)
    kappa = esc_stiffness(k0, kd, cfg.bath.gamma)
    sigma = cfg.bath.beta * k0 / 2
    resid = swift_equilibration_check(sigma, cfg.bath.beta * kd / 2, kappa, cfg.bath)
    meta = _meta(cfg, seed=cfg.numerics.seed, n_particles=cfg.numerics.n_particles)
    paths = [write_csv(out / "harmonic_ese_protocol.csv",
                       {"t": t, "kappa0": k0, "kappa_total": kappa, "sigma": sigma, "residual": resid}, meta),
             write_csv(out / "harmonic_ese_ensemble.csv", {
                 "t": ucd.record.times, "variance_ucd": ucd.record.variance, "ks_ucd": ucd.record.ks,
                 "variance_bare": bare.record.variance, "ks_bare": bare.record.ks}, meta)]
    diag = {"ucd": ucd.diagnostics, "bare": bare.diagnostics, "max_ese_residual": float(np.max(np.abs(resid)))}
    return [str(p) for p in paths], diag, {
        "ucd_ks_le_0.01": bool(ucd.record.ks.max() <= 0.01),
        "bare_ks_gt_0.05": bool(bare.record.ks.max() > 0.05),
        "ese_residual_roundoff": bool(np.max(np.abs(resid)) <= 1e-8)}


def fokker_planck_crosscheck(cfg: ExperimentConfig, n_bins: int = 50, n_particles: int = 1_000_000,
                             dt: float = 1e-3, seed: int = 1):
    """L1 distance between a bare Langevin histogram and the grid Fokker-Planck oracle at ``tau``."""
    grid = cfg.numerics.grid()
    driven = cfg.driven
    rho0 = equilibrium_density(driven.on_grid(grid, 0.0), cfg.bath)
    _, rows = fokker_planck_evolve(rho0, driven, cfg.bath, 0.0, cfg.tau, n_out=2)
    rec = langevin_evolve(n_particles, driven, cfg.bath, dt, seed, grid, n_out=2)
    x = rec.positions[-1]
    s = np.sqrt(np.var(x))
    edges = np.linspace(-4 * s, 4 * s, n_bins + 1)
    width = edges[1] - edges[0]
    hist = np.histogram(x, edges)[0] / (x.size * width)
    fine = np.linspace(edges[0], edges[-1], 20 * n_bins + 1)
    rho = np.interp(fine, grid.points, rows[-1])
    cell = np.array([trapezoid(rho[20 * i:20 * i + 21], fine[1] - fine[0]) for i in range(n_bins)]) / width
    return float(np.sum(np.abs(hist - cell)) * width)
