"""Exit criteria 1-10.

Each test prints one ``criterion N: PASS|FAIL`` line (also collected in
the terminal summary).  Run with ``pytest tests/test_acceptance.py -v``
or ``python tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from flowshortcuts import __version__
from flowshortcuts.classical import classical_flow_fields, microcanonical_velocity, shell_track
from flowshortcuts.eigensolver import eigenstate_track, solve_stationary
from flowshortcuts.flowfields import DensityTrack, flow_fields, node_flux_report
from flowshortcuts.grid import ComplexField, Grid, TimeMesh, trapezoid
from flowshortcuts.io import RunManifest, output_dir
from flowshortcuts.models import DrivenPotential, PotentialSpec, ScheduleSpec
from flowshortcuts.pipeline import (
    fokker_planck_crosscheck,
    preset,
    run_classical,
    run_quantum,
    run_stochastic,
)
from flowshortcuts.propagator import crank_nicolson_evolve, split_step_evolve
from flowshortcuts.quantum import build_cd_term, build_ff_potential
from flowshortcuts.stochastic import esc_stiffness, swift_equilibration_check

from conftest import ACCEPTANCE_LINES, breathing, breathing_fields, breathing_track

pytestmark = pytest.mark.acceptance


def report(n, checks):
    """Print one line for criterion ``n`` and assert every check.

    ``checks`` maps a description to ``(ok, measured)``.
    """
    ok = all(c[0] for c in checks.values())
    detail = "; ".join(f"{name}={value:.4g}" if isinstance(value, float) else f"{name}={value}"
                       for name, (_, value) in checks.items())
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    failed = [name for name, (c, _) in checks.items() if not c]
    assert ok, f"criterion {n} failed: {failed}"


@pytest.fixture(scope="module")
def razavy_runs():
    cfg = preset("razavy")
    return cfg, {s: run_quantum(cfg, s) for s in ("none", "ff")}


def test_criterion_1_razavy_eigenvalue():
    cfg = preset("razavy")
    grid, driven = cfg.numerics.grid(), cfg.driven
    worst = max(abs(solve_stationary(grid, driven.evaluate(grid.points, t), n=1).energy + 2.0)
                for t in cfg.mesh().times)
    report(1, {"max|E+2|": (worst <= 1e-6, worst)})


def test_criterion_2_fidelity_curves(razavy_runs):
    _, runs = razavy_runs
    bare, ff = runs["none"].record, runs["ff"].record
    report(2, {
        "bare_final_F": (abs(bare.fidelity[-1] - 0.30) <= 0.05, float(bare.fidelity[-1])),
        "ff_final_F": (ff.fidelity[-1] >= 0.99, float(ff.fidelity[-1])),
        "ff_min_F": (ff.fidelity.min() < 0.1, float(ff.fidelity.min())),
    })


def test_criterion_3_density_shadowing(razavy_runs):
    cfg, runs = razavy_runs
    base = runs["ff"].diagnostics["max_density_l1"]
    study = {"dt=2e-5,n=1024": base}
    for dt, n in ((1e-5, 1024), (2e-5, 2048)):
        study[f"dt={dt:g},n={n}"] = run_quantum(preset("razavy", dt=dt, n_points=n), "ff").diagnostics[
            "max_density_l1"]
    RunManifest("acceptance_density_shadowing", {"preset": "razavy", "shortcut": "ff"}, __version__,
                diagnostics={"max_density_l1": study}, acceptance={"l1_le_1e-3": base <= 1e-3}).write(
        output_dir() / "acceptance")
    report(3, {"max_t L1": (base <= 1e-3, base),
               "refined_max": (max(study.values()) <= 1e-3, max(study.values()))})


def test_criterion_4_cd_transitionless():
    res = run_quantum(preset("razavy", propagator="crank_nicolson"), "cd")
    razavy_min = float(res.record.fidelity.min())
    grid = Grid(-10, 10, 512)
    mesh = TimeMesh(0.2, 400)
    d = breathing()
    track = breathing_track(d, grid, mesh)
    flow = flow_fields(track)
    ref = CubicSpline(mesh.times, track.amplitude, axis=0)
    rec = crank_nicolson_evolve(ComplexField(grid, track.amplitude[0]), d.as_callable(grid), dt=2e-5,
                                t0=0.0, t1=0.2, cd_velocity=flow.velocity_at, reference=ref, n_out=201)
    si_min = float(rec.fidelity.min())
    report(4, {"razavy_min_F": (razavy_min >= 0.999, razavy_min),
               "scale_invariant_min_F": (si_min >= 0.999, si_min)})


def test_criterion_5_scale_invariant_oracle():
    grid = Grid(-10, 10, 512)
    mesh = TimeMesh(0.2, 400)
    d = breathing()
    flow = flow_fields(breathing_track(d, grid, mesh))
    t = mesh.times[:, None]
    v, a = breathing_fields(d, t, grid.points)
    core = flow.core
    v_err = float(np.max(np.abs(flow.v - v)[core]) / np.max(np.abs(v)))
    a_err = float(np.max(np.abs(flow.a - a)[core]) / np.max(np.abs(a)))
    cd = build_cd_term(flow).coefficient
    cd_err = float(np.max(np.abs(cd - v)[core]) / np.max(np.abs(v)))
    sg, sf = d.schedules["gamma"], d.schedules["f"]
    u_exact = -0.5 * sg.derivative(t, 2) / sg.value(t) * (grid.points - sf.value(t)) ** 2 \
        - sf.derivative(t, 2) * grid.points
    diff = np.where(core, build_ff_potential(flow).coefficient - u_exact, np.nan)
    # equality up to a function of time: spread over the core at each time
    gauge_spread = float(np.max(np.nanmax(diff, axis=1) - np.nanmin(diff, axis=1))
                         / np.max(np.abs(np.where(core, u_exact, 0.0))))
    report(5, {"v_rel": (v_err <= 1e-4, v_err), "a_rel": (a_err <= 1e-4, a_err),
               "H_CD_rel": (cd_err <= 1e-4, cd_err), "U_FF_rel_mod_gauge": (gauge_spread <= 1e-4, gauge_spread)})


def test_criterion_6_node_flux():
    cfg = preset("razavy")
    grid, mesh = cfg.numerics.grid(), cfg.mesh()
    snaps = eigenstate_track(grid, cfg.driven, mesh, 1, source="analytic")
    razavy = node_flux_report(DensityTrack.from_snapshots(snaps, mesh))
    # two Gaussian lobes exchanging probability through the node between them
    g = Grid(-8, 8, 512)
    m = TimeMesh(1.0, 100)
    w = 0.3 + 0.4 * ScheduleSpec("polynomial_smoothstep", 1.0).value(m.times)[:, None]
    lobe = lambda c: np.exp(-((g.points - c) ** 2) / 2)
    amp = np.sqrt(w) * lobe(-3.0) - np.sqrt(1 - w) * lobe(3.0)
    amp /= np.sqrt(trapezoid(amp**2, g.spacing))[:, None]
    transfer = node_flux_report(DensityTrack(g, m, amp**2, "quantum_eigenstate", amp))
    report(6, {"razavy_verdict": (razavy.verdict == "no_flux_ok", razavy.verdict),
               "razavy_max_flux": (razavy.max_flux <= 1e-8, razavy.max_flux),
               "transfer_verdict": (transfer.verdict == "flux_detected", transfer.verdict)})


def test_criterion_7_classical_invariants():
    cfg = preset("morph")
    cd = run_classical(cfg, "cd")
    ff = run_classical(cfg, "ff", track=cd.track, flow=cd.flow)
    I0 = cfg.numerics.action
    cd_max = float(np.max(np.abs(cd.record.action - I0)) / I0)
    ff_final = float(np.max(np.abs(ff.record.action[-1] - I0)) / I0)
    ff_mid = float(np.max(np.abs(ff.record.action - I0)) / I0)
    j_max = float(np.max(np.abs(ff.record.boosted_action - I0)) / I0)
    report(7, {"cd_max_dI": (cd_max <= 1e-3, cd_max), "ff_final_dI": (ff_final <= 1e-3, ff_final),
               "ff_mid_dI": (ff_mid >= 0.1, ff_mid), "ff_max_dJ": (j_max <= 1e-3, j_max)})


def _field_gap(track):
    c, sc = classical_flow_fields(track), microcanonical_velocity(track)
    gap = 0.0
    for k, shell in enumerate(track.shells):
        q = np.linspace(shell.q_left, shell.q_right, 41)
        gap = max(gap, float(np.max(np.abs(c.sample(k, q)[0] - sc.sample(k, q)[0]))))
    return gap


def test_criterion_8_semiclassical():
    tol = 1e-4
    mesh = TimeMesh(0.2, 200)
    si_gap = _field_gap(shell_track(breathing(), 2.0, mesh))
    morph = DrivenPotential(PotentialSpec("morph"), {"lam": ScheduleSpec("polynomial_smoothstep", 0.2, 0.0, 1.0)})
    morph_gap = _field_gap(shell_track(morph, 2.0, mesh))
    report(8, {"morph_gap": (morph_gap > 10 * tol, morph_gap), "scale_invariant_gap": (si_gap <= tol, si_gap)})


def test_criterion_9_stochastic_shortcut():
    cfg = preset("harmonic-ese")
    ucd = run_stochastic(cfg, "ucd")
    bare = run_stochastic(cfg, "none")
    # the numerically built U_CD is the harmonic stiffness correction
    mesh = cfg.mesh()
    sched = cfg.schedules["kappa"]
    k0, kd = sched.value(mesh.times), sched.derivative(mesh.times)
    kappa = esc_stiffness(k0, kd, cfg.bath.gamma)
    q = ucd.term.grid.points
    j = (np.abs(q) < 1.0)
    fit = np.array([np.polyfit(q[j], row[j], 2)[0] * 2 for row in ucd.term.coefficient])
    stiff_err = float(np.max(np.abs(k0 + fit - kappa)) / np.max(kappa))
    sigma = cfg.bath.beta * k0 / 2
    resid = float(np.max(np.abs(swift_equilibration_check(sigma, cfg.bath.beta * kd / 2, kappa, cfg.bath))))
    report(9, {"ucd_max_KS": (ucd.record.ks.max() <= 0.01, float(ucd.record.ks.max())),
               "bare_max_KS": (bare.record.ks.max() > 0.05, float(bare.record.ks.max())),
               "stiffness_rel": (stiff_err <= 1e-6, stiff_err),
               "residual": (resid <= 1e-10, resid)})


def test_criterion_10_cross_scheme():
    grid = Grid(-10, 10, 2048)
    d = breathing()
    psi0 = ComplexField(grid, np.pi**-0.25 * np.exp(-grid.points**2 / 2))
    a = split_step_evolve(psi0, d.as_callable(grid), dt=1e-4, t0=0.0, t1=0.2, n_out=11)
    b = crank_nicolson_evolve(psi0, d.as_callable(grid), dt=1e-4, t0=0.0, t1=0.2, n_out=11)
    l2 = float(np.max(np.sqrt(trapezoid(np.abs(a.psi - b.psi) ** 2, grid.spacing))))
    l1 = fokker_planck_crosscheck(preset("harmonic-ese"))
    report(10, {"split_vs_CN_L2": (l2 <= 1e-5, l2), "langevin_vs_FP_L1": (l1 <= 2e-2, l1)})


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
