"""Command-line interface: ``flowshortcuts <subcommand> [config.toml] [options]``.

Without a config file each subcommand uses the built-in preset for its
setting (Razavy for quantum work, the quartic-to-harmonic morph for
classical, the harmonic stiffness ramp for stochastic).  Artifacts go to
``--out``, else ``$FLOWSHORTCUTS_OUTPUT_DIR``, else ``./results``.

Exit status: 0 success, 1 failed validation or acceptance flag,
2 configuration error, 3 module error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from . import __version__
from .config import ExperimentConfig, config_to_dict, load
from .errors import ConfigError, FlowShortcutError
from .io import RunManifest, output_dir
from .pipeline import (
    FIGURES,
    PRESETS,
    preset,
    quantum_track,
    reproduce,
    run,
    validate,
    write_flow,
    write_quantum,
    write_term,
    _meta,
)

DEFAULT_PRESET = {"eigensolve": "razavy", "flow": "razavy", "shortcut": "razavy", "evolve": "razavy",
                  "classical": "morph", "stochastic": "harmonic-ese", "validate": "razavy",
                  "run": "razavy"}
REQUIRED_SETTING = {"eigensolve": "quantum", "evolve": "quantum", "classical": "classical",
                    "stochastic": "stochastic"}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="TOML experiment config (default: built-in preset)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="built-in config to use instead of a file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--name", help="artifact name prefix (default: subcommand)")
    p.add_argument("--seed", type=int, help="override numerics.seed")
    p.add_argument("--dt", type=float, help="override numerics.dt")
    p.add_argument("--grid", type=int, metavar="N", help="override numerics.n_points")
    p.add_argument("--shortcut", "--kind", dest="shortcut", choices=("none", "cd", "ff", "ucd"),
                   help="override the config's shortcut")
    p.add_argument("--propagator", choices=("split_step", "crank_nicolson"),
                   help="override numerics.propagator (quantum)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowshortcuts", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "eigensolve": "eigenstate track and energies",
        "flow": "velocity/acceleration flow fields (t, q, v, a, valid)",
        "shortcut": "counterdiabatic or fast-forward term on the grid",
        "evolve": "quantum evolution with fidelity diagnostics",
        "classical": "classical shell flow and trajectory ensemble",
        "stochastic": "Langevin ensemble with variance and KS distance",
        "validate": "static checks without dynamics",
        "run": "full configured experiment",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "stochastic":
            p.add_argument("--positions", action="store_true", help="also dump particle positions")
    p = sub.add_parser("reproduce", help="regenerate figure data")
    p.add_argument("figure", choices=FIGURES + ("all",))
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--grid", type=int, metavar="N")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load(args.config) if args.config else preset(args.preset or DEFAULT_PRESET[args.command])
    need = REQUIRED_SETTING.get(args.command)
    if need and cfg.setting != need:
        raise ConfigError(f"setting: subcommand {args.command!r} needs a {need} config, got {cfg.setting}")
    cfg = cfg.with_overrides(seed=args.seed, dt=args.dt, n_points=args.grid)
    if args.shortcut or args.propagator:
        num = replace(cfg.numerics, propagator=args.propagator) if args.propagator else cfg.numerics
        raw = dict(cfg.raw)
        if args.shortcut:
            raw["shortcut"] = args.shortcut
        cfg = replace(cfg, shortcut=args.shortcut or cfg.shortcut, numerics=num, raw=raw)
    return cfg


def _flow_and_term(cfg: ExperimentConfig):
    from .classical import classical_flow_fields, classical_shortcuts, shell_track
    from .flowfields import flow_fields
    from .quantum import build_cd_term, build_ff_potential
    from .stochastic import build_ucd, equilibrium_track

    num = cfg.numerics
    grid = num.grid()
    if cfg.setting == "quantum":
        _, _, _, track = quantum_track(cfg)
        flow = flow_fields(track, num.floor, num.v_max)
        term = {"cd": build_cd_term, "ff": lambda f: build_ff_potential(f, cfg.potential.mass)}.get(
            cfg.shortcut, lambda f: None)(flow)
    elif cfg.setting == "classical":
        cflow = classical_flow_fields(shell_track(cfg.driven, num.action, cfg.mesh()))
        flow = cflow.on_grid(grid)
        cd, ff = classical_shortcuts(cflow, grid, cfg.potential.mass)
        term = {"cd": cd, "ff": ff}.get(cfg.shortcut)
    else:
        flow = flow_fields(equilibrium_track(cfg.driven, cfg.bath, grid, cfg.mesh()), num.floor, num.v_max)
        term = build_ucd(flow, cfg.bath) if cfg.shortcut == "ucd" else None
    return flow, term


def _static_artifact(args, cfg: ExperimentConfig, out) -> RunManifest:
    name = args.name or args.command
    t0 = time.perf_counter()
    manifest = RunManifest(name, config_to_dict(cfg), __version__)
    meta = _meta(cfg, shortcut=cfg.shortcut)
    if args.command == "eigensolve":
        from .pipeline import QuantumResult

        grid, mesh, snaps, track = quantum_track(cfg)
        res = QuantumResult(cfg, grid, mesh, snaps, track, None)
        manifest.outputs = write_quantum(res, out, name, ("eigen",))
        energies = [s.energy for s in snaps]
        manifest.diagnostics = {"energy_min": min(energies), "energy_max": max(energies)}
    else:
        flow, term = _flow_and_term(cfg)
        if args.command == "flow":
            manifest.outputs = [str(write_flow(flow, out / f"{name}_flow.csv", meta))]
            manifest.diagnostics = {"cap_events": flow.cap_events}
        else:
            if term is None:
                raise ConfigError("shortcut: config selects no shortcut ('none')")
            manifest.outputs = [str(write_term(term, out / f"{name}_shortcut.csv", meta))]
    manifest.wall_time = time.perf_counter() - t0
    manifest.write(out)
    return manifest


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reproduce":
            out = output_dir(args.out)
            overrides = {k: v for k, v in (("seed", args.seed), ("dt", args.dt), ("n_points", args.grid))
                         if v is not None}
            figures = FIGURES if args.figure == "all" else (args.figure,)
            ok = True
            for fig in figures:
                m = reproduce(fig, out, **overrides)
                for flag, value in m.acceptance.items():
                    print(f"{fig}: {flag} = {value}")
                    ok &= bool(value)
                print(f"{fig}: wrote {', '.join(m.outputs)} ({m.wall_time:.1f} s)")
            return 0 if ok else 1
        cfg = _config(args)
        if args.command == "validate":
            report = validate(cfg)
            print("\n".join(report.lines()))
            return 0 if report.ok else 1
        out = output_dir(args.out)
        if args.command in ("eigensolve", "flow", "shortcut"):
            m = _static_artifact(args, cfg, out)
        else:
            if args.command == "stochastic" and args.positions and "positions" not in cfg.outputs.files:
                cfg = replace(cfg, outputs=replace(cfg.outputs, files=cfg.outputs.files + ("positions",)))
            if args.command == "evolve" and "fidelity" not in cfg.outputs.files:
                cfg = replace(cfg, outputs=replace(cfg.outputs, files=cfg.outputs.files + ("fidelity",)))
            m = run(cfg, out, args.name or args.command)
        for key, value in m.diagnostics.items():
            print(f"{key}: {value}")
        print(f"wrote {', '.join(m.outputs)} ({m.wall_time:.1f} s)")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FlowShortcutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
