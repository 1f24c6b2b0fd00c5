"""Command-line front end: ``fvdegen {run,converge,equilibrium,compare}``.

Exit status is 0 on success, 1 for configuration errors and 2 for numerical
failures. Errors go to stderr prefixed with ``error:``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import driftdiffusion as dd
from .config import PRESET_NAMES, ConfigError, RunConfig, load_config, preset
from .diagnostics import Problem, convergence_study, discrete_mass, write_diagnostics_csv
from .equilibrium import NoEquilibriumError, barenblatt, fermi_bose, write_profile_csv
from .flux import FluxKind
from .solver import SolverConfig, StepFailure, project_initial, run, write_snapshot_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
FLUX_CHOICES = [k.value for k in FluxKind]


class _Parser(argparse.ArgumentParser):
    """Argument errors count as configuration errors (exit 1)."""

    def error(self, message):
        raise ConfigError([("argv", message)])


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fvdegen", description="Finite-volume experiments for degenerate parabolic equations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, multi_flux=False):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--preset", choices=PRESET_NAMES)
        src.add_argument("--config", type=Path, help="INI run configuration")
        if multi_flux:
            sp.add_argument("--flux", default=None, help="comma list of fu1,fu2,cu,sgext (default: all that apply)")
        else:
            sp.add_argument("--flux", choices=FLUX_CHOICES)
        sp.add_argument("--out", type=Path, help="output directory (default: from the config)")
        sp.add_argument("--full", action="store_true", help="full-size example 7")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--tfinal", type=float)

    common(sub.add_parser("run", help="run one configuration"))
    conv = sub.add_parser("converge", help="mesh refinement study")
    common(conv)
    conv.add_argument("--levels", help="comma list of doubling cell counts")
    common(sub.add_parser("equilibrium", help="write the steady state matching the initial mass"))
    common(sub.add_parser("compare", help="run several flux schemes"), multi_flux=True)
    return p


def _resolve(args) -> RunConfig:
    cfg = preset(args.preset, full=args.full) if args.preset else load_config(args.config)
    changes = {}
    if getattr(args, "flux", None) and args.command != "compare":
        changes["flux"] = args.flux
    if args.dt is not None:
        changes["dt"] = args.dt
        changes["dt_mode"] = "fixed"
    if args.tfinal is not None:
        changes["t_final"] = args.tfinal
        changes["snapshot_times"] = tuple(t for t in cfg.snapshot_times if t <= args.tfinal)
    if args.out is not None:
        changes["out"] = str(args.out)
    if getattr(args, "levels", None):
        try:
            changes["levels"] = tuple(int(s) for s in args.levels.split(","))
        except ValueError:
            raise ConfigError([("argv.levels", f"not a list of integers: {args.levels!r}")]) from None
    return cfg.with_updates(**changes).validate()


# ---------------------------------------------------------------------------
# runners


def _equilibrium_for(cfg: RunConfig, mesh, u0: np.ndarray):
    if cfg.equilibrium == "none":
        return None
    mass = discrete_mass(u0, mesh)
    if cfg.equilibrium == "barenblatt":
        return barenblatt(mesh, cfg.params["m"], mass)
    if cfg.equilibrium == "fermi_bose":
        return fermi_bose(mesh, -1 if cfg.model == "fermion" else 1, mass)
    raise ValueError(cfg.equilibrium)


def _dd_setup(cfg: RunConfig):
    gamma = cfg.params.get("gamma", 2.0)
    if cfg.dim == 1:
        system, init = dd.pn_diode_1d(cfg.cells[0], gamma, cfg.flux)
    else:
        system, init = dd.pn_junction_2d(cfg.cells[0], gamma, cfg.flux, cfg.params.get("contact_fraction", 0.5))
    return system, init


def run_dd(cfg: RunConfig, out: Path, suffix: str = "") -> Path:
    system, init = _dd_setup(cfg)
    eq = dd.thermal_equilibrium(system.doping, system.bc, system.mesh)
    res = dd.dd_run(system, init, cfg.dt, cfg.t_final, equilibrium=eq, record_every=cfg.record_every)
    path = out / f"diagnostics{suffix}.csv"
    write_diagnostics_csv(res.records, path)
    dd.write_dd_snapshot_csv(res.final, system.mesh, out / f"final{suffix}.csv")
    return path


def run_scalar(cfg: RunConfig, out: Path, suffix: str = "", epsilon: float | None = None) -> Path:
    model = cfg.build_model(epsilon)
    mesh = cfg.build_mesh()
    initial = project_initial(cfg.build_initial(), mesh)
    eq = _equilibrium_for(cfg, mesh, initial.values)
    scfg = SolverConfig(cfg.scheme(), dt=cfg.dt, t_final=cfg.t_final, cfl_safety=cfg.cfl_safety,
                        dt_mode=cfg.dt_mode, record_every=cfg.record_every, snapshot_times=cfg.snapshot_times)
    res = run(scfg, model, mesh, cfg.build_bc(), initial, None if eq is None else eq.values)
    path = out / f"diagnostics{suffix}.csv"
    write_diagnostics_csv(res.records, path)
    for t, values in sorted(res.snapshots.items()):
        write_snapshot_csv(values, mesh, out / f"snapshot_t{t:g}{suffix}.csv")
    write_snapshot_csv(res.final.values, mesh, out / f"final{suffix}.csv")
    return path


def run_config(cfg: RunConfig, out: Path, suffix: str = "") -> list[Path]:
    """Run ``cfg`` into ``out``; Buckley-Leverett runs loop over ``cfg.epsilons``."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.to_ini())
    if cfg.model == "drift_diffusion":
        return [run_dd(cfg, out, suffix)]
    if cfg.model == "buckley_leverett" and cfg.epsilons:
        return [run_scalar(cfg, out, f"{suffix}_eps{e:g}", epsilon=e) for e in cfg.epsilons]
    return [run_scalar(cfg, out, suffix)]


def _cmd_run(cfg: RunConfig) -> None:
    for p in run_config(cfg, Path(cfg.out)):
        print(p)


def _cmd_compare(cfg: RunConfig, flux_arg: str | None) -> None:
    if flux_arg:
        fluxes = [s.strip().lower() for s in flux_arg.split(",") if s.strip()]
    elif cfg.model in ("fermion", "boson", "buckley_leverett"):
        fluxes = ["fu1", "fu2"]
    else:
        fluxes = list(FLUX_CHOICES)
    variants = [cfg.with_updates(flux=f) for f in fluxes]
    problems = [pr for v in variants for pr in v.problems()]
    if problems:
        raise ConfigError(problems)
    for v in variants:
        for p in run_config(v, Path(cfg.out), suffix=f"_{v.flux}"):
            print(p)


def _cmd_converge(cfg: RunConfig, forced_dt: float | None = None) -> None:
    if cfg.model == "drift_diffusion":
        raise ConfigError([("model.name", "convergence studies cover scalar models")])
    levels = cfg.levels or tuple(cfg.cells[0] * 2**i for i in range(4))
    if len(levels) < 2:
        raise ConfigError([("study.levels", "need at least two levels")])
    model = cfg.build_model()
    bc = cfg.build_bc()
    u0 = cfg.build_initial()

    def setup(n: int) -> Problem:
        return Problem(model, cfg.build_mesh((n,) * cfg.dim), bc, u0, cfg.t_final)

    # each level picks its own dt unless one is forced on the command line
    table = convergence_study(setup, cfg.scheme(), levels, dt_rule=forced_dt)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "convergence.csv")
    print(table)


def _cmd_equilibrium(cfg: RunConfig) -> None:
    out = Path(cfg.out)
    if cfg.model == "drift_diffusion":
        system, _ = _dd_setup(cfg)
        eq = dd.thermal_equilibrium(system.doping, system.bc, system.mesh)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "equilibrium.csv"
        write_snapshot_csv([eq.N, eq.P, eq.V], system.mesh, path, names=("N", "P", "V"))
    else:
        if cfg.equilibrium == "none":
            raise ConfigError([("study.equilibrium", f"{cfg.name} has no steady state to construct")])
        mesh = cfg.build_mesh()
        initial = project_initial(cfg.build_initial(), mesh)
        prof = _equilibrium_for(cfg, mesh, initial.values)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "equilibrium.csv"
        write_profile_csv(prof, mesh, path)
    print(path)


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = _resolve(args)
        if args.command == "run":
            _cmd_run(cfg)
        elif args.command == "compare":
            _cmd_compare(cfg, args.flux)
        elif args.command == "converge":
            _cmd_converge(cfg, args.dt)
        else:
            _cmd_equilibrium(cfg)
    except ConfigError as exc:
        for path, msg in exc.problems:
            print(f"error: config: {path}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, dd.NewtonFailure, NoEquilibriumError, FloatingPointError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
