"""Run configurations: presets, INI serialisation and validation.

The file format is flat ``key = value`` sections::

    [run]      name
    [model]    name plus numeric parameters (m, k, gamma, epsilon, drift, exponent, ...)
    [mesh]     lower, upper, cells (comma lists, one entry per axis)
    [boundary] x_left, x_right, y_left, ... (periodic | neumann | outflow | dirichlet:VALUE)
    [initial]  profile plus its numeric parameters
    [solver]   flux, dt, dt_mode, t_final, cfl_safety, record_every, snapshot_times
    [study]    equilibrium, levels, epsilons
    [output]   directory
"""

from __future__ import annotations

import configparser
import io
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace

import numpy as np

from . import model as models
from .flux import FluxKind, FluxScheme
from .mesh import MeshND, build_cartesian, build_uniform_1d
from .solver import BoundaryCondition, dirichlet, neumann, outflow, periodic


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(path, message)`` pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{p}: {m}" for p, m in problems))


MODEL_NAMES = ("porous_media", "fermion", "boson", "linear_drift_power", "threshold_cubic",
               "buckley_leverett", "drift_diffusion")
MODEL_PARAMS = {
    "porous_media": {"m"},
    "fermion": set(),
    "boson": set(),
    "linear_drift_power": {"exponent", "drift"},
    "threshold_cubic": {"drift"},
    "buckley_leverett": {"epsilon"},
    "drift_diffusion": {"gamma", "contact_fraction"},
}
EQUILIBRIA = ("none", "barenblatt", "fermi_bose", "thermal")
DT_MODES = ("fixed", "cfl_auto")
AXES = "xyz"


# ---------------------------------------------------------------------------
# initial data


def _sine(offset: float = 0.5, amplitude: float = 0.5):
    return lambda x, *rest: offset + amplitude * np.sin(np.pi * x)


def _double_indicator(inner: float = 0.7, outer: float = 3.7):
    return lambda x, *rest: ((np.abs(x) > inner) & (np.abs(x) < outer)).astype(float)


def _bump(dx, dy, radius2):
    q = radius2 - dx * dx - dy * dy
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(q > 0, np.exp(-1.0 / np.where(q > 0, q, 1.0)), 0.0)


def _two_bumps(shift: float = 2.0, radius2: float = 6.0):
    return lambda x, y: _bump(x - shift, y + shift, radius2) + _bump(x + shift, y - shift, radius2)


def _four_gaussians(shift: float = 2.0):
    centres = [(1, 1, 1), (-1, -1, -1), (1, -1, 1), (-1, 1, -1)]

    def u0(x, y, z):
        total = 0.0
        for cx, cy, cz in centres:
            r2 = (x - shift * cx) ** 2 + (y - shift * cy) ** 2 + (z - shift * cz) ** 2
            total = total + np.exp(-0.5 * r2)
        return total / (2.0 * math.sqrt(2.0 * math.pi))

    return u0


def _ramp(width: float = 1.0 / 3.0):
    return lambda x, *rest: np.where(x <= width, 1.0 - x / width, 0.0)


INITIAL_PROFILES: dict[str, tuple[Callable, set[str]]] = {
    "sine": (_sine, {"offset", "amplitude"}),
    "double_indicator": (_double_indicator, {"inner", "outer"}),
    "two_bumps": (_two_bumps, {"shift", "radius2"}),
    "four_gaussians": (_four_gaussians, {"shift"}),
    "ramp": (_ramp, {"width"}),
    "pn_steps": (None, set()),
}


# ---------------------------------------------------------------------------
# the configuration record


def _freeze(d: Mapping[str, float]) -> tuple[tuple[str, float], ...]:
    return tuple(sorted((str(k), float(v)) for k, v in d.items()))


@dataclass(frozen=True)
class RunConfig:
    name: str
    model: str
    model_params: tuple[tuple[str, float], ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    cells: tuple[int, ...]
    boundary: tuple[str, ...]
    initial: str
    initial_params: tuple[tuple[str, float], ...] = ()
    flux: str = "fu2"
    dt: float | None = None
    dt_mode: str = "fixed"
    t_final: float = 0.0
    cfl_safety: float = 1.0
    record_every: int = 1
    snapshot_times: tuple[float, ...] = ()
    equilibrium: str = "none"
    levels: tuple[int, ...] = ()
    epsilons: tuple[float, ...] = ()
    out: str = "out"

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def params(self) -> dict[str, float]:
        return dict(self.model_params)

    def with_updates(self, **changes) -> RunConfig:
        for key in ("model_params", "initial_params"):
            if key in changes and isinstance(changes[key], Mapping):
                changes[key] = _freeze(changes[key])
        return replace(self, **changes)

    # -- validation -----------------------------------------------------

    def problems(self) -> list[tuple[str, str]]:
        out: list[tuple[str, str]] = []
        add = lambda path, msg: out.append((path, msg))  # noqa: E731
        if self.model not in MODEL_NAMES:
            add("model.name", f"unknown model {self.model!r}; expected one of {', '.join(MODEL_NAMES)}")
        else:
            extra = set(self.params) - MODEL_PARAMS[self.model]
            for k in sorted(extra):
                add(f"model.{k}", f"not a parameter of {self.model}")
            p = self.params
            if self.model == "porous_media" and not p.get("m", 0) > 1:
                add("model.m", "porous media exponent must exceed 1")
            if self.model == "buckley_leverett" and not p.get("epsilon", -1) >= 0:
                add("model.epsilon", "must be >= 0")
            if self.model == "linear_drift_power" and not p.get("exponent", 0) >= 1:
                add("model.exponent", "must be >= 1")
            if self.model == "drift_diffusion":
                if not p.get("gamma", 0) > 1:
                    add("model.gamma", "must exceed 1")
                if self.initial != "pn_steps":
                    add("initial.profile", "drift_diffusion runs start from pn_steps")
        dims = {len(self.lower), len(self.upper), len(self.cells)}
        if len(dims) != 1 or not 1 <= len(self.cells) <= 3:
            add("mesh", "lower, upper and cells need the same length, between 1 and 3")
        else:
            for i, (a, b, n) in enumerate(zip(self.lower, self.upper, self.cells)):
                if not (math.isfinite(a) and math.isfinite(b) and a < b):
                    add(f"mesh.lower[{i}]", f"need lower < upper, got {a} and {b}")
                if n < 1:
                    add(f"mesh.cells[{i}]", "must be >= 1")
            if len(self.boundary) != 2 * len(self.cells):
                add("boundary", f"need {2 * len(self.cells)} sides, got {len(self.boundary)}")
        for i, spec in enumerate(self.boundary):
            side = f"boundary.{_side_name(i)}"
            try:
                parse_boundary(spec)
            except ValueError as exc:
                add(side, str(exc))
        for k in range(len(self.boundary) // 2):
            lo, hi = self.boundary[2 * k: 2 * k + 2]
            if (lo == "periodic") != (hi == "periodic"):
                add(f"boundary.{AXES[k]}_right", "periodic must be set on both sides of an axis")
        if self.initial not in INITIAL_PROFILES:
            add("initial.profile", f"unknown profile {self.initial!r}; expected one of {', '.join(INITIAL_PROFILES)}")
        else:
            allowed = INITIAL_PROFILES[self.initial][1]
            for k, _ in self.initial_params:
                if k not in allowed:
                    add(f"initial.{k}", f"not a parameter of {self.initial}")
        try:
            kind = FluxKind(self.flux)
            if self.model in ("fermion", "boson", "buckley_leverett") and kind in (FluxKind.CU, FluxKind.SGEXT):
                add("solver.flux", f"{self.flux} needs linear convection; {self.model} is nonlinear")
        except ValueError:
            add("solver.flux", f"unknown flux {self.flux!r}; expected fu1, fu2, cu or sgext")
        if self.dt_mode not in DT_MODES:
            add("solver.dt_mode", "must be fixed or cfl_auto")
        if self.dt_mode == "fixed" and not (self.dt is not None and self.dt > 0):
            add("solver.dt", "must be > 0 in fixed mode")
        if self.dt_mode == "cfl_auto" and self.model in ("fermion", "boson", "buckley_leverett", "drift_diffusion"):
            add("solver.dt_mode", "cfl_auto covers scalar linear-convection models only")
        if not (self.t_final >= 0 and math.isfinite(self.t_final)):
            add("solver.t_final", "must be a finite number >= 0")
        if not 0 < self.cfl_safety <= 1:
            add("solver.cfl_safety", "must lie in (0, 1]")
        if self.record_every < 1:
            add("solver.record_every", "must be >= 1")
        if any(not (0 <= t <= self.t_final) for t in self.snapshot_times):
            add("solver.snapshot_times", "times must lie in [0, t_final]")
        if self.equilibrium not in EQUILIBRIA:
            add("study.equilibrium", f"must be one of {', '.join(EQUILIBRIA)}")
        elif self.equilibrium == "thermal" and self.model != "drift_diffusion":
            add("study.equilibrium", "thermal equilibrium belongs to drift_diffusion")
        elif self.equilibrium == "barenblatt" and self.model != "porous_media":
            add("study.equilibrium", "barenblatt needs the porous_media model")
        elif self.equilibrium == "fermi_bose" and self.model not in ("fermion", "boson"):
            add("study.equilibrium", "fermi_bose needs the fermion or boson model")
        for a, b in zip(self.levels, self.levels[1:]):
            if b != 2 * a:
                add("study.levels", "levels must be successive doublings")
                break
        if any(e < 0 for e in self.epsilons):
            add("study.epsilons", "must be >= 0")
        if not self.out:
            add("output.directory", "must not be empty")
        return out

    def validate(self) -> RunConfig:
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    # -- builders ---------------------------------------------------------

    def build_model(self, epsilon: float | None = None) -> models.ProblemModel:
        p = self.params
        if self.model == "porous_media":
            return models.porous_media(p["m"])
        if self.model in ("fermion", "boson"):
            return models.fokker_planck(-1 if self.model == "fermion" else 1)
        if self.model == "linear_drift_power":
            return models.linear_drift_power_diffusion(p.get("exponent", 2.0), p.get("drift", 1.0))
        if self.model == "threshold_cubic":
            return models.threshold_cubic_diffusion(p.get("drift", 1.0))
        if self.model == "buckley_leverett":
            return models.buckley_leverett(p.get("epsilon", 0.0) if epsilon is None else epsilon)
        raise ValueError(f"{self.model} is not a scalar model")

    def build_mesh(self, cells: tuple[int, ...] | None = None) -> MeshND:
        cells = self.cells if cells is None else cells
        return build_cartesian([build_uniform_1d(a, b, n) for a, b, n in zip(self.lower, self.upper, cells)])

    def build_bc(self) -> tuple[tuple[BoundaryCondition, BoundaryCondition], ...]:
        sides = [parse_boundary(s) for s in self.boundary]
        return tuple((sides[2 * k], sides[2 * k + 1]) for k in range(self.dim))

    def build_initial(self) -> Callable[..., np.ndarray]:
        factory, _ = INITIAL_PROFILES[self.initial]
        if factory is None:
            raise ValueError(f"profile {self.initial} is not a pointwise function")
        return factory(**dict(self.initial_params))

    def scheme(self) -> FluxScheme:
        return FluxScheme.parse(self.flux)

    # -- serialisation ----------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {"name": self.name}
        cp["model"] = {"name": self.model, **{k: _num(v) for k, v in self.model_params}}
        cp["mesh"] = {
            "lower": _join(self.lower), "upper": _join(self.upper), "cells": ", ".join(map(str, self.cells)),
        }
        cp["boundary"] = {_side_name(i): s for i, s in enumerate(self.boundary)}
        cp["initial"] = {"profile": self.initial, **{k: _num(v) for k, v in self.initial_params}}
        cp["solver"] = {
            "flux": self.flux,
            "dt": "" if self.dt is None else _num(self.dt),
            "dt_mode": self.dt_mode,
            "t_final": _num(self.t_final),
            "cfl_safety": _num(self.cfl_safety),
            "record_every": str(self.record_every),
            "snapshot_times": _join(self.snapshot_times),
        }
        cp["study"] = {
            "equilibrium": self.equilibrium,
            "levels": ", ".join(map(str, self.levels)),
            "epsilons": _join(self.epsilons),
        }
        cp["output"] = {"directory": self.out}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> RunConfig:
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError([("file", str(exc).splitlines()[0])]) from None
        problems: list[tuple[str, str]] = []
        for sec in ("model", "mesh", "boundary", "initial", "solver"):
            if not cp.has_section(sec):
                problems.append((sec, "missing section"))
        if problems:
            raise ConfigError(problems)
        get = _Getter(cp, problems)
        model_sec = dict(cp["model"])
        init_sec = dict(cp["initial"])
        bsec = cp["boundary"]
        boundary = []
        for i in range(2 * 3):
            key = _side_name(i)
            if key in bsec:
                boundary.append(bsec[key].strip())
        for key in bsec:
            if key not in [_side_name(i) for i in range(6)]:
                problems.append((f"boundary.{key}", "unknown side; use x_left, x_right, y_left, ..."))
        cfg = cls(
            name=get.str("run", "name", "custom"),
            model=model_sec.pop("name", "").strip(),
            model_params=_freeze({k: get.float("model", k) for k in model_sec}),
            lower=get.floats("mesh", "lower"),
            upper=get.floats("mesh", "upper"),
            cells=get.ints("mesh", "cells"),
            boundary=tuple(boundary),
            initial=init_sec.pop("profile", "").strip(),
            initial_params=_freeze({k: get.float("initial", k) for k in init_sec}),
            flux=get.str("solver", "flux", "fu2").lower(),
            dt=get.opt_float("solver", "dt"),
            dt_mode=get.str("solver", "dt_mode", "fixed"),
            t_final=get.float("solver", "t_final"),
            cfl_safety=get.float("solver", "cfl_safety", 1.0),
            record_every=get.int("solver", "record_every", 1),
            snapshot_times=get.floats("solver", "snapshot_times", ()),
            equilibrium=get.str("study", "equilibrium", "none"),
            levels=get.ints("study", "levels", ()),
            epsilons=get.floats("study", "epsilons", ()),
            out=get.str("output", "directory", "out"),
        )
        if problems:
            # report semantic problems too, except on fields that failed to parse
            bad = {path.split("[")[0] for path, _ in problems}
            problems += [pr for pr in cfg.problems()
                         if not any(b.startswith(pr[0].split("[")[0]) for b in bad)]
            raise ConfigError(problems)
        return cfg


class _Getter:
    _MISSING = object()

    def __init__(self, cp: configparser.ConfigParser, problems: list):
        self.cp = cp
        self.problems = problems

    def _raw(self, sec, key, default):
        if self.cp.has_option(sec, key):
            return self.cp.get(sec, key).strip()
        if default is self._MISSING:
            self.problems.append((f"{sec}.{key}", "missing"))
            return None
        return default

    def str(self, sec, key, default=_MISSING):
        v = self._raw(sec, key, default)
        return "" if v is None else v

    def _conv(self, sec, key, raw, fn, label):
        try:
            return fn(raw)
        except (TypeError, ValueError):
            self.problems.append((f"{sec}.{key}", f"not {label}: {raw!r}"))
            return None

    def float(self, sec, key, default=_MISSING):
        raw = self._raw(sec, key, default)
        if raw is None or not isinstance(raw, str):
            return math.nan if raw is None else raw
        v = self._conv(sec, key, raw, float, "a number")
        return math.nan if v is None else v

    def opt_float(self, sec, key):
        raw = self._raw(sec, key, "")
        return None if raw == "" else self._conv(sec, key, raw, float, "a number")

    def int(self, sec, key, default=_MISSING):
        raw = self._raw(sec, key, default)
        if raw is None or not isinstance(raw, str):
            return 0 if raw is None else raw
        v = self._conv(sec, key, raw, int, "an integer")
        return 0 if v is None else v

    def floats(self, sec, key, default=_MISSING):
        raw = self._raw(sec, key, default)
        if raw is None or not isinstance(raw, str):
            return () if raw is None else tuple(raw)
        if not raw:
            return ()
        v = self._conv(sec, key, raw, lambda s: tuple(float(p) for p in s.split(",")), "a list of numbers")
        return () if v is None else v

    def ints(self, sec, key, default=_MISSING):
        raw = self._raw(sec, key, default)
        if raw is None or not isinstance(raw, str):
            return () if raw is None else tuple(raw)
        if not raw:
            return ()
        v = self._conv(sec, key, raw, lambda s: tuple(int(p) for p in s.split(",")), "a list of integers")
        return () if v is None else v


def _side_name(i: int) -> str:
    return f"{AXES[i // 2]}_{'left' if i % 2 == 0 else 'right'}"


def _num(x: float) -> str:
    return repr(float(x))


def _join(xs) -> str:
    return ", ".join(_num(x) for x in xs)


def parse_boundary(spec: str) -> BoundaryCondition:
    s = spec.strip().lower()
    if s == "periodic":
        return periodic()
    if s in ("neumann", "zero_flux"):
        return neumann()
    if s == "outflow":
        return outflow()
    if s.startswith("dirichlet:"):
        try:
            return dirichlet(float(s.split(":", 1)[1]))
        except ValueError:
            raise ValueError(f"bad dirichlet value in {spec!r}") from None
    raise ValueError(f"unknown boundary {spec!r}; use periodic, neumann, outflow or dirichlet:VALUE")


def format_boundary(bc: BoundaryCondition) -> str:
    return f"dirichlet:{bc.value!r}" if bc.kind == "dirichlet" else bc.kind


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([("config", f"cannot read {path}: {exc.strerror}")]) from None
    return RunConfig.from_ini(text)


# ---------------------------------------------------------------------------
# presets


def _preset_table(full: bool) -> dict[str, RunConfig]:
    ex7_cells, ex7_t = ((40, 40, 40), 10.0) if full else ((20, 20, 20), 2.0)
    return {
        "example1": RunConfig(
            "example1", "linear_drift_power", _freeze({"exponent": 2.0, "drift": 1.0}),
            (-1.0,), (1.0,), (100,), ("periodic", "periodic"), "sine",
            _freeze({"offset": 0.5, "amplitude": 0.5}), flux="fu2", dt=1e-6, t_final=0.1,
            record_every=1000, levels=(100, 200, 400, 800, 1600)),
        "example2": RunConfig(
            "example2", "threshold_cubic", _freeze({"drift": 1.0}),
            (-1.0,), (1.0,), (100,), ("periodic", "periodic"), "sine",
            _freeze({"offset": 1.0, "amplitude": 0.5}), flux="fu2", dt=1e-6, t_final=0.01,
            record_every=100, levels=(100, 200, 400, 800, 1600)),
        "example3": RunConfig(
            "example3", "drift_diffusion", _freeze({"gamma": 2.0}),
            (0.0,), (1.0,), (64,), ("dirichlet:0", "dirichlet:1"), "pn_steps",
            flux="fu2", dt=5e-5, t_final=10.0, record_every=100, equilibrium="thermal"),
        "example4": RunConfig(
            "example4", "drift_diffusion", _freeze({"gamma": 2.0, "contact_fraction": 0.5}),
            (0.0, 0.0), (1.0, 1.0), (32, 32), ("dirichlet:0", "dirichlet:1", "neumann", "neumann"),
            "pn_steps", flux="fu2", dt=1e-4, t_final=10.0, record_every=100, equilibrium="thermal"),
        "example5": RunConfig(
            "example5", "porous_media", _freeze({"m": 5.0}),
            (-5.5,), (5.5,), (160,), ("neumann", "neumann"), "double_indicator",
            _freeze({"inner": 0.7, "outer": 3.7}), flux="fu2", dt=1e-4, t_final=10.0,
            record_every=10, equilibrium="barenblatt"),
        "example6": RunConfig(
            "example6", "porous_media", _freeze({"m": 4.0}),
            (-10.0, -10.0), (10.0, 10.0), (200, 200), ("neumann",) * 4, "two_bumps",
            _freeze({"shift": 2.0, "radius2": 6.0}), flux="fu2", dt=1e-4, t_final=10.0,
            record_every=100, equilibrium="barenblatt"),
        "example7": RunConfig(
            "example7", "fermion", (), (-8.0,) * 3, (8.0,) * 3, ex7_cells, ("neumann",) * 6,
            "four_gaussians", _freeze({"shift": 2.0}), flux="fu2", dt=1e-4, t_final=ex7_t,
            record_every=100, equilibrium="fermi_bose"),
        "example8": RunConfig(
            "example8", "buckley_leverett", _freeze({"epsilon": 0.1}),
            (0.0,), (1.0,), (100,), ("dirichlet:1", "outflow"), "ramp",
            _freeze({"width": 1.0 / 3.0}), flux="fu2", dt=1e-4, t_final=0.2,
            record_every=100, snapshot_times=(0.1, 0.2), epsilons=(0.1, 0.01, 0.001, 0.0)),
    }


PRESET_NAMES = tuple(f"example{i}" for i in range(1, 9))


def preset(name: str, full: bool = False) -> RunConfig:
    table = _preset_table(full)
    if name not in table:
        raise ConfigError([("preset", f"unknown preset {name!r}; expected example1..example8")])
    return table[name]
