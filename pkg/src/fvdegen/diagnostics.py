"""Entropy, dissipation, L1 distances, decay-rate fits and refinement studies."""

from __future__ import annotations

import csv
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .flux import FluxScheme
from .mesh import Mesh1D, MeshND, as_meshnd, restrict_halving
from .model import ProblemModel
from .solver import PERIODIC, SolverConfig, State, Stepper, cfl_dt, project_initial, run

# floor substituted for a zero equilibrium value when h(0+) = -inf
EQ_FLOOR = 1e-30


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    entropy: float
    dissipation: float
    l1_to_equilibrium: float

    def as_row(self) -> tuple[float, ...]:
        return (self.time, self.mass, self.entropy, self.dissipation, self.l1_to_equilibrium)


DIAGNOSTICS_HEADER = ("time", "mass", "entropy", "dissipation", "l1_to_equilibrium")


@dataclass
class EntropyReport:
    value: float
    degenerate_cells: int = 0


def _values(x) -> np.ndarray:
    """Array view of a state, an equilibrium profile or a plain array."""
    return np.asarray(getattr(x, "values", x), dtype=float)


def discrete_mass(values, mesh) -> float:
    mesh = as_meshnd(mesh)
    return float(np.sum(mesh.cell_volumes * _values(values)))


def equilibrium_slope(model: ProblemModel, ueq: np.ndarray, potential: np.ndarray | None = None) -> np.ndarray:
    """Entropy slope ``H'(Ueq)`` used in the relative entropy.

    Where ``Ueq > 0`` this is ``htilde(Ueq)``. In vacuum cells (``Ueq = 0``)
    with a finite ``h(0+)`` and a known potential, the subgradient
    ``C - V_i <= h(0+)`` is used instead, where ``C = htilde(Ueq) + V`` is the
    equilibrium level; the divergence then equals the free energy
    difference ``sum m(K) [H(U) + V U] - [H(Ueq) + V Ueq]``. Without a
    potential the literal ``h(0+)`` is used. If ``h(0+) = -inf`` the slope is
    evaluated at ``EQ_FLOOR``.
    """
    pos = ueq > 0.0
    base = np.where(pos, ueq, EQ_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.asarray(model.htilde(model.clamp_for_htilde(base)), dtype=float)
    if pos.all() or not np.isfinite(model.h_at_zero):
        return slope
    h0 = model.h_at_zero
    if potential is None or not pos.any():
        return np.where(pos, slope, h0)
    level = slope + potential
    C = float(level[pos][np.argmax(ueq[pos])])
    return np.where(pos, slope, np.minimum(h0, C - potential))


def entropy_density(model: ProblemModel, u: np.ndarray, ueq: np.ndarray,
                    slope: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """Pointwise Bregman divergence ``H(u) - H(ueq) - s (u - ueq)``.

    ``s`` defaults to ``H'(ueq) = htilde(ueq)`` (``h(0+)`` on vacuum cells).
    Also returns the number of cells evaluated at the zero-equilibrium floor.
    """
    if model.H is None:
        raise ValueError(f"model {model.name} has no entropy H")
    n_deg = 0 if np.isfinite(model.h_at_zero) else int(np.count_nonzero(ueq <= 0.0))
    if slope is None:
        slope = equilibrium_slope(model, ueq)
    dens = model.H(u) - model.H(ueq) - slope * (u - ueq)
    return dens, n_deg


def potential_at_centers(model: ProblemModel, mesh) -> np.ndarray | None:
    if model.V is None:
        return None
    mesh = as_meshnd(mesh)
    return np.broadcast_to(np.asarray(model.V(*mesh.centers), dtype=float), mesh.shape)


def discrete_entropy(state, equilibrium, model: ProblemModel, mesh, report: bool = False,
                     literal: bool = False, slope: np.ndarray | None = None):
    """``sum_i m(K_i) [H(U_i) - H(Ueq_i) - h(Ueq_i)(U_i - Ueq_i)]``.

    On vacuum cells of the equilibrium the slope follows
    :func:`equilibrium_slope` unless ``literal`` is set. With ``report=True``
    an :class:`EntropyReport` carrying the number of cells evaluated at the
    zero-equilibrium floor is returned.
    """
    mesh = as_meshnd(mesh)
    u = _values(state).reshape(mesh.shape)
    ueq = _values(equilibrium).reshape(mesh.shape)
    if slope is None:
        slope = equilibrium_slope(model, ueq, None if literal else potential_at_centers(model, mesh))
    dens, n_deg = entropy_density(model, u, ueq, slope)
    value = float(np.sum(mesh.cell_volumes * dens))
    return EntropyReport(value, n_deg) if report else value


def dissipation_from_stepper(stepper: Stepper) -> float:
    """Dissipation from the interface data cached by ``stepper.rhs(..., keep=True)``.

    ``sum dist * face_area * A**2 * min(f(u-), f(u+))`` over interfaces that
    carry flux; ``f`` is the identity for linear convection.
    """
    if stepper.last is None:
        raise ValueError("no cached interface data; call rhs(U, keep=True) first")
    model = stepper.model
    total = 0.0
    for geo, fl in zip(stepper.geometry, stepper.last):
        if model.linear_convection:
            mob = np.minimum(fl.u_minus, fl.u_plus)
        else:
            mob = np.minimum(model.f(fl.u_minus), model.f(fl.u_plus))
        w = fl.A * fl.A * mob * geo.dist
        w[~geo.left_active, 0] = 0.0
        w[~geo.right_active, -1] = 0.0
        if geo.left.kind == PERIODIC:
            w[:, -1] = 0.0  # duplicate of interface 0
        total += float(np.sum(geo.face_area * w.sum(axis=1)))
    return total


def discrete_dissipation(state, model: ProblemModel, mesh, bc, flux_scheme: FluxScheme) -> float:
    stepper = Stepper(model, mesh, bc, flux_scheme)
    stepper.rhs(_values(state).reshape(stepper.mesh.shape), keep=True)
    return dissipation_from_stepper(stepper)


def l1_distance(a, b, mesh) -> float:
    mesh = as_meshnd(mesh)
    a = _values(a)
    b = _values(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(mesh.cell_volumes * np.abs(a.reshape(mesh.shape) - b.reshape(mesh.shape))))


def make_record(t: float, U: np.ndarray, eq: np.ndarray | None, stepper: Stepper,
                slope: np.ndarray | None = None) -> DiagnosticsRecord:
    mesh = stepper.mesh
    model = stepper.model
    mass = float(np.sum(mesh.cell_volumes * U))
    if eq is not None and model.H is not None:
        entropy = discrete_entropy(U, eq, model, mesh, slope=slope)
    else:
        entropy = math.nan
    l1 = l1_distance(U, eq, mesh) if eq is not None else math.nan
    diss = dissipation_from_stepper(stepper) if stepper.last is not None else math.nan
    return DiagnosticsRecord(float(t), mass, entropy, diss, l1)


# ---------------------------------------------------------------------------
# decay rates


@dataclass(frozen=True)
class DecayFit:
    rate: float
    residual: float
    n_points: int
    window: tuple[float, float]


def default_window(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Middle half of the run, cut where values reach the round-off floor of ``values[0]``.

    If the floor is reached before the middle half starts, the window is the
    resolved part ``[t0, t_floor]``.
    """
    t0, t1 = float(times[0]), float(times[-1])
    lo = t0 + 0.25 * (t1 - t0)
    hi = t0 + 0.75 * (t1 - t0)
    floor = 100.0 * np.spacing(abs(float(values[0])))
    below = np.flatnonzero(values <= floor)
    if below.size:
        hi = min(hi, float(times[below[0]]))
        if hi <= lo:
            lo = t0
    return lo, hi


def fit_decay_rate(series: Sequence[tuple[float, float]] | np.ndarray,
                   window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares fit ``log v = c - rate * t`` over ``window``.

    ``residual`` is the RMS deviation of ``log v`` from the fitted line.
    """
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("series must be a sequence of (time, value) pairs")
    t, v = data[:, 0], data[:, 1]
    if window is None:
        window = default_window(t, v)
    sel = (t >= window[0]) & (t <= window[1])
    t, v = t[sel], v[sel]
    if t.size < 5:
        raise ValueError(f"window {window} holds {t.size} points; need at least 5")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValueError("values in the fit window must be positive and finite")
    y = np.log(v)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    return DecayFit(float(-slope), float(np.sqrt(np.mean(resid**2))), int(t.size), (float(window[0]), float(window[1])))


# ---------------------------------------------------------------------------
# refinement studies


@dataclass
class ConvergenceRow:
    n_cells: int
    l1_error: float
    order: float | None


@dataclass
class ConvergenceTable:
    """``l1_error`` of row ``N`` is ``||restrict(u_N) - u_{N/2}||_1``."""

    rows: list[ConvergenceRow] = field(default_factory=list)

    @classmethod
    def from_errors(cls, n_cells: Sequence[int], errors: Sequence[float]) -> ConvergenceTable:
        rows = []
        for i, (n, e) in enumerate(zip(n_cells, errors)):
            order = None
            if i > 0 and errors[i - 1] > 0 and e > 0:
                order = math.log2(errors[i - 1] / e)
            rows.append(ConvergenceRow(int(n), float(e), order))
        return cls(rows)

    @property
    def orders(self) -> list[float]:
        return [r.order for r in self.rows if r.order is not None]

    @property
    def finest_order(self) -> float | None:
        return self.rows[-1].order if self.rows else None

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("n_cells", "l1_error", "order"))
            for r in self.rows:
                w.writerow((r.n_cells, _fmt(r.l1_error), "" if r.order is None else _fmt(r.order)))

    def __str__(self) -> str:
        lines = [f"{'n_cells':>8} {'l1_error':>12} {'order':>6}"]
        for r in self.rows:
            o = "" if r.order is None else f"{r.order:6.2f}"
            lines.append(f"{r.n_cells:>8} {r.l1_error:12.4e} {o}")
        return "\n".join(lines)


@dataclass
class Problem:
    """Everything needed to run one level of a refinement study."""

    model: ProblemModel
    mesh: MeshND | Mesh1D
    bc: object
    u0: Callable[..., np.ndarray]
    t_final: float


def refinement_dt(problem: Problem, initial: State, diffusive_fraction: float = 0.25,
                  cfl_fraction: float = 0.2) -> float:
    """Step for one refinement level: proportional to ``dx**2`` on every level.

    ``dt = diffusive_fraction * dx**2 / (dim * max r'(U0))``, further capped by
    ``cfl_fraction * cfl_dt(U0)``, then shrunk so an integer number of steps
    lands on ``t_final``. Keeping ``dt / dx**2`` fixed makes the time error
    scale like the spatial error of a second-order scheme.
    """
    mesh = as_meshnd(problem.mesh)
    dx2 = min(float(ax.widths.min()) ** 2 for ax in mesh.axes)
    rmax = float(np.max(problem.model.r_prime(initial.values)))
    dt = diffusive_fraction * dx2 / (mesh.dim * rmax) if rmax > 0 else math.inf
    if problem.model.linear_convection:
        dt = min(dt, cfl_fraction * cfl_dt(initial, problem.model, mesh, problem.bc))
    if not math.isfinite(dt):
        dt = diffusive_fraction * math.sqrt(dx2)
    if problem.t_final > 0:
        steps = math.ceil(problem.t_final / dt - 1e-9)
        dt = problem.t_final / steps
    return dt


def convergence_study(setup: Callable[[int], Problem], flux_scheme: FluxScheme, levels: Sequence[int],
                      dt_rule: Callable[[Problem, State], float] | float | None = None,
                      on_level: Callable[[int, float, int], None] | None = None) -> ConvergenceTable:
    """Run every level and compare each with the previous (coarser) one.

    ``levels`` must be successive doublings. ``dt_rule`` is a fixed step, a
    callable ``(problem, initial) -> dt`` or ``None`` for :func:`refinement_dt`.
    """
    levels = [int(n) for n in levels]
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    for a, b in zip(levels, levels[1:]):
        if b != 2 * a:
            raise ValueError(f"levels must double: {a} -> {b}")
    finals = []
    for n in levels:
        prob = setup(n)
        initial = project_initial(prob.u0, prob.mesh)
        if dt_rule is None:
            dt = refinement_dt(prob, initial)
        elif callable(dt_rule):
            dt = dt_rule(prob, initial)
        else:
            dt = float(dt_rule)
        cfg = SolverConfig(flux_scheme=flux_scheme, dt=dt, t_final=prob.t_final)
        res = run(cfg, prob.model, prob.mesh, prob.bc, initial, record=False)
        if on_level is not None:
            on_level(n, dt, res.steps)
        finals.append((as_meshnd(prob.mesh), res.final.values))
    errors = []
    for (cm, cu), (fm, fu) in zip(finals, finals[1:]):
        errors.append(l1_distance(restrict_halving(fu, fm), cu, cm))
    return ConvergenceTable.from_errors(levels[1:], errors)


# ---------------------------------------------------------------------------
# CSV output


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_diagnostics_csv(records: Iterable[DiagnosticsRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAGNOSTICS_HEADER)
        for r in records:
            w.writerow([_fmt(x) for x in r.as_row()])


def read_diagnostics_csv(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != DIAGNOSTICS_HEADER:
        raise ValueError(f"{path}: unexpected header")
    return [DiagnosticsRecord(*map(float, r)) for r in rows[1:]]
