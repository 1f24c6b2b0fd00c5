"""Semi-discrete assembly and explicit time stepping on Cartesian meshes.

Each Cartesian direction is swept with the 1D interface formula; one
forward Euler step uses the sum of all directional flux differences.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .flux import FluxKind, FluxScheme, dr_mean, lax_friedrichs, sg_flux, upwind
from .mesh import Mesh1D, MeshND, as_meshnd
from .model import ProblemModel, alpha_bound

logger = logging.getLogger(__name__)

RANGE_TOL = 1e-10

PERIODIC = "periodic"
NEUMANN = "neumann"
DIRICHLET = "dirichlet"
OUTFLOW = "outflow"
_KINDS = (PERIODIC, NEUMANN, DIRICHLET, OUTFLOW)


class StepFailure(RuntimeError):
    """A time step produced a non-finite or out-of-range value."""

    def __init__(self, message: str, step: int | None = None, cell: tuple[int, ...] | None = None,
                 value: float | None = None):
        super().__init__(message)
        self.step = step
        self.cell = cell
        self.value = value


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Condition on one side of one axis.

    ``periodic``
        wrap around (both sides of the axis).
    ``neumann``
        zero flux through the face; ghosts mirror the interior.
    ``dirichlet``
        ghosts carry ``value`` on the boundary face. ``mask`` (over the face)
        restricts the condition to part of the face; elsewhere the face is
        zero flux.
    ``outflow``
        zero-gradient mirror ghosts with the flux computed, not zeroed.
    """

    kind: str
    value: float = 0.0
    mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}; expected one of {_KINDS}")
        if self.mask is not None:
            if self.kind != DIRICHLET:
                raise ValueError("only dirichlet conditions take a mask")
            object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BoundaryCondition):
            return NotImplemented
        same_mask = (self.mask is None and other.mask is None) or (
            self.mask is not None and other.mask is not None and np.array_equal(self.mask, other.mask)
        )
        return self.kind == other.kind and self.value == other.value and same_mask

    def __hash__(self) -> int:
        return hash((self.kind, self.value))


def periodic() -> BoundaryCondition:
    return BoundaryCondition(PERIODIC)


def neumann() -> BoundaryCondition:
    return BoundaryCondition(NEUMANN)


def dirichlet(value: float, mask=None) -> BoundaryCondition:
    return BoundaryCondition(DIRICHLET, float(value), mask)


def outflow() -> BoundaryCondition:
    return BoundaryCondition(OUTFLOW)


BoundarySpec = Sequence[tuple[BoundaryCondition, BoundaryCondition]]


def normalize_bc(bc, dim: int) -> tuple[tuple[BoundaryCondition, BoundaryCondition], ...]:
    """Accept one condition for every side, one (left, right) pair for every
    axis, or a sequence of per-axis pairs."""
    if isinstance(bc, BoundaryCondition):
        pairs = [(bc, bc)] * dim
    elif len(bc) == 2 and all(isinstance(b, BoundaryCondition) for b in bc):
        pairs = [tuple(bc)] * dim
    else:
        pairs = [tuple(p) for p in bc]
    if len(pairs) != dim:
        raise ValueError(f"need boundary conditions for {dim} axes, got {len(pairs)}")
    for k, (lo, hi) in enumerate(pairs):
        if (lo.kind == PERIODIC) != (hi.kind == PERIODIC):
            raise ValueError(f"axis {k}: periodic must be declared on both sides")
    return tuple(pairs)


@dataclass
class State:
    values: np.ndarray
    time: float = 0.0

    def copy(self) -> State:
        return State(self.values.copy(), self.time)


# ---------------------------------------------------------------------------
# geometry and ghost cells


def _mirrors(kind: str) -> bool:
    return kind in (NEUMANN, OUTFLOW)


class AxisGeometry:
    """Per-axis interface data, with the swept axis moved last."""

    def __init__(self, mesh: MeshND, k: int, pair: tuple[BoundaryCondition, BoundaryCondition]):
        ax: Mesh1D = mesh.axes[k]
        self.k = k
        self.n = n = ax.n_cells
        self.left, self.right = pair
        self.widths = np.ascontiguousarray(ax.widths)
        other = [mesh.shape[i] for i in range(mesh.dim) if i != k]
        self.other_shape = tuple(other)
        self.rows = int(np.prod(other)) if other else 1

        dist = ax.interface_distances.copy()
        x = ax.centers
        a, b = ax.a, ax.b
        if self.left.kind == PERIODIC:
            wrap = (x[0] - a) + (b - x[-1])
            dist[0] = dist[-1] = wrap
            gl, gr = x[-1] - (b - a), x[0] + (b - a)
        else:
            gl = 2 * a - x[0] if _mirrors(self.left.kind) else a
            gr = 2 * b - x[-1] if _mirrors(self.right.kind) else b
            if _mirrors(self.left.kind):
                dist[0] = x[0] - gl
            if _mirrors(self.right.kind):
                dist[-1] = gr - x[-1]
        self.dist = np.ascontiguousarray(dist)
        self.coords_ext = np.concatenate([[gl], x, [gr]])

        # transverse face areas, shape (rows,)
        area = np.ones(1)
        for i in range(mesh.dim):
            if i != k:
                area = np.multiply.outer(area, mesh.axes[i].widths)
        self.face_area = np.ascontiguousarray(area.reshape(-1)) if other else np.ones(1)

        self.left_active = self._activity(self.left)
        self.right_active = self._activity(self.right)

    def _activity(self, bc: BoundaryCondition):
        """True where flux passes through the boundary face (per row)."""
        if bc.kind == NEUMANN:
            return np.zeros(self.rows, dtype=bool)
        if bc.kind == DIRICHLET and bc.mask is not None:
            mask = np.broadcast_to(bc.mask, self.other_shape) if self.other_shape else bc.mask
            return np.ascontiguousarray(np.asarray(mask, dtype=bool).reshape(self.rows))
        return np.ones(self.rows, dtype=bool)

    # -- ghost filling ---------------------------------------------------

    def extend(self, u_last: np.ndarray, left_value=None, right_value=None) -> np.ndarray:
        """Ghost-extend rows of shape (rows, n) to (rows, n+4)."""
        n = self.n
        rows = u_last.shape[0]
        out = np.empty((rows, n + 4))
        out[:, 2 : n + 2] = u_last
        i1 = min(1, n - 1)
        lbc, rbc = self.left, self.right
        if lbc.kind == PERIODIC:
            out[:, 0] = u_last[:, n - 1 - i1]
            out[:, 1] = u_last[:, n - 1]
            out[:, n + 2] = u_last[:, 0]
            out[:, n + 3] = u_last[:, i1]
            return out
        self._fill_side(out, u_last, lbc, left_value, (1, 0), (0, i1))
        self._fill_side(out, u_last, rbc, right_value, (n + 2, n + 3), (n - 1, n - 1 - i1))
        return out

    def _fill_side(self, out, u_last, bc, value, ghost, src) -> None:
        g1, g2 = ghost
        s1, s2 = src
        if bc.kind != DIRICHLET:
            out[:, g1] = u_last[:, s1]
            out[:, g2] = u_last[:, s2]
            return
        v = bc.value if value is None else value
        if bc.mask is None:
            out[:, g1] = v
            out[:, g2] = v
            return
        active = self._activity(bc)
        out[:, g1] = np.where(active, v, u_last[:, s1])
        out[:, g2] = np.where(active, v, u_last[:, s2])


def to_rows(u: np.ndarray, k: int) -> np.ndarray:
    """Move axis ``k`` last and flatten the others: shape (rows, n)."""
    moved = np.moveaxis(u, k, -1)
    return np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))


def from_rows(rows: np.ndarray, shape: tuple[int, ...], k: int) -> np.ndarray:
    moved_shape = tuple(s for i, s in enumerate(shape) if i != k) + (shape[k],)
    return np.moveaxis(rows.reshape(moved_shape), -1, k)


def ghost_fill(state: State | np.ndarray, bc, model: ProblemModel | None = None,
               mesh: Mesh1D | MeshND | None = None) -> np.ndarray:
    """Values padded with two ghost layers on every side of every axis.

    Axes are filled one after another, so corner ghosts of a 2D/3D array
    hold the fill of the last axis applied to the previous fill.
    """
    u = np.asarray(state.values if isinstance(state, State) else state, dtype=float)
    if mesh is None:
        mesh = MeshND(tuple(Mesh1D(np.arange(n + 1.0)) for n in u.shape))
    mesh = as_meshnd(mesh)
    pairs = normalize_bc(bc, mesh.dim)
    out = u
    for k in range(mesh.dim):
        geo = AxisGeometry(mesh, k, pairs[k])
        if geo.rows != int(np.prod(out.shape)) // out.shape[k]:
            # previous axes are already padded; pad the masks' row count accordingly
            geo.rows = int(np.prod(out.shape)) // out.shape[k]
            geo.other_shape = tuple(s for i, s in enumerate(out.shape) if i != k)
        rows = to_rows(out, k)
        ext = geo.extend(rows)
        shape = list(out.shape)
        shape[k] += 4
        out = from_rows(ext, tuple(shape), k)
    return np.ascontiguousarray(out)


# ---------------------------------------------------------------------------
# flux assembly


@dataclass
class AxisFluxes:
    F: np.ndarray
    A: np.ndarray
    u_minus: np.ndarray
    u_plus: np.ndarray


class Stepper:
    """Precomputed geometry plus the right-hand side of the semi-discrete scheme."""

    def __init__(self, model: ProblemModel, mesh: Mesh1D | MeshND, bc, scheme: FluxScheme):
        self.model = model
        self.mesh = mesh = as_meshnd(mesh)
        self.bc = normalize_bc(bc, mesh.dim)
        self.scheme = scheme
        if scheme.requires_linear_convection and not model.linear_convection:
            raise ValueError(f"flux {scheme} needs linear convection; model {model.name} has nonlinear f")
        self.geometry = [AxisGeometry(mesh, k, self.bc[k]) for k in range(mesh.dim)]
        self.dV: list[np.ndarray] | None = None
        if model.V is not None:
            self.dV = [self._static_jumps(g) for g in self.geometry]
        self.last: list[AxisFluxes] | None = None

    def _static_jumps(self, geo: AxisGeometry) -> np.ndarray:
        mesh = self.mesh
        coords = list(mesh.centers)
        shape = [1] * mesh.dim
        shape[geo.k] = geo.n + 2
        coords[geo.k] = geo.coords_ext.reshape(shape)
        full = list(mesh.shape)
        full[geo.k] = geo.n + 2
        V = np.broadcast_to(np.asarray(self.model.V(*coords), dtype=float), full)
        rows = to_rows(V, geo.k)
        dV = (rows[:, 1:] - rows[:, :-1]) / geo.dist
        if geo.left.kind == PERIODIC:
            dV[:, -1] = dV[:, 0]
        return np.ascontiguousarray(dV)

    def set_potential(self, V: np.ndarray, boundary_values: Sequence[tuple[float | None, float | None]] | None = None,
                      sign: float = 1.0) -> None:
        """Use a cell-centred potential field (times ``sign``) instead of ``model.V``.

        ``boundary_values[k]`` gives the potential on the left/right faces of
        axis ``k`` for Dirichlet sides; mirrored ghosts are used elsewhere.
        """
        out = []
        for geo in self.geometry:
            rows = to_rows(np.asarray(V, dtype=float), geo.k)
            bv = boundary_values[geo.k] if boundary_values is not None else (None, None)
            ext = geo.extend(rows, bv[0], bv[1])[:, 1:-1]
            dV = (ext[:, 1:] - ext[:, :-1]) / geo.dist
            if geo.left.kind == PERIODIC:
                dV[:, -1] = dV[:, 0]
            out.append(np.ascontiguousarray(sign * dV))
        self.dV = out

    def axis_fluxes(self, U: np.ndarray, k: int) -> AxisFluxes:
        geo = self.geometry[k]
        model = self.model
        n = geo.n
        rows = to_rows(U, k)
        ue = geo.extend(rows)
        if self.dV is None:
            raise ValueError("no potential: the model has no V and set_potential was not called")
        dV = self.dV[k]
        shape = (ue.shape[0], n + 1)
        kind = self.scheme.kind
        inner = ue[:, 1 : n + 3]
        he = np.ascontiguousarray(model.htilde(model.clamp_for_htilde(inner)))
        if kind in (FluxKind.FU1, FluxKind.FU2) and model.linear_convection:
            F = np.empty(shape)
            A = np.empty(shape)
            um = np.empty(shape)
            up = np.empty(shape)
            kernels.fu_linear(ue, he, dV, geo.dist, self.scheme.second_order, F, A, um, up)
        else:
            A = -dV - (he[:, 1:] - he[:, :-1]) / geo.dist
            Um = ue[:, 1 : n + 2]
            Up = ue[:, 2 : n + 3]
            if kind is FluxKind.FU2:
                um = np.empty(shape)
                up = np.empty(shape)
                kernels.muscl_traces(ue, um, up)
            else:
                um, up = Um, Up
            if kind in (FluxKind.FU1, FluxKind.FU2):
                alpha = alpha_bound(model, Um, Up)
                F = lax_friedrichs(model, A, um, up, alpha)
            elif kind is FluxKind.CU:
                F = upwind(-dV, Um, Up) - (model.r(Up) - model.r(Um)) / geo.dist
            else:
                F = sg_flux(dr_mean(model, Um, Up), geo.dist, dV, Um, Up)
            F = np.ascontiguousarray(F)
        if not geo.left_active.all():
            F[~geo.left_active, 0] = 0.0
        if not geo.right_active.all():
            F[~geo.right_active, n] = 0.0
        if geo.left.kind == PERIODIC:
            F[:, n] = F[:, 0]
        return AxisFluxes(F, A, um, up)

    def rhs(self, U: np.ndarray, keep: bool = False) -> np.ndarray:
        """``dU/dt = -sum_k (F_{k,i+1/2} - F_{k,i-1/2}) / width_k``."""
        U = np.asarray(U, dtype=float)
        shape = self.mesh.shape
        if U.shape != shape:
            raise ValueError(f"state shape {U.shape} does not match mesh {shape}")
        total = None
        kept = []
        for geo in self.geometry:
            fl = self.axis_fluxes(U, geo.k)
            if keep:
                kept.append(fl)
            out = np.zeros((geo.rows, geo.n))
            kernels.divergence(fl.F, geo.widths, out)
            contrib = from_rows(out, shape, geo.k) if self.mesh.dim > 1 else out.reshape(shape)
            total = contrib if total is None else total + contrib
        self.last = kept if keep else None
        return np.ascontiguousarray(total)

    def check_range(self, U: np.ndarray, step: int | None = None) -> None:
        lo, hi = self.model.admissible
        bad = ~np.isfinite(U) | (U < lo - RANGE_TOL) | (U > hi + RANGE_TOL)
        if bad.any():
            flat = int(np.flatnonzero(bad)[0])
            cell = self.mesh.unflat_index(flat)
            value = float(U.reshape(-1)[flat])
            raise StepFailure(
                f"step {step}: cell {cell} has value {value!r} outside [{lo}, {hi}] (model {self.model.name})",
                step=step, cell=cell, value=value,
            )


# ---------------------------------------------------------------------------
# public operations


def project_initial(u0: Callable[..., np.ndarray], mesh: Mesh1D | MeshND) -> State:
    """Cell averages of ``u0`` by tensorised 3-point Gauss-Legendre quadrature."""
    mesh = as_meshnd(mesh)
    nodes = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
    weights = np.array([5.0, 8.0, 5.0]) / 18.0
    total = np.zeros(mesh.shape)
    for idx in np.ndindex(*(3,) * mesh.dim):
        coords = []
        w = 1.0
        for k, q in enumerate(idx):
            ax = mesh.axes[k]
            shape = [1] * mesh.dim
            shape[k] = ax.n_cells
            coords.append((ax.centers + 0.5 * ax.widths * nodes[q]).reshape(shape))
            w *= weights[q]
        total = total + w * np.broadcast_to(np.asarray(u0(*coords), dtype=float), mesh.shape)
    return State(total, 0.0)


def assemble_rhs(state: State | np.ndarray, model: ProblemModel, mesh, bc, flux_scheme: FluxScheme) -> np.ndarray:
    u = state.values if isinstance(state, State) else state
    return Stepper(model, mesh, bc, flux_scheme).rhs(u)


def cfl_dt(state: State | np.ndarray, model: ProblemModel, mesh, bc=None, safety: float = 1.0) -> float:
    """Largest step for which the first-order scheme keeps ``U >= 0``.

    ``dt * max |V(x_{i+1}) - V(x_i) + h(U_{i+1}) - h(U_i)| <= min(dx)**2 / 2``,
    that is ``|A| * d`` for the first-order velocity ``A``,
    in 1D, summed over directions in ND. Returns ``inf`` when every velocity
    vanishes.
    """
    if not model.linear_convection:
        raise ValueError("the CFL bound covers linear convection only")
    u = np.asarray(state.values if isinstance(state, State) else state, dtype=float)
    mesh = as_meshnd(mesh)
    if bc is None:
        bc = neumann()
    stepper = Stepper(model, mesh, bc, FluxScheme(FluxKind.FU1))
    rate = 0.0
    for geo in stepper.geometry:
        fl = stepper.axis_fluxes(u, geo.k)
        jump = np.abs(fl.A) * geo.dist
        active = np.ones_like(jump, dtype=bool)
        active[:, 0] = geo.left_active
        active[:, -1] = geo.right_active
        jmax = float(jump[active].max()) if active.any() else 0.0
        dmin = float(geo.dist[1:-1].min()) if geo.n > 1 else float(geo.dist.min())
        if active[:, 0].any():
            dmin = min(dmin, float(geo.dist[0]))
        if active[:, -1].any():
            dmin = min(dmin, float(geo.dist[-1]))
        rate += 2.0 * jmax / (float(geo.widths.min()) * dmin)
    if rate == 0.0:
        return math.inf
    return safety / rate


def euler_step(state: State, model: ProblemModel, mesh, bc, flux_scheme: FluxScheme, dt: float,
               stepper: Stepper | None = None) -> State:
    if not dt > 0:
        raise ValueError("dt must be positive")
    stepper = stepper or Stepper(model, mesh, bc, flux_scheme)
    new = state.values + dt * stepper.rhs(state.values)
    stepper.check_range(new)
    return State(new, state.time + dt)


def final_step(t_final: float, dt: float, n_total: int) -> float:
    """Length of the last of ``n_total`` steps that end at ``t_final``.

    A remainder within roundoff of ``dt`` is replaced by ``dt`` itself, so
    runs whose ``t_final`` is a multiple of ``dt`` use one step size throughout.
    """
    rem = t_final - (n_total - 1) * dt
    return dt if abs(rem - dt) <= 1e-9 * dt else rem


@dataclass
class SolverConfig:
    flux_scheme: FluxScheme
    dt: float | None = None
    t_final: float = 0.0
    cfl_safety: float = 1.0
    dt_mode: str = "fixed"
    record_every: int = 1
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.dt_mode not in ("fixed", "cfl_auto"):
            raise ValueError(f"dt_mode must be 'fixed' or 'cfl_auto', got {self.dt_mode!r}")
        if self.dt_mode == "fixed" and not (self.dt is not None and self.dt > 0):
            raise ValueError("fixed dt mode needs dt > 0")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.t_final < 0:
            raise ValueError("t_final must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class RunResult:
    final: State
    records: list = field(default_factory=list)
    snapshots: dict[float, np.ndarray] = field(default_factory=dict)
    steps: int = 0


def run(config: SolverConfig, model: ProblemModel, mesh, bc, initial: State,
        equilibrium: np.ndarray | None = None, record: bool = True) -> RunResult:
    """Advance ``initial`` to ``config.t_final`` with forward Euler.

    Diagnostics are recorded at step 0, every ``record_every`` steps and at
    the final time. The last step is shortened to land on ``t_final``.
    """
    from .diagnostics import equilibrium_slope, make_record, potential_at_centers

    mesh = as_meshnd(mesh)
    stepper = Stepper(model, mesh, bc, config.flux_scheme)
    U = np.array(initial.values, dtype=float).reshape(mesh.shape)
    stepper.check_range(U, step=0)
    t0 = float(initial.time)
    t_end = t0 + config.t_final
    eq = None if equilibrium is None else np.asarray(equilibrium, dtype=float).reshape(mesh.shape)
    slope = None
    if eq is not None and model.H is not None:
        slope = equilibrium_slope(model, eq, potential_at_centers(model, mesh))
    result = RunResult(State(U, t0))
    pending = sorted(t0 + s for s in config.snapshot_times)

    def snapshot(t: float, values: np.ndarray) -> None:
        while pending and t >= pending[0] - 1e-12 * max(1.0, abs(pending[0])):
            result.snapshots[pending.pop(0) - t0] = values.copy()

    snapshot(t0, U)
    n = 0
    t = t0
    if config.dt_mode == "fixed":
        n_total = max(0, math.ceil(config.t_final / config.dt - 1e-9))
    else:
        n_total = None
    while (n_total is None and t < t_end - 1e-14 * max(1.0, abs(t_end))) or (n_total is not None and n < n_total):
        recording = record and n % config.record_every == 0
        rhs = stepper.rhs(U, keep=recording)
        if recording:
            result.records.append(make_record(t, U, eq, stepper, slope))
        if config.dt_mode == "fixed":
            dt = config.dt if n < n_total - 1 else final_step(config.t_final, config.dt, n_total)
        else:
            dt = min(config.cfl_safety * cfl_dt(U, model, mesh, stepper.bc), t_end - t)
            if not math.isfinite(dt):
                dt = t_end - t
        U = U + dt * rhs
        n += 1
        t = t0 + n * config.dt if config.dt_mode == "fixed" and n < n_total else t + dt
        if n_total is not None and n == n_total:
            t = t_end
        stepper.check_range(U, step=n)
        snapshot(t, U)
    if record and (not result.records or result.records[-1].time != t):
        stepper.rhs(U, keep=True)
        result.records.append(make_record(t, U, eq, stepper, slope))
    result.final = State(U, t)
    result.steps = n
    return result


def write_snapshot_csv(values: np.ndarray | Sequence[np.ndarray], mesh, path, names: Sequence[str] = ("u",)) -> None:
    """One row per cell (row-major): centre coordinates then the value columns."""
    mesh = as_meshnd(mesh)
    cols = [values] if isinstance(values, np.ndarray) else list(values)
    if len(cols) != len(names):
        raise ValueError("one column name per value array")
    coords = np.meshgrid(*[ax.centers for ax in mesh.axes], indexing="ij")
    table = np.column_stack([c.reshape(-1) for c in coords] + [np.asarray(v, float).reshape(-1) for v in cols])
    header = ",".join(list("xyz"[: mesh.dim]) + list(names))
    np.savetxt(path, table, delimiter=",", fmt="%.17g", header=header, comments="")
