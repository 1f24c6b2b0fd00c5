"""Drift-diffusion system for semiconductors.

    dN/dt - div(grad r(N) - N grad V) = 0
    dP/dt - div(grad r(P) + P grad V) = 0
    Laplace V = N - P - C

with ``r(s) = s**gamma``. Electrons move in the effective potential ``-V``,
holes in ``+V``. Each density is advanced by one explicit step of the
scalar scheme using the potential of the previous step; the potential is
then refreshed from the new densities.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .diagnostics import DiagnosticsRecord, dissipation_from_stepper
from .flux import FluxScheme
from .mesh import Mesh1D, MeshND, as_meshnd
from .model import ProblemModel, dd_continuity
from .solver import BoundaryCondition, State, Stepper, StepFailure, dirichlet, final_step, neumann

logger = logging.getLogger(__name__)

COMPAT_TOL = 1e-10


def g_of(gamma: float, s):
    """Generalised inverse of ``h(s) = gamma/(gamma-1) (s**(gamma-1) - 1)``.

    ``(1 + (gamma-1)/gamma * s) ** (1/(gamma-1))`` above ``h(0+)``, 0 below.
    """
    if not gamma > 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    s = np.asarray(s, dtype=float)
    base = 1.0 + (gamma - 1.0) / gamma * s
    out = np.where(base > 0.0, np.maximum(base, 0.0) ** (1.0 / (gamma - 1.0)), 0.0)
    return out if out.ndim else float(out)


def g_prime(gamma: float, s):
    s = np.asarray(s, dtype=float)
    base = 1.0 + (gamma - 1.0) / gamma * s
    e = 1.0 / (gamma - 1.0)
    return np.where(base > 0.0, (1.0 / gamma) * np.maximum(base, 0.0) ** (e - 1.0), 0.0)


def h_power(gamma: float, s):
    return gamma / (gamma - 1.0) * (np.maximum(np.asarray(s, dtype=float), 0.0) ** (gamma - 1.0) - 1.0)


@dataclass(frozen=True, eq=False)
class Contact:
    """Ohmic contact: Dirichlet data for ``(N, P, V)`` on (part of) a face."""

    N: float
    P: float
    V: float
    mask: np.ndarray | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, Contact):
            return NotImplemented
        masks = (self.mask is None and other.mask is None) or (
            self.mask is not None and other.mask is not None and np.array_equal(self.mask, other.mask))
        return (self.N, self.P, self.V) == (other.N, other.P, other.V) and masks


Side = Contact | None  # None: insulating (zero flux, zero field)


@dataclass(eq=False)
class DDBoundary:
    """Contacts per axis side; ``None`` marks an insulating side.

    ``alpha_N = h(N) - V`` and ``alpha_P = h(P) + V`` are the quasi-Fermi
    levels; every contact must reproduce its densities from them through
    ``g`` (that is ``N = g(alpha_N + V)``, ``P = g(alpha_P - V)``).
    """

    sides: Sequence[tuple[Side, Side]]
    gamma: float = 2.0
    alpha_N: float = field(init=False)
    alpha_P: float = field(init=False)

    def __post_init__(self) -> None:
        self.sides = tuple(tuple(p) for p in self.sides)
        contacts = self.contacts
        if not contacts:
            raise ValueError("at least one contact (Dirichlet side) is needed")
        self.alpha_N = self._level([(c.N, -c.V) for c in contacts], "N")
        self.alpha_P = self._level([(c.P, c.V) for c in contacts], "P")
        for c in contacts:
            if c.N * c.P > 0:
                lhs = h_power(self.gamma, c.N) + h_power(self.gamma, c.P)
                if abs(lhs - (self.alpha_N + self.alpha_P)) > COMPAT_TOL:
                    raise ValueError(f"contact {c}: h(N) + h(P) = {lhs} differs from alpha_N + alpha_P")
            for dens, lev, name in ((c.N, self.alpha_N + c.V, "N"), (c.P, self.alpha_P - c.V, "P")):
                if abs(g_of(self.gamma, lev) - dens) > COMPAT_TOL:
                    raise ValueError(
                        f"contact {c}: {name} = {dens} is inconsistent with the quasi-Fermi level "
                        f"(g gives {g_of(self.gamma, lev)})")

    def _level(self, pairs: list[tuple[float, float]], name: str) -> float:
        pos = [h_power(self.gamma, d) + shift for d, shift in pairs if d > 0]
        if pos:
            lev = pos[0]
            for other in pos[1:]:
                if abs(other - lev) > COMPAT_TOL:
                    raise ValueError(f"contacts disagree on alpha_{name}: {lev} vs {other}")
            return float(lev)
        # every contact is in vacuum for this species: take the largest admissible level
        return float(min(h_power(self.gamma, 0.0) + shift for _, shift in pairs))

    @property
    def contacts(self) -> list[Contact]:
        return [s for pair in self.sides for s in pair if s is not None]

    def species_bc(self, which: str) -> tuple[tuple[BoundaryCondition, BoundaryCondition], ...]:
        out = []
        for pair in self.sides:
            sides = []
            for s in pair:
                if s is None:
                    sides.append(neumann())
                else:
                    sides.append(dirichlet(getattr(s, which), s.mask))
            out.append(tuple(sides))
        return tuple(out)

    def potential_values(self) -> list[tuple[float | None, float | None]]:
        return [tuple(None if s is None else s.V for s in pair) for pair in self.sides]


# ---------------------------------------------------------------------------
# Poisson


class PoissonOperator:
    """Two-point finite-volume Laplacian with Dirichlet contacts.

    Row ``i`` of ``matrix`` is ``sum_f T_f (V_i - V_nb)`` with ``T_f = area/d``;
    contact faces add ``T_f V_i`` to the matrix and ``T_f Vbar`` to the
    right-hand side. Insulating faces contribute nothing. The sparse LU
    factorisation is computed once.
    """

    def __init__(self, mesh: Mesh1D | MeshND, bc: DDBoundary):
        self.mesh = mesh = as_meshnd(mesh)
        self.bc = bc
        if len(bc.sides) != mesh.dim:
            raise ValueError("boundary needs one side pair per axis")
        n = mesh.n_cells
        shape = mesh.shape
        idx = np.arange(n).reshape(shape)
        rows, cols, vals = [], [], []
        diag = np.zeros(shape)
        rhs = np.zeros(shape)
        has_dirichlet = False
        for k, ax in enumerate(mesh.axes):
            area = mesh.cell_volumes / ax.widths.reshape([-1 if i == k else 1 for i in range(mesh.dim)])
            d_int = ax.interface_distances[1:-1]
            if ax.n_cells > 1:
                sl_lo = [slice(None)] * mesh.dim
                sl_hi = [slice(None)] * mesh.dim
                sl_lo[k] = slice(0, -1)
                sl_hi[k] = slice(1, None)
                dshape = [1] * mesh.dim
                dshape[k] = -1
                T = area[tuple(sl_lo)] / d_int.reshape(dshape)
                a_i = idx[tuple(sl_lo)].ravel()
                b_i = idx[tuple(sl_hi)].ravel()
                t = T.ravel()
                rows += [a_i, b_i]
                cols += [b_i, a_i]
                vals += [-t, -t]
                diag[tuple(sl_lo)] += T
                diag[tuple(sl_hi)] += T
            for side, pos, dist in ((0, 0, ax.interface_distances[0]), (1, -1, ax.interface_distances[-1])):
                contact = bc.sides[k][side]
                if contact is None:
                    continue
                sl = [slice(None)] * mesh.dim
                sl[k] = pos
                T = area[tuple(sl)] / dist
                if contact.mask is not None:
                    T = T * np.broadcast_to(contact.mask, T.shape)
                if np.any(T > 0):
                    has_dirichlet = True
                diag[tuple(sl)] += T
                rhs[tuple(sl)] += T * contact.V
        if not has_dirichlet:
            raise ValueError("all-insulating boundary: the Poisson problem is singular")
        rows.append(idx.ravel())
        cols.append(idx.ravel())
        vals.append(diag.ravel())
        self.matrix = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        self.boundary_rhs = rhs.ravel()
        self.volumes = mesh.cell_volumes.ravel()
        self._lu = spla.splu(self.matrix)

    def solve(self, source: np.ndarray) -> np.ndarray:
        """``V`` with ``Laplace V = source`` in the finite-volume sense."""
        b = self.boundary_rhs - self.volumes * np.asarray(source, dtype=float).ravel()
        V = self._lu.solve(b)
        return V.reshape(self.mesh.shape)

    def residual(self, V: np.ndarray, source: np.ndarray) -> float:
        b = self.boundary_rhs - self.volumes * np.asarray(source, dtype=float).ravel()
        r = self.matrix @ V.ravel() - b
        return float(np.linalg.norm(r) / max(np.linalg.norm(b), 1e-300))

    def field_energy(self, dV: np.ndarray) -> float:
        """``1/2 sum_f T_f (jump of dV)**2`` with ``dV = 0`` on contacts."""
        x = dV.ravel()
        return 0.5 * float(x @ (self.matrix @ x))


def poisson_solve(N, P, doping, bc: DDBoundary, mesh, operator: PoissonOperator | None = None) -> np.ndarray:
    op = operator or PoissonOperator(mesh, bc)
    return op.solve(np.asarray(N) - np.asarray(P) - np.asarray(doping))


# ---------------------------------------------------------------------------
# equilibrium


@dataclass(eq=False)
class ThermalEquilibrium:
    N: np.ndarray
    P: np.ndarray
    V: np.ndarray
    iterations: int = 0


class NewtonFailure(RuntimeError):
    pass


def thermal_equilibrium(doping, bc: DDBoundary, mesh, gamma: float | None = None,
                        tol: float = 1e-10, max_iter: int = 100,
                        operator: PoissonOperator | None = None) -> ThermalEquilibrium:
    """Damped Newton on ``Laplace V = g(alpha_N + V) - g(alpha_P - V) - C``."""
    gamma = bc.gamma if gamma is None else gamma
    op = operator or PoissonOperator(mesh, bc)
    C = np.asarray(doping, dtype=float).ravel()
    aN, aP = bc.alpha_N, bc.alpha_P
    vol = op.volumes
    K = op.matrix
    b0 = op.boundary_rhs

    def residual(V):
        src = g_of(gamma, aN + V) - g_of(gamma, aP - V) - C
        return K @ V - b0 + vol * src

    V = op.solve(-C).ravel()  # start from the neutral-density potential
    res = residual(V)
    rnorm = float(np.max(np.abs(res)))
    for it in range(1, max_iter + 1):
        jac = K + sp.diags(vol * (g_prime(gamma, aN + V) + g_prime(gamma, aP - V)))
        step = spla.spsolve(sp.csc_matrix(jac), -res)
        lam = 1.0
        for _ in range(31):
            trial = V + lam * step
            tres = residual(trial)
            tnorm = float(np.max(np.abs(tres)))
            if tnorm <= rnorm or lam < 2.0**-29:
                break
            lam *= 0.5
        V, res, rnorm = trial, tres, tnorm
        if float(np.max(np.abs(lam * step))) < tol:
            shape = op.mesh.shape
            return ThermalEquilibrium(
                g_of(gamma, aN + V).reshape(shape), g_of(gamma, aP - V).reshape(shape), V.reshape(shape), it)
    raise NewtonFailure(f"Newton did not converge in {max_iter} iterations; last residual {rnorm:.3e}")


# ---------------------------------------------------------------------------
# time stepping


@dataclass
class DDState:
    N: np.ndarray
    P: np.ndarray
    V: np.ndarray
    time: float = 0.0


class DDSystem:
    """Precomputed operators for one drift-diffusion configuration."""

    def __init__(self, mesh, bc: DDBoundary, doping, scheme: FluxScheme):
        self.mesh = mesh = as_meshnd(mesh)
        self.bc = bc
        self.gamma = bc.gamma
        self.doping = np.broadcast_to(np.asarray(doping, dtype=float), mesh.shape)
        self.scheme = scheme
        self.electrons: ProblemModel = dd_continuity(self.gamma, -1)
        self.holes: ProblemModel = dd_continuity(self.gamma, +1)
        self.poisson = PoissonOperator(mesh, bc)
        self.stepN = Stepper(self.electrons, mesh, bc.species_bc("N"), scheme)
        self.stepP = Stepper(self.holes, mesh, bc.species_bc("P"), scheme)
        self.vbound = bc.potential_values()

    def potential(self, N, P) -> np.ndarray:
        return self.poisson.solve(N - P - self.doping)

    def initial_state(self, N0, P0) -> DDState:
        N0 = np.array(np.broadcast_to(N0, self.mesh.shape), dtype=float)
        P0 = np.array(np.broadcast_to(P0, self.mesh.shape), dtype=float)
        return DDState(N0, P0, self.potential(N0, P0))

    def rates(self, state: DDState, keep: bool = False) -> tuple[np.ndarray, np.ndarray]:
        self.stepN.set_potential(state.V, self.vbound, sign=-1.0)
        self.stepP.set_potential(state.V, self.vbound, sign=+1.0)
        return self.stepN.rhs(state.N, keep=keep), self.stepP.rhs(state.P, keep=keep)

    def step(self, state: DDState, dt: float, step_index: int | None = None,
             rates: tuple[np.ndarray, np.ndarray] | None = None) -> DDState:
        rN, rP = rates if rates is not None else self.rates(state)
        N = state.N + dt * rN
        P = state.P + dt * rP
        self.stepN.check_range(N, step_index)
        self.stepP.check_range(P, step_index)
        return DDState(N, P, self.potential(N, P), state.time + dt)

    def relative_energy(self, state: DDState, eq: ThermalEquilibrium) -> float:
        return dd_relative_energy(state, eq, self.mesh, self.bc, self.poisson)

    def dissipation(self) -> float:
        return dissipation_from_stepper(self.stepN) + dissipation_from_stepper(self.stepP)


def dd_step(state: DDState, gamma: float, bc: DDBoundary, mesh, flux_scheme: FluxScheme, dt: float,
            doping=0.0) -> DDState:
    """One lagged explicit step; builds the operators on each call."""
    if gamma != bc.gamma:
        raise ValueError("gamma differs from the boundary's gamma")
    return DDSystem(mesh, bc, doping, flux_scheme).step(state, dt)


def dd_relative_energy(state: DDState, eq: ThermalEquilibrium, mesh, bc: DDBoundary,
                       operator: PoissonOperator | None = None) -> float:
    """Relative free energy of ``(N, P, V)`` with respect to the thermal equilibrium.

    Carrier terms are Bregman divergences of ``H`` with slopes taken from the
    quasi-Fermi levels, ``alpha_N + V_eq`` and ``alpha_P - V_eq`` (equal to
    ``h(N_eq)``, ``h(P_eq)`` wherever those are positive). The field term is
    ``1/2 sum_f (area/d) (jump of V - V_eq)**2`` with zero jumps on contacts.
    """
    mesh = as_meshnd(mesh)
    op = operator or PoissonOperator(mesh, bc)
    gam = bc.gamma
    c = gam / (gam - 1.0)

    def H(s):
        s = np.maximum(s, 0.0)
        return (s**gam - gam * s) / (gam - 1.0)

    sN = np.minimum(bc.alpha_N + eq.V, np.where(eq.N > 0, np.inf, -c))
    sN = np.where(eq.N > 0, h_power(gam, eq.N), sN)
    sP = np.minimum(bc.alpha_P - eq.V, np.where(eq.P > 0, np.inf, -c))
    sP = np.where(eq.P > 0, h_power(gam, eq.P), sP)
    vol = mesh.cell_volumes
    eN = np.sum(vol * (H(state.N) - H(eq.N) - sN * (state.N - eq.N)))
    eP = np.sum(vol * (H(state.P) - H(eq.P) - sP * (state.P - eq.P)))
    eV = op.field_energy(np.asarray(state.V) - eq.V)
    return float(eN + eP + eV)


@dataclass
class DDResult:
    final: DDState
    records: list[DiagnosticsRecord]
    steps: int


def dd_run(system: DDSystem, initial: DDState, dt: float, t_final: float,
           equilibrium: ThermalEquilibrium | None = None, record_every: int = 1) -> DDResult:
    """Advance to ``t_final``; records carry the net carrier charge ``sum m(K)(N - P)`` as mass."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_total = max(0, math.ceil(t_final / dt - 1e-9))
    vol = system.mesh.cell_volumes
    state = initial
    records: list[DiagnosticsRecord] = []

    def record(s: DDState, keep_done: bool) -> None:
        if not keep_done:
            system.rates(s, keep=True)
        ent = system.relative_energy(s, equilibrium) if equilibrium is not None else math.nan
        l1 = math.nan
        if equilibrium is not None:
            l1 = float(np.sum(vol * (np.abs(s.N - equilibrium.N) + np.abs(s.P - equilibrium.P))))
        records.append(DiagnosticsRecord(s.time, float(np.sum(vol * (s.N - s.P))), ent, system.dissipation(), l1))

    t0 = initial.time
    for n in range(n_total):
        keep = n % record_every == 0
        rates = system.rates(state, keep=keep)
        if keep:
            record(state, True)
        h = dt if n < n_total - 1 else final_step(t_final, dt, n_total)
        state = system.step(state, h, n + 1, rates)
        state.time = t0 + (n + 1) * dt if n < n_total - 1 else t0 + t_final
    if not records or records[-1].time != state.time:
        record(state, False)
    return DDResult(state, records, n_total)


# ---------------------------------------------------------------------------
# configurations


def pn_diode_1d(n_cells: int = 64, gamma: float = 2.0, scheme: FluxScheme | str = "fu2"):
    """1D diode on (0, 1): p-region left of 0.5 (C = -1), n-region right (C = +1).

    Contacts ``(N, P, V) = (0, 1, -1)`` at ``x = 0`` and ``(1, 0, 1)`` at ``x = 1``;
    initial densities are the step functions of the two regions.
    Returns ``(system, initial_state)``.
    """
    from .mesh import build_uniform_1d

    mesh = build_uniform_1d(0.0, 1.0, n_cells)
    x = mesh.centers
    doping = np.where(x <= 0.5, -1.0, 1.0)
    bc = DDBoundary([(Contact(0.0, 1.0, -1.0), Contact(1.0, 0.0, 1.0))], gamma=gamma)
    scheme = FluxScheme.parse(scheme) if isinstance(scheme, str) else scheme
    system = DDSystem(mesh, bc, doping, scheme)
    return system, system.initial_state(np.where(x > 0.5, 1.0, 0.0), np.where(x <= 0.5, 1.0, 0.0))


def pn_junction_2d(n_cells: int = 32, gamma: float = 2.0, scheme: FluxScheme | str = "fu2",
                   contact_fraction: float = 0.5):
    """2D junction on the unit square, doping split along ``x = 0.5``.

    The p-contact ``(0, 1, -1)`` covers the lower ``contact_fraction`` of the
    left edge, the n-contact ``(1, 0, 1)`` the upper part of the right edge;
    all other boundary is insulating.
    """
    from .mesh import build_cartesian, build_uniform_1d

    ax = build_uniform_1d(0.0, 1.0, n_cells)
    mesh = build_cartesian([ax, ax])
    y = ax.centers
    left = y < contact_fraction
    right = y > 1.0 - contact_fraction
    bc = DDBoundary(
        [(Contact(0.0, 1.0, -1.0, left), Contact(1.0, 0.0, 1.0, right)), (None, None)], gamma=gamma)
    X = np.broadcast_to(ax.centers[:, None], mesh.shape)
    doping = np.where(X <= 0.5, -1.0, 1.0)
    scheme = FluxScheme.parse(scheme) if isinstance(scheme, str) else scheme
    system = DDSystem(mesh, bc, doping, scheme)
    return system, system.initial_state(np.where(X > 0.5, 1.0, 0.0), np.where(X <= 0.5, 1.0, 0.0))


def write_dd_snapshot_csv(state: DDState, mesh, path) -> None:
    from .solver import write_snapshot_csv

    write_snapshot_csv([state.N, state.P, state.V], mesh, path, names=("N", "P", "V"))


__all__ = [
    "Contact", "DDBoundary", "DDResult", "DDState", "DDSystem", "NewtonFailure", "PoissonOperator",
    "StepFailure", "ThermalEquilibrium", "dd_relative_energy", "dd_run", "dd_step", "g_of",
    "pn_diode_1d", "pn_junction_2d", "poisson_solve", "thermal_equilibrium", "State",
]
