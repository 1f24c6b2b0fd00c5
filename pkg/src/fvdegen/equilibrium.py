"""Discrete steady states with a prescribed mass.

Profiles are sampled at cell centres; the free constant is found by
bisection on the (monotone) discrete mass map.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh1D, MeshND, as_meshnd
from .model import ProblemModel


class NoEquilibriumError(ValueError):
    """The requested mass cannot be matched on this mesh."""


@dataclass(frozen=True, eq=False)
class EquilibriumProfile:
    values: np.ndarray
    parameter: float
    mass: float


def _radius2(mesh: MeshND) -> np.ndarray:
    r2 = np.zeros(mesh.shape)
    for c in mesh.centers:
        r2 = r2 + c * c
    return r2


def _boundary_cells(shape: tuple[int, ...]) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for k in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[k] = 0
        mask[tuple(idx)] = True
        idx[k] = -1
        mask[tuple(idx)] = True
    return mask


def _bisect(mass_of: Callable[[float], float], target: float, lo: float, hi: float,
            increasing: bool, rtol: float = 1e-12, max_iter: int = 400) -> float:
    """Bisection on ``mass_of(p) = target`` over ``[lo, hi]``."""
    best = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        m = mass_of(mid)
        best = mid
        if abs(m - target) <= rtol * target:
            break
        if (m < target) == increasing:
            lo = mid
        else:
            hi = mid
    return best


def barenblatt_values(mesh, m: float, C: float) -> np.ndarray:
    """``(C - (m-1)/(2m) |x_i|^2)_+ ** (1/(m-1))`` at the cell centres."""
    mesh = as_meshnd(mesh)
    base = np.maximum(C - (m - 1.0) / (2.0 * m) * _radius2(mesh), 0.0)
    return base ** (1.0 / (m - 1.0))


def barenblatt(mesh: Mesh1D | MeshND, m: float, mass: float) -> EquilibriumProfile:
    """Barenblatt-Pattle steady state of the porous medium equation with ``V = |x|^2/2``.

    Raises :class:`NoEquilibriumError` when the matching profile would touch
    the boundary cells of the mesh.
    """
    if not m > 1:
        raise ValueError(f"exponent must be > 1, got {m}")
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    mesh = as_meshnd(mesh)
    vol = mesh.cell_volumes

    def mass_of(C: float) -> float:
        return float(np.sum(vol * barenblatt_values(mesh, m, C)))

    hi = 1.0
    while mass_of(hi) < mass:
        hi *= 2.0
        if hi > 1e300:
            raise NoEquilibriumError("mass not reachable")
    C = _bisect(mass_of, mass, 0.0, hi, increasing=True)
    values = barenblatt_values(mesh, m, C)
    if np.any(values[_boundary_cells(mesh.shape)] > 0):
        raise NoEquilibriumError(
            f"profile for mass {mass:g} (C = {C:.6g}) reaches the boundary; enlarge the domain"
        )
    return EquilibriumProfile(values, C, float(np.sum(vol * values)))


def fermi_bose_values(mesh, k: int, beta: float) -> np.ndarray:
    mesh = as_meshnd(mesh)
    return 1.0 / (beta * np.exp(0.5 * _radius2(mesh)) - k)


def fermi_bose(mesh: Mesh1D | MeshND, k: int, mass: float) -> EquilibriumProfile:
    """Fermi-Dirac (``k = -1``) or Bose-Einstein (``k = +1``) steady state.

    The discrete mass decreases strictly in ``beta``. Fermion masses range
    over ``(0, |Omega|)``; boson profiles need ``beta > 1``, so their mass is
    bounded by the limit ``beta -> 1+`` and larger targets are rejected.
    """
    if k not in (-1, 1):
        raise ValueError("k must be -1 or +1")
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    mesh = as_meshnd(mesh)
    vol = mesh.cell_volumes
    r2h = 0.5 * _radius2(mesh)

    if k == -1:
        if mass >= mesh.volume:
            raise NoEquilibriumError(f"fermion mass {mass:g} must stay below the domain volume {mesh.volume:g}")

        def beta_of(s: float) -> float:
            return math.exp(s)
    else:
        def beta_of(s: float) -> float:
            return 1.0 + math.exp(s)

    def mass_of(s: float) -> float:
        b = beta_of(s)
        # exp(log b + r2h) avoids overflow of b * exp(r2h) for large r2h
        return float(np.sum(vol / (np.exp(math.log(b) + r2h) - k)))

    lo, hi = -1.0, 1.0
    while mass_of(lo) < mass:
        lo *= 2.0
        if lo < -745.0:
            if k == 1:
                raise NoEquilibriumError(
                    f"boson mass {mass:g} exceeds the critical mass {mass_of(-745.0):.6g} of this mesh"
                )
            raise NoEquilibriumError(f"mass {mass:g} not reachable")
    while mass_of(hi) > mass:
        hi *= 2.0
    s = _bisect(mass_of, mass, lo, hi, increasing=False)
    beta = beta_of(s)
    values = 1.0 / (np.exp(math.log(beta) + r2h) - k)
    return EquilibriumProfile(values, beta, float(np.sum(vol * values)))


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    skipped: int


def equilibrium_residual(profile: EquilibriumProfile | np.ndarray, model: ProblemModel,
                         mesh: Mesh1D | MeshND) -> ResidualReport:
    """``max |dhtilde(U) + dV|`` over interior interfaces.

    Interfaces with a non-positive neighbour are skipped and counted.
    """
    if model.V is None:
        raise ValueError("model has no potential")
    mesh = as_meshnd(mesh)
    u = np.asarray(getattr(profile, "values", profile), dtype=float).reshape(mesh.shape)
    V = np.broadcast_to(np.asarray(model.V(*mesh.centers), dtype=float), mesh.shape)
    pos = u > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ht = np.where(pos, model.htilde(model.clamp_for_htilde(np.where(pos, u, 1.0))), np.nan)
    worst = 0.0
    skipped = 0
    for k, ax in enumerate(mesh.axes):
        if ax.n_cells < 2:
            continue
        shape = [1] * mesh.dim
        shape[k] = ax.n_cells - 1
        d = ax.interface_distances[1:-1].reshape(shape)
        res = (np.diff(ht, axis=k) + np.diff(V, axis=k)) / d
        ok = np.diff(pos.astype(np.int8), axis=k) == 0
        ok &= np.take(pos, range(1, ax.n_cells), axis=k)
        skipped += int(np.count_nonzero(~ok))
        if ok.any():
            worst = max(worst, float(np.max(np.abs(res[ok]))))
    return ResidualReport(worst, skipped)


def discrete_equilibrium_1d(model: ProblemModel, mesh: Mesh1D | MeshND, seed_index: int,
                            seed_value: float) -> np.ndarray:
    """Exact discrete steady state: ``h(U_{i+1}) = h(U_i) - (V_{i+1} - V_i)`` from one seed cell.

    Values whose enthalpy falls below ``h(0+)`` become 0. Needs ``model.g``
    (the inverse of ``h``).
    """
    if model.g is None or model.h is None or model.V is None:
        raise ValueError("needs a model with h, its inverse g and a potential")
    mesh = as_meshnd(mesh)
    if mesh.dim != 1:
        raise ValueError("1D meshes only")
    x = mesh.axes[0].centers
    V = np.asarray(model.V(x), dtype=float) * np.ones_like(x)
    n = x.size
    y = np.empty(n)
    y[seed_index] = float(model.h(np.asarray(seed_value)))
    for i in range(seed_index + 1, n):
        y[i] = y[i - 1] - (V[i] - V[i - 1])
    for i in range(seed_index - 1, -1, -1):
        y[i] = y[i + 1] - (V[i] - V[i + 1])
    return np.asarray(model.g(y), dtype=float)


def write_profile_csv(profile: EquilibriumProfile | np.ndarray, mesh, path) -> None:
    from .solver import write_snapshot_csv

    write_snapshot_csv(np.asarray(getattr(profile, "values", profile)), mesh, path)
