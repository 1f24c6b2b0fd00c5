"""Interface fluxes for the semi-discrete finite volume scheme.

Every function accepts scalars or numpy arrays (elementwise over
interfaces). The stencil of interface ``i+1/2`` is the four cell averages
``U_{i-1}, U_i, U_{i+1}, U_{i+2}``, the centred potential jump ``dV`` and the
distance between the two neighbouring centres.

Four fluxes are provided:

``fu1``
    first-order fully upwind flux (local Lax-Friedrichs in the velocity
    ``A = -dV - d htilde(U)``),
``fu2``
    the same flux evaluated on Van Leer limited MUSCL traces,
``cu``
    classical upwind convection plus two-point diffusion,
``sgext``
    Scharfetter-Gummel flux extended to nonlinear diffusion.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import ProblemModel, alpha_bound

# relative threshold below which a slope ratio denominator counts as zero
THETA_EPS = 1e-14
# |x| below which the Bernoulli function switches to its Taylor series
BERNOULLI_SERIES = 1e-8


class FluxKind(str, Enum):
    FU1 = "fu1"
    FU2 = "fu2"
    CU = "cu"
    SGEXT = "sgext"


class Limiter(str, Enum):
    NONE = "none"
    VAN_LEER = "van_leer"


@dataclass(frozen=True)
class FluxScheme:
    kind: FluxKind
    limiter: Limiter | None = None

    def __post_init__(self) -> None:
        kind = FluxKind(self.kind)
        limiter = self.limiter
        if limiter is None:
            limiter = Limiter.VAN_LEER if kind is FluxKind.FU2 else Limiter.NONE
        limiter = Limiter(limiter)
        if kind is FluxKind.FU1 and limiter is not Limiter.NONE:
            raise ValueError("FU1 takes no limiter")
        if kind is FluxKind.FU2 and limiter is not Limiter.VAN_LEER:
            raise ValueError("FU2 is the Van Leer limited scheme; use FU1 for the unlimited one")
        if kind in (FluxKind.CU, FluxKind.SGEXT) and limiter is not Limiter.NONE:
            raise ValueError(f"{kind.value} takes no limiter")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "limiter", limiter)

    @classmethod
    def parse(cls, name: str) -> FluxScheme:
        return cls(FluxKind(name.strip().lower()))

    @property
    def second_order(self) -> bool:
        return self.limiter is Limiter.VAN_LEER

    @property
    def requires_linear_convection(self) -> bool:
        return self.kind in (FluxKind.CU, FluxKind.SGEXT)

    def __str__(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class InterfaceStencil:
    u_mm: float | np.ndarray
    u_m: float | np.ndarray
    u_p: float | np.ndarray
    u_pp: float | np.ndarray
    dV: float | np.ndarray = 0.0
    dist: float | np.ndarray = 1.0

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.dist) <= 0):
            raise ValueError("interface distance must be positive")


def van_leer(theta):
    theta = np.asarray(theta, dtype=float)
    a = np.abs(theta)
    return (theta + a) / (1.0 + a)


def half_slope(u_left, u_mid, u_right):
    """``phi(theta) (u_right - u_mid) / 2`` for the cell holding ``u_mid``.

    ``theta = (u_mid - u_left) / (u_right - u_mid)``. A denominator below
    ``1e-14 * max(1, |u|)`` over the three values drops the term.
    """
    u_left, u_mid, u_right = np.broadcast_arrays(
        np.asarray(u_left, dtype=float), np.asarray(u_mid, dtype=float), np.asarray(u_right, dtype=float)
    )
    den = u_right - u_mid
    num = u_mid - u_left
    scale = np.maximum(np.maximum(np.abs(u_left), np.abs(u_mid)), np.maximum(np.abs(u_right), 1.0))
    ok = np.abs(den) >= THETA_EPS * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = num / den
        phi = van_leer(theta)
    return np.where(ok, 0.5 * phi * den, 0.0)


def reconstruct(stencil: InterfaceStencil):
    """Limited traces ``(u_minus, u_plus)`` on both sides of the interface."""
    s = stencil
    u_minus = s.u_m + half_slope(s.u_mm, s.u_m, s.u_p)
    u_plus = s.u_p - half_slope(s.u_m, s.u_p, s.u_pp)
    return u_minus, u_plus


def velocity(model: ProblemModel, stencil: InterfaceStencil):
    """``A = -dV - (htilde(U_{i+1}) - htilde(U_i)) / dist``."""
    hm = model.htilde(model.clamp_for_htilde(np.asarray(stencil.u_m, dtype=float)))
    hp = model.htilde(model.clamp_for_htilde(np.asarray(stencil.u_p, dtype=float)))
    return -stencil.dV - (hp - hm) / stencil.dist


def lax_friedrichs(model: ProblemModel, A, u_minus, u_plus, alpha):
    return (A / 2) * (model.f(u_minus) + model.f(u_plus)) - (np.abs(A) * alpha / 2) * (u_plus - u_minus)


def flux_fu1(model: ProblemModel, stencil: InterfaceStencil):
    A = velocity(model, stencil)
    alpha = alpha_bound(model, stencil.u_m, stencil.u_p)
    return lax_friedrichs(model, A, np.asarray(stencil.u_m, float), np.asarray(stencil.u_p, float), alpha)


def flux_fu2(model: ProblemModel, stencil: InterfaceStencil, limiter: Limiter | str = Limiter.VAN_LEER):
    if Limiter(limiter) is Limiter.NONE:
        return flux_fu1(model, stencil)
    A = velocity(model, stencil)
    # alpha from the cell averages, not the traces
    alpha = alpha_bound(model, stencil.u_m, stencil.u_p)
    u_minus, u_plus = reconstruct(stencil)
    return lax_friedrichs(model, A, u_minus, u_plus, alpha)


def _require_linear(model: ProblemModel, name: str) -> None:
    if not model.linear_convection:
        raise ValueError(f"the {name} flux is only defined for linear convection f(u) = u")


def upwind(c, u_left, u_right):
    """``c+ u_left - c- u_right`` with ``x+ = max(x, 0)``, ``x- = max(-x, 0)``."""
    return np.maximum(c, 0.0) * u_left - np.maximum(-c, 0.0) * u_right


def flux_cu(model: ProblemModel, stencil: InterfaceStencil):
    _require_linear(model, "classical upwind")
    s = stencil
    return upwind(-s.dV, s.u_m, s.u_p) - (model.r(np.asarray(s.u_p)) - model.r(np.asarray(s.u_m))) / s.dist


def bernoulli(x):
    """``B(x) = x / (exp(x) - 1)`` with ``B(0) = 1``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) <= BERNOULLI_SERIES
    xs = np.where(small, x, 0.0)
    series = 1.0 - xs / 2.0 + xs * xs / 12.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # exp overflow gives x/inf = 0, the correct limit
        big = np.where(x < -745.0, -x, np.where(x > 745.0, 0.0, x / np.expm1(x)))
    return np.where(small, series, big)


def dr_mean(model: ProblemModel, a, b):
    """Averaged diffusivity between two states (logarithmic mean of ``h``).

    ``(h(b) - h(a)) / (log b - log a)`` when ``ab > 0`` and ``a != b``,
    else ``r'((a + b) / 2)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if model.h is None:
        raise ValueError("dr_mean needs a closed-form h")
    distinct = (a * b > 0.0) & (np.abs(a - b) > 1e-14 * np.maximum(a, b))
    sa = np.where(distinct, a, 1.0)
    sb = np.where(distinct, b, 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (model.h(sb) - model.h(sa)) / (np.log(sb) - np.log(sa))
    return np.where(distinct, ratio, model.r_prime(0.5 * (a + b)))


def sg_flux(dr, dist, dV, u_left, u_right):
    """Scharfetter-Gummel combination; ``dr == 0`` falls back to upwinding.

    Evaluated as ``(dr/dist) B(|x|) (u_left - u_right) - dV u_up`` with
    ``x = dist dV / dr`` and ``u_up`` the downstream-of-``-dV`` value, which equals
    ``(dr/dist) (B(x) u_left - B(-x) u_right)`` by ``B(-x) = B(x) + x`` and
    stays finite when ``dr`` underflows.
    """
    dr = np.asarray(dr, dtype=float)
    degenerate = dr <= 0.0
    safe = np.where(degenerate, 1.0, dr)
    with np.errstate(over="ignore"):
        x = np.minimum(np.abs(dist * dV / safe), 1e300)
    up = np.where(dV >= 0.0, u_right, u_left)
    sg = (safe / dist) * bernoulli(x) * (u_left - u_right) - dV * up
    return np.where(degenerate, upwind(-dV, u_left, u_right), sg)


def flux_sgext(model: ProblemModel, stencil: InterfaceStencil):
    _require_linear(model, "Scharfetter-Gummel")
    s = stencil
    dr = dr_mean(model, s.u_m, s.u_p)
    return sg_flux(dr, s.dist, s.dV, s.u_m, s.u_p)


def interface_flux(model: ProblemModel, stencil: InterfaceStencil, scheme: FluxScheme):
    kind = scheme.kind
    if kind is FluxKind.FU1:
        return flux_fu1(model, stencil)
    if kind is FluxKind.FU2:
        return flux_fu2(model, stencil, scheme.limiter)
    if kind is FluxKind.CU:
        return flux_cu(model, stencil)
    return flux_sgext(model, stencil)
