"""Problem models for ``du/dt = div(f(u) grad V + grad r(u))``.

A :class:`ProblemModel` bundles the nonlinearities together with the
enthalpy-like functions the fully upwind flux needs:

* ``h``, with ``h' = r'/u`` and ``h(1) = 0`` (linear convection),
* ``htilde``, with ``htilde' f = r'`` (coincides with ``h`` when ``f = id``),
* ``H``, the entropy density, whose derivative is ``htilde``.

All callables are vectorised over numpy arrays.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy import integrate
from scipy.special import xlogy

Array = np.ndarray
Func = Callable[[Array], Array]

# lower cut-off of the quadrature fallback for h when s -> 0
_QUAD_CUTOFF = 1e-14
# h-tilde arguments are clamped to [floor, ...] near log singularities
DEFAULT_EVAL_FLOOR = 1e-300


class DegenerateValueError(ValueError):
    """Evaluation at a point where h or h-tilde is not finite."""


@dataclass(frozen=True, eq=False)
class ProblemModel:
    name: str
    f: Func
    f_prime: Func
    r: Func
    r_prime: Func
    htilde: Func
    h: Func | None = None
    H: Func | None = None
    V: Callable[..., Array] | None = None
    linear_convection: bool = True
    # interior critical points of f' (roots of f''); None -> sample the interval
    f_critical_points: tuple[float, ...] | None = ()
    admissible: tuple[float, float] = (0.0, np.inf)
    h_at_zero: float = -np.inf
    htilde_singular: tuple[float, ...] = ()
    g: Func | None = None
    eval_floor: float = DEFAULT_EVAL_FLOOR
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def has_potential(self) -> bool:
        return self.V is not None

    def clamp_for_htilde(self, u: Array) -> Array:
        """Clip ``u`` into the region where ``htilde`` is finite.

        Only the singular endpoints are moved, and only by ``eval_floor``.
        Range violations are detected by the solver, not hidden here.
        """
        if not self.htilde_singular:
            return u
        lo, hi = self.admissible
        out = u
        if lo in self.htilde_singular:
            out = np.maximum(out, lo + self.eval_floor)
        if hi in self.htilde_singular and np.isfinite(hi):
            out = np.minimum(out, np.nextafter(hi, -np.inf))
        return out

    def __repr__(self) -> str:
        ps = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"ProblemModel({self.name}{', ' + ps if ps else ''})"


# ---------------------------------------------------------------------------
# scalar operations


def h_quadrature(model: ProblemModel, s: float) -> float:
    """``int_1^s r'(t)/t dt`` by adaptive Gauss-Kronrod quadrature."""
    s = float(s)
    if s < 0:
        raise ValueError("h is defined for s >= 0")
    upper = max(s, _QUAD_CUTOFF)

    def integrand(t: float) -> float:
        return float(model.r_prime(np.asarray(t))) / t

    val, _ = integrate.quad(integrand, 1.0, upper, epsabs=1e-10, epsrel=1e-12, limit=200)
    return val


def h_of(model: ProblemModel, s: float) -> float:
    s = float(s)
    if s < 0:
        raise ValueError("h is defined for s >= 0")
    if s == 0.0 and not np.isfinite(model.h_at_zero):
        raise DegenerateValueError(f"h(0+) = -inf for model {model.name}")
    if model.h is not None:
        return float(model.h(np.asarray(s)))
    return h_quadrature(model, s)


def htilde_of(model: ProblemModel, s: float) -> float:
    s = float(s)
    if s in model.htilde_singular:
        raise DegenerateValueError(
            f"htilde is not finite at u={s} for model {model.name} (f vanishes there)"
        )
    lo, hi = model.admissible
    if not lo <= s <= hi:
        raise ValueError(f"u={s} outside the admissible range [{lo}, {hi}]")
    return float(model.htilde(np.asarray(s)))


def alpha_bound(model: ProblemModel, a, b):
    """``max |f'(u)|`` over the closed interval between ``a`` and ``b``.

    Works elementwise on arrays. Uses the endpoints plus the roots of ``f''``
    when the model provides them, else a 33-point sampling.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if model.linear_convection:
        return np.ones(np.broadcast(a, b).shape)
    alpha = np.maximum(np.abs(model.f_prime(a)), np.abs(model.f_prime(b)))
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    if model.f_critical_points is None:
        for t in np.linspace(0.0, 1.0, 33)[1:-1]:
            alpha = np.maximum(alpha, np.abs(model.f_prime(lo + t * (hi - lo))))
        return alpha
    for c in model.f_critical_points:
        fc = abs(float(model.f_prime(np.asarray(c))))
        alpha = np.where((lo <= c) & (c <= hi), np.maximum(alpha, fc), alpha)
    return alpha


# ---------------------------------------------------------------------------
# power-law diffusion helpers, r(s) = s**p


def _power_parts(p: float) -> dict[str, Func | float]:
    if p == 1.0:
        return dict(
            r=lambda s: np.asarray(s, dtype=float) * 1.0,
            r_prime=lambda s: np.ones_like(np.asarray(s, dtype=float)),
            h=lambda s: np.log(s),
            H=lambda s: xlogy(s, s) - s,
            g=np.exp,
            h_at_zero=-np.inf,
        )
    c = p / (p - 1.0)

    def r(s):
        return np.maximum(s, 0.0) ** p

    def r_prime(s):
        return p * np.maximum(s, 0.0) ** (p - 1.0)

    def h(s):
        return c * (np.maximum(s, 0.0) ** (p - 1.0) - 1.0)

    def H(s):
        s = np.maximum(s, 0.0)
        return (s**p - p * s) / (p - 1.0)

    def g(y):
        y = np.asarray(y, dtype=float)
        base = 1.0 + y / c
        with np.errstate(invalid="ignore"):
            return np.where(base > 0.0, np.maximum(base, 0.0) ** (1.0 / (p - 1.0)), 0.0)

    return dict(r=r, r_prime=r_prime, h=h, H=H, g=g, h_at_zero=-c)


def _quadratic_potential(*xs):
    return sum(0.5 * x * x for x in xs)


def _identity(u):
    return np.asarray(u, dtype=float) * 1.0


def _one(u):
    return np.ones_like(np.asarray(u, dtype=float))


# ---------------------------------------------------------------------------
# catalog


def porous_media(m: float) -> ProblemModel:
    """``r(u) = u**m`` with the confining potential ``|x|**2 / 2``."""
    if not m > 1.0:
        raise ValueError(f"porous media exponent must exceed 1, got {m}")
    parts = _power_parts(float(m))
    return ProblemModel(
        name="porous_media",
        f=_identity,
        f_prime=_one,
        r=parts["r"],
        r_prime=parts["r_prime"],
        h=parts["h"],
        htilde=parts["h"],
        H=parts["H"],
        V=_quadratic_potential,
        g=parts["g"],
        h_at_zero=parts["h_at_zero"],
        params={"m": float(m)},
    )


def fokker_planck(k: int) -> ProblemModel:
    """Fermion (``k=-1``) or boson (``k=+1``) relaxation: ``f(u) = u(1+ku)``, ``r(u) = u``."""
    if k not in (-1, 1):
        raise ValueError(f"k must be -1 (fermions) or +1 (bosons), got {k}")
    k = int(k)

    def f(u):
        return u * (1.0 + k * u)

    def f_prime(u):
        return 1.0 + 2.0 * k * u

    def htilde(u):
        return np.log(u / (1.0 + k * u))

    def H(u):
        w = 1.0 + k * u
        return xlogy(u, u) - k * xlogy(w, w)

    return ProblemModel(
        name="fermion" if k == -1 else "boson",
        f=f,
        f_prime=f_prime,
        r=_identity,
        r_prime=_one,
        h=np.log,
        htilde=htilde,
        H=H,
        V=_quadratic_potential,
        linear_convection=False,
        f_critical_points=(),
        admissible=(0.0, 1.0) if k == -1 else (0.0, np.inf),
        htilde_singular=(0.0, 1.0) if k == -1 else (0.0,),
        params={"k": float(k)},
    )


def linear_drift_power_diffusion(
    exponent: float | None = 2.0,
    drift: float = 1.0,
    r: Func | None = None,
    r_prime: Func | None = None,
) -> ProblemModel:
    """Constant drift ``dV/dx = drift`` along the first axis with ``r(s) = s**exponent``.

    Pass ``r`` and ``r_prime`` instead of ``exponent`` for a custom diffusion;
    ``h`` and ``H`` are then evaluated by quadrature.
    """

    def V(x, *rest):
        return drift * x

    if r is not None or r_prime is not None:
        if r is None or r_prime is None:
            raise ValueError("custom diffusion needs both r and r_prime")
        model = ProblemModel(
            name="linear_drift_custom",
            f=_identity,
            f_prime=_one,
            r=r,
            r_prime=r_prime,
            htilde=lambda s: np.vectorize(lambda t: h_quadrature(model, t))(s),
            V=V,
            params={"drift": float(drift)},
        )
        return model
    if exponent is None or not exponent >= 1.0:
        raise ValueError(f"diffusion exponent must be >= 1, got {exponent}")
    parts = _power_parts(float(exponent))
    return ProblemModel(
        name="linear_drift_power",
        f=_identity,
        f_prime=_one,
        r=parts["r"],
        r_prime=parts["r_prime"],
        h=parts["h"],
        htilde=parts["h"],
        H=parts["H"],
        V=V,
        g=parts["g"],
        h_at_zero=parts["h_at_zero"],
        htilde_singular=(0.0,) if exponent == 1.0 else (),
        params={"exponent": float(exponent), "drift": float(drift)},
    )


def threshold_cubic_diffusion(drift: float = 1.0) -> ProblemModel:
    """``r(s) = (s-1)**3`` for ``s >= 1`` and 0 below: degenerate on all of ``[0, 1]``."""

    def r(s):
        d = np.maximum(np.asarray(s, dtype=float) - 1.0, 0.0)
        return d**3

    def r_prime(s):
        d = np.maximum(np.asarray(s, dtype=float) - 1.0, 0.0)
        return 3.0 * d**2

    def h(s):
        s = np.asarray(s, dtype=float)
        t = np.maximum(s, 1.0)
        return 3.0 * (0.5 * (t * t - 1.0) - 2.0 * (t - 1.0) + np.log(t))

    def H(s):
        s = np.asarray(s, dtype=float)
        t = np.maximum(s, 1.0)
        return 3.0 * ((t**3 - 1.0) / 6.0 - 0.5 * (t - 1.0) - (t - 1.0) ** 2 + t * np.log(t) - t + 1.0)

    def V(x, *rest):
        return drift * x

    return ProblemModel(
        name="threshold_cubic",
        f=_identity,
        f_prime=_one,
        r=r,
        r_prime=r_prime,
        h=h,
        htilde=h,
        H=H,
        V=V,
        h_at_zero=0.0,
        params={"drift": float(drift)},
    )


def buckley_leverett(epsilon: float) -> ProblemModel:
    """Buckley-Leverett with capillary diffusion ``epsilon * 4u(1-u) u_x``.

    The potential is ``V(x) = -x`` so that ``f(u) V' = -f(u)`` reproduces
    ``u_t + f(u)_x = ...`` under the sign convention of the general equation.
    """
    if not epsilon >= 0.0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    eps = float(epsilon)

    def f(u):
        return u**2 / (u**2 + (1 - u) ** 2)

    def f_prime(u):
        return 2 * u * (1 - u) / (u**2 + (1 - u) ** 2) ** 2

    def r(u):
        return eps * (2.0 * u**2 - (4.0 / 3.0) * u**3)

    def r_prime(u):
        return eps * 4.0 * u * (1.0 - u)

    def htilde(u):
        if eps == 0.0:
            return np.zeros_like(np.asarray(u, dtype=float))
        return eps * 4.0 * (np.log(u) - 3.0 * u + 2.0 * u**2 - (2.0 / 3.0) * u**3)

    def h(u):
        return eps * 4.0 * (u - 0.5 * u**2 - 0.5)

    def V(x, *rest):
        return -x

    return ProblemModel(
        name="buckley_leverett",
        f=f,
        f_prime=f_prime,
        r=r,
        r_prime=r_prime,
        h=h,
        htilde=htilde,
        V=V,
        linear_convection=False,
        f_critical_points=(0.5,),
        admissible=(0.0, 1.0),
        h_at_zero=-2.0 * eps,
        htilde_singular=(0.0,) if eps > 0.0 else (),
        params={"epsilon": eps},
    )


def dd_continuity(gamma: float, charge_sign: int) -> ProblemModel:
    """One carrier continuity equation of the drift-diffusion system.

    ``charge_sign = -1`` for electrons (effective potential ``-V``), ``+1``
    for holes. The potential itself is supplied by the Poisson solve.
    """
    if not gamma >= 1.0:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    if charge_sign not in (-1, 1):
        raise ValueError("charge_sign must be -1 or +1")
    parts = _power_parts(float(gamma))
    return ProblemModel(
        name="electrons" if charge_sign == -1 else "holes",
        f=_identity,
        f_prime=_one,
        r=parts["r"],
        r_prime=parts["r_prime"],
        h=parts["h"],
        htilde=parts["h"],
        H=parts["H"],
        V=None,
        g=parts["g"],
        h_at_zero=parts["h_at_zero"],
        htilde_singular=(0.0,) if gamma == 1.0 else (),
        params={"gamma": float(gamma), "charge_sign": float(charge_sign)},
    )


CATALOG = {
    "porous_media": porous_media,
    "fokker_planck": fokker_planck,
    "linear_drift_power_diffusion": linear_drift_power_diffusion,
    "threshold_cubic_diffusion": threshold_cubic_diffusion,
    "buckley_leverett": buckley_leverett,
    "dd_continuity": dd_continuity,
}
