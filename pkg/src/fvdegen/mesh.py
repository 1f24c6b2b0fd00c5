"""Cell-centred meshes: 1D non-uniform partitions and their Cartesian products."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

_UNIFORM_RTOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Partition ``a = x_{1/2} < ... < x_{N+1/2} = b`` of an interval.

    Attributes
    ----------
    interfaces : ndarray, shape (N+1,)
    centers : ndarray, shape (N,)
        Midpoints of the cells.
    widths : ndarray, shape (N,)
        Cell measures ``m(K_i)``.
    interface_distances : ndarray, shape (N+1,)
        ``d(x_i, x_{i+1})`` for every interface. The two boundary entries are
        centre-to-boundary distances, so a Dirichlet ghost value sits on the
        boundary face.
    """

    interfaces: np.ndarray
    centers: np.ndarray = field(init=False, repr=False)
    widths: np.ndarray = field(init=False, repr=False)
    interface_distances: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        x = np.array(self.interfaces, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a mesh needs at least two interface coordinates")
        if not np.all(np.isfinite(x)):
            raise ValueError("interface coordinates must be finite")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("interface coordinates must be strictly increasing")
        centers = 0.5 * (x[:-1] + x[1:])
        widths = x[1:] - x[:-1]
        dist = np.empty(x.size)
        dist[0] = centers[0] - x[0]
        dist[1:-1] = centers[1:] - centers[:-1]
        dist[-1] = x[-1] - centers[-1]
        h = (x[-1] - x[0]) / widths.size
        if np.all(np.abs(widths - h) <= _UNIFORM_RTOL * h):
            # exact uniform measure rather than differences of rounded coordinates;
            # distances stay centre differences so linear potentials have exact slopes
            widths[:] = h
        object.__setattr__(self, "interfaces", _frozen(x))
        object.__setattr__(self, "centers", _frozen(centers))
        object.__setattr__(self, "widths", _frozen(widths))
        object.__setattr__(self, "interface_distances", _frozen(dist))

    @property
    def n_cells(self) -> int:
        return self.widths.size

    @property
    def a(self) -> float:
        return float(self.interfaces[0])

    @property
    def b(self) -> float:
        return float(self.interfaces[-1])

    @property
    def length(self) -> float:
        return self.b - self.a

    @cached_property
    def is_uniform(self) -> bool:
        w = self.widths
        return bool(np.all(np.abs(w - w[0]) <= _UNIFORM_RTOL * w[0]))

    def __repr__(self) -> str:
        kind = "uniform" if self.is_uniform else "non-uniform"
        return f"Mesh1D({kind}, n_cells={self.n_cells}, a={self.a:g}, b={self.b:g})"


def build_uniform_1d(a: float, b: float, n_cells: int) -> Mesh1D:
    """Uniform partition of ``(a, b)`` into ``n_cells`` cells."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if int(n_cells) != n_cells or n_cells < 1:
        raise ValueError(f"n_cells must be a positive integer, got {n_cells}")
    n = int(n_cells)
    # a + i*h rather than linspace keeps every width as close to h as rounding allows
    h = (b - a) / n
    x = a + h * np.arange(n + 1, dtype=float)
    x[-1] = b
    return Mesh1D(x)


def build_nonuniform_1d(interfaces: Sequence[float]) -> Mesh1D:
    return Mesh1D(np.asarray(interfaces, dtype=float))


@dataclass(frozen=True, eq=False)
class MeshND:
    """Cartesian product of one to three :class:`Mesh1D` axes.

    Cell arrays use ``indexing='ij'`` layout: axis ``k`` of a value array runs
    along ``axes[k]``. Flattening is row-major in axis declaration order.
    """

    axes: tuple[Mesh1D, ...]

    def __post_init__(self) -> None:
        axes = tuple(self.axes)
        if not 1 <= len(axes) <= 3:
            raise ValueError(f"MeshND supports 1 to 3 axes, got {len(axes)}")
        for ax in axes:
            if not isinstance(ax, Mesh1D):
                raise TypeError("axes must be Mesh1D instances")
        object.__setattr__(self, "axes", axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.n_cells for ax in self.axes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def cell_volumes(self) -> np.ndarray:
        vol = self.axes[0].widths
        for ax in self.axes[1:]:
            vol = np.multiply.outer(vol, ax.widths)
        return _frozen(np.array(vol, dtype=float))

    @cached_property
    def centers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable centre coordinates, one array per axis."""
        out = []
        for k, ax in enumerate(self.axes):
            shape = [1] * self.dim
            shape[k] = ax.n_cells
            out.append(ax.centers.reshape(shape))
        return tuple(out)

    @property
    def volume(self) -> float:
        return float(np.prod([ax.length for ax in self.axes]))

    @property
    def is_uniform(self) -> bool:
        return all(ax.is_uniform for ax in self.axes)

    def flat_index(self, index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def unflat_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def mass(self, values: np.ndarray) -> float:
        """Discrete mass ``sum_i m(K_i) U_i``."""
        return float(np.sum(self.cell_volumes * values))

    def __repr__(self) -> str:
        return f"MeshND(shape={self.shape})"


def build_cartesian(axes: Sequence[Mesh1D]) -> MeshND:
    if len(axes) == 0:
        raise ValueError("need at least one axis")
    return MeshND(tuple(axes))


def as_meshnd(mesh: Mesh1D | MeshND) -> MeshND:
    return mesh if isinstance(mesh, MeshND) else MeshND((mesh,))


def coarsen_halving(mesh: Mesh1D | MeshND) -> MeshND:
    """The mesh obtained by merging pairs of cells along every axis."""
    mesh = as_meshnd(mesh)
    axes = []
    for ax in mesh.axes:
        if ax.n_cells % 2:
            raise ValueError("cell counts must be even to coarsen")
        axes.append(Mesh1D(ax.interfaces[::2]))
    return MeshND(tuple(axes))


def restrict_halving(fine_values: np.ndarray, mesh: Mesh1D | MeshND | None = None) -> np.ndarray:
    """Volume-weighted average of each block of ``2**d`` fine cells.

    Parameters
    ----------
    fine_values : ndarray
        Cell averages on a uniform mesh with an even count along every axis.
    mesh : Mesh1D or MeshND, optional
        The fine mesh. When given it must be uniform and match the shape of
        ``fine_values``.
    """
    u = np.asarray(fine_values, dtype=float)
    if mesh is not None:
        mesh = as_meshnd(mesh)
        if mesh.shape != u.shape:
            raise ValueError(f"values shape {u.shape} does not match mesh {mesh.shape}")
        if not mesh.is_uniform:
            raise ValueError("restriction requires a uniform fine mesh")
    if u.ndim == 0:
        raise ValueError("need at least a 1D array")
    if any(n % 2 for n in u.shape):
        raise ValueError(f"every axis count must be even, got {u.shape}")
    split = []
    for n in u.shape:
        split += [n // 2, 2]
    return u.reshape(split).mean(axis=tuple(range(1, 2 * u.ndim, 2)))
