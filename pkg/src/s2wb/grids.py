"""Uniform box lattices for scalar potentials, difference stencils, and the
S2GRID v1 text format.

Grids are axis-aligned boxes with the same node count m per axis; the solver
always works on symmetric boxes [-R, R]^n, while Legendre-transformed grids
may carry per-axis ranges.  Second derivatives use centered stencils, mixed
derivatives the 4-point cross stencil.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def _readonly(a):
    out = np.array(a, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PotentialGrid:
    """Discrete scalar field on a uniform box lattice.

    axes holds the per-axis (lo, hi) ranges; values has shape (m,)*n with
    boundary nodes carrying the Dirichlet trace.  aux carries optional
    provenance payloads (for example the source-side trace field attached
    by the grid Legendre transform); it does not affect equality."""

    n: int
    m: int
    axes: tuple
    values: np.ndarray
    aux: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("grid dimension must be positive")
        if self.m < 5:
            raise DomainError("second-order stencils need m >= 5 nodes per axis")
        axes = tuple((float(lo), float(hi)) for lo, hi in self.axes)
        if len(axes) != self.n:
            raise DomainError("axes must list one (lo, hi) pair per dimension")
        for lo, hi in axes:
            if not hi > lo:
                raise DomainError("axis range must have hi > lo")
        v = _readonly(self.values)
        if v.shape != (self.m,) * self.n:
            raise DomainError(f"values must have shape {(self.m,) * self.n}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", v)

    @classmethod
    def box(cls, n, extent, m, values):
        """Symmetric box [-R, R]^n."""
        return cls(n=n, m=m, axes=((-float(extent), float(extent)),) * n, values=values)

    @property
    def extent(self) -> float:
        """Half-width of axis 0 (the box R for symmetric grids)."""
        lo, hi = self.axes[0]
        return 0.5 * (hi - lo)

    @property
    def spacings(self) -> tuple:
        return tuple((hi - lo) / (self.m - 1) for lo, hi in self.axes)

    @property
    def h(self) -> float:
        return self.spacings[0]

    def is_symmetric_box(self, rel=1e-12) -> bool:
        r0 = self.extent
        scale = 1.0 + abs(r0)
        for lo, hi in self.axes:
            if abs(lo + hi) > rel * scale or abs((hi - lo) / 2.0 - r0) > rel * scale:
                return False
        return True

    def axis_coords(self, k: int) -> np.ndarray:
        lo, hi = self.axes[k]
        return np.linspace(lo, hi, self.m)

    def meshgrid(self):
        return np.meshgrid(*(self.axis_coords(k) for k in range(self.n)), indexing="ij")

    def replace_values(self, values) -> "PotentialGrid":
        return PotentialGrid(n=self.n, m=self.m, axes=self.axes, values=values)


def boundary_mask(n: int, m: int) -> np.ndarray:
    mask = np.zeros((m,) * n, dtype=bool)
    for k in range(n):
        sl0 = [slice(None)] * n
        sl0[k] = 0
        mask[tuple(sl0)] = True
        sl0[k] = m - 1
        mask[tuple(sl0)] = True
    return mask


def _shift(v: np.ndarray, offsets: dict) -> np.ndarray:
    """Interior-shaped view of v offset by offsets[axis] along each axis."""
    sl = []
    for k in range(v.ndim):
        by = offsets.get(k, 0)
        sl.append(slice(1 + by, v.shape[k] - 1 + by))
    return v[tuple(sl)]


def hessian_entries(grid: PotentialGrid) -> dict:
    """{(a, b): D^2_ab field on interior nodes}, a <= b.

    Centered second differences on the axes, 4-point cross stencil for the
    mixed entries; exact on quadratics."""
    v = grid.values
    hs = grid.spacings
    out = {}
    for a in range(grid.n):
        out[(a, a)] = (_shift(v, {a: 1}) - 2.0 * _shift(v, {}) + _shift(v, {a: -1})) / hs[a] ** 2
    for a in range(grid.n):
        for b in range(a + 1, grid.n):
            pp = _shift(v, {a: 1, b: 1})
            mm = _shift(v, {a: -1, b: -1})
            pm = _shift(v, {a: 1, b: -1})
            mp = _shift(v, {a: -1, b: 1})
            out[(a, b)] = (pp + mm - pm - mp) / (4.0 * hs[a] * hs[b])
    return out


def hessian_matrices(grid: PotentialGrid, ent: dict = None) -> np.ndarray:
    """Interior Hessians stacked as (N_interior, n, n)."""
    if ent is None:
        ent = hessian_entries(grid)
    shape = ent[(0, 0)].shape
    count = int(np.prod(shape))
    out = np.empty((count, grid.n, grid.n))
    for a in range(grid.n):
        for b in range(a, grid.n):
            field = ent[(a, b)].reshape(-1)
            out[:, a, b] = field
            out[:, b, a] = field
    return out


def gradient_fields(grid: PotentialGrid) -> list:
    """First-derivative fields on the full lattice: centered differences in
    the interior, second-order one-sided at the boundary (exact on
    quadratics)."""
    v = grid.values
    out = []
    for a in range(grid.n):
        h = grid.spacings[a]
        g = np.empty_like(v)
        mid = [slice(None)] * grid.n
        mid[a] = slice(1, -1)
        hi = [slice(None)] * grid.n
        hi[a] = slice(2, None)
        lo = [slice(None)] * grid.n
        lo[a] = slice(None, -2)
        g[tuple(mid)] = (v[tuple(hi)] - v[tuple(lo)]) / (2.0 * h)
        first = [slice(None)] * grid.n
        first[a] = 0
        s1 = [slice(None)] * grid.n
        s1[a] = 1
        s2 = [slice(None)] * grid.n
        s2[a] = 2
        g[tuple(first)] = (-3.0 * v[tuple(first)] + 4.0 * v[tuple(s1)] - v[tuple(s2)]) / (2.0 * h)
        end = grid.m - 1
        last = [slice(None)] * grid.n
        last[a] = end
        l1 = [slice(None)] * grid.n
        l1[a] = end - 1
        l2 = [slice(None)] * grid.n
        l2[a] = end - 2
        g[tuple(last)] = (3.0 * v[tuple(last)] - 4.0 * v[tuple(l1)] + v[tuple(l2)]) / (2.0 * h)
        out.append(g)
    return out


# --- S2GRID v1 text format ---------------------------------------------------

def write_s2grid(grid: PotentialGrid, path) -> None:
    """Write "S2GRID v1 n m R" then m^n node values row-major, one per line.

    Only symmetric boxes carry enough metadata for this format."""
    if not grid.is_symmetric_box():
        raise DomainError("S2GRID v1 stores symmetric boxes only")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"S2GRID v1 {grid.n} {grid.m} {float(grid.extent)!r}\n")
        for val in grid.values.reshape(-1):
            fh.write(f"{float(val)!r}\n")


def read_s2grid(path) -> PotentialGrid:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "S2GRID" or header[1] != "v1":
            raise DomainError(f"not an S2GRID v1 file: {path}")
        n, m, extent = int(header[2]), int(header[3]), float(header[4])
        vals = np.array([float(line) for line in fh], dtype=np.float64)
    if vals.size != m ** n:
        raise DomainError(f"S2GRID payload has {vals.size} values, expected {m ** n}")
    return PotentialGrid.box(n=n, extent=extent, m=m, values=vals.reshape((m,) * n))
