"""Uniform cell grids and facet indexing.

Conventions used throughout the package:

- Cells are indexed by integer tuples ``i`` with ``0 <= i[a] < extents[a]``;
  the cell center is ``origin + (i + 0.5) * spacing``.
- An axis-``a`` facet is indexed by a tuple ``f`` with ``f[a]`` in
  ``0..extents[a]`` (one more slot than cells along ``a``).  The facet lies
  in the hyperplane ``x_a = origin[a] + f[a] * spacing`` between the lower
  cell ``f - e_a`` and the upper cell ``f`` (either may fall off the grid).
- A facet has two sides: MINUS (seen from the lower cell) and PLUS (seen
  from the upper cell).  ``orient(MINUS) = +1`` because the facet is the
  lower cell's outgoing face in the +a direction; ``orient(PLUS) = -1``.
  The classical outward flux seen from side ``s`` is therefore
  ``orient(s) * value(s)`` where ``value`` is the stored +a component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

MINUS = 0
PLUS = 1

_SIDE_ORIENT = (1.0, -1.0)


def side_orient(side: int) -> float:
    """+1 for the MINUS (lower-cell) side, -1 for the PLUS side."""
    return _SIDE_ORIENT[side]


def unit_ball_volume(n: int) -> float:
    """Volume of the n-dimensional unit ball."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``extents`` cells with edge length ``spacing``.

    ``origin`` is the low corner of cell (0, ..., 0).
    """

    n: int
    spacing: float
    origin: tuple[float, ...]
    extents: tuple[int, ...]

    def __post_init__(self):
        if self.n not in (2, 3):
            raise InputError(f"dimension must be 2 or 3, got {self.n}")
        if not self.spacing > 0.0:
            raise InputError(f"spacing must be positive, got {self.spacing}")
        if len(self.origin) != self.n or len(self.extents) != self.n:
            raise InputError("origin/extents length must match dimension")
        if any(m < 1 for m in self.extents):
            raise InputError("extents must be >= 1 per axis")
        if math.prod(self.extents) > 2**31:
            raise InputError("grid too large for the cell address space")
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "extents", tuple(int(m) for m in self.extents))

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.n

    @property
    def facet_area(self) -> float:
        return self.spacing ** (self.n - 1)

    def facet_shape(self, axis: int) -> tuple[int, ...]:
        shape = list(self.extents)
        shape[axis] += 1
        return tuple(shape)

    def axis_coords(self, axis: int, *, centered: bool = True) -> np.ndarray:
        """1D coordinates along ``axis``: cell centers or facet planes."""
        m = self.extents[axis]
        if centered:
            return self.origin[axis] + (np.arange(m) + 0.5) * self.spacing
        return self.origin[axis] + np.arange(m + 1) * self.spacing

    def cell_center_mesh(self) -> list[np.ndarray]:
        """Broadcastable per-axis coordinate arrays at cell centers."""
        coords = []
        for a in range(self.n):
            shape = [1] * self.n
            shape[a] = self.extents[a]
            coords.append(self.axis_coords(a).reshape(shape))
        return coords

    def facet_center_mesh(self, axis: int) -> list[np.ndarray]:
        """Broadcastable coordinate arrays at axis-``axis`` facet centers."""
        coords = []
        for a in range(self.n):
            shape = [1] * self.n
            shape[a] = self.facet_shape(axis)[a]
            c = self.axis_coords(a, centered=(a != axis))
            coords.append(c.reshape(shape))
        return coords

    def cell_center(self, idx) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(idx) + 0.5) * self.spacing

    def facet_center(self, axis: int, fidx) -> np.ndarray:
        x = np.asarray(self.origin) + (np.asarray(fidx) + 0.5) * self.spacing
        x[axis] -= 0.5 * self.spacing
        return x

    def in_bounds(self, idx) -> bool:
        return all(0 <= idx[a] < self.extents[a] for a in range(self.n))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin)
        return lo, lo + np.asarray(self.extents) * self.spacing

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "spacing": self.spacing,
            "origin": list(self.origin),
            "extents": list(self.extents),
        }

    @staticmethod
    def from_json(obj: dict) -> "Grid":
        try:
            return Grid(
                n=int(obj["n"]),
                spacing=float(obj["spacing"]),
                origin=tuple(obj["origin"]),
                extents=tuple(obj["extents"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed grid object: {exc}") from exc


@dataclass(frozen=True, order=True)
class Facet:
    """One codimension-1 cell interface.

    ``base`` is the index tuple of the facet slot (see module docstring):
    the facet separates lower cell ``base - e_axis`` from upper cell
    ``base``.
    """

    axis: int
    base: tuple[int, ...]

    def lower_cell(self) -> tuple[int, ...]:
        c = list(self.base)
        c[self.axis] -= 1
        return tuple(c)

    def upper_cell(self) -> tuple[int, ...]:
        return self.base

    def cell_on(self, side: int) -> tuple[int, ...]:
        return self.lower_cell() if side == MINUS else self.upper_cell()


class FacetArrays:
    """Per-axis boolean masks over facet slots; a set of facets in bulk form.

    Supports iteration in lexicographic (axis, index) order, which is the
    canonical deterministic order everywhere in this package.
    """

    def __init__(self, grid: Grid, masks: list[np.ndarray] | None = None):
        self.grid = grid
        if masks is None:
            masks = [np.zeros(grid.facet_shape(a), dtype=bool) for a in range(grid.n)]
        self.masks = masks

    def copy(self) -> "FacetArrays":
        return FacetArrays(self.grid, [m.copy() for m in self.masks])

    def count(self) -> int:
        return int(sum(int(m.sum()) for m in self.masks))

    def __contains__(self, facet: Facet) -> bool:
        return bool(self.masks[facet.axis][facet.base])

    def add(self, facet: Facet) -> None:
        self.masks[facet.axis][facet.base] = True

    def facets(self) -> list[Facet]:
        out = []
        for a in range(self.grid.n):
            for idx in np.argwhere(self.masks[a]):
                out.append(Facet(a, tuple(int(v) for v in idx)))
        return out

    def centers(self) -> np.ndarray:
        """(N, n) facet-center coordinates in lexicographic order."""
        rows = []
        for a in range(self.grid.n):
            idx = np.argwhere(self.masks[a])
            if idx.size == 0:
                continue
            x = (idx + 0.5) * self.grid.spacing + np.asarray(self.grid.origin)
            x[:, a] -= 0.5 * self.grid.spacing
            rows.append(x)
        if not rows:
            return np.zeros((0, self.grid.n))
        return np.concatenate(rows, axis=0)

    def union(self, other: "FacetArrays") -> "FacetArrays":
        return FacetArrays(
            self.grid, [a | b for a, b in zip(self.masks, other.masks)]
        )

    def intersection_count(self, other: "FacetArrays") -> int:
        return int(sum(int((a & b).sum()) for a, b in zip(self.masks, other.masks)))


@dataclass(frozen=True)
class Window:
    """Axis-aligned cell-index box ``lo <= i < hi`` on a grid."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise InputError("window must be nonempty")

    @staticmethod
    def full(grid: Grid) -> "Window":
        return Window(tuple(0 for _ in grid.extents), grid.extents)

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(l, h) for l, h in zip(self.lo, self.hi))

    def mask(self, grid: Grid) -> np.ndarray:
        m = np.zeros(grid.extents, dtype=bool)
        m[self.slices()] = True
        return m

    def strictly_contains_cells(self, cells: np.ndarray) -> bool:
        """True if every true cell sits inside with >= 1 cell of margin."""
        idx = np.argwhere(cells)
        if idx.size == 0:
            return True
        lo = idx.min(axis=0)
        hi = idx.max(axis=0) + 1
        return bool(
            np.all(lo > np.asarray(self.lo)) and np.all(hi < np.asarray(self.hi))
        )
