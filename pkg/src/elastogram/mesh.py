"""Uniform rectangular grid with an interface-aligned row.

Nodes are vertex-centered: node (i, j) sits at (i*hx, j*hy), so Dirichlet
data is imposed exactly at boundary nodes.  Node indices are row-major with
j (the vertical index) outer: index = j*nx + i.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonAlignedInterface

# Boundary classification codes
INTERIOR = 0
DIRICHLET_TOP = 1
DIRICHLET_BOTTOM = 2
DIRICHLET_LEFT = 3
DIRICHLET_RIGHT = 4


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    hx: float
    hy: float
    x_extent: float
    y_extent: float
    interface_row: Optional[int] = None

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(0.0, self.x_extent, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(0.0, self.y_extent, self.ny)

    def node_index(self, i: int, j: int) -> int:
        return j * self.nx + i

    def node_ij(self, index: int) -> tuple:
        return index % self.nx, index // self.nx

    def node_coords(self, i: int, j: int) -> tuple:
        return i * self.hx, j * self.hy

    def same_as(self, other: "Grid") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and abs(self.x_extent - other.x_extent) <= 1e-12 * max(1.0, self.x_extent)
            and abs(self.y_extent - other.y_extent) <= 1e-12 * max(1.0, self.y_extent)
        )


@dataclass(frozen=True)
class BoundaryMask:
    """Per-node classification, shape (ny, nx), values in the codes above.

    Corners are owned by the top/bottom edges so that the driving data on
    the top edge covers the full row.
    """

    kinds: np.ndarray

    @property
    def n_boundary(self) -> int:
        return int(np.count_nonzero(self.kinds))

    @property
    def interior(self) -> np.ndarray:
        return self.kinds == INTERIOR


def build_grid(nx: int, ny: int, x_extent: float, y_extent: float,
               x_L: Optional[float] = None) -> Grid:
    """Build a uniform grid; if x_L is given it must land on a grid row."""
    if nx < 3 or ny < 3:
        raise ValueError(f"need nx, ny >= 3, got {nx}x{ny}")
    if x_extent <= 0 or y_extent <= 0:
        raise ValueError("extents must be positive")
    hx = x_extent / (nx - 1)
    hy = y_extent / (ny - 1)
    interface_row = None
    if x_L is not None:
        if not (0 < x_L < y_extent):
            raise ValueError(f"x_L={x_L} must lie strictly inside (0, {y_extent})")
        ratio = x_L / hy
        if abs(ratio - round(ratio)) > 1e-9:
            raise NonAlignedInterface(
                f"x_L={x_L} is {ratio} rows from the bottom; adjust ny or x_L")
        interface_row = int(round(ratio))
    return Grid(nx=nx, ny=ny, hx=hx, hy=hy,
                x_extent=x_extent, y_extent=y_extent,
                interface_row=interface_row)


def classify_boundary(g: Grid) -> BoundaryMask:
    kinds = np.full((g.ny, g.nx), INTERIOR, dtype=np.int8)
    kinds[:, 0] = DIRICHLET_LEFT
    kinds[:, -1] = DIRICHLET_RIGHT
    # horizontal edges last: corners belong to top/bottom
    kinds[0, :] = DIRICHLET_BOTTOM
    kinds[-1, :] = DIRICHLET_TOP
    return BoundaryMask(kinds=kinds)
