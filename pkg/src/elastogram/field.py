"""Field containers, discrete norms, noise injection and field I/O.

All quantities are SI internally: displacements in meters, moduli in Pa.
Discrete integrals use trapezoidal weights (1/2 on edges, 1/4 at corners)
so constant fields integrate exactly.  Gradients use centered differences
in the interior and one-sided differences at boundary nodes.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import GridMismatch, MalformedHeader, NotInAdmissibleSet, RowCountMismatch
from .mesh import Grid


@dataclass(frozen=True)
class WaveField:
    grid: Grid
    values: np.ndarray  # complex, shape (ny, nx)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.ny, self.grid.nx):
            raise GridMismatch(
                f"values shape {v.shape} != grid shape {(self.grid.ny, self.grid.nx)}")
        object.__setattr__(self, "values", v)

    def __add__(self, other: "WaveField") -> "WaveField":
        _check_same_grid(self, other)
        return WaveField(self.grid, self.values + other.values)

    def __sub__(self, other: "WaveField") -> "WaveField":
        _check_same_grid(self, other)
        return WaveField(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "WaveField":
        return WaveField(self.grid, self.values * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Bounds:
    """Box constraints of the admissible set (Pa).

    In purely elastic mode the loss bounds collapse to (0, 0) and the loss
    modulus is pinned to zero.
    """

    g_storage_lo: float
    g_storage_hi: float
    g_loss_lo: float
    g_loss_hi: float

    @property
    def elastic(self) -> bool:
        return self.g_loss_lo == 0.0 and self.g_loss_hi == 0.0

    def validate(self):
        if not (0 < self.g_storage_lo < self.g_storage_hi):
            raise ValueError("storage bounds must satisfy 0 < lo < hi")
        if not self.elastic and not (0 < self.g_loss_lo < self.g_loss_hi):
            raise ValueError("loss bounds must satisfy 0 < lo < hi (or both 0)")

    def contains(self, g_storage, g_loss, atol: float = 1e-9) -> bool:
        sp = np.asarray(g_storage)
        lo = np.asarray(g_loss)
        ok = np.all(sp >= self.g_storage_lo - atol) and np.all(sp <= self.g_storage_hi + atol)
        if self.elastic:
            return bool(ok and np.all(np.abs(lo) <= atol))
        return bool(ok and np.all(lo >= self.g_loss_lo - atol)
                    and np.all(lo <= self.g_loss_hi + atol))


DEFAULT_BOUNDS = Bounds(1e3, 200e3, 1.0, 20e3)
DEFAULT_ELASTIC_BOUNDS = Bounds(1e3, 200e3, 0.0, 0.0)


@dataclass(frozen=True)
class LayeredParams:
    """Two constant layers split at the grid's interface row.

    Layer 1 is the upper region (above the interface), layer 2 the lower;
    nodes on the interface row itself take the layer-2 value.
    """

    g1_storage: float
    g1_loss: float
    g2_storage: float
    g2_loss: float

    @property
    def gamma1(self) -> complex:
        return self.g1_storage + 1j * self.g1_loss

    @property
    def gamma2(self) -> complex:
        return self.g2_storage + 1j * self.g2_loss

    def as_vector(self, elastic: bool = False) -> np.ndarray:
        if elastic:
            return np.array([self.g1_storage, self.g2_storage])
        return np.array([self.g1_storage, self.g1_loss,
                         self.g2_storage, self.g2_loss])

    @staticmethod
    def from_vector(p: np.ndarray, elastic: bool = False) -> "LayeredParams":
        if elastic:
            return LayeredParams(p[0], 0.0, p[1], 0.0)
        return LayeredParams(p[0], p[1], p[2], p[3])

    def expand(self, grid: Grid, bounds: Bounds = DEFAULT_BOUNDS) -> "ModulusField":
        if grid.interface_row is None:
            raise ValueError("grid has no interface row")
        sp = np.empty((grid.ny, grid.nx))
        lo = np.empty((grid.ny, grid.nx))
        m = grid.interface_row
        sp[: m + 1, :] = self.g2_storage
        sp[m + 1:, :] = self.g1_storage
        lo[: m + 1, :] = self.g2_loss
        lo[m + 1:, :] = self.g1_loss
        return ModulusField(grid, sp, lo, bounds, layers=self)


@dataclass(frozen=True)
class ModulusField:
    grid: Grid
    g_storage: np.ndarray  # real, shape (ny, nx), Pa
    g_loss: np.ndarray     # real, shape (ny, nx), Pa
    bounds: Bounds = DEFAULT_BOUNDS
    # When the field came from a layered parameterization, keep it: the
    # discretization can then place the coefficient jump exactly at the
    # interface row instead of averaging node samples across it.
    layers: Optional[LayeredParams] = None

    def __post_init__(self):
        sp = np.asarray(self.g_storage, dtype=float)
        lo = np.asarray(self.g_loss, dtype=float)
        shape = (self.grid.ny, self.grid.nx)
        if sp.shape != shape or lo.shape != shape:
            raise GridMismatch("modulus arrays do not match the grid shape")
        object.__setattr__(self, "g_storage", sp)
        object.__setattr__(self, "g_loss", lo)

    @property
    def gamma(self) -> np.ndarray:
        return self.g_storage + 1j * self.g_loss

    def check_admissible(self):
        if not self.bounds.contains(self.g_storage, self.g_loss):
            raise NotInAdmissibleSet(
                "modulus field violates the admissible box constraints")


def _check_same_grid(u, v):
    if not u.grid.same_as(v.grid):
        raise GridMismatch("fields live on different grids")


def trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.ones((grid.ny, grid.nx))
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return w


def gradient(u: WaveField) -> tuple:
    """(du/dx, du/dy) with centered interior / one-sided boundary stencils."""
    v = u.values
    gx = np.empty_like(v)
    gy = np.empty_like(v)
    hx, hy = u.grid.hx, u.grid.hy
    gx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2 * hx)
    gx[:, 0] = (v[:, 1] - v[:, 0]) / hx
    gx[:, -1] = (v[:, -1] - v[:, -2]) / hx
    gy[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2 * hy)
    gy[0, :] = (v[1, :] - v[0, :]) / hy
    gy[-1, :] = (v[-1, :] - v[-2, :]) / hy
    return gx, gy


def _weighted_sum(grid: Grid, a: np.ndarray) -> complex:
    return np.sum(trapezoid_weights(grid) * a) * grid.hx * grid.hy


def l2_norm(u: WaveField) -> float:
    return float(np.sqrt(_weighted_sum(u.grid, np.abs(u.values) ** 2).real))


def h1_norm(u: WaveField) -> float:
    gx, gy = gradient(u)
    s = (_weighted_sum(u.grid, np.abs(u.values) ** 2)
         + _weighted_sum(u.grid, np.abs(gx) ** 2)
         + _weighted_sum(u.grid, np.abs(gy) ** 2))
    return float(np.sqrt(s.real))


def l2_inner(u: WaveField, v: WaveField) -> complex:
    _check_same_grid(u, v)
    return complex(_weighted_sum(u.grid, u.values * np.conj(v.values)))


def h1_inner(u: WaveField, v: WaveField) -> complex:
    """Sesquilinear H1 inner product, conjugate-linear in the second slot."""
    _check_same_grid(u, v)
    ugx, ugy = gradient(u)
    vgx, vgy = gradient(v)
    s = (_weighted_sum(u.grid, u.values * np.conj(v.values))
         + _weighted_sum(u.grid, ugx * np.conj(vgx))
         + _weighted_sum(u.grid, ugy * np.conj(vgy)))
    return complex(s)


def add_relative_noise(u: WaveField, level: float, seed: int) -> WaveField:
    """Add white complex Gaussian noise with exact relative L2 magnitude.

    The raw noise draw is rescaled so that l2_norm(noise) equals
    level * l2_norm(u) exactly; deterministic for a fixed seed.
    """
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if level == 0:
        return u
    rng = np.random.default_rng(seed)
    shape = u.values.shape
    e = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    noise = WaveField(u.grid, e)
    scale = level * l2_norm(u) / l2_norm(noise)
    return WaveField(u.grid, u.values + scale * e)


def noise_level_delta(u_noisy: WaveField, u_clean: WaveField) -> float:
    """Noise level in the data-space (H1) norm."""
    _check_same_grid(u_noisy, u_clean)
    return h1_norm(u_noisy - u_clean)


def write_field(path, u: WaveField):
    g = u.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.nx},{g.ny},{g.hx:.17g},{g.hy:.17g}\n")
        for j in range(g.ny):
            for i in range(g.nx):
                z = u.values[j, i]
                fh.write(f"{i},{j},{z.real:.17g},{z.imag:.17g}\n")


def read_field(path) -> WaveField:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise MalformedHeader(f"{path}: empty file")
        parts = header.split(",")
        if len(parts) != 4:
            raise MalformedHeader(f"{path}: bad header {header!r}")
        try:
            nx, ny = int(parts[0]), int(parts[1])
            hx, hy = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise MalformedHeader(f"{path}: bad header {header!r}") from exc
        values = np.zeros((ny, nx), dtype=complex)
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i_s, j_s, re_s, im_s = line.split(",")
            values[int(j_s), int(i_s)] = float(re_s) + 1j * float(im_s)
            count += 1
    if count != nx * ny:
        raise RowCountMismatch(f"{path}: header says {nx * ny} rows, found {count}")
    grid = Grid(nx=nx, ny=ny, hx=hx, hy=hy,
                x_extent=hx * (nx - 1), y_extent=hy * (ny - 1))
    return WaveField(grid, values)
