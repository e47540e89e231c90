"""Finite-difference forward solver for the damped scalar wave equation.

Discretizes  -div(gamma grad u) - rho*omega^2 u = 0  with Dirichlet data on
a uniform grid using a flux-conservative 5-point scheme.  Face coefficients
come in two flavors:

* node-sampled fields: harmonic mean of the two adjacent node values, the
  right average for piecewise-constant coefficients whose jumps fall on
  face midpoints;
* layered fields with a grid-aligned interface row: the face coefficient is
  the layer value at the face midpoint, and horizontal faces on the
  interface row take the arithmetic layer average (the control volume of an
  interface node is half in each layer).  This keeps the scheme second
  order when the coefficient jump sits exactly on a grid row, and makes the
  face coefficients linear in the layer parameters.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatch, SingularSystem, SolverDivergence
from .field import LayeredParams, ModulusField, WaveField
from .mesh import Grid

RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class FaceCoefficients:
    """Per-face coefficients: wx for vertical faces between (i, j) and
    (i+1, j), shape (ny, nx-1); wy for horizontal faces between (i, j) and
    (i, j+1), shape (ny-1, nx)."""

    wx: np.ndarray
    wy: np.ndarray

    def __add__(self, other):
        return FaceCoefficients(self.wx + other.wx, self.wy + other.wy)

    def __mul__(self, s):
        return FaceCoefficients(self.wx * s, self.wy * s)

    __rmul__ = __mul__


def faces_from_nodes(gamma_nodes: np.ndarray) -> FaceCoefficients:
    g = np.asarray(gamma_nodes)
    wx = 2 * g[:, :-1] * g[:, 1:] / (g[:, :-1] + g[:, 1:])
    wy = 2 * g[:-1, :] * g[1:, :] / (g[:-1, :] + g[1:, :])
    return FaceCoefficients(wx, wy)


def faces_from_nodes_directional(gamma_nodes: np.ndarray,
                                 dgamma_nodes: np.ndarray) -> FaceCoefficients:
    """Directional derivative of the harmonic-mean face coefficients."""
    g = np.asarray(gamma_nodes)
    d = np.asarray(dgamma_nodes)

    def dharm(gp, gq, dp, dq):
        return 2 * (gq ** 2 * dp + gp ** 2 * dq) / (gp + gq) ** 2

    wx = dharm(g[:, :-1], g[:, 1:], d[:, :-1], d[:, 1:])
    wy = dharm(g[:-1, :], g[1:, :], d[:-1, :], d[1:, :])
    return FaceCoefficients(wx, wy)


def faces_from_layers(grid: Grid, gamma1: complex, gamma2: complex) -> FaceCoefficients:
    if grid.interface_row is None:
        raise ValueError("grid has no interface row")
    m = grid.interface_row
    wx = np.empty((grid.ny, grid.nx - 1), dtype=complex)
    wx[:m, :] = gamma2
    wx[m, :] = 0.5 * (gamma1 + gamma2)
    wx[m + 1:, :] = gamma1
    wy = np.empty((grid.ny - 1, grid.nx), dtype=complex)
    wy[:m, :] = gamma2
    wy[m:, :] = gamma1
    return FaceCoefficients(wx, wy)


def faces_for(gamma: ModulusField) -> FaceCoefficients:
    if gamma.layers is not None:
        return faces_from_layers(gamma.grid, gamma.layers.gamma1, gamma.layers.gamma2)
    return faces_from_nodes(gamma.gamma)


class HelmholtzOperator:
    """Assembled operator A u = b for -div(gamma grad u) - rho*omega^2 u = 0
    with Dirichlet rows eliminated into the right-hand side."""

    def __init__(self, grid: Grid, gamma: ModulusField, rho: float, omega: float,
                 dirichlet: np.ndarray, faces: Optional[FaceCoefficients] = None):
        gamma.check_admissible()
        if dirichlet.shape != (grid.ny, grid.nx):
            raise GridMismatch("dirichlet array does not match the grid")
        self.grid = grid
        self.gamma = gamma
        self.rho = rho
        self.omega = omega
        self.dirichlet = np.asarray(dirichlet, dtype=complex)
        self.faces = faces if faces is not None else faces_for(gamma)
        self._lu = None
        self._assemble()

    def _assemble(self):
        g = self.grid
        nxi, nyi = g.nx - 2, g.ny - 2
        hx2, hy2 = g.hx ** 2, g.hy ** 2
        wx, wy = self.faces.wx, self.faces.wy

        # face coefficients seen from interior node (i, j), i=1..nx-2, j=1..ny-2
        w_w = wx[1:-1, :-1]   # west face of node (i, j)
        w_e = wx[1:-1, 1:]    # east face
        w_s = wy[:-1, 1:-1]   # south face
        w_n = wy[1:, 1:-1]    # north face

        diag = (w_w + w_e) / hx2 + (w_s + w_n) / hy2 - self.rho * self.omega ** 2

        idx = np.arange(nxi * nyi).reshape(nyi, nxi)
        rows = [idx.ravel()]
        cols = [idx.ravel()]
        vals = [diag.ravel()]
        # east/west couplings
        rows.append(idx[:, :-1].ravel()); cols.append(idx[:, 1:].ravel())
        vals.append((-w_e[:, :-1] / hx2).ravel())
        rows.append(idx[:, 1:].ravel()); cols.append(idx[:, :-1].ravel())
        vals.append((-w_w[:, 1:] / hx2).ravel())
        # north/south couplings
        rows.append(idx[:-1, :].ravel()); cols.append(idx[1:, :].ravel())
        vals.append((-w_n[:-1, :] / hy2).ravel())
        rows.append(idx[1:, :].ravel()); cols.append(idx[:-1, :].ravel())
        vals.append((-w_s[1:, :] / hy2).ravel())

        self.matrix = sp.csc_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(nxi * nyi, nxi * nyi))

        # Dirichlet lift
        bc = self.dirichlet
        lift = np.zeros((nyi, nxi), dtype=complex)
        lift[:, 0] += w_w[:, 0] * bc[1:-1, 0] / hx2
        lift[:, -1] += w_e[:, -1] * bc[1:-1, -1] / hx2
        lift[0, :] += w_s[0, :] * bc[0, 1:-1] / hy2
        lift[-1, :] += w_n[-1, :] * bc[-1, 1:-1] / hy2
        self.lift = lift.ravel()

    def _factorize(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix)
            except RuntimeError as exc:
                if "singular" in str(exc).lower():
                    raise SingularSystem(
                        "discrete system is singular (interior resonance; "
                        "expected only in the elastic mode)") from exc
                raise
        return self._lu

    def _solve_interior(self, b: np.ndarray) -> np.ndarray:
        lu = self._factorize()
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularSystem("linear solve produced non-finite values")
        bnorm = np.linalg.norm(b)
        if bnorm > 0:
            res = np.linalg.norm(self.matrix @ x - b)
            if res > RESIDUAL_RTOL * bnorm:
                x = x + lu.solve(b - self.matrix @ x)
                res = np.linalg.norm(self.matrix @ x - b)
                if res > RESIDUAL_RTOL * bnorm:
                    raise SolverDivergence(
                        f"residual {res:.3e} exceeds {RESIDUAL_RTOL:.0e} * {bnorm:.3e}")
        return x


def assemble(grid: Grid, gamma: ModulusField, rho: float, omega: float,
             dirichlet: np.ndarray) -> HelmholtzOperator:
    return HelmholtzOperator(grid, gamma, rho, omega, dirichlet)


def solve(op: HelmholtzOperator) -> WaveField:
    g = op.grid
    x = op._solve_interior(op.lift)
    u = op.dirichlet.copy()
    u[1:-1, 1:-1] = x.reshape(g.ny - 2, g.nx - 2)
    return WaveField(g, u)


def _source_divergence(grid: Grid, dfaces: FaceCoefficients,
                       u: np.ndarray) -> np.ndarray:
    """div(dgamma grad u) at interior nodes with the same face-flux stencil."""
    hx2, hy2 = grid.hx ** 2, grid.hy ** 2
    wx, wy = dfaces.wx, dfaces.wy
    flux_e = wx[1:-1, 1:] * (u[1:-1, 2:] - u[1:-1, 1:-1])
    flux_w = wx[1:-1, :-1] * (u[1:-1, 1:-1] - u[1:-1, :-2])
    flux_n = wy[1:, 1:-1] * (u[2:, 1:-1] - u[1:-1, 1:-1])
    flux_s = wy[:-1, 1:-1] * (u[1:-1, 1:-1] - u[:-2, 1:-1])
    return (flux_e - flux_w) / hx2 + (flux_n - flux_s) / hy2


def solve_source(op: HelmholtzOperator, dfaces: FaceCoefficients,
                 u_base: WaveField) -> WaveField:
    """Zero-Dirichlet solve of the sensitivity problem
    -div(gamma grad u') - rho*omega^2 u' = div(dgamma grad u_base)."""
    g = op.grid
    b = _source_divergence(g, dfaces, u_base.values).ravel()
    x = op._solve_interior(b)
    u = np.zeros((g.ny, g.nx), dtype=complex)
    u[1:-1, 1:-1] = x.reshape(g.ny - 2, g.nx - 2)
    return WaveField(g, u)


class ForwardModel:
    """Measurement map: layered modulus parameters -> interior wave field.

    Caches the operator for the most recent parameter values so that a
    forward solve followed by sensitivity solves reuses one factorization.
    """

    def __init__(self, grid: Grid, rho: float, omega: float,
                 dirichlet: np.ndarray, bounds):
        self.grid = grid
        self.rho = rho
        self.omega = omega
        self.dirichlet = np.asarray(dirichlet, dtype=complex)
        self.bounds = bounds
        self._cache_key = None
        self._cache_op = None

    @property
    def elastic(self) -> bool:
        return self.bounds.elastic

    def operator(self, params: LayeredParams) -> HelmholtzOperator:
        key = (params.g1_storage, params.g1_loss, params.g2_storage, params.g2_loss)
        if key != self._cache_key:
            gamma = params.expand(self.grid, self.bounds)
            self._cache_op = HelmholtzOperator(
                self.grid, gamma, self.rho, self.omega, self.dirichlet)
            self._cache_key = key
        return self._cache_op

    def forward(self, params: LayeredParams) -> WaveField:
        return solve(self.operator(params))


def top_edge_dirichlet(grid: Grid, amplitude: float) -> np.ndarray:
    """Zero everywhere except a half-sine of the given amplitude on the top
    edge."""
    bc = np.zeros((grid.ny, grid.nx), dtype=complex)
    bc[-1, :] = amplitude * np.sin(np.pi * grid.xs / grid.x_extent)
    return bc
