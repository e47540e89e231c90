"""Closed-form two-layer solution by separation of variables.

With a half-sine drive on the top edge and homogeneous Dirichlet data on
the other three edges, the solution separates as
u(x, y) = amplitude * v(y) * sin(pi x / x_extent) with v a combination of
complex exponentials per layer, matched by continuity and flux conditions
at the interface.

Two documented ambiguities are kept behind switches:

* beta_convention: substituting the separated ansatz into the equation
  gives the vertical wavenumber beta^2 = rho*omega^2/gamma - (pi/L)^2
  ("pde", the default, verified by residual substitution); the variant
  with a plus sign ("plus") is retained for comparison only.
* flux_row: the interface flux condition carries the layer moduli as
  factors ("physical", the default); the variant without them ("plain")
  is retained for comparison only.  The two coincide when the layers are
  identical.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTransmission, GridMismatch, ZeroModulus
from .field import LayeredParams, WaveField
from .mesh import Grid


def dispersion(gamma: complex, rho: float, omega: float, x_extent: float,
               convention: str = "pde") -> complex:
    """Vertical wavenumber of the separated mode, principal branch with
    Im(beta) >= 0."""
    if gamma == 0:
        raise ZeroModulus("dispersion relation needs a nonzero modulus")
    kx2 = (np.pi / x_extent) ** 2
    if convention == "pde":
        radicand = rho * omega ** 2 / gamma - kx2
    elif convention == "plus":
        radicand = rho * omega ** 2 / gamma + kx2
    else:
        raise ValueError(f"unknown beta convention {convention!r}")
    beta = complex(np.sqrt(complex(radicand)))
    if beta.imag < 0:
        beta = -beta
    return beta


@dataclass(frozen=True)
class TwoLayerSolution:
    beta1: complex
    beta2: complex
    c1: complex
    c2: complex
    d1: complex
    d2: complex
    gamma1: complex
    gamma2: complex
    x_L: float
    amplitude: float
    x_extent: float
    y_extent: float

    def v(self, y) -> np.ndarray:
        """Vertical profile, normalized to v(y_extent) = 1, v(0) = 0."""
        y = np.asarray(y, dtype=float)
        upper = (self.c1 * np.exp(1j * self.beta1 * y)
                 + self.c2 * np.exp(-1j * self.beta1 * y))
        lower = (self.d1 * np.exp(1j * self.beta2 * y)
                 + self.d2 * np.exp(-1j * self.beta2 * y))
        return np.where(y >= self.x_L, upper, lower)


def solve_transmission(params: LayeredParams, rho: float, omega: float,
                       x_L: float, amplitude: float,
                       x_extent: float, y_extent: float,
                       flux_row: str = "physical",
                       beta_convention: str = "pde") -> TwoLayerSolution:
    g1, g2 = params.gamma1, params.gamma2
    if g1 == 0 or g2 == 0:
        raise ZeroModulus("layer moduli must be nonzero")
    b1 = dispersion(g1, rho, omega, x_extent, beta_convention)
    b2 = dispersion(g2, rho, omega, x_extent, beta_convention)
    if flux_row == "physical":
        f1, f2 = g1, g2
    elif flux_row == "plain":
        f1, f2 = 1.0, 1.0
    else:
        raise ValueError(f"unknown flux_row {flux_row!r}")
    e1p = np.exp(1j * b1 * x_L)
    e1m = np.exp(-1j * b1 * x_L)
    e2p = np.exp(1j * b2 * x_L)
    e2m = np.exp(-1j * b2 * x_L)
    A = np.array([
        [np.exp(1j * b1 * y_extent), np.exp(-1j * b1 * y_extent), 0, 0],
        [e1p, e1m, -e2p, -e2m],
        [f1 * b1 * e1p, -f1 * b1 * e1m, -f2 * b2 * e2p, f2 * b2 * e2m],
        [0, 0, 1, 1],
    ], dtype=complex)
    rhs = np.array([1, 0, 0, 0], dtype=complex)
    try:
        c1, c2, d1, d2 = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateTransmission("transmission system is singular") from exc
    if not np.all(np.isfinite([c1, c2, d1, d2])):
        raise DegenerateTransmission("transmission coefficients are non-finite")
    return TwoLayerSolution(beta1=b1, beta2=b2, c1=c1, c2=c2, d1=d1, d2=d2,
                            gamma1=g1, gamma2=g2, x_L=x_L,
                            amplitude=amplitude,
                            x_extent=x_extent, y_extent=y_extent)


def evaluate(sol: TwoLayerSolution, grid: Grid) -> WaveField:
    if (abs(grid.x_extent - sol.x_extent) > 1e-12 * sol.x_extent
            or abs(grid.y_extent - sol.y_extent) > 1e-12 * sol.y_extent):
        raise GridMismatch("grid extents do not match the analytic solution")
    lateral = sol.amplitude * np.sin(np.pi * grid.xs / sol.x_extent)
    values = np.outer(sol.v(grid.ys), lateral)
    # exact homogeneous data on the side and bottom edges
    values[:, 0] = 0.0
    values[:, -1] = 0.0
    values[0, :] = 0.0
    return WaveField(grid, values)
