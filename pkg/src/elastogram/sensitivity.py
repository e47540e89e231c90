"""Sensitivities of the measurement map and the layered-parameter Jacobian.

Parameters are real (storage and loss modulus per layer) and are
nondimensionalized by reference magnitudes taken from the initial guess, so
that the normal system regularizes both moduli comparably.  Adjoints are
taken with respect to the H1 inner product on the data side and the real
Euclidean inner product on the scaled parameters.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import DimensionMismatch, GridMismatch
from .field import LayeredParams, ModulusField, WaveField, h1_inner, l2_inner
from .forward import (FaceCoefficients, ForwardModel, HelmholtzOperator,
                      faces_from_layers, faces_from_nodes_directional,
                      solve_source)

PARAM_NAMES = ("g1_storage", "g1_loss", "g2_storage", "g2_loss")
PARAM_NAMES_ELASTIC = ("g1_storage", "g2_storage")

# unit layered increments per real parameter: (dgamma1, dgamma2)
_UNIT_INCREMENTS = ((1.0, 0.0), (1j, 0.0), (0.0, 1.0), (0.0, 1j))
_UNIT_INCREMENTS_ELASTIC = ((1.0, 0.0), (0.0, 1.0))


def unit_increments(elastic: bool):
    return _UNIT_INCREMENTS_ELASTIC if elastic else _UNIT_INCREMENTS


def param_names(elastic: bool):
    return PARAM_NAMES_ELASTIC if elastic else PARAM_NAMES


def increment_faces(op: HelmholtzOperator, dgamma: ModulusField) -> FaceCoefficients:
    """Face-coefficient increment matching the operator's assembly rule."""
    if op.gamma.layers is not None and dgamma.layers is not None:
        return faces_from_layers(op.grid, dgamma.layers.gamma1, dgamma.layers.gamma2)
    return faces_from_nodes_directional(op.gamma.gamma, dgamma.gamma)


def frechet_apply(op: HelmholtzOperator, u: WaveField,
                  dgamma: ModulusField) -> WaveField:
    """Directional derivative of the measurement map at op.gamma, assuming
    u is the forward solution there."""
    return solve_source(op, increment_faces(op, dgamma), u)


INNER_PRODUCTS = {"h1": h1_inner, "l2": l2_inner}


@dataclass
class Jacobian:
    """Columns are sensitivity fields per scaled real parameter.

    The adjoint is taken with respect to the chosen data-space inner
    product ("h1" or "l2") and the real Euclidean product on parameters.
    """

    columns: List[WaveField]
    refs: np.ndarray          # reference magnitudes (Pa) per parameter
    names: Sequence[str]
    gram: np.ndarray          # real matrix of Re <col_j, col_k>
    inner: str = "h1"

    @property
    def n_params(self) -> int:
        return len(self.columns)

    def apply(self, p: np.ndarray) -> WaveField:
        if len(p) != self.n_params:
            raise DimensionMismatch(f"expected {self.n_params} parameters")
        out = self.columns[0] * p[0]
        for k in range(1, self.n_params):
            out = out + self.columns[k] * p[k]
        return out

    def gradient(self, residual: WaveField) -> np.ndarray:
        if not residual.grid.same_as(self.columns[0].grid):
            raise GridMismatch("residual grid differs from Jacobian columns")
        ip = INNER_PRODUCTS[self.inner]
        return np.array([ip(col, residual).real for col in self.columns])

    def normal_apply(self, alpha: float, p: np.ndarray) -> np.ndarray:
        if len(p) != self.n_params:
            raise DimensionMismatch(f"expected {self.n_params} parameters")
        return self.gram @ p + alpha * np.asarray(p)


def assemble_jacobian(model: ForwardModel, params: LayeredParams,
                      u: WaveField, refs: np.ndarray,
                      inner: str = "h1") -> Jacobian:
    """One sensitivity solve per real parameter, columns scaled by refs so
    that they are derivatives with respect to the nondimensional
    parameters p_k = G_k / ref_k."""
    op = model.operator(params)
    elastic = model.elastic
    refs = np.asarray(refs, dtype=float)
    ip = INNER_PRODUCTS[inner]
    cols = []
    for (dg1, dg2), ref in zip(unit_increments(elastic), refs):
        dfaces = faces_from_layers(model.grid, dg1, dg2)
        cols.append(solve_source(op, dfaces, u) * ref)
    n = len(cols)
    gram = np.empty((n, n))
    for j in range(n):
        for k in range(j, n):
            g = ip(cols[j], cols[k]).real
            gram[j, k] = g
            gram[k, j] = g
    return Jacobian(columns=cols, refs=refs,
                    names=param_names(elastic), gram=gram, inner=inner)
