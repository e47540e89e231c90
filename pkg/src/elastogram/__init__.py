"""Reconstruction of layered complex shear moduli from a single interior
wave-field measurement."""

__version__ = "0.1.0"

from .mesh import Grid, BoundaryMask, build_grid, classify_boundary
from .field import (Bounds, LayeredParams, ModulusField, WaveField,
                    add_relative_noise, h1_inner, h1_norm, l2_norm,
                    noise_level_delta, read_field, write_field)
from .forward import ForwardModel, HelmholtzOperator, assemble, solve, solve_source
from .analytic import TwoLayerSolution, dispersion, evaluate, solve_transmission
from .sensitivity import Jacobian, assemble_jacobian, frechet_apply
from .lm import LMConfig, LMResult, IterationRecord, morozov_alpha, run
from .verify import ConeEstimate, estimate_cone_constant, taylor_remainder_scan

__all__ = [
    "Grid", "BoundaryMask", "build_grid", "classify_boundary",
    "Bounds", "LayeredParams", "ModulusField", "WaveField",
    "add_relative_noise", "h1_inner", "h1_norm", "l2_norm",
    "noise_level_delta", "read_field", "write_field",
    "ForwardModel", "HelmholtzOperator", "assemble", "solve", "solve_source",
    "TwoLayerSolution", "dispersion", "evaluate", "solve_transmission",
    "Jacobian", "assemble_jacobian", "frechet_apply",
    "LMConfig", "LMResult", "IterationRecord", "morozov_alpha", "run",
    "ConeEstimate", "estimate_cone_constant", "taylor_remainder_scan",
]
