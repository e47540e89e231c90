"""Experiment orchestration: synthetic data generation, inversion runs,
profile dumps and comparison against reference recovery tables.

Configuration files use the experimental units (mm, kPa, Hz, Pa*s); all
values are converted to SI on load and every report embeds the resolved SI
spec together with the seeds that produced it.
"""

import csv
import json
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analytic import evaluate, solve_transmission
from .errors import ConfigError, LayoutMismatch, NonGridColumn
from .field import (Bounds, DEFAULT_BOUNDS, DEFAULT_ELASTIC_BOUNDS,
                    LayeredParams, WaveField, add_relative_noise,
                    l2_norm, noise_level_delta, write_field)
from .forward import ForwardModel, top_edge_dirichlet
from .lm import LMConfig, LMResult, run as lm_run
from .mesh import build_grid
from .sensitivity import param_names


@dataclass(frozen=True)
class ExperimentSpec:
    """Resolved experiment description in SI units."""

    name: str
    # physics
    g1_storage: float          # Pa
    g2_storage: float          # Pa
    eta1: float                # Pa*s (loss modulus = eta * omega)
    eta2: float
    rho: float = 1000.0
    frequency_hz: float = 20.0
    x_L: float = 0.060
    x_extent: float = 0.120
    y_extent: float = 0.120
    amplitude: float = 0.02e-3
    # discretization
    nx: int = 121
    ny: int = 121
    # noise
    noise_level: float = 0.20
    seed: int = 7
    # inversion
    initial_g_storage: float = 30e3
    initial_g2_storage: Optional[float] = None   # defaults to initial_g_storage
    initial_eta: float = 0.5
    # a tight (q, tau) pair stops near the noise floor of the estimator;
    # tau*q > 1 keeps the discrepancy target above the attainable ratio
    q: float = 0.99
    tau: float = 1.011
    max_iter: int = 400
    bounds: Optional[Bounds] = None
    # modes
    elastic: bool = False
    data_source: str = "analytic"   # analytic | fd
    flux_row: str = "physical"      # physical | plain
    profile_x1: float = 0.060

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.frequency_hz

    def truth(self) -> LayeredParams:
        w = self.omega
        if self.elastic:
            return LayeredParams(self.g1_storage, 0.0, self.g2_storage, 0.0)
        return LayeredParams(self.g1_storage, self.eta1 * w,
                             self.g2_storage, self.eta2 * w)

    def initial(self) -> LayeredParams:
        w = self.omega
        g2 = self.initial_g2_storage
        if g2 is None:
            g2 = self.initial_g_storage
        if self.elastic:
            return LayeredParams(self.initial_g_storage, 0.0, g2, 0.0)
        return LayeredParams(self.initial_g_storage, self.initial_eta * w,
                             g2, self.initial_eta * w)

    def resolved_bounds(self) -> Bounds:
        if self.bounds is not None:
            return self.bounds
        return DEFAULT_ELASTIC_BOUNDS if self.elastic else DEFAULT_BOUNDS

    def lm_config(self, noise_delta: float) -> LMConfig:
        return LMConfig(q=self.q, tau=self.tau, max_iter=self.max_iter,
                        noise_delta=noise_delta, inner="l2",
                        bounds=self.resolved_bounds())

    def as_dict(self) -> dict:
        d = {
            "name": self.name,
            "g1_storage_pa": self.g1_storage, "g2_storage_pa": self.g2_storage,
            "eta1_pa_s": self.eta1, "eta2_pa_s": self.eta2,
            "rho_kg_m3": self.rho, "frequency_hz": self.frequency_hz,
            "omega_rad_s": self.omega,
            "x_L_m": self.x_L, "x_extent_m": self.x_extent,
            "y_extent_m": self.y_extent, "amplitude_m": self.amplitude,
            "nx": self.nx, "ny": self.ny,
            "noise_level": self.noise_level, "seed": self.seed,
            "initial_g_storage_pa": self.initial_g_storage,
            "initial_g2_storage_pa": self.initial_g2_storage,
            "initial_eta_pa_s": self.initial_eta,
            "q": self.q, "tau": self.tau, "max_iter": self.max_iter,
            "elastic": self.elastic, "data_source": self.data_source,
            "flux_row": self.flux_row, "profile_x1_m": self.profile_x1,
        }
        b = self.resolved_bounds()
        d["bounds_pa"] = [b.g_storage_lo, b.g_storage_hi,
                          b.g_loss_lo, b.g_loss_hi]
        return d


# Physical parameters of the phantom experiments: layer 1 (upper)
# 20 kPa / 0.4 Pa*s, layer 2 (lower) 10 kPa / 0.3 Pa*s, interface at 60 mm.
PHANTOM = dict(g1_storage=20e3, g2_storage=10e3, eta1=0.4, eta2=0.3)

# The 250 Hz runs need a finer grid: at 1 mm spacing layer 2 carries only
# ~13 nodes per wavelength and the scheme's dispersion error would bias the
# recovered moduli by more than the acceptance tolerance.
FINE_GRID = dict(nx=241, ny=241)


def example_1_1(seed: int = 7) -> ExperimentSpec:
    return ExperimentSpec(name="example_1_1", elastic=True, frequency_hz=20,
                          initial_g_storage=30e3, seed=seed, **PHANTOM)


def example_1_2(seed: int = 7) -> ExperimentSpec:
    return ExperimentSpec(name="example_1_2", elastic=True, frequency_hz=250,
                          initial_g_storage=21e3, initial_g2_storage=9.5e3,
                          seed=seed, **PHANTOM, **FINE_GRID)


def example_2_1(seed: int = 7) -> ExperimentSpec:
    return ExperimentSpec(name="example_2_1", elastic=False, frequency_hz=20,
                          initial_g_storage=30e3, initial_eta=0.5, seed=seed,
                          **PHANTOM)


def example_2_2(seed: int = 7) -> ExperimentSpec:
    # The viscoelastic 250 Hz case is the most delicate: from the far 30 kPa
    # start the iteration only reaches the correct basin for q <= ~0.9875
    # (larger q creeps into a wrong attractor), and the loss moduli keep
    # improving until the stop fires just above the residual floor set by
    # the discretization error of the data model.  At 361^2 that floor is
    # ~1.1% above delta, so tau = 1.0127 with q = 0.9875 (tau*q > 1) stops
    # as close to the floor as the basin allows; runs take ~400 iterations.
    return ExperimentSpec(name="example_2_2", elastic=False, frequency_hz=250,
                          initial_g_storage=30e3, initial_eta=0.5, seed=seed,
                          q=0.9875, tau=1.0127, max_iter=600,
                          nx=361, ny=361, **PHANTOM)


EXAMPLES = {
    "1.1": example_1_1,
    "1.2": example_1_2,
    "2.1": example_2_1,
    "2.2": example_2_2,
}


def _require(cond, field, message):
    if not cond:
        raise ConfigError(field, message)


def spec_from_config(doc: dict, name: str = "config") -> ExperimentSpec:
    """Build a spec from a config mapping in experimental units."""
    phys = doc.get("physics", {})
    grid = doc.get("grid", {})
    noise = doc.get("noise", {})
    inv = doc.get("inversion", {})

    def num(section, sec_name, key, default=None, positive=False):
        if key not in section:
            if default is None:
                raise ConfigError(f"{sec_name}.{key}", "missing required value")
            return default
        v = section[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"{sec_name}.{key}", f"expected a number, got {v!r}")
        if positive and v <= 0:
            raise ConfigError(f"{sec_name}.{key}", f"must be positive, got {v}")
        return float(v)

    elastic = bool(doc.get("elastic", False))
    data_source = doc.get("data_source", "analytic")
    _require(data_source in ("analytic", "fd"), "data_source",
             f"must be 'analytic' or 'fd', got {data_source!r}")
    flux_row = doc.get("flux_row", "physical")
    _require(flux_row in ("physical", "plain"), "flux_row",
             f"must be 'physical' or 'plain', got {flux_row!r}")
    nx = int(num(grid, "grid", "nx", 121, positive=True))
    ny = int(num(grid, "grid", "ny", 121, positive=True))
    level = num(noise, "noise", "level", 0.0)
    _require(level >= 0, "noise.level", "must be >= 0")
    bounds_doc = inv.get("bounds_kpa")
    bounds = None
    if bounds_doc is not None:
        _require(isinstance(bounds_doc, (list, tuple)) and len(bounds_doc) == 4,
                 "inversion.bounds_kpa", "expected [g'_lo, g'_hi, g''_lo, g''_hi]")
        bounds = Bounds(*(1e3 * float(v) for v in bounds_doc))
    spec = ExperimentSpec(
        name=str(doc.get("name", name)),
        g1_storage=1e3 * num(phys, "physics", "g1_storage_kpa", positive=True),
        g2_storage=1e3 * num(phys, "physics", "g2_storage_kpa", positive=True),
        eta1=num(phys, "physics", "eta1_pa_s", 0.0),
        eta2=num(phys, "physics", "eta2_pa_s", 0.0),
        rho=num(phys, "physics", "rho_kg_m3", 1000.0, positive=True),
        frequency_hz=num(phys, "physics", "frequency_hz", positive=True),
        x_L=1e-3 * num(phys, "physics", "x_l_mm", 60.0, positive=True),
        x_extent=1e-3 * num(phys, "physics", "x_extent_mm", 120.0, positive=True),
        y_extent=1e-3 * num(phys, "physics", "y_extent_mm", 120.0, positive=True),
        amplitude=1e-3 * num(phys, "physics", "amplitude_mm", 0.02, positive=True),
        nx=nx, ny=ny,
        noise_level=level,
        seed=int(num(noise, "noise", "seed", 7)),
        initial_g_storage=1e3 * num(inv, "inversion", "initial_g1_kpa", 30.0,
                                    positive=True),
        initial_g2_storage=(1e3 * num(inv, "inversion", "initial_g2_kpa",
                                      positive=True)
                            if "initial_g2_kpa" in inv else None),
        initial_eta=num(inv, "inversion", "initial_eta_pa_s", 0.5),
        q=num(inv, "inversion", "q", 0.99),
        tau=num(inv, "inversion", "tau", 1.011),
        max_iter=int(num(inv, "inversion", "max_iter", 400, positive=True)),
        bounds=bounds,
        elastic=elastic, data_source=data_source, flux_row=flux_row,
        profile_x1=1e-3 * num(doc, "config", "profile_x1_mm", 60.0),
    )
    _require(not elastic or (spec.eta1 == 0 and spec.eta2 == 0),
             "physics.eta1_pa_s", "must be 0 in elastic mode")
    return spec


def load_spec(path) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return spec_from_config(doc, name=Path(path).stem)


def generate_clean_data(spec: ExperimentSpec):
    """(grid, clean data field) from the configured data source."""
    grid = build_grid(spec.nx, spec.ny, spec.x_extent, spec.y_extent, spec.x_L)
    truth = spec.truth()
    if spec.data_source == "analytic":
        sol = solve_transmission(truth, spec.rho, spec.omega, spec.x_L,
                                 spec.amplitude, spec.x_extent, spec.y_extent,
                                 flux_row=spec.flux_row)
        return grid, evaluate(sol, grid)
    model = build_model(spec, grid)
    return grid, model.forward(truth)


def build_model(spec: ExperimentSpec, grid) -> ForwardModel:
    return ForwardModel(grid, spec.rho, spec.omega,
                        top_edge_dirichlet(grid, spec.amplitude),
                        spec.resolved_bounds())


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    truth: np.ndarray
    recovered: np.ndarray
    names: tuple
    result: LMResult
    noise_delta_l2: float
    noise_delta_h1: float
    noise_l2_relative: float
    data_l2_norm: float

    def as_dict(self) -> dict:
        return {
            "version": __version__,
            "spec": self.spec.as_dict(),
            "truth_pa": list(self.truth),
            "recovered_pa": list(self.recovered),
            "param_names": list(self.names),
            "stop_reason": self.result.stop_reason,
            "k_star": self.result.k_star,
            "final_residual_l2": self.result.final_residual,
            "noise_delta_l2": self.noise_delta_l2,
            "noise_delta_h1": self.noise_delta_h1,
            "noise_l2_relative": self.noise_l2_relative,
            "data_l2_norm": self.data_l2_norm,
            "history": [r.as_dict() for r in self.result.history],
        }


HISTORY_COLUMNS = ("k", "residual", "residual_after", "alpha",
                   "morozov_ratio", "saturated", "step_norm", "projected",
                   "params_before", "params_after")


def write_history_csv(path, history):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for r in history:
            w.writerow([
                r.k, f"{r.residual:.17g}", f"{r.residual_after:.17g}",
                f"{r.alpha:.17g}", f"{r.morozov_ratio:.17g}",
                int(r.saturated), f"{r.step_norm:.17g}", int(r.projected),
                ";".join(f"{v:.17g}" for v in r.params_before),
                ";".join(f"{v:.17g}" for v in r.params_after),
            ])


def emit_profile(u: WaveField, x1: float):
    """Rows (x2, Re u, Im u) along the grid column at x1."""
    grid = u.grid
    col = x1 / grid.hx
    if abs(col - round(col)) > 1e-9:
        raise NonGridColumn(f"x1={x1} is not on a grid column")
    i = int(round(col))
    if not (0 <= i < grid.nx):
        raise NonGridColumn(f"x1={x1} lies outside the domain")
    return [(float(y), float(u.values[j, i].real), float(u.values[j, i].imag))
            for j, y in enumerate(grid.ys)]


def write_profile_csv(path, u: WaveField, x1: float):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("x2", "re", "im"))
        for row in emit_profile(u, x1):
            w.writerow([f"{v:.17g}" for v in row])


def run_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    grid, clean = generate_clean_data(spec)
    if spec.noise_level > 0:
        noisy = add_relative_noise(clean, spec.noise_level, spec.seed)
        delta_l2 = l2_norm(noisy - clean)
        delta_h1 = noise_level_delta(noisy, clean)
        realized = delta_l2 / l2_norm(clean)
    else:
        noisy, delta_l2, delta_h1, realized = clean, 0.0, 0.0, 0.0
    model = build_model(spec, grid)
    cfg = spec.lm_config(noise_delta=delta_l2)
    result = lm_run(model, spec.initial(), noisy, cfg)
    report = ExperimentReport(
        spec=spec,
        truth=spec.truth().as_vector(spec.elastic),
        recovered=result.params.as_vector(spec.elastic),
        names=param_names(spec.elastic),
        result=result,
        noise_delta_l2=delta_l2,
        noise_delta_h1=delta_h1,
        noise_l2_relative=realized,
        data_l2_norm=l2_norm(noisy),
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2)
        write_history_csv(out / "history.csv", result.history)
        write_field(out / "data_clean.csv", clean)
        if spec.noise_level > 0:
            write_field(out / "data_noisy.csv", noisy)
        recon = model.forward(result.params)
        write_field(out / "reconstructed.csv", recon)
        write_profile_csv(out / "profile_data.csv", noisy, spec.profile_x1)
        write_profile_csv(out / "profile_reconstructed.csv", recon,
                          spec.profile_x1)
        manifest = {
            "report": "report.json", "history": "history.csv",
            "fields": ["data_clean.csv", "reconstructed.csv"]
            + (["data_noisy.csv"] if spec.noise_level > 0 else []),
            "profiles": ["profile_data.csv", "profile_reconstructed.csv"],
        }
        with open(out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
    return report


@dataclass
class ComparisonReport:
    names: tuple
    recovered: np.ndarray
    reference: np.ndarray
    relative_errors: np.ndarray
    tolerances: np.ndarray
    passed: bool

    def as_dict(self) -> dict:
        return {
            "names": list(self.names),
            "recovered_pa": list(self.recovered),
            "reference_pa": list(self.reference),
            "relative_errors": list(self.relative_errors),
            "tolerances": list(self.tolerances),
            "passed": self.passed,
        }


def compare_with_reference(recovered, reference, names,
                           tolerances) -> ComparisonReport:
    recovered = np.asarray(recovered, dtype=float)
    reference = np.asarray(reference, dtype=float)
    tolerances = np.asarray(tolerances, dtype=float)
    if not (len(recovered) == len(reference) == len(names) == len(tolerances)):
        raise LayoutMismatch(
            f"layouts differ: {len(recovered)} recovered, {len(reference)} "
            f"reference, {len(names)} names, {len(tolerances)} tolerances")
    errors = np.abs(recovered - reference) / np.abs(reference)
    return ComparisonReport(names=tuple(names), recovered=recovered,
                            reference=reference, relative_errors=errors,
                            tolerances=tolerances,
                            passed=bool(np.all(errors <= tolerances)))
