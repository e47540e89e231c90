"""Levenberg-Marquardt driver with per-step regularization from the
residual-ratio equation and discrepancy-principle stopping.

Each step solves the regularized normal equations in the scaled layered
parameters, with the regularization weight alpha chosen so the linearized
residual equals a fixed fraction q of the current residual.  The equation
is solved by bisection on log(alpha); the residual of the linearized
problem is monotone nondecreasing in alpha, so bisection is globally
convergent once a bracket is found.

The data-space norm for residuals, the ratio equation and the stopping
rule is configurable.  The default is L2: white per-node noise has an
unbounded discrete H1 norm (its gradient scales like 1/h), so in H1 the
noise term dwarfs any parameter misfit and the discrepancy rule would stop
at iteration zero regardless of q and tau.  Measured in L2, noise and
misfit are commensurate and the classical stopping behavior is recovered.
"""

from dataclasses import dataclass, asdict
from typing import List, Optional, Tuple

import numpy as np

from .errors import (BracketFailure, DegenerateResidual,
                     InitialOutsideAdmissibleSet, NonFiniteStep)
from .field import (Bounds, DEFAULT_BOUNDS, LayeredParams, WaveField,
                    h1_norm, l2_norm)
from .forward import ForwardModel
from .sensitivity import Jacobian, assemble_jacobian

STOP_DISCREPANCY = "Discrepancy"
STOP_STAGNATION = "Stagnation"
STOP_MAX_ITER = "MaxIter"
STOP_BRACKET_FAILURE = "BracketFailure"

_NORMS = {"h1": h1_norm, "l2": l2_norm}


@dataclass(frozen=True)
class LMConfig:
    q: float = 0.7
    tau: float = 1.5
    alpha_bracket: Tuple[float, float] = (1e-12, 1e12)
    alpha_tol: float = 0.005
    max_iter: int = 50
    noise_delta: float = 0.0          # same norm as `inner`; 0 = exact data
    inner: str = "l2"                 # data-space norm: "l2" or "h1"
    exact_residual_rtol: float = 1e-10
    exact_step_rtol: float = 1e-12
    stagnation_window: int = 3
    bounds: Bounds = DEFAULT_BOUNDS

    def validate(self):
        if not (0 < self.q < 1):
            raise ValueError("q must lie in (0, 1)")
        if self.tau * self.q <= 1:
            raise ValueError("need tau > 1/q")
        if not (0 < self.alpha_bracket[0] < self.alpha_bracket[1]):
            raise ValueError("alpha bracket must be positive and increasing")
        if not (0 < self.alpha_tol < 0.1):
            raise ValueError("alpha_tol must lie in (0, 0.1)")
        if self.inner not in _NORMS:
            raise ValueError(f"unknown inner {self.inner!r}")
        self.bounds.validate()

    @property
    def norm(self):
        return _NORMS[self.inner]


@dataclass
class IterationRecord:
    k: int
    params_before: np.ndarray
    params_after: np.ndarray
    residual: float           # data-space residual norm before the step
    residual_after: float
    alpha: float
    morozov_ratio: float      # achieved linearized-residual ratio
    saturated: bool           # alpha search hit the lower bracket end
    step_norm: float
    projected: bool

    def as_dict(self) -> dict:
        d = asdict(self)
        d["params_before"] = list(self.params_before)
        d["params_after"] = list(self.params_after)
        return d


@dataclass
class LMResult:
    params: LayeredParams
    history: List[IterationRecord]
    stop_reason: str
    k_star: int
    final_residual: float


def _gram_scale(J: Jacobian) -> float:
    scale = float(np.linalg.norm(J.gram, 2))
    if scale == 0:
        raise DegenerateResidual("all sensitivity columns vanish")
    return scale


def _phi(J: Jacobian, g: np.ndarray, rnorm2: float, alpha: float):
    """Linearized residual norm at the regularized step for weight alpha."""
    n = J.n_params
    h = np.linalg.solve(J.gram + alpha * np.eye(n), g)
    val2 = rnorm2 - 2 * h @ g + h @ (J.gram @ h)
    return float(np.sqrt(max(val2, 0.0))), h


def morozov_alpha(J: Jacobian, residual: WaveField, q: float,
                  cfg: LMConfig) -> Tuple[float, np.ndarray, float]:
    """Find alpha with ||r - J h_alpha|| = q ||r|| in the data-space norm.

    Returns (alpha, step, achieved_ratio).  Raises BracketFailure when even
    the unregularized step cannot reduce the linearized residual to the
    target, i.e. the root lies below the bracket.
    """
    rnorm = _NORMS[J.inner](residual)
    if rnorm == 0:
        raise DegenerateResidual("residual is zero")
    g = J.gradient(residual)
    rnorm2 = rnorm ** 2
    target = q * rnorm
    # the bracket is relative to the gram scale: alpha competes with the
    # gram eigenvalues, whose magnitude depends on the data units
    scale = _gram_scale(J)
    lo, hi = cfg.alpha_bracket[0] * scale, cfg.alpha_bracket[1] * scale
    phi_lo, _ = _phi(J, g, rnorm2, lo)
    if phi_lo > target:
        raise BracketFailure(
            f"linearized residual at alpha_min is {phi_lo / rnorm:.4f} of the "
            f"current residual, above the target q={q}")
    phi_hi, _ = _phi(J, g, rnorm2, hi)
    while phi_hi < target:
        hi *= 10.0
        phi_hi, _ = _phi(J, g, rnorm2, hi)
        if hi > 1e30 * scale:
            raise BracketFailure("no upper bracket for the alpha search")
    # bisection on log(alpha)
    for _ in range(60):
        mid = np.sqrt(lo * hi)
        phi_mid, h_mid = _phi(J, g, rnorm2, mid)
        if abs(phi_mid - target) <= cfg.alpha_tol * target:
            return mid, h_mid, phi_mid / rnorm
        if phi_mid > target:
            hi = mid
        else:
            lo = mid
    phi_mid, h_mid = _phi(J, g, rnorm2, np.sqrt(lo * hi))
    return float(np.sqrt(lo * hi)), h_mid, phi_mid / rnorm


def _project(vec: np.ndarray, bounds: Bounds, elastic: bool):
    out = vec.copy()
    if elastic:
        np.clip(out, bounds.g_storage_lo, bounds.g_storage_hi, out=out)
    else:
        out[0::2] = np.clip(out[0::2], bounds.g_storage_lo, bounds.g_storage_hi)
        out[1::2] = np.clip(out[1::2], bounds.g_loss_lo, bounds.g_loss_hi)
    projected = bool(np.any(out != vec))
    return out, projected


def lm_step(model: ForwardModel, params: LayeredParams, data: WaveField,
            cfg: LMConfig, refs: np.ndarray, k: int,
            u: Optional[WaveField] = None,
            residual_norm: Optional[float] = None
            ) -> Tuple[LayeredParams, IterationRecord, WaveField, float]:
    """One LM update; returns (new params, record, new forward field,
    new residual norm)."""
    elastic = model.elastic
    norm = cfg.norm
    if u is None:
        u = model.forward(params)
    residual = data - u
    if residual_norm is None:
        residual_norm = norm(residual)
    J = assemble_jacobian(model, params, u, refs, inner=cfg.inner)
    saturated = False
    try:
        alpha, h, ratio = morozov_alpha(J, residual, cfg.q, cfg)
    except BracketFailure:
        gvec = J.gradient(residual)
        if np.linalg.norm(gvec) == 0:
            raise
        # target ratio unreachable: fall back to the least-regularized step
        alpha = cfg.alpha_bracket[0] * _gram_scale(J)
        phi_val, h = _phi(J, gvec, residual_norm ** 2, alpha)
        ratio = phi_val / residual_norm
        saturated = True
    before = params.as_vector(elastic)
    after_raw = before + h * refs
    if not np.all(np.isfinite(after_raw)):
        raise NonFiniteStep(f"iteration {k} produced non-finite parameters")
    after, projected = _project(after_raw, cfg.bounds, elastic)
    new_params = LayeredParams.from_vector(after, elastic)
    new_u = model.forward(new_params)
    new_residual_norm = norm(data - new_u)
    record = IterationRecord(
        k=k, params_before=before, params_after=after,
        residual=residual_norm, residual_after=new_residual_norm,
        alpha=alpha, morozov_ratio=ratio, saturated=saturated,
        step_norm=float(np.linalg.norm(after - before)), projected=projected)
    return new_params, record, new_u, new_residual_norm


def run(model: ForwardModel, initial: LayeredParams, data: WaveField,
        cfg: LMConfig) -> LMResult:
    cfg.validate()
    elastic = model.elastic
    init_vec = initial.as_vector(elastic)
    _, moved = _project(init_vec, cfg.bounds, elastic)
    if moved:
        raise InitialOutsideAdmissibleSet(
            f"initial guess {init_vec} lies outside the admissible box")
    refs = np.abs(init_vec)
    if np.any(refs == 0):
        raise InitialOutsideAdmissibleSet("initial guess has zero components")
    noisy = cfg.noise_delta > 0
    data_norm = cfg.norm(data)
    params = initial
    history: List[IterationRecord] = []
    u = model.forward(params)
    res = cfg.norm(data - u)
    small_steps = 0
    while True:
        k = len(history)
        if noisy and res <= cfg.tau * cfg.noise_delta:
            return LMResult(params, history, STOP_DISCREPANCY, k, res)
        if not noisy and res <= cfg.exact_residual_rtol * data_norm:
            return LMResult(params, history, STOP_STAGNATION, k, res)
        if k >= cfg.max_iter:
            return LMResult(params, history, STOP_MAX_ITER, k, res)
        try:
            params, record, u, res = lm_step(
                model, params, data, cfg, refs, k, u=u, residual_norm=res)
        except BracketFailure:
            return LMResult(params, history, STOP_BRACKET_FAILURE, k, res)
        history.append(record)
        if record.step_norm <= cfg.exact_step_rtol * np.linalg.norm(record.params_after):
            small_steps += 1
            if small_steps >= cfg.stagnation_window:
                return LMResult(params, history, STOP_STAGNATION,
                                len(history), res)
        else:
            small_steps = 0


def stopping_index_scan(model: ForwardModel, initial: LayeredParams,
                        clean_data: WaveField, cfg: LMConfig,
                        noise_levels, seed: int):
    """Run the inversion at several noise levels (relative, L2) and return
    (delta, stopping index) pairs for the log-growth diagnostic."""
    from .field import add_relative_noise
    from dataclasses import replace

    out = []
    for idx, level in enumerate(noise_levels):
        noisy = add_relative_noise(clean_data, level, seed + idx)
        delta = cfg.norm(noisy - clean_data)
        result = run(model, initial, noisy, replace(cfg, noise_delta=delta))
        out.append((delta, result.k_star))
    return out
