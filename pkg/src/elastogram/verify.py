"""Numerical diagnostics for the hypotheses behind the LM convergence
theory: the nonlinearity (cone) constant and the quadratic order of the
linearization remainder."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import BallEscapesAdmissibleSet
from .field import LayeredParams, WaveField, h1_norm
from .forward import ForwardModel
from .sensitivity import frechet_apply


@dataclass
class ConeSample:
    params_a: np.ndarray   # gamma-tilde
    params_b: np.ndarray   # gamma-hat (linearization point)
    lhs: float             # ||F(a) - F(b) - F'(b)(a - b)||_H1
    rhs_factor: float      # ||a - b||_inf * ||F(a) - F(b)||_H1
    ratio: float


@dataclass
class ConeEstimate:
    base: LayeredParams
    ball_radius: float
    samples: List[ConeSample]
    c_hat: float

    def as_dict(self) -> dict:
        return {
            "base": list(self.base.as_vector()),
            "ball_radius": self.ball_radius,
            "c_hat": self.c_hat,
            "samples": [
                {"params_a": list(s.params_a), "params_b": list(s.params_b),
                 "lhs": s.lhs, "rhs_factor": s.rhs_factor, "ratio": s.ratio}
                for s in self.samples
            ],
        }


def _check_ball(base_vec: np.ndarray, radius: float, bounds, elastic: bool):
    lo = base_vec * (1 - radius)
    hi = base_vec * (1 + radius)
    if elastic:
        ok = lo.min() >= bounds.g_storage_lo and hi.max() <= bounds.g_storage_hi
    else:
        ok = (lo[0::2].min() >= bounds.g_storage_lo
              and hi[0::2].max() <= bounds.g_storage_hi
              and lo[1::2].min() >= bounds.g_loss_lo
              and hi[1::2].max() <= bounds.g_loss_hi)
    if not ok:
        raise BallEscapesAdmissibleSet(
            f"radius {radius} around {base_vec} leaves the admissible box")


def _draw(rng, base_vec: np.ndarray, radius: float) -> np.ndarray:
    return base_vec * (1 + radius * rng.uniform(-1, 1, size=base_vec.shape))


def cone_pair(model: ForwardModel, vec_a: np.ndarray, vec_b: np.ndarray):
    """Evaluate both sides of the nonlinearity bound for one pair."""
    elastic = model.elastic
    pa = LayeredParams.from_vector(vec_a, elastic)
    pb = LayeredParams.from_vector(vec_b, elastic)
    fa = model.forward(pa)
    fb = model.forward(pb)  # leaves the operator at pb in the model cache
    dvec = vec_a - vec_b
    dparams = LayeredParams.from_vector(dvec, elastic)
    dgamma = dparams.expand(model.grid, model.bounds)
    # bypass the admissibility check: increments may be negative
    op = model.operator(pb)
    from .forward import faces_from_layers, solve_source
    du = solve_source(op, faces_from_layers(model.grid, dgamma.layers.gamma1,
                                            dgamma.layers.gamma2), fb)
    diff = fa - fb
    lhs = h1_norm(diff - du)
    linf = float(np.max(np.abs(dvec)))
    rhs_factor = linf * h1_norm(diff)
    return lhs, rhs_factor


def estimate_cone_constant(model: ForwardModel, base: LayeredParams,
                           radius: float, n_samples: int,
                           seed: int) -> ConeEstimate:
    """Sample parameter pairs in a relative ball around the base and return
    the largest observed ratio of the nonlinearity bound."""
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    elastic = model.elastic
    base_vec = base.as_vector(elastic)
    _check_ball(base_vec, radius, model.bounds, elastic)
    rng = np.random.default_rng(seed)
    samples = []
    while len(samples) < n_samples:
        va = _draw(rng, base_vec, radius)
        vb = _draw(rng, base_vec, radius)
        if np.allclose(va, vb):
            continue
        lhs, rhs_factor = cone_pair(model, va, vb)
        if rhs_factor == 0:
            continue
        samples.append(ConeSample(params_a=va, params_b=vb, lhs=lhs,
                                  rhs_factor=rhs_factor,
                                  ratio=lhs / rhs_factor))
    c_hat = max(s.ratio for s in samples)
    return ConeEstimate(base=base, ball_radius=radius,
                        samples=samples, c_hat=c_hat)


def taylor_remainder_scan(model: ForwardModel, base: LayeredParams,
                          direction: np.ndarray,
                          t_values) -> List[Tuple[float, float]]:
    """Remainder ||F(base + t*dir) - F(base) - t*F'(base) dir||_H1 per t."""
    elastic = model.elastic
    base_vec = base.as_vector(elastic)
    direction = np.asarray(direction, dtype=float)
    # admissibility over the whole scan
    for t in t_values:
        vec = base_vec + t * direction
        p = LayeredParams.from_vector(vec, elastic)
        gamma = p.expand(model.grid, model.bounds)
        if not model.bounds.contains(gamma.g_storage, gamma.g_loss):
            raise BallEscapesAdmissibleSet(
                f"base + {t} * direction leaves the admissible box")
    u0 = model.forward(base)
    op = model.operator(base)
    dparams = LayeredParams.from_vector(direction, elastic)
    dgamma = dparams.expand(model.grid, model.bounds)
    uprime = frechet_apply(op, u0, dgamma)
    out = []
    for t in t_values:
        if t == 0:
            out.append((0.0, 0.0))
            continue
        p = LayeredParams.from_vector(base_vec + t * direction, elastic)
        remainder = h1_norm(model.forward(p) - u0 - t * uprime)
        out.append((float(t), remainder))
    return out


def fit_loglog_slope(pairs) -> float:
    ts = np.array([t for t, r in pairs if t > 0 and r > 0])
    rs = np.array([r for t, r in pairs if t > 0 and r > 0])
    if len(ts) < 2:
        raise ValueError("need at least two nonzero points for a slope fit")
    return float(np.polyfit(np.log(ts), np.log(rs), 1)[0])
