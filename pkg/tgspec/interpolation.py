"""Discrete TG transform, interpolant evaluation and stability diagnostics."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from tgspec.errors import DimensionError
from tgspec.tgbasis import tg_eval_series

logger = logging.getLogger(__name__)

STABILITY_SLACK = 1.01


@dataclass(frozen=True)
class TGInterpolant:
    grid: object
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    def __call__(self, t):
        return evaluate_interpolant(self, t)


@dataclass(frozen=True)
class StabilityReport:
    discrete_L2w_norm: float
    sup_norm: float
    ratio: float
    bound: float
    within_bound: bool


def _samples(grid, samples):
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.n + 1,):
        raise DimensionError(f"expected {grid.n + 1} node samples, got shape {samples.shape}")
    return samples


def transform_matrix(grid, degree=None):
    """Matrix mapping node samples to TG coefficients of degree 0..degree.

    Row k is G_k(t_j) w_j / sum_j G_k(t_j)^2 w_j; the denominator is the
    discrete norm rather than lambda_k so the interpolation condition holds to
    round-off at k = n as well.
    """
    degree = grid.n if degree is None else degree
    basis = tg_eval_series(grid.map, grid.alpha, degree, grid.t_nodes)
    weighted = basis * grid.weights
    norms = np.sum(weighted * basis, axis=1)
    return weighted / norms[:, None]


def forward_transform(grid, samples):
    samples = _samples(grid, samples)
    return TGInterpolant(grid, transform_matrix(grid) @ samples)


def evaluate_interpolant(interp, t):
    grid = interp.grid
    basis = tg_eval_series(grid.map, grid.alpha, len(interp.coeffs) - 1, t)
    value = np.tensordot(interp.coeffs, basis, axes=1)
    return float(value) if np.ndim(value) == 0 else value


def stability_bound(alpha, n):
    # Constant-explicit Lebesgue-type bounds for the discrete weighted norm
    if alpha >= 0:
        return math.sqrt(math.pi)
    return gamma(alpha + 0.5) * n ** (-0.5 - alpha) / math.sqrt(2)


def stability_report(grid, samples):
    samples = _samples(grid, samples)
    l2 = float(math.sqrt(np.sum(samples**2 * grid.weights)))
    sup = float(np.max(np.abs(samples)))
    bound = stability_bound(grid.alpha, max(grid.n, 1))
    ratio = l2 / sup if sup > 0 else 0.0
    return StabilityReport(
        discrete_L2w_norm=l2,
        sup_norm=sup,
        ratio=ratio,
        bound=bound,
        within_bound=bool(l2 <= bound * sup * STABILITY_SLACK),
    )


def sup_norm_estimate(f, t_max, m=2000):
    """Dense-sampling estimate of sup |f| over [0, t_max]."""
    t = np.linspace(0.0, t_max, m)
    return float(np.max(np.abs(f(t))))
