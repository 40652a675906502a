"""Rational (RG) and exponential (EG) Gegenbauer functions on [0, inf).

Both families compose the Gegenbauer polynomials with a map T of [0, inf) onto
[-1, 1): T(t) = (t - L)/(t + L) for RG and T(t) = 1 - 2 exp(-t/L) for EG.
"""

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from tgspec.errors import DomainError
from tgspec.gegenbauer import GaussRule, eval_series, gauss_rule, validate_index

logger = logging.getLogger(__name__)


class TGFamily(enum.Enum):
    RG = 1
    EG = 2

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise DomainError(f"unknown TG family {value!r}, expected 'rg' or 'eg'") from None


@dataclass(frozen=True)
class TGMap:
    family: TGFamily
    L: float

    def __post_init__(self):
        object.__setattr__(self, "family", TGFamily.parse(self.family))
        if not (math.isfinite(self.L) and self.L > 0):
            raise DomainError(f"mapping scaling parameter L must be positive, got {self.L}")


@dataclass(frozen=True)
class TGGrid:
    """Gauss rule mapped onto [0, inf) together with its integration vector."""

    map: TGMap
    rule: GaussRule
    t_nodes: np.ndarray
    E: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        for arr in (self.t_nodes, self.E, self.P):
            arr.setflags(write=False)

    @property
    def alpha(self):
        return self.rule.alpha

    @property
    def n(self):
        return self.rule.n

    @property
    def weights(self):
        return self.rule.weights

    @property
    def family(self):
        return self.map.family

    @property
    def L(self):
        return self.map.L


def _nonneg(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time arguments must be nonnegative")
    return t


def _scalar_or_array(value):
    return float(value) if np.ndim(value) == 0 else value


def forward_map(map, t):
    t = _nonneg(t)
    if map.family is TGFamily.RG:
        x = (t - map.L) / (t + map.L)
    else:
        x = -np.expm1(-t / map.L) * 2.0 - 1.0
    return _scalar_or_array(x)


def inverse_map(map, x):
    x = np.asarray(x, dtype=float)
    if np.any(x >= 1) or np.any(x < -1):
        raise DomainError("inverse map is defined on [-1, 1) only")
    if map.family is TGFamily.RG:
        t = map.L * (1 + x) / (1 - x)
    else:
        # ln 2 - ln(1 - x), kept away from cancellation for x close to 1
        t = map.L * (math.log(2) - np.log1p(-x))
    return _scalar_or_array(np.maximum(t, 0.0))


def map_derivative(map, t):
    t = _nonneg(t)
    if map.family is TGFamily.RG:
        d = 2 * map.L / (t + map.L) ** 2
    else:
        d = 2 * np.exp(-t / map.L) / map.L
    return _scalar_or_array(d)


def tg_eval_series(map, alpha, n, t):
    """TG functions G_{i,0..n}(t), shape (n + 1, *t.shape)."""
    return eval_series(alpha, n, forward_map(map, t))


def _power_log(exponent, log_value):
    # exponent * log_value with 0 * log(0) taken as 0
    if exponent == 0:
        return np.zeros_like(log_value)
    return exponent * log_value


def tg_log_weight(map, alpha, t):
    """Natural logarithm of the TG weight function, finite wherever t > 0."""
    alpha = validate_index(alpha)
    t = _nonneg(t)
    L = map.L
    with np.errstate(divide="ignore"):
        if map.family is TGFamily.RG:
            return (
                alpha * math.log(4)
                + (alpha + 0.5) * math.log(L)
                + _power_log(alpha - 0.5, np.log(t))
                - (2 * alpha + 1) * np.log(t + L)
            )
        s = t / L
        # 1 - (1 - 2 e^{-s})^2 = 4 e^{-s} (1 - e^{-s})
        log_bracket = math.log(4) - s + np.log(-np.expm1(-s))
        return math.log(2 / L) - s + _power_log(alpha - 0.5, log_bracket)


def tg_weight(map, alpha, t):
    alpha = validate_index(alpha)
    t = _nonneg(t)
    if alpha < 0.5 and np.any(t == 0):
        raise DomainError(f"TG weight is singular at t = 0 for alpha = {alpha} < 1/2")
    with np.errstate(under="ignore"):
        w = np.exp(tg_log_weight(map, alpha, t))
    if map.family is TGFamily.EG and np.any((w == 0) & (t > 0)):
        logger.warning("EG weight underflowed to 0 at %d point(s)", int(np.sum((w == 0) & (t > 0))))
    return _scalar_or_array(w)


def build_grid(map, alpha, n):
    """Map the Gegenbauer-Gauss rule of index alpha onto [0, inf).

    The integration vector is P_k = w_k e^{-t_k} / w_i(t_k), evaluated in log
    space so that it stays finite when e^{-t_k} or the weight underflow.
    """
    rule = gauss_rule(alpha, n)
    t_nodes = np.atleast_1d(inverse_map(map, rule.nodes))
    with np.errstate(under="ignore"):
        E = np.exp(-t_nodes)
        log_w = tg_log_weight(map, rule.alpha, t_nodes)
        P = np.exp(np.log(rule.weights) - t_nodes - log_w)
    logger.debug(
        "built %s grid (alpha=%g, L=%g, n=%d), t in [%.4g, %.4g]",
        map.family.name, rule.alpha, map.L, rule.n, t_nodes[0], t_nodes[-1],
    )
    return TGGrid(map, rule, t_nodes, E, P)


def cost_weights(grid):
    """W_j = w_j / w_i(t_j): Gauss weights for unweighted integrals over [0, inf)."""
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(np.log(grid.weights) - tg_log_weight(grid.map, grid.alpha, grid.t_nodes))
