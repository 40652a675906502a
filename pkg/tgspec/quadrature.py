"""TG quadratures: weighted integrals over [0, inf) and integrals over [0, t_j].

The integral of f over [0, t_j] is rewritten with t = t_j e^{-z} as
t_j * int_0^inf e^{-z} f(t_j e^{-z}) dz and evaluated with the TGG rule,
which gives t_j * sum_k P_k f(t_j E_k).
"""

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from tgspec.errors import DomainError, EvaluationError
from tgspec.tgbasis import TGFamily, TGMap, build_grid

logger = logging.getLogger(__name__)

LOG_ERROR_FLOOR = -17.0


class IntegralId(enum.Enum):
    I1 = "I1"
    I2 = "I2"
    I3 = "I3"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise DomainError(f"unknown integral id {value!r}, expected I1, I2 or I3") from None


@dataclass(frozen=True)
class QuadratureSweepRow:
    integral_id: IntegralId
    family: TGFamily
    alpha: float
    L: float
    n: int
    max_abs_error: float
    max_log_error: float

    def as_dict(self):
        return {
            "integral": self.integral_id.value,
            "family": self.family.name.lower(),
            "alpha": self.alpha,
            "L": self.L,
            "n": self.n,
            "max_abs_error": self.max_abs_error,
            "max_log_error": self.max_log_error,
        }


def _check_finite(values, abscissae, what):
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        first = np.asarray(abscissae)[bad].flat[0]
        raise EvaluationError(f"{what} returned a non-finite value at t = {first!r}")
    return values


def _check_node(grid, j):
    if int(j) != j or not 0 <= j <= grid.n:
        raise DomainError(f"node index {j} outside 0..{grid.n}")
    return int(j)


def integrate_weighted(grid, f):
    """Weighted Gauss rule on the half line: int_0^inf f w_i dt ~ sum_j w_j f(t_j)."""
    values = _check_finite([f(t) for t in grid.t_nodes], grid.t_nodes, "integrand")
    return float(np.dot(grid.weights, values))


def integrate_to_all_nodes(grid, f):
    """Approximate int_0^{t_j} f for every node t_j.

    f is called once per abscissa xi[j, k] = t_j E_k (row j = target node,
    column k = quadrature node).
    """
    xi = np.outer(grid.t_nodes, grid.E)
    values = np.array([[f(x) for x in row] for row in xi], dtype=float)
    _check_finite(values, xi, "integrand")
    return np.array([_node_sum(grid, j, values[j]) for j in range(grid.n + 1)])


def integrate_to_node(grid, f, j):
    j = _check_node(grid, j)
    xi = grid.t_nodes[j] * grid.E
    values = _check_finite([f(x) for x in xi], xi, "integrand")
    return _node_sum(grid, j, values)


def _node_sum(grid, j, values):
    return float(grid.t_nodes[j] * np.dot(grid.P, values))


def truncation_prefactor(n, alpha):
    """Gauss error constant lambda_{n+1} / (K_{n+1}^2 (2n+2)!), K the leading coefficient.

    Equals pi 2^{-2n-2a-1} (n+1)! (n+a+1) Gamma(n+2a+1) / ((2n+2)! Gamma^2(n+a+2));
    1/135 for the 2-point Gauss-Legendre rule.
    """
    log_value = (
        math.log(math.pi)
        - (2 * n + 2 * alpha + 1) * math.log(2)
        + gammaln(n + 2)
        + math.log(n + alpha + 1)
        + gammaln(n + 2 * alpha + 1)
        - gammaln(2 * n + 3)
        - 2 * gammaln(n + alpha + 2)
    )
    return math.exp(log_value)


def truncation_bound(grid, j, deriv_bound):
    """Upper bound on |int_0^{t_j} f - Q_j| given a bound on the (2n+2)th derivative.

    deriv_bound must bound |d^{2n+2}/dx^{2n+2} g(T^{-1}(x))| on (-1, 1), where
    g(t) = e^{-t} f(t_j e^{-t}) / w_i(t).
    """
    j = _check_node(grid, j)
    if deriv_bound < 0:
        raise DomainError("derivative bound must be nonnegative")
    if deriv_bound == 0:
        return 0.0
    return truncation_prefactor(grid.n, grid.alpha) * grid.t_nodes[j] * deriv_bound


# Integrands and their antiderivatives vanishing at 0
BENCHMARK_INTEGRALS = {
    IntegralId.I1: (lambda t: math.exp(-t), lambda t: -np.expm1(-t)),
    IntegralId.I2: (lambda t: 1.0 / (t * t + 1.0), np.arctan),
    IntegralId.I3: (math.atan, lambda t: t * np.arctan(t) - 0.5 * np.log1p(t * t)),
}


def benchmark_error(integral_id, family, alpha, L, n):
    integral_id = IntegralId.parse(integral_id)
    family = TGFamily.parse(family)
    grid = build_grid(TGMap(family, L), alpha, n)
    integrand, antiderivative = BENCHMARK_INTEGRALS[integral_id]
    approx = integrate_to_all_nodes(grid, integrand)
    exact = antiderivative(grid.t_nodes)
    max_abs_error = float(np.max(np.abs(approx - exact)))
    max_log_error = math.log10(max(max_abs_error, 10**LOG_ERROR_FLOOR))
    return QuadratureSweepRow(
        integral_id, family, float(alpha), float(L), int(n), max_abs_error, max_log_error
    )
