"""Gegenbauer polynomials normalized so that G_n(1) = 1, with their Gauss rules."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, gammaln

from tgspec.errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

# Gegenbauer index, any real alpha > -1/2
GegenbauerIndex = float

MAX_NEWTON_ITERATIONS = 100
NEWTON_STEP_TOLERANCE = 1e-14
# |G_m(x_j)| is accepted relative to the local slope |G_m'(x_j)| where that exceeds 1
ROOT_RESIDUAL_TOLERANCE = 1e-13


def validate_index(alpha):
    alpha = float(alpha)
    if not alpha > -0.5:
        raise DomainError(f"Gegenbauer index must exceed -1/2, got {alpha}")
    return alpha


def _validate_degree(n, minimum=0):
    if int(n) != n or n < minimum:
        raise DomainError(f"degree must be an integer >= {minimum}, got {n}")
    return int(n)


@dataclass(frozen=True)
class GaussRule:
    """Gegenbauer-Gauss rule with n+1 nodes, the zeros of G_{n+1}."""

    alpha: float
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        for arr in (self.nodes, self.weights, self.lambdas):
            arr.setflags(write=False)

    @property
    def size(self):
        return self.n + 1


def eval_series(alpha, n, x):
    """Evaluate G_0..G_n at x by the three-term recurrence.

    Parameters
    ----------
    alpha : float
        Gegenbauer index, > -1/2
    n : int
        highest degree
    x : float or ndarray
        point(s) in [-1, 1]

    Returns
    -------
    ndarray
        has shape (n + 1, *x.shape)

    """
    alpha = validate_index(alpha)
    n = _validate_degree(n)
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = x
    for k in range(1, n):
        out[k + 1] = (2 * (k + alpha) * x * out[k] - k * out[k - 1]) / (k + 2 * alpha)
    return out


def eval_series_derivative(alpha, n, x):
    """Evaluate G'_0..G'_n at x by differentiating the recurrence term by term.

    Returns the pair (values, derivatives), each of shape (n + 1, *x.shape).
    """
    values = eval_series(alpha, n, x)
    x = np.asarray(x, dtype=float)
    ders = np.zeros_like(values)
    if n >= 1:
        ders[1] = 1.0
    for k in range(1, n):
        ders[k + 1] = (
            2 * (k + alpha) * (values[k] + x * ders[k]) - k * ders[k - 1]
        ) / (k + 2 * alpha)
    return values, ders


def log_lambda_norm(alpha, j):
    alpha = validate_index(alpha)
    j = np.asarray(j)
    if np.any(j < 0):
        raise DomainError("normalization index must be nonnegative")
    j = j.astype(float)
    # (j + alpha) Gamma(j + 2 alpha) -> Gamma(2 alpha + 1) / 2 at j = 0
    safe = np.where(j > 0, j, 1.0)
    general = (
        (2 * alpha - 1) * math.log(2)
        + gammaln(safe + 1)
        + 2 * gammaln(alpha + 0.5)
        - np.log(safe + alpha)
        - gammaln(safe + 2 * alpha)
    )
    at_zero = 2 * alpha * math.log(2) + 2 * gammaln(alpha + 0.5) - gammaln(2 * alpha + 1)
    return np.where(j > 0, general, at_zero)


def lambda_norm(alpha, j):
    """Squared weighted L2 norm lambda_j of G_j, computed through log-Gamma."""
    value = np.exp(log_lambda_norm(alpha, j))
    return float(value) if np.ndim(value) == 0 else value


def _refine_roots(alpha, m, seeds):
    # Simultaneous Newton with suppression of the already-approximated roots
    # (Aberth correction), so that every seed lands on a distinct zero of G_m.
    x = seeds.copy()
    for iteration in range(1, MAX_NEWTON_ITERATIONS + 1):
        values, ders = eval_series_derivative(alpha, m, x)
        ratio = values[m] / ders[m]
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, np.inf)
        repulsion = np.sum(1.0 / diff, axis=1)
        step = ratio / (1.0 - ratio * repulsion)
        proposal = x - step
        # Iterates must stay inside (-1, 1); outside it the recurrence overflows
        outside = ~(np.abs(proposal) < 1.0)
        if np.any(outside):
            proposal[outside] = 0.5 * (x[outside] + np.sign(x[outside]))
            step = x - proposal
        x = proposal
        residual_ok = np.all(
            np.abs(values[m]) <= ROOT_RESIDUAL_TOLERANCE * np.maximum(1.0, np.abs(ders[m]))
        )
        if np.max(np.abs(step)) <= NEWTON_STEP_TOLERANCE and residual_ok:
            logger.debug("G_%d roots (alpha=%g) converged in %d iterations", m, alpha, iteration)
            return x
    raise ConvergenceError(
        f"Gauss nodes for alpha={alpha}, n={m - 1} did not converge in "
        f"{MAX_NEWTON_ITERATIONS} iterations (last step {np.max(np.abs(step)):.3e})"
    )


def gauss_rule(alpha, n):
    """Build the (n+1)-point Gegenbauer-Gauss rule for index alpha."""
    alpha = validate_index(alpha)
    n = _validate_degree(n)
    lambdas = lambda_norm(alpha, np.arange(n + 1))
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if n == 0:
        return GaussRule(alpha, 0, np.zeros(1), lambdas.copy(), lambdas)

    m = n + 1
    j = np.arange(m)
    seeds = np.cos((2 * j + 1) * np.pi / (2 * m))[::-1].copy()
    nodes = np.sort(_refine_roots(alpha, m, seeds))
    nodes = 0.5 * (nodes - nodes[::-1])

    values = eval_series(alpha, n, nodes)
    weights = 1.0 / np.sum(values**2 / lambdas[:, None], axis=0)
    weights = 0.5 * (weights + weights[::-1])

    if np.any(np.diff(nodes) <= 0) or np.any(np.abs(nodes) >= 1):
        raise ConvergenceError(f"Gauss nodes for alpha={alpha}, n={n} are not distinct")
    return GaussRule(alpha, n, nodes, weights, lambdas)


def christoffel_bound(alpha, n):
    """Asymptotic upper bound on the Gauss weights of an (n+1)-point rule."""
    alpha = validate_index(alpha)
    n = _validate_degree(n, minimum=1)
    if alpha >= 0:
        return math.pi / (n + 1)
    return gamma(alpha + 0.5) ** 2 / (2 * n ** (1 + 2 * alpha))
