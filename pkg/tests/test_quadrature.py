import math

import numpy as np
import pytest

from tgspec.errors import DomainError, EvaluationError
from tgspec.gegenbauer import lambda_norm
from tgspec.quadrature import (
    BENCHMARK_INTEGRALS,
    LOG_ERROR_FLOOR,
    IntegralId,
    benchmark_error,
    integrate_to_all_nodes,
    integrate_to_node,
    integrate_weighted,
    truncation_bound,
    truncation_prefactor,
)
from tgspec.tgbasis import TGMap, build_grid, inverse_map, tg_eval_series, tg_weight


def test_weighted_rule_integrates_basis_products(rg_grid):
    grid = rg_grid
    assert integrate_weighted(grid, lambda t: 1.0) == pytest.approx(lambda_norm(grid.alpha, 0))

    def square(t):
        return tg_eval_series(grid.map, grid.alpha, 4, t)[4] ** 2

    assert integrate_weighted(grid, square) == pytest.approx(lambda_norm(grid.alpha, 4), rel=1e-10)


@pytest.mark.parametrize("L", [1.0, 2.0])
def test_node_integral_of_exponential(L):
    grid = build_grid(TGMap("eg", L), 0.5, 20)
    approx = integrate_to_all_nodes(grid, lambda t: math.exp(-t))
    np.testing.assert_allclose(approx, -np.expm1(-grid.t_nodes), rtol=0, atol=1e-10)


def test_all_nodes_agrees_bitwise_with_single_node(eg_grid):
    f = math.atan
    all_nodes = integrate_to_all_nodes(eg_grid, f)
    for j in range(eg_grid.n + 1):
        assert integrate_to_node(eg_grid, f, j) == all_nodes[j]


def test_quadrature_is_deterministic():
    first = benchmark_error("I2", "rg", 0.5, 2.0, 12)
    second = benchmark_error("I2", "rg", 0.5, 2.0, 12)
    assert first == second


def test_bad_node_index(eg_grid):
    with pytest.raises(DomainError):
        integrate_to_node(eg_grid, math.exp, eg_grid.n + 1)
    with pytest.raises(DomainError):
        integrate_to_node(eg_grid, math.exp, -1)


def test_nonfinite_integrand_names_abscissa(eg_grid):
    with pytest.raises(EvaluationError, match="t ="):
        integrate_to_all_nodes(eg_grid, lambda t: float("nan"))
    with pytest.raises(EvaluationError):
        integrate_weighted(eg_grid, lambda t: math.inf)


def test_integral_id_parsing():
    assert IntegralId.parse("i3") is IntegralId.I3
    with pytest.raises(DomainError):
        IntegralId.parse("I4")


@pytest.mark.parametrize("integral_id", list(IntegralId))
def test_antiderivatives_vanish_at_zero_and_differentiate_back(integral_id):
    integrand, antiderivative = BENCHMARK_INTEGRALS[integral_id]
    assert antiderivative(np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-15)
    t = np.array([0.3, 1.0, 4.0])
    h = 1e-6
    fd = (antiderivative(t + h) - antiderivative(t - h)) / (2 * h)
    np.testing.assert_allclose(fd, [integrand(v) for v in t], rtol=1e-7)


def test_exponential_converges_to_round_off():
    coarse = benchmark_error("I1", "eg", 0.5, 1.0, 2)
    fine = benchmark_error("I1", "eg", 0.5, 1.0, 20)
    assert fine.max_abs_error <= 1e-12
    assert fine.max_log_error <= coarse.max_log_error - 6


@pytest.mark.parametrize("integral_id", list(IntegralId))
def test_errors_decrease_with_mesh_size(integral_id):
    errors = [benchmark_error(integral_id, "eg", 0.5, 15.0, n).max_abs_error for n in (2, 30)]
    assert errors[1] < errors[0] / 100


def test_tiny_scaling_hits_log_floor():
    row = benchmark_error("I1", "eg", 0.5, 1e-10, 10)
    assert math.isfinite(row.max_log_error)
    assert row.max_log_error >= LOG_ERROR_FLOOR
    assert row.max_abs_error <= 1e-8


@pytest.mark.parametrize("family", ["rg", "eg"])
@pytest.mark.parametrize("integral_id", list(IntegralId))
def test_vanishing_scaling_does_not_worsen_error(integral_id, family):
    tiny = benchmark_error(integral_id, family, -0.2, 1e-10, 20)
    unit = benchmark_error(integral_id, family, -0.2, 1.0, 20)
    assert math.isfinite(tiny.max_log_error)
    assert tiny.max_abs_error <= unit.max_abs_error


def test_sweep_row_as_dict():
    row = benchmark_error("I3", "rg", 1.0, 2.0, 6)
    assert row.as_dict() == {
        "integral": "I3",
        "family": "rg",
        "alpha": 1.0,
        "L": 2.0,
        "n": 6,
        "max_abs_error": row.max_abs_error,
        "max_log_error": row.max_log_error,
    }


@pytest.mark.parametrize(
    "n, alpha, expected",
    [
        (1, 0.5, 1 / 135),  # 2-point Gauss-Legendre
        (0, 0.0, math.pi / 4),  # 1-point Gauss-Chebyshev
        (1, 0.0, math.pi / 192),  # 2-point Gauss-Chebyshev
        (2, 0.5, 1 / 15750),  # 3-point Gauss-Legendre
    ],
)
def test_truncation_prefactor_classical_rules(n, alpha, expected):
    assert truncation_prefactor(n, alpha) == pytest.approx(expected, rel=1e-12)


def _max_derivative(grid, f, j, order):
    # Finite-difference estimate of sup |d^order/dx^order g(T^{-1}(x))|
    h = 0.02
    x = np.arange(-1 + 1e-3, 1 - 1e-3, h)
    z = inverse_map(grid.map, x)
    g = np.exp(-z) * np.array([f(grid.t_nodes[j] * math.exp(-v)) for v in z])
    g = g / tg_weight(grid.map, grid.alpha, z)
    return float(np.max(np.abs(np.diff(g, order)))) / h**order


@pytest.mark.parametrize("alpha", [0.0, 0.5])
@pytest.mark.parametrize("L", [1.0, 15.0])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_truncation_bound_holds(alpha, L, n):
    grid = build_grid(TGMap("eg", L), alpha, n)
    f = lambda t: math.exp(-t)  # noqa: E731
    approx = integrate_to_all_nodes(grid, f)
    exact = -np.expm1(-grid.t_nodes)
    for j in range(n + 1):
        deriv = 2.0 * _max_derivative(grid, f, j, 2 * n + 2)
        assert abs(approx[j] - exact[j]) <= truncation_bound(grid, j, deriv) + 1e-15


def test_truncation_bound_arguments(eg_grid):
    assert truncation_bound(eg_grid, 0, 0.0) == 0.0
    with pytest.raises(DomainError):
        truncation_bound(eg_grid, 0, -1.0)
