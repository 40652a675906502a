import math

import numpy as np
import pytest

from tgspec.errors import DimensionError
from tgspec.gegenbauer import lambda_norm
from tgspec.interpolation import (
    forward_transform,
    stability_bound,
    stability_report,
    sup_norm_estimate,
    transform_matrix,
)
from tgspec.tgbasis import TGMap, build_grid, tg_eval_series


def random_smooth_function(rng):
    # decaying oscillation, bounded on [0, inf)
    c = rng.normal(size=3)
    b = rng.uniform(0.1, 2.0, size=3)
    w = rng.uniform(0.0, 3.0, size=3)
    return lambda t: sum(c[i] * np.exp(-b[i] * t) * np.cos(w[i] * t) for i in range(3))


@pytest.mark.parametrize("family", ["rg", "eg"])
def test_transform_inverts_basis_matrix(family):
    grid = build_grid(TGMap(family, 1.5), 0.7, 14)
    G = tg_eval_series(grid.map, grid.alpha, grid.n, grid.t_nodes)
    np.testing.assert_allclose(transform_matrix(grid) @ G.T, np.eye(15), atol=1e-11)


def test_transform_recovers_expansion_coefficients(rg_grid, rng):
    coeffs = rng.normal(size=rg_grid.n + 1)
    samples = coeffs @ tg_eval_series(rg_grid.map, rg_grid.alpha, rg_grid.n, rg_grid.t_nodes)
    interp = forward_transform(rg_grid, samples)
    np.testing.assert_allclose(interp.coeffs, coeffs, atol=1e-11)


def test_interpolant_reproduces_node_values(eg_grid, rng):
    samples = rng.normal(size=eg_grid.n + 1)
    interp = forward_transform(eg_grid, samples)
    np.testing.assert_allclose(interp(eg_grid.t_nodes), samples, atol=1e-11)
    assert isinstance(interp(0.5), float)


@pytest.mark.parametrize("family, alpha", [("rg", -0.3), ("eg", 0.5), ("eg", 2.0)])
def test_coefficients_carry_the_discrete_norm(family, alpha, rng):
    grid = build_grid(TGMap(family, 1.5), alpha, 16)
    samples = rng.normal(size=grid.n + 1)
    interp = forward_transform(grid, samples)
    energy = np.sum(interp.coeffs**2 * lambda_norm(alpha, np.arange(grid.n + 1)))
    l2 = stability_report(grid, samples).discrete_L2w_norm
    assert energy == pytest.approx(l2**2, rel=1e-9)


def test_interpolant_converges_for_smooth_function():
    f = lambda t: 1 / (1 + np.exp(t))  # noqa: E731
    grid = build_grid(TGMap("eg", 1.0), 0.5, 30)
    interp = forward_transform(grid, f(grid.t_nodes))
    t = np.linspace(0.0, 5.0, 101)
    np.testing.assert_allclose(interp(t), f(t), atol=1e-8)


def test_transform_rejects_wrong_sample_count(eg_grid):
    with pytest.raises(DimensionError):
        forward_transform(eg_grid, np.ones(eg_grid.n))


@pytest.mark.parametrize("alpha", [0.0, 0.5, 2.0])
@pytest.mark.parametrize("n", [20, 100])
def test_stability_bound_nonnegative_alpha(alpha, n, rng):
    grid = build_grid(TGMap("rg", 1.0), alpha, n)
    for _ in range(100):
        f = random_smooth_function(rng)
        report = stability_report(grid, f(grid.t_nodes))
        assert report.bound == pytest.approx(math.sqrt(math.pi))
        assert report.within_bound
        assert report.discrete_L2w_norm <= math.sqrt(math.pi) * report.sup_norm * (1 + 1e-12)


@pytest.mark.parametrize("n", [20, 100])
def test_stability_bound_negative_alpha(n, rng):
    alpha = -0.45
    grid = build_grid(TGMap("eg", 1.0), alpha, n)
    bound = math.gamma(alpha + 0.5) * n ** (-0.5 - alpha) / math.sqrt(2)
    assert stability_bound(alpha, n) == pytest.approx(bound)
    for _ in range(100):
        f = random_smooth_function(rng)
        report = stability_report(grid, f(grid.t_nodes))
        assert report.within_bound
        assert report.discrete_L2w_norm <= bound * report.sup_norm


def test_stability_report_of_zero_samples(eg_grid):
    report = stability_report(eg_grid, np.zeros(eg_grid.n + 1))
    assert report.ratio == 0.0
    assert report.within_bound


def test_sup_norm_estimate():
    assert sup_norm_estimate(lambda t: np.exp(-t), 5.0) == pytest.approx(1.0)
    estimate = sup_norm_estimate(lambda t: t * np.exp(-t), 10.0, m=4001)
    assert estimate == pytest.approx(math.exp(-1), rel=1e-6)
