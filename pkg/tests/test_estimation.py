import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochroute.decentralized import KnownSubgraph, expand_frontier
from stochroute.distributions import (DiscreteDistribution, LogNormalParams, TimeGrid, cdf, convolve,
                                      discretize_lognormal, mixture)
from stochroute.errors import EstimationError, FitError, ParameterError
from stochroute.estimation import (IDENTITY, DistanceModel, EstimationContext, Mode, build_context_global,
                                   build_context_local, distance_pairs, estimate_cdf, estimate_cdfs_to,
                                   expected_steps, fit_distance_model, fit_points)
from stochroute.spatial_graph import (SpatialNetwork, SpatialNode, StochasticEdge, generate_kleinberg_variant,
                                      network_distance)

GRID = TimeGrid.for_horizon(40, 400)


def star(lengths, weights=None):
    """Node 0 linked to nodes 1..k placed along the x axis at the given lengths."""
    nodes = [SpatialNode(0, 0.0, 0.0)] + [SpatialNode(k + 1, float(L), 0.0) for k, L in enumerate(lengths)]
    edges = []
    for k, L in enumerate(lengths):
        w = weights[k] if weights else LogNormalParams(1.0, 0.5)
        edges += [StochasticEdge(0, k + 1, float(L), w), StochasticEdge(k + 1, 0, float(L), w)]
    return SpatialNetwork(nodes, edges)


@pytest.fixture(scope="module")
def lattice():
    return generate_kleinberg_variant(10, np.random.default_rng(3))


def ctx_with(lam, step=None, model=IDENTITY):
    step = step or discretize_lognormal(LogNormalParams(1.0, 0.5), GRID)
    return EstimationContext(lam, step, model)


# --- expected steps ---------------------------------------------------------------

@pytest.mark.parametrize("h,lam,k", [(5, 2, 3), (6, 2, 3), (0.3, 2, 1), (0.0, 1, 1), (6.000000000000001, 2, 3),
                                     (2.1, 0.7, 3), (7, 1, 7)])
def test_expected_steps(h, lam, k):
    assert expected_steps(ctx_with(lam), h) == k


def test_expected_steps_negative_intercept_clamps_to_one():
    ctx = ctx_with(1.0, model=DistanceModel(-5.0, 1.0))
    assert expected_steps(ctx, 2.0) == 1
    with pytest.raises(ParameterError):
        expected_steps(ctx, -1.0)


def test_context_requires_positive_length():
    with pytest.raises(EstimationError):
        ctx_with(0.0)


# --- contexts -------------------------------------------------------------------------

def test_global_context_on_unit_lengths():
    p = LogNormalParams(1.0, 0.7)
    net = star([1, 1, 1], [p, p, p])
    ctx = build_context_global(net, GRID)
    assert ctx.lam == 1.0
    np.testing.assert_allclose(ctx.step.mass, discretize_lognormal(p, GRID).mass, atol=1e-15)
    assert ctx.mode is Mode.GLOBAL


def test_global_context_is_edge_mixture(lattice):
    ctx = build_context_global(lattice, GRID)
    assert ctx.lam == pytest.approx(lattice.lengths.mean())
    dists = lattice.edge_distributions(GRID)
    ref = mixture(dists, [1 / lattice.m] * lattice.m)
    np.testing.assert_allclose(ctx.step.mass, ref.mass, atol=1e-14)
    assert ctx.step.overflow == pytest.approx(ref.overflow, abs=1e-14)


def test_local_context_origin_only():
    net = star([1, 3])
    known = KnownSubgraph.start(net, 0)
    ctx = build_context_local(known, net, GRID)
    assert ctx.lam == 2.0
    assert ctx.mode is Mode.LOCAL


def test_local_context_equals_global_when_everything_visited(lattice):
    known = KnownSubgraph.empty()
    for v in range(lattice.n):
        known = expand_frontier(known, lattice, v)
    loc = build_context_local(known, lattice, GRID)
    glob = build_context_global(lattice, GRID)
    assert loc.lam == pytest.approx(glob.lam)
    np.testing.assert_allclose(loc.step.mass, glob.step.mass, atol=1e-15)


def test_isolated_origin_cannot_estimate():
    net = SpatialNetwork([SpatialNode(0, 0, 0), SpatialNode(1, 1, 0)], [])
    with pytest.raises(EstimationError):
        build_context_local(KnownSubgraph.start(net, 0), net, GRID)
    with pytest.raises(ParameterError):
        build_context_global(net, GRID)


def test_mode_parse():
    assert Mode.parse("le") is Mode.LOCAL and Mode.parse("GLOBAL") is Mode.GLOBAL
    with pytest.raises(ParameterError):
        Mode.parse("XE")


# --- estimate ---------------------------------------------------------------------------

def test_estimate_cdf_cases(lattice):
    ctx = build_context_global(lattice, GRID)
    np.testing.assert_array_equal(estimate_cdf(ctx, 5, 5, lattice), np.ones(GRID.bin_count))
    a, b = lattice.node_at(0, 0), lattice.node_at(0, 1)
    k = expected_steps(ctx, 1.0)
    np.testing.assert_array_equal(estimate_cdf(ctx, a, b, lattice), cdf(ctx.powers.get(k)))
    if k == 1:
        np.testing.assert_array_equal(estimate_cdf(ctx, a, b, lattice), cdf(ctx.step))
    rows = estimate_cdfs_to(ctx, a, [a, b, 99], lattice)
    np.testing.assert_array_equal(rows[1], estimate_cdf(ctx, a, b, lattice))
    np.testing.assert_array_equal(rows[2], estimate_cdf(ctx, a, 99, lattice))
    assert np.all(rows[0] == 1)


def test_estimate_non_increasing_in_distance(lattice):
    ctx = build_context_global(lattice, GRID)
    origin = lattice.node_at(0, 0)
    order = sorted(range(1, lattice.n), key=lambda j: np.hypot(*lattice.xy[j]))
    prev = np.ones(GRID.bin_count)
    for j in order:
        cur = estimate_cdf(ctx, origin, j, lattice)
        assert np.all(np.diff(cur) >= -1e-15)
        assert np.all(cur <= prev + 1e-12)
        prev = cur


def test_power_cache_is_transparent():
    step = discretize_lognormal(LogNormalParams(1.0, 0.8), GRID)
    ctx = ctx_with(1.0, step)
    cached = [ctx.steps_cdf(k).copy() for k in (4, 2, 6)]
    p2 = convolve(step, step)
    p4 = convolve(p2, p2)
    p6 = convolve(p4, p2)
    for got, ref in zip(cached, (p4, p2, p6)):
        np.testing.assert_allclose(got, cdf(ref), atol=1e-12)


@pytest.mark.slow
def test_two_step_estimate_matches_monte_carlo(lattice):
    """Oracle: sum the bin indices of two independent draws from the step mixture."""
    ctx = build_context_global(lattice, GRID)
    probs = np.append(ctx.step.mass, ctx.step.overflow)
    rng = np.random.default_rng(77)
    n = 10**6
    k1 = rng.choice(len(probs), size=n, p=probs / probs.sum())
    k2 = rng.choice(len(probs), size=n, p=probs / probs.sum())
    total = np.where((k1 < GRID.bin_count) & (k2 < GRID.bin_count), k1 + k2, 10**9)
    empirical = np.searchsorted(np.sort(total), np.arange(GRID.bin_count), side="right") / n
    assert np.max(np.abs(ctx.steps_cdf(2) - empirical)) <= 0.005


# --- distance model ---------------------------------------------------------------------

def test_exact_line_fit():
    d = np.linspace(0, 10, 30)
    fit = fit_points(d, 2 * d + 1, bootstrap_samples=20, rng=np.random.default_rng(0))
    assert fit.model.slope == pytest.approx(2) and fit.model.intercept == pytest.approx(1)
    assert fit.pearson_rho == pytest.approx(1)
    assert fit.slope_ci[0] == pytest.approx(2) and fit.slope_ci[1] == pytest.approx(2)
    assert fit.model(3.0) == pytest.approx(7.0)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_points([1, 2], [1, 2])
    with pytest.raises(ParameterError):
        fit_points([1, 2, 3], [1, 2, 4], bootstrap_samples=0)
    with pytest.raises(ParameterError):
        DistanceModel(0, 1, "chebyshev")


def test_bootstrap_coverage():
    """The 95% interval for the slope covers the true value in about 95% of repeated experiments."""
    rng = np.random.default_rng(123)
    reps, hits = 200, 0
    for _ in range(reps):
        d = rng.uniform(0, 50, 120)
        g = 1.5 * d + 2 + rng.normal(0, 3, d.size)
        fit = fit_points(d, g, bootstrap_samples=300, rng=rng)
        hits += fit.slope_ci[0] <= 1.5 <= fit.slope_ci[1]
    coverage = hits / reps
    assert 0.89 <= coverage <= 0.99


def test_distance_pairs_count_and_exclusions():
    nodes = [SpatialNode(k, float(k), 0.0) for k in range(4)]
    w = LogNormalParams(1, 1)
    edges = [StochasticEdge(0, 1, 1, w), StochasticEdge(1, 0, 1, w),
             StochasticEdge(1, 2, 1.5, w), StochasticEdge(2, 1, 1.5, w)]      # node 3 isolated
    net = SpatialNetwork(nodes, edges)
    d, g, excluded = distance_pairs(net)
    assert len(d) + excluded == 6 and excluded == 3
    np.testing.assert_allclose(sorted(g), [1.0, 1.5, 2.5])


def test_lattice_fit_on_generated_network(lattice):
    eu = fit_distance_model(lattice, "euclidean", 50, np.random.default_rng(0))
    la = fit_distance_model(lattice, "lattice", 50, np.random.default_rng(0))
    assert eu.n_pairs == lattice.n * (lattice.n - 1) // 2 and eu.n_excluded == 0
    assert 0 < eu.pearson_rho <= 1 and 0 < la.pearson_rho <= 1
    # network distance is bounded below by Euclidean and (roughly) above by lattice distance
    assert la.model.slope < 1
    d, g, _ = distance_pairs(lattice, "euclidean")
    assert np.all(g >= d - 1e-9)


@given(st.floats(0.1, 5), st.floats(0, 50), st.floats(0, 50))
@settings(max_examples=50, deadline=None)
def test_expected_steps_monotone(lam, d1, d2):
    ctx = ctx_with(lam)
    lo, hi = sorted((d1, d2))
    assert 1 <= expected_steps(ctx, lo) <= expected_steps(ctx, hi)
    assert expected_steps(ctx, hi) >= math.ceil(hi / lam - 1e-9)
