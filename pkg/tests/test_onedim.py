import itertools
import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wassbary.errors import OutOfRange, TooLarge
from wassbary.onedim import (
    Empirical1D,
    QuantileGrid,
    barycenter_1d,
    brute_force_multimarginal,
    coupling_cost,
    g_operator_1d,
    midpoint_levels,
    quantile,
    v_functional_1d,
    w2_1d,
    w2_1d_squared,
    w2_grid_to_gaussian_squared,
)

HALF = [0.5, 0.5]


def uniform_atoms(values):
    return Empirical1D.from_samples(values)


def test_empirical_validation():
    with pytest.raises(ValueError):
        Empirical1D([1.0, 0.0], HALF)
    with pytest.raises(ValueError):
        Empirical1D([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        Empirical1D([0.0, 1.0], [1.0, 0.0])
    p = Empirical1D.from_samples([3.0, 1.0, 2.0], [1.0, 1.0, 2.0])
    np.testing.assert_array_equal(p.atoms, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(p.weights, [0.25, 0.5, 0.25])


def test_quantile_examples():
    assert quantile(Empirical1D.point_mass(0.0), 0.3) == 0.0
    p = uniform_atoms([0.0, 1.0])
    assert quantile(p, 0.25) == 0.0
    assert quantile(p, 0.75) == 1.0
    assert quantile(Empirical1D([1.0, 2.0, 3.0], [0.2, 0.3, 0.5]), 0.5) == 2.0
    for u in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(OutOfRange):
            quantile(p, u)


def test_w2_examples():
    p = uniform_atoms([0.0, 1.0])
    assert w2_1d(p, p) == 0.0
    assert w2_1d(Empirical1D.point_mass(0.0), Empirical1D.point_mass(1.0)) == 1.0
    assert w2_1d(p, uniform_atoms([0.0, 3.0])) == pytest.approx(math.sqrt(2.0), abs=1e-15)


def test_w2_unequal_weights_against_lp_free_oracle():
    # the north-west corner rule on sorted atoms is the optimal 1D coupling
    p = Empirical1D([0.0, 1.0, 4.0], [0.2, 0.5, 0.3])
    q = Empirical1D([-1.0, 2.0], [0.6, 0.4])
    expected = 0.2 * 1 + 0.4 * 4 + 0.1 * 1 + 0.3 * 4
    assert w2_1d_squared(p, q) == pytest.approx(expected, abs=1e-15)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=7), st.lists(st.floats(-10, 10), min_size=1, max_size=7))
def test_w2_is_a_metric_on_samples(xs, ys):
    p, q = uniform_atoms(xs), uniform_atoms(ys)
    assert w2_1d(p, q) == pytest.approx(w2_1d(q, p), abs=1e-12)
    assert w2_1d(p, q) >= 0.0
    r = uniform_atoms(xs + ys)
    assert w2_1d(p, q) <= w2_1d(p, r) + w2_1d(r, q) + 1e-12


def test_g_operator_examples():
    mu = QuantileGrid.gaussian(0.0, 1.0, 50)
    np.testing.assert_array_equal(g_operator_1d(mu, [mu, mu], HALF).values, mu.values)
    out = g_operator_1d(mu, [Empirical1D.point_mass(0.0), Empirical1D.point_mass(2.0)], HALF)
    np.testing.assert_array_equal(out.values, np.ones(50))
    m = 1000
    nus = [QuantileGrid.gaussian(0.0, 1.0, m), QuantileGrid.gaussian(0.0, 2.0, m)]
    out = g_operator_1d(Empirical1D.point_mass(5.0), nus, HALF, m=m)
    np.testing.assert_allclose(out.values, QuantileGrid.gaussian(0.0, 1.5, m).values, atol=1e-12)
    with pytest.raises(ValueError):
        g_operator_1d(Empirical1D.point_mass(0.0), nus, HALF)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 40))
def test_g_operator_one_step_fixed_point(seed, k, m):
    rng = np.random.default_rng(seed)
    nus = [uniform_atoms(rng.standard_normal(rng.integers(1, 8)) * rng.uniform(0.1, 3)) for _ in range(k)]
    w = rng.uniform(0.2, 1.0, k)
    w /= w.sum()
    once = g_operator_1d(QuantileGrid.gaussian(0.0, 1.0, m), nus, w)
    twice = g_operator_1d(once, nus, w)
    np.testing.assert_array_equal(twice.values, once.values)


def test_barycenter_examples():
    p = uniform_atoms([0.0, 1.0, 5.0])
    np.testing.assert_array_equal(barycenter_1d([p, p], HALF, 3).values, p.atoms)
    np.testing.assert_array_equal(
        barycenter_1d([Empirical1D.point_mass(0.0), Empirical1D.point_mass(2.0)], HALF, 4).values, np.ones(4)
    )
    np.testing.assert_array_equal(barycenter_1d([uniform_atoms([0, 1]), uniform_atoms([2, 5])], HALF, 2).values, [1, 3])


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_barycenter_minimizes_v(seed, k):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    nus = [uniform_atoms(rng.standard_normal(n)) for _ in range(k)]
    w = rng.uniform(0.2, 1.0, k)
    w /= w.sum()
    bary = barycenter_1d(nus, w, n)
    best = v_functional_1d(bary, nus, w)
    for _ in range(5):
        trial = QuantileGrid(np.sort(bary.values + rng.normal(0, 0.3, n)))
        assert best <= v_functional_1d(trial, nus, w) + 1e-12


def test_multimarginal_examples():
    p = uniform_atoms([0.0, 2.0, 3.0])
    value, bary = brute_force_multimarginal([p, p], HALF)
    assert value == 0.0
    np.testing.assert_array_equal(bary.atoms, p.atoms)
    p, q = uniform_atoms([0.0, 1.0]), uniform_atoms([0.0, 3.0])
    value, bary = brute_force_multimarginal([p, q], HALF)
    np.testing.assert_array_equal(bary.atoms, barycenter_1d([p, q], HALF, 2).values)
    np.testing.assert_array_equal(bary.atoms, [0.0, 2.0])
    # mean over atoms of sum_j w_j (xbar - x_j)^2 = (0 + 2 * 0.5 * 1) / 2
    assert value == pytest.approx(0.5, abs=1e-15)
    assert value == pytest.approx(v_functional_1d(bary, [p, q], HALF), abs=1e-15)


def test_multimarginal_three_marginals():
    rng = np.random.default_rng(3)
    nus = [uniform_atoms(rng.standard_normal(4)) for _ in range(3)]
    w = np.array([0.2, 0.3, 0.5])
    value, bary = brute_force_multimarginal(nus, w)
    grid = barycenter_1d(nus, w, 4)
    np.testing.assert_allclose(bary.atoms, grid.values, atol=1e-12)
    assert value == pytest.approx(v_functional_1d(grid, nus, w), abs=1e-12)


def test_multimarginal_cap():
    nus = [uniform_atoms(np.arange(10.0))] * 2
    with pytest.raises(TooLarge):
        brute_force_multimarginal(nus, HALF)
    with pytest.raises(ValueError):
        brute_force_multimarginal([uniform_atoms([0.0, 1.0]), uniform_atoms([0.0])], HALF)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_sorted_coupling_is_optimal(seed, n):
    rng = np.random.default_rng(seed)
    nus = [uniform_atoms(rng.standard_normal(n)) for _ in range(2)]
    w = rng.uniform(0.2, 1.0, 2)
    w /= w.sum()
    value, _, coupling = brute_force_multimarginal(nus, w, return_coupling=True)
    identity = tuple(range(n))
    assert value == pytest.approx(coupling_cost(nus, w, (identity, identity)), abs=1e-12)
    assert value == pytest.approx(coupling_cost(nus, w, coupling), abs=1e-12)
    for perm in itertools.islice(itertools.permutations(range(n)), 50):
        assert value <= coupling_cost(nus, w, (identity, perm)) + 1e-12


def test_midpoint_levels():
    np.testing.assert_allclose(midpoint_levels(4), [0.125, 0.375, 0.625, 0.875])


@pytest.mark.parametrize("s1, s2", [(1.0, 2.0), (0.5, 0.7), (1.0, 3.0)])
def test_gaussian_reduction(s1, s2):
    m = 2000
    d = w2_1d(QuantileGrid.gaussian(0.0, s1, m), QuantileGrid.gaussian(0.0, s2, m))
    assert abs(d - abs(s1 - s2)) <= 2.0 / m


def test_grid_to_gaussian_closed_form():
    # compare the cell-wise closed form with brute-force quadrature on one cell layout
    grid = QuantileGrid.gaussian(0.3, 1.2, 8)
    nd = NormalDist(0.3, 1.2)
    us = (np.arange(400_000) + 0.5) / 400_000
    q = np.array([nd.inv_cdf(u) for u in us])
    cell = np.minimum((us * 8).astype(int), 7)
    brute = float(np.mean((grid.values[cell] - q) ** 2))
    assert w2_grid_to_gaussian_squared(grid, 0.3, 1.2) == pytest.approx(brute, rel=1e-3)
