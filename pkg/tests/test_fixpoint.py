import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import BOTTOM_ROW, TOP_ROW, problems, random_pd
from wassbary.bench import wishart_problem
from wassbary.errors import MaxIterExceeded, NotCommuting, SingularMatrix
from wassbary.fixpoint import (
    IterationConfig,
    Variant,
    ball_shape,
    barycenter_commuting,
    ellipsoid_barycenter,
    solve,
    solve_location_scatter,
    step_paper,
    step_ru,
)
from wassbary.gausswass import BarycenterProblem, h_map, v_functional
from wassbary.symmat import det_root

SCALAR = BarycenterProblem.from_covariances([[[1.0]], [[4.0]]])
RU = IterationConfig(variant="ru")


def test_config_validation():
    with pytest.raises(ValueError):
        IterationConfig(tol=0.0)
    with pytest.raises(ValueError):
        IterationConfig(max_iter=0)
    with pytest.raises(ValueError):
        IterationConfig(s0=np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        IterationConfig(s0="random")
    assert IterationConfig(variant="ru").variant is Variant.RU


def test_step_examples(top_row):
    s = np.array([[2.0, 0.4], [0.4, 1.0]])
    same = BarycenterProblem.from_covariances([s, s])
    np.testing.assert_allclose(step_paper(s, same), s, atol=1e-12)
    np.testing.assert_allclose(step_ru(s, same), s, atol=1e-12)
    np.testing.assert_allclose(step_paper(np.eye(2), top_row), np.diag([4.0, 2.25]), atol=1e-12)
    assert step_paper([[1.0]], SCALAR)[0, 0] == pytest.approx(2.25)
    assert step_ru([[1.0]], SCALAR)[0, 0] == pytest.approx(1.5)
    with pytest.raises(SingularMatrix):
        step_paper(np.diag([1.0, 0.0]), top_row)


def test_solve_top_row(top_row):
    result, trace = solve(top_row)
    assert result.n_iter == 2
    assert result.converged
    np.testing.assert_allclose(result.cov, np.diag([4.0, 2.25]), atol=1e-10)
    assert trace.stop_step == 2
    assert result.bound_report.ok


def test_single_measure():
    cov = np.array([[3.0, 1.0], [1.0, 2.0]])
    problem = BarycenterProblem.from_covariances([cov], means=[[1.0, -1.0]])
    result, trace = solve(problem)
    np.testing.assert_allclose(trace.records[1].v, 0.0, atol=1e-12)
    np.testing.assert_allclose(result.cov, cov, atol=1e-10)
    np.testing.assert_allclose(result.mean, [1.0, -1.0])


def test_bottom_row_both_variants(bottom_row):
    paper, _ = solve(bottom_row)
    ru, _ = solve(bottom_row, RU)
    assert paper.converged and ru.converged
    assert np.linalg.norm(paper.cov - ru.cov) <= 1e-6
    assert ru.n_iter > paper.n_iter
    # the RU step leaves the true barycenter in place
    assert np.linalg.norm(step_ru(paper.cov, bottom_row) - paper.cov) <= 1e-8


def test_ru_on_top_row_is_slower(top_row):
    paper, _ = solve(top_row)
    ru, _ = solve(top_row, RU)
    assert np.linalg.norm(ru.cov - paper.cov) <= 1e-6
    assert ru.n_iter > paper.n_iter


def test_max_iter_reports_failure(bottom_row):
    with pytest.warns(MaxIterExceeded):
        result, _ = solve(bottom_row, IterationConfig(max_iter=2))
    assert not result.converged
    assert result.n_steps == 2


def test_explicit_and_first_starts(bottom_row):
    ref, _ = solve(bottom_row)
    for s0 in ("first", np.array([[5.0, -1.0], [-1.0, 0.5]])):
        result, _ = solve(bottom_row, IterationConfig(s0=s0))
        assert np.linalg.norm(result.cov - ref.cov) <= 1e-6


def _trajectory_checks(problem, trace):
    w = problem.weights
    det_floor = sum(wj * det_root(c) for wj, c in zip(w, problem.covs))
    trace_cap = sum(wj * np.trace(c) for wj, c in zip(w, problem.covs))
    d = problem.dim
    recs = trace.records
    for prev, cur in zip(recs, recs[1:]):
        assert cur.delta_v >= -1e-9
        assert prev.v + 1e-9 >= cur.v
        assert np.exp(cur.log_det / (2 * d)) >= det_floor - 1e-8
        assert cur.trace <= trace_cap + 1e-9
        if prev.n >= 1:
            assert prev.trace <= cur.trace + 1e-9


@pytest.mark.parametrize("d", [2, 3, 5, 10])
@pytest.mark.parametrize("k", [2, 3, 5])
def test_wishart_trajectory_invariants(d, k):
    for r in range(3):
        problem = wishart_problem(11, d, k, r)
        result, trace = solve(problem)
        assert result.converged
        _trajectory_checks(problem, trace)
        assert np.linalg.norm(h_map(result.cov, problem) - np.eye(d)) <= 1e-6
        ru_fixed = step_ru(result.cov, problem)
        assert np.linalg.norm(ru_fixed - result.cov) <= 1e-6 * (1 + np.linalg.norm(result.cov))


@settings(max_examples=30)
@given(problems(max_dim=4, max_k=4))
def test_variants_and_starts_agree(problem):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        paper, _ = solve(problem)
        ru, _ = solve(problem, RU)
        first, _ = solve(problem, IterationConfig(s0="first"))
    assert paper.converged
    assert np.linalg.norm(first.cov - paper.cov) <= 1e-6
    if ru.converged:
        assert np.linalg.norm(ru.cov - paper.cov) <= 1e-6


@settings(max_examples=30)
@given(problems(max_dim=4, max_k=4))
def test_converged_result_certified(problem):
    result, trace = solve(problem)
    assert result.converged
    assert result.final_residual <= 1e-6
    assert not result.bound_report.violations
    assert result.n_iter <= result.n_steps == len(trace) - 1
    assert v_functional(result.cov, problem) == pytest.approx(trace.records[-1].v, abs=1e-12)


def test_commuting_closed_form(top_row):
    np.testing.assert_allclose(barycenter_commuting(top_row), np.diag([4.0, 2.25]), atol=1e-14)
    s = np.array([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(barycenter_commuting(BarycenterProblem.from_covariances([s, s])), s, atol=1e-12)
    sds = np.array([0.5, 1.0, 3.0])
    w = np.array([0.2, 0.3, 0.5])
    scalar = BarycenterProblem.from_covariances([[[x * x]] for x in sds], w)
    assert barycenter_commuting(scalar)[0, 0] == pytest.approx(float(w @ sds) ** 2)
    with pytest.raises(NotCommuting):
        barycenter_commuting(BarycenterProblem.from_covariances(BOTTOM_ROW))


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 4))
def test_commuting_matches_solver(seed, d, k):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    covs = [(q * rng.uniform(0.1, 5.0, d)) @ q.T for _ in range(k)]
    problem = BarycenterProblem.from_covariances(covs)
    closed = barycenter_commuting(problem)
    assert np.linalg.norm(h_map(closed, problem) - np.eye(d)) <= 1e-7
    result, _ = solve(problem)
    assert np.linalg.norm(result.cov - closed) <= 1e-8 * (1 + np.linalg.norm(closed))


def test_location_scatter_matches_gaussian(bottom_row):
    gauss, _ = solve(bottom_row)
    for family in ("gaussian", "location-scatter", "ellipsoid"):
        res = solve_location_scatter(bottom_row, family=family)
        assert res.family == family
        assert np.array_equal(res.cov, gauss.cov)
    with pytest.raises(ValueError):
        solve_location_scatter(bottom_row, family="cauchy")


def test_location_scatter_equal_members():
    cov = np.array([[1.0, 0.2], [0.2, 0.5]])
    problem = BarycenterProblem.from_covariances([cov] * 3, means=[[1.0, 2.0]] * 3)
    res = solve_location_scatter(problem)
    np.testing.assert_allclose(res.cov, cov, atol=1e-10)
    np.testing.assert_allclose(res.mean, [1.0, 2.0])


def test_ellipsoid_examples():
    shape = np.array([[2.0, 0.5], [0.5, 1.0]])
    c, s = ellipsoid_barycenter([([1.0, 1.0], shape)])
    np.testing.assert_allclose(c, [1.0, 1.0])
    np.testing.assert_allclose(s, shape, atol=1e-10)
    c, s = ellipsoid_barycenter([([0.0, 0.0], shape), ([2.0, 0.0], shape)])
    np.testing.assert_allclose(c, [1.0, 0.0])
    np.testing.assert_allclose(s, shape, atol=1e-10)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_concentric_balls(d):
    r1, r2 = 1.0, 3.0
    center, shape = ellipsoid_barycenter([(np.zeros(d), ball_shape(r1, d)), (np.zeros(d), ball_shape(r2, d))])
    # the barycenter of two balls is the ball with the averaged radius
    np.testing.assert_allclose(shape, ball_shape(0.5 * (r1 + r2), d), atol=1e-10)
    np.testing.assert_allclose(center, 0.0)


def _uniform_in_ellipsoid(rng, center, shape, n):
    d = len(center)
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = np.sqrt(d + 2) * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return center + (radius * g) @ np.linalg.cholesky(shape).T


def test_ellipsoid_parameters_are_moments():
    # E(m, S) = {(x-m)^T S^{-1} (x-m) <= d+2} carries mean m and covariance S under the uniform law
    rng = np.random.default_rng(5)
    shape = np.array([[2.0, 0.7, 0.0], [0.7, 1.0, 0.3], [0.0, 0.3, 0.5]])
    center = np.array([1.0, -2.0, 0.5])
    x = _uniform_in_ellipsoid(rng, center, shape, 400_000)
    np.testing.assert_allclose(x.mean(axis=0), center, atol=0.01)
    np.testing.assert_allclose(np.cov(x.T), shape, atol=0.01)


def test_semidefinite_members():
    problem = BarycenterProblem.from_covariances([np.diag([1.0, 0.0]), np.eye(2), random_pd(np.random.default_rng(2), 2)])
    result, trace = solve(problem)
    assert result.converged
    _trajectory_checks(problem, trace)
