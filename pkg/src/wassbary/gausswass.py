"""Closed-form W2 geometry of Gaussian and location-scatter measures.

Everything here depends on a measure only through its mean and covariance,
so :class:`GaussianMeasure` doubles as the ``(m, Sigma)`` parametrization of
any location-scatter family member. Covariance computations always run on
the centered measures; means enter only through ``||m_1 - m_2||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimMismatch, InvalidProblem, SingularMatrix
from .symmat import (
    as_symmat,
    check_psd,
    det_root,
    frob_norm,
    is_pd,
    sqrtm_and_inv_sqrtm,
    sqrtm_psd,
    symmetrize,
)

WEIGHT_SUM_TOL = 1e-12
BOUND_SLACK = 1e-8
W2_NEG_CLAMP = 1e-9


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = as_symmat(self.cov, name="cov")
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        if mean.shape[0] != cov.shape[0]:
            raise DimMismatch(f"mean has dim {mean.shape[0]} but cov is {cov.shape[0]}x{cov.shape[0]}")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean has non-finite entries")
        check_psd(cov)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", mean)

    @classmethod
    def centered(cls, cov) -> "GaussianMeasure":
        cov = as_symmat(cov)
        return cls(np.zeros(cov.shape[0]), cov)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]


@dataclass(frozen=True)
class BarycenterProblem:
    """``k`` measures with positive weights summing to one.

    At least one covariance must be positive definite; the others may be
    singular PSD.
    """

    measures: tuple[GaussianMeasure, ...]
    weights: np.ndarray

    def __post_init__(self):
        measures = tuple(self.measures)
        if not measures:
            raise InvalidProblem("a barycenter problem needs at least one measure")
        dims = {m.dim for m in measures}
        if len(dims) != 1:
            raise DimMismatch(f"measures have differing dimensions {sorted(dims)}")
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != len(measures):
            raise InvalidProblem(f"{weights.shape[0]} weights for {len(measures)} measures")
        if np.any(~(weights > 0)):
            raise InvalidProblem("weights must be positive")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidProblem(f"weights sum to {weights.sum()!r}, not 1")
        if not any(is_pd(m.cov) for m in measures):
            raise SingularMatrix("at least one covariance must be positive definite")
        object.__setattr__(self, "measures", measures)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_covariances(cls, covs, weights=None, means=None) -> "BarycenterProblem":
        covs = [as_symmat(c) for c in covs]
        k = len(covs)
        if weights is None:
            weights = np.full(k, 1.0 / k)
        if means is None:
            means = [np.zeros(c.shape[0]) for c in covs]
        return cls(tuple(GaussianMeasure(m, c) for m, c in zip(means, covs)), weights)

    @property
    def dim(self) -> int:
        return self.measures[0].dim

    @property
    def k(self) -> int:
        return len(self.measures)

    @property
    def covs(self) -> list[np.ndarray]:
        return [m.cov for m in self.measures]

    @property
    def means(self) -> np.ndarray:
        return np.stack([m.mean for m in self.measures])


def _check_same_dim(*mats: np.ndarray) -> None:
    dims = {m.shape[0] for m in mats}
    if len(dims) != 1:
        raise DimMismatch(f"dimension mismatch: {sorted(dims)}")


def sandwich_sqrt(root: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """``(root cov root)^{1/2}`` with the inner product symmetrized first."""
    return sqrtm_psd(symmetrize(root @ cov @ root))


def bures_cross_term(cov_p: np.ndarray, cov_q: np.ndarray) -> float:
    """``Tr((cov_p^{1/2} cov_q cov_p^{1/2})^{1/2})``."""
    return float(np.trace(sandwich_sqrt(sqrtm_psd(cov_p), cov_q)))


def w2_gaussian_squared(p: GaussianMeasure, q: GaussianMeasure) -> float:
    _check_same_dim(p.cov, q.cov)
    shift = float(np.sum((p.mean - q.mean) ** 2))
    traces = float(np.trace(p.cov) + np.trace(q.cov))
    value = shift + traces - 2.0 * bures_cross_term(p.cov, q.cov)
    if value < 0.0:
        # cancellation near zero distance; the clamp window scales with the inputs
        if value < -W2_NEG_CLAMP * max(1.0, traces):
            raise ArithmeticError(f"squared W2 evaluated to {value!r}")
        value = 0.0
    return value


def w2_gaussian(p: GaussianMeasure, q: GaussianMeasure) -> float:
    """W2 distance between two Gaussians (or two members of one location-scatter family).

    Examples
    --------
    >>> w2_gaussian(GaussianMeasure([0.0], [[1.0]]), GaussianMeasure([0.0], [[4.0]]))
    1.0
    """
    return float(np.sqrt(w2_gaussian_squared(p, q)))


def gelbrich_lower_bound(m_p, cov_p, m_q, cov_q) -> float:
    """Lower bound on squared W2 between any two laws with the given first two moments.

    The bound is attained when the laws are Gaussian, or more generally
    members of the same location-scatter family. ``cov_p`` must be
    nonsingular.
    """
    cov_p = as_symmat(cov_p, name="cov_p")
    cov_q = as_symmat(cov_q, name="cov_q")
    _check_same_dim(cov_p, cov_q)
    m_p = np.asarray(m_p, dtype=np.float64).reshape(-1)
    m_q = np.asarray(m_q, dtype=np.float64).reshape(-1)
    root_p, _ = sqrtm_and_inv_sqrtm(cov_p)
    cross = float(np.trace(sandwich_sqrt(root_p, cov_q)))
    return float(np.sum((m_p - m_q) ** 2) + np.trace(cov_p) + np.trace(cov_q) - 2.0 * cross)


def optimal_map_matrix(cov_p, cov_q) -> np.ndarray:
    """Matrix ``A`` of the optimal affine map ``x -> (m_q - m_p) + A x``.

    ``A = P^{-1/2} (P^{1/2} Q P^{1/2})^{1/2} P^{-1/2}`` for PD ``P = cov_p``.
    """
    cov_p = as_symmat(cov_p, name="cov_p")
    cov_q = as_symmat(cov_q, name="cov_q")
    _check_same_dim(cov_p, cov_q)
    root, inv_root = sqrtm_and_inv_sqrtm(cov_p)
    return symmetrize(inv_root @ sandwich_sqrt(root, cov_q) @ inv_root)


def transport_cost(cov_p: np.ndarray, cov_q: np.ndarray, a: np.ndarray) -> float:
    """Cost ``E||X - AX||^2`` of the linear map ``a`` for centered ``X ~ cov_p`` pushed onto ``cov_q``."""
    return float(np.trace(cov_p) + np.trace(cov_q) - 2.0 * np.trace(a @ cov_p))


def v_functional(s, problem: BarycenterProblem) -> float:
    """``V(S) = sum_j w_j W2^2(N(0, S), N(0, Sigma_j))``; means are ignored."""
    s = as_symmat(s)
    _check_same_dim(s, problem.covs[0])
    root = sqrtm_psd(s)
    total = float(np.trace(s))
    for w, cov in zip(problem.weights, problem.covs):
        total += w * (float(np.trace(cov)) - 2.0 * float(np.trace(sandwich_sqrt(root, cov))))
    return total


def h_map(s, problem: BarycenterProblem) -> np.ndarray:
    """Weighted average of the optimal map matrices from ``N(0, s)`` to each ``N(0, Sigma_j)``.

    Equals the identity exactly at the barycenter covariance.
    """
    s = as_symmat(s)
    _check_same_dim(s, problem.covs[0])
    root, inv_root = sqrtm_and_inv_sqrtm(s)
    inner = sum(w * sandwich_sqrt(root, cov) for w, cov in zip(problem.weights, problem.covs))
    return symmetrize(inv_root @ inner @ inv_root)


def barycenter_mean(problem: BarycenterProblem) -> np.ndarray:
    return problem.weights @ problem.means


@dataclass(frozen=True)
class BoundReport:
    """Slack in the determinant floor and trace ceiling for a candidate barycenter covariance.

    ``det_slack = det(S)^{1/2d} - sum_j w_j det(Sigma_j)^{1/2d}`` and
    ``trace_slack = sum_j w_j Tr(Sigma_j) - Tr(S)``; both must be
    nonnegative (up to ``1e-8``) at the true barycenter.
    """

    det_slack: float
    trace_slack: float
    equal_covariances: bool
    violations: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


def covariances_equal(covs: Sequence[np.ndarray], rtol: float = 1e-12) -> bool:
    first = covs[0]
    scale = max(1.0, frob_norm(first))
    return all(frob_norm(c - first) <= rtol * scale for c in covs[1:])


def check_bounds(sigma0, problem: BarycenterProblem, slack: float = BOUND_SLACK) -> BoundReport:
    sigma0 = as_symmat(sigma0)
    _check_same_dim(sigma0, problem.covs[0])
    w = problem.weights
    det_slack = det_root(sigma0) - float(sum(wj * det_root(c) for wj, c in zip(w, problem.covs)))
    trace_slack = float(sum(wj * np.trace(c) for wj, c in zip(w, problem.covs))) - float(np.trace(sigma0))
    violations = []
    if det_slack < -slack:
        violations.append(f"determinant floor violated by {-det_slack:.3e}")
    if trace_slack < -slack:
        violations.append(f"trace ceiling violated by {-trace_slack:.3e}")
    return BoundReport(det_slack, trace_slack, covariances_equal(problem.covs), tuple(violations))
