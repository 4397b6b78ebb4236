"""Barycenter solver for Gaussian / location-scatter families.

Two matrix iterations are available:

``paper``
    ``S+ = S^{-1/2} (sum_j w_j (S^{1/2} Sigma_j S^{1/2})^{1/2})^2 S^{-1/2}``,
    which decreases ``V`` at every step and converges from any PD start.
``ru``
    ``S+ = sum_j w_j (S^{1/2} Sigma_j S^{1/2})^{1/2}``, kept for comparison;
    it has no convergence guarantee.

Stopping follows the usual protocol: iterate until
``V(S_n) - V(S_{n+1}) < tol``; ``n_iter`` counts every step applied,
including the one whose decrease triggered the stop. Because a small
decrease in ``V`` does not by itself certify ``H(S) = Id`` to 1e-6, the
solver keeps stepping after the stop. ``converged`` requires the
fixed-point residual ``||H(S) - Id||_F`` to reach ``residual_tol``; the
refinement continues further, to ``refine_tol`` or until the residual
stops shrinking (rounding floor), so that results from different variants
and starting points agree to well below ``residual_tol``. Those extra steps
are reported separately in ``n_steps``.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import MaxIterExceeded, NotCommuting, SingularMatrix
from .gausswass import (
    BarycenterProblem,
    BoundReport,
    barycenter_mean,
    check_bounds,
    sandwich_sqrt,
)
from .symmat import as_symmat, frob_norm, is_pd, pd_eps, sqrtm_psd, sym_eigen, symmetrize

RESIDUAL_TOL = 1e-6
REFINE_TOL = 1e-9
STALL_STEPS = 3


class Variant(str, enum.Enum):
    PAPER = "paper"
    RU = "ru"


@dataclass(frozen=True)
class IterationConfig:
    """Solver settings.

    ``s0`` is ``"identity"``, ``"first"`` (the first covariance of the
    problem) or an explicit PD matrix.
    """

    tol: float = 1e-10
    max_iter: int = 5000
    variant: Variant = Variant.PAPER
    s0: Union[str, np.ndarray] = "identity"
    residual_tol: float = RESIDUAL_TOL
    refine_tol: float = REFINE_TOL

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.refine_tol <= self.residual_tol:
            raise ValueError("need 0 < refine_tol <= residual_tol")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        object.__setattr__(self, "variant", Variant(self.variant))
        if isinstance(self.s0, str):
            if self.s0 not in ("identity", "first"):
                raise ValueError(f"unknown s0 {self.s0!r}")
        else:
            s0 = as_symmat(self.s0, name="s0")
            if not is_pd(s0):
                raise ValueError("explicit s0 must be positive definite")
            object.__setattr__(self, "s0", s0)

    def initial_matrix(self, problem: BarycenterProblem) -> np.ndarray:
        if isinstance(self.s0, np.ndarray):
            if self.s0.shape[0] != problem.dim:
                raise ValueError("s0 dimension does not match the problem")
            return self.s0.copy()
        if self.s0 == "first":
            return problem.covs[0].copy()
        return np.eye(problem.dim)


@dataclass(frozen=True)
class StepRecord:
    n: int
    v: float
    delta_v: Optional[float]
    trace: float
    log_det: float
    residual: float


@dataclass
class IterationTrace:
    """Per-iterate diagnostics; ``records[n]`` describes ``S_n``.

    ``stop_step`` is the step at which the ``V``-decrease test fired
    (``None`` if it never did); later records are residual refinement.
    """

    records: list[StepRecord] = field(default_factory=list)
    stop_step: Optional[int] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records])

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class BarycenterResult:
    mean: np.ndarray
    cov: np.ndarray
    n_iter: int
    n_steps: int
    converged: bool
    final_residual: float
    bound_report: BoundReport
    variant: Variant = Variant.PAPER
    family: str = "gaussian"


class _Iterate:
    """Everything the solver needs about one iterate, from ``k + 1`` eigendecompositions."""

    __slots__ = ("s", "inv_root", "inner", "v", "residual", "log_det")

    def __init__(self, s: np.ndarray, problem: BarycenterProblem):
        self.s = s
        eig = sym_eigen(s)
        eps = pd_eps(s)
        if not eig.lam[-1] > eps:
            raise SingularMatrix(f"iterate lost positive definiteness (min eigenvalue {eig.lam[-1]:.3e})")
        root_lam = np.sqrt(eig.lam)
        root = eig.apply(lambda _: root_lam)
        self.inv_root = eig.apply(lambda _: 1.0 / root_lam)
        self.log_det = float(np.sum(np.log(eig.lam)))
        inner = np.zeros_like(s)
        cross = 0.0
        for w, cov in zip(problem.weights, problem.covs):
            m = sandwich_sqrt(root, cov)
            inner += w * m
            cross += w * np.trace(m)
        self.inner = inner
        self.v = float(np.trace(s) + sum(w * np.trace(c) for w, c in zip(problem.weights, problem.covs)) - 2.0 * cross)
        h = symmetrize(self.inv_root @ inner @ self.inv_root)
        self.residual = frob_norm(h - np.eye(s.shape[0]))

    def next(self, variant: Variant) -> np.ndarray:
        if variant is Variant.PAPER:
            return symmetrize(self.inv_root @ self.inner @ self.inner @ self.inv_root)
        return symmetrize(self.inner.copy())

    def record(self, n: int, delta_v: Optional[float]) -> StepRecord:
        return StepRecord(n, self.v, delta_v, float(np.trace(self.s)), self.log_det, self.residual)


def step_paper(s, problem: BarycenterProblem) -> np.ndarray:
    """One step of the V-decreasing fixed-point iteration."""
    return _Iterate(as_symmat(s), problem).next(Variant.PAPER)


def step_ru(s, problem: BarycenterProblem) -> np.ndarray:
    """One step of the comparison iteration ``S+ = sum_j w_j (S^{1/2} Sigma_j S^{1/2})^{1/2}``."""
    return _Iterate(as_symmat(s), problem).next(Variant.RU)


def solve(
    problem: BarycenterProblem, config: IterationConfig | None = None
) -> tuple[BarycenterResult, IterationTrace]:
    """Approximate the barycenter of ``problem`` by fixed-point iteration.

    Returns the result together with the full iteration trace. When
    ``max_iter`` is exhausted a :class:`MaxIterExceeded` warning is issued
    and the result carries ``converged=False``. ``SingularMatrix``
    propagates if an iterate loses positive definiteness.
    """
    config = config or IterationConfig()
    cur = _Iterate(config.initial_matrix(problem), problem)
    trace = IterationTrace([cur.record(0, None)])
    n = 0
    stall = 0
    while n < config.max_iter:
        nxt = _Iterate(cur.next(config.variant), problem)
        n += 1
        delta_v = cur.v - nxt.v
        stall = stall + 1 if nxt.residual >= cur.residual else 0
        trace.records.append(nxt.record(n, delta_v))
        cur = nxt
        if trace.stop_step is None and delta_v < config.tol:
            trace.stop_step = n
        if trace.stop_step is not None:
            if cur.residual <= config.refine_tol:
                break
            if cur.residual <= config.residual_tol and stall >= STALL_STEPS:
                break

    if all(np.array_equal(c, problem.covs[0]) for c in problem.covs[1:]):
        # identical members: the barycenter is known exactly, return it without rounding
        cur = _Iterate(problem.covs[0].copy(), problem)
    report = check_bounds(cur.s, problem)
    converged = trace.stop_step is not None and cur.residual <= config.residual_tol and report.ok
    if not converged:
        warnings.warn(
            f"{config.variant.value} iteration stopped after {n} of {config.max_iter} steps "
            f"without convergence (residual {cur.residual:.3e})",
            MaxIterExceeded,
            stacklevel=2,
        )
    result = BarycenterResult(
        mean=barycenter_mean(problem),
        cov=cur.s,
        n_iter=trace.stop_step if trace.stop_step is not None else n,
        n_steps=n,
        converged=converged,
        final_residual=cur.residual,
        bound_report=report,
        variant=config.variant,
    )
    return result, trace


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return frob_norm(a @ b - b @ a)


def barycenter_commuting(problem: BarycenterProblem, rtol: float = 1e-10) -> np.ndarray:
    """Closed-form barycenter covariance ``(sum_j w_j Sigma_j^{1/2})^2`` for pairwise commuting covariances.

    Raises ``NotCommuting`` if some ``||Sigma_i Sigma_j - Sigma_j Sigma_i||_F``
    exceeds ``rtol * max_j ||Sigma_j||_F^2``.
    """
    covs = problem.covs
    scale = max(frob_norm(c) for c in covs) ** 2
    for i in range(len(covs)):
        for j in range(i + 1, len(covs)):
            gap = commutator_norm(covs[i], covs[j])
            if gap > rtol * max(scale, 1e-300):
                raise NotCommuting(f"covariances {i} and {j} do not commute (||[A,B]||_F = {gap:.3e})")
    root_avg = sum(w * sqrtm_psd(c) for w, c in zip(problem.weights, covs))
    return symmetrize(root_avg @ root_avg)


FAMILIES = ("gaussian", "location-scatter", "ellipsoid")


def solve_location_scatter(
    problem: BarycenterProblem, config: IterationConfig | None = None, family: str = "location-scatter"
) -> BarycenterResult:
    """Barycenter of members ``P_{m_j, Sigma_j}`` of one location-scatter family.

    The barycenter stays in the family with mean ``sum_j w_j m_j`` and the
    same covariance as in the Gaussian case, so the numerics are those of
    :func:`solve`; only the family label differs.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    result, _ = solve(problem, config)
    return BarycenterResult(**{**result.__dict__, "family": family})


def ball_shape(radius: float, d: int) -> np.ndarray:
    """Shape matrix of the ball of given radius in the ``(x-m)^T S^{-1} (x-m) <= d+2`` convention."""
    return (radius**2 / (d + 2)) * np.eye(d)


def ellipsoid_barycenter(
    ellipsoids: Sequence[tuple[np.ndarray, np.ndarray]],
    weights=None,
    config: IterationConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric ellipsoid of ``E(m_j, S_j) = {x : (x-m_j)^T S_j^{-1} (x-m_j) <= d+2}``.

    With this scaling the uniform law on ``E(m, S)`` has mean ``m`` and
    covariance ``S``, so ``(m, S)`` are location-scatter parameters.
    """
    centers = [np.asarray(c, dtype=np.float64) for c, _ in ellipsoids]
    shapes = [s for _, s in ellipsoids]
    problem = BarycenterProblem.from_covariances(shapes, weights, centers)
    result = solve_location_scatter(problem, config, family="ellipsoid")
    return result.mean, result.cov
