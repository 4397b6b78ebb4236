"""Randomized end-to-end cross-checks against independent closed forms and brute force.

Each case pairs a library route with an independent one:

* ``multimarginal``: quantile-averaged barycenter vs exhaustive enumeration
  of permutation couplings (value and atoms).
* ``commuting``: the general fixed-point solver vs the closed form
  ``(sum_j w_j Sigma_j^{1/2})^2`` for covariances sharing eigenvectors.
* ``scalar``: the solver in ``d = 1`` vs ``(sum_j w_j sigma_j)^2``.
* ``gelbrich``: moment lower bound vs exact 1D W2 of two empirical measures.

``perturb`` adds a constant to the library-side answer so the suite can be
shown to detect errors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MaxIterExceeded
from .fixpoint import barycenter_commuting, solve
from .gausswass import BarycenterProblem, gelbrich_lower_bound
from .onedim import (
    Empirical1D,
    barycenter_1d,
    brute_force_multimarginal,
    v_functional_1d,
    w2_1d_squared,
)
from .symmat import RngState, symmetrize

KINDS = ("multimarginal", "commuting", "scalar", "gelbrich")


@dataclass
class CaseOutcome:
    index: int
    kind: str
    passed: bool
    error: float
    tolerance: float
    inputs: dict = field(default_factory=dict)


def _weights(rng: RngState, k: int) -> np.ndarray:
    w = rng.uniform_open(k) + 0.1
    return w / w.sum()


def _case_multimarginal(rng, perturb):
    n = 1 + int(rng.uniform_open(1)[0] * 5.999)
    k = 2
    measures = [Empirical1D.from_samples(rng.normal(n)) for _ in range(k)]
    w = _weights(rng, k)
    value, bary = brute_force_multimarginal(measures, w)
    grid = barycenter_1d(measures, w, n)
    atoms = grid.values + perturb
    v = v_functional_1d(Empirical1D(atoms, np.full(n, 1.0 / n)), measures, w)
    err = max(abs(v - value), float(np.max(np.abs(atoms - bary.atoms))))
    inputs = {"atoms": [m.atoms.tolist() for m in measures], "weights": w.tolist()}
    return err, 1e-12, inputs


def _case_commuting(rng, perturb):
    d = 1 + int(rng.uniform_open(1)[0] * 3.999)
    k = 2 + int(rng.uniform_open(1)[0] * 2.999)
    q, _ = np.linalg.qr(rng.normal((d, d)))
    covs = [symmetrize((q * (0.2 + 3.0 * rng.uniform_open(d))) @ q.T) for _ in range(k)]
    w = _weights(rng, k)
    problem = BarycenterProblem.from_covariances(covs, w)
    closed = barycenter_commuting(problem)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        result, _ = solve(problem)
    err = float(np.linalg.norm(result.cov + perturb - closed))
    return err, 1e-8 * (1.0 + float(np.linalg.norm(closed))), {
        "covs": [c.tolist() for c in covs],
        "weights": w.tolist(),
    }


def _case_scalar(rng, perturb):
    k = 1 + int(rng.uniform_open(1)[0] * 4.999)
    sds = 0.1 + 3.0 * rng.uniform_open(k)
    w = _weights(rng, k)
    problem = BarycenterProblem.from_covariances([[[s * s]] for s in sds], w)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        result, _ = solve(problem)
    expected = float(w @ sds) ** 2
    err = abs(float(result.cov[0, 0]) + perturb - expected)
    return err, 1e-10 * (1.0 + expected), {"sds": sds.tolist(), "weights": w.tolist()}


def _case_gelbrich(rng, perturb):
    n = 2 + int(rng.uniform_open(1)[0] * 10)
    p = Empirical1D.from_samples(rng.normal(n) * (0.5 + rng.uniform_open(1)[0]))
    q = Empirical1D.from_samples(rng.normal(n + 1) * 2.0 + 1.0)
    lower = gelbrich_lower_bound([p.mean], [[p.variance]], [q.mean], [[q.variance]])
    exact = w2_1d_squared(p, q)
    # the bound may not exceed the exact value
    err = max(lower + perturb - exact, 0.0)
    return err, 1e-10, {"p": p.atoms.tolist(), "q": q.atoms.tolist()}


_CASES = {
    "multimarginal": _case_multimarginal,
    "commuting": _case_commuting,
    "scalar": _case_scalar,
    "gelbrich": _case_gelbrich,
}


def run_oracle_checks(cases: int, seed: int = 0, perturb: float = 0.0) -> list[CaseOutcome]:
    outcomes = []
    for i in range(cases):
        kind = KINDS[i % len(KINDS)]
        rng = RngState.derive(seed, i)
        err, tol, inputs = _CASES[kind](rng, perturb)
        outcomes.append(CaseOutcome(i, kind, err <= tol, err, tol, inputs))
    return outcomes
