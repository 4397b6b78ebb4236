"""Exact optimal transport on the real line.

In one dimension the optimal coupling is the monotone (quantile) coupling,
so W2 is the L2 distance between quantile functions, the optimal maps are
``F_j^{-1} o F_mu`` and the barycenter quantile function is the weighted
average ``sum_j w_j F_j^{-1}``. The fixed-point map therefore reaches the
barycenter in a single application.

Measures are either :class:`Empirical1D` (weighted atoms) or
:class:`QuantileGrid` (quantile function sampled at the midpoint levels
``(i - 1/2) / m``; as a measure it is the uniform law on its values).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence, Union

import numpy as np

from .errors import OutOfRange, TooLarge

WEIGHT_SUM_TOL = 1e-12
ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class Empirical1D:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64).reshape(-1)
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if atoms.size == 0 or atoms.shape != weights.shape:
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError("non-finite atoms or weights")
        if np.any(np.diff(atoms) < 0):
            raise ValueError("atoms must be ascending")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_samples(cls, values, weights=None) -> "Empirical1D":
        """Sort ``values`` (carrying ``weights`` along) and normalize the weights."""
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if weights is None:
            weights = np.ones_like(values)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        order = np.argsort(values, kind="stable")
        return cls(values[order], weights[order] / weights.sum())

    @classmethod
    def point_mass(cls, x: float) -> "Empirical1D":
        return cls([x], [1.0])

    @property
    def cumulative(self) -> np.ndarray:
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        return cum

    @property
    def mean(self) -> float:
        return float(self.weights @ self.atoms)

    @property
    def variance(self) -> float:
        return float(self.weights @ (self.atoms - self.mean) ** 2)


def midpoint_levels(m: int) -> np.ndarray:
    return (np.arange(1, m + 1) - 0.5) / m


@dataclass(frozen=True)
class QuantileGrid:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise ValueError("empty quantile grid")
        if np.any(np.diff(values) < 0):
            raise ValueError("quantile values must be nondecreasing")
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def levels(self) -> np.ndarray:
        return midpoint_levels(self.m)

    def to_empirical(self) -> Empirical1D:
        return Empirical1D(self.values, np.full(self.m, 1.0 / self.m))

    @classmethod
    def from_measure(cls, p: "Measure1D", m: int) -> "QuantileGrid":
        return cls(quantile_values(p, midpoint_levels(m)))

    @classmethod
    def gaussian(cls, mean: float, sd: float, m: int) -> "QuantileGrid":
        dist = NormalDist(mean, sd)
        return cls(np.array([dist.inv_cdf(u) for u in midpoint_levels(m)]))


Measure1D = Union[Empirical1D, QuantileGrid]


def as_empirical(p: Measure1D) -> Empirical1D:
    return p.to_empirical() if isinstance(p, QuantileGrid) else p


def quantile_values(p: Measure1D, us) -> np.ndarray:
    """Generalized inverse CDF at each level in ``us`` (all in ``(0, 1)``)."""
    p = as_empirical(p)
    us = np.asarray(us, dtype=np.float64)
    if np.any(~((us > 0) & (us < 1))):
        raise OutOfRange("quantile levels must lie in (0, 1)")
    idx = np.searchsorted(p.cumulative, us, side="left")
    return p.atoms[np.minimum(idx, p.atoms.shape[0] - 1)]


def quantile(p: Measure1D, u: float) -> float:
    """Smallest atom whose cumulative weight is at least ``u``.

    >>> quantile(Empirical1D([1.0, 2.0, 3.0], [0.2, 0.3, 0.5]), 0.5)
    2.0
    """
    return float(quantile_values(p, np.array([u]))[0])


def w2_1d_squared(p: Measure1D, q: Measure1D) -> float:
    """Squared W2, integrated exactly over the merged CDF breakpoints."""
    p, q = as_empirical(p), as_empirical(q)
    breaks = np.union1d(p.cumulative, q.cumulative)
    lefts = np.concatenate(([0.0], breaks[:-1]))
    widths = breaks - lefts
    keep = widths > 0
    mids = 0.5 * (lefts[keep] + breaks[keep])
    gap = quantile_values(p, mids) - quantile_values(q, mids)
    return float(np.sum(widths[keep] * gap * gap))


def w2_1d(p: Measure1D, q: Measure1D) -> float:
    return math.sqrt(w2_1d_squared(p, q))


def v_functional_1d(mu: Measure1D, measures: Sequence[Measure1D], weights) -> float:
    return float(sum(w * w2_1d_squared(mu, nu) for w, nu in zip(weights, measures)))


def _weighted_quantile_average(measures, weights, m: int) -> QuantileGrid:
    levels = midpoint_levels(m)
    values = sum(w * quantile_values(nu, levels) for w, nu in zip(weights, measures))
    # a sum of nondecreasing sequences is nondecreasing; clip rounding dents
    return QuantileGrid(np.maximum.accumulate(values))


def g_operator_1d(
    mu: Measure1D, measures: Sequence[Measure1D], weights, m: int | None = None
) -> QuantileGrid:
    """Law of ``sum_j w_j T_j(X)``, ``X ~ mu``, with ``T_j = F_j^{-1} o F_mu``, on an ``m``-point grid.

    For atomless ``mu``, ``F_mu(X)`` is uniform, so the result's quantile
    function is ``sum_j w_j F_j^{-1}`` regardless of ``mu``. ``m`` defaults
    to ``mu``'s grid size when ``mu`` is a :class:`QuantileGrid`.
    """
    if m is None:
        if not isinstance(mu, QuantileGrid):
            raise ValueError("grid size m is required when mu is not a QuantileGrid")
        m = mu.m
    return _weighted_quantile_average(measures, weights, m)


def barycenter_1d(measures: Sequence[Measure1D], weights, m: int) -> QuantileGrid:
    """W2 barycenter on an ``m``-point midpoint quantile grid.

    For ``n``-atom equal-weight inputs, ``m = n`` recovers the exact
    barycenter atoms.
    """
    return _weighted_quantile_average(measures, weights, m)


def brute_force_multimarginal(
    measures: Sequence[Empirical1D],
    weights,
    cap: int = ENUMERATION_CAP,
    return_coupling: bool = False,
):
    """Minimize the multimarginal cost by enumerating permutation couplings.

    Every measure must have the same number ``n`` of equal-weight atoms.
    The first measure is held fixed and each of the other ``k - 1`` is
    permuted, so ``(n!)^(k-1)`` couplings are scored; each costs
    ``mean_i sum_j w_j (xbar_i - x_{j,i})^2`` with ``xbar_i = sum_j w_j x_{j,i}``.

    Returns ``(value, barycenter)``, plus the optimal permutations when
    ``return_coupling`` is set. Raises ``TooLarge`` beyond ``cap`` couplings.
    """
    weights = np.asarray(weights, dtype=np.float64)
    k = len(measures)
    n = measures[0].atoms.shape[0]
    for p in measures:
        if p.atoms.shape[0] != n or np.any(np.abs(p.weights - 1.0 / n) > WEIGHT_SUM_TOL):
            raise ValueError("all measures need the same number of equal-weight atoms")
    count = math.factorial(n) ** (k - 1)
    if count > cap:
        raise TooLarge(f"{count} couplings exceeds the enumeration cap {cap}")

    atoms = [p.atoms for p in measures]
    identity = tuple(range(n))
    if k == 1:
        value, xbar, coupling = 0.0, atoms[0].copy(), (identity,)
    else:
        perms = np.array(list(itertools.permutations(range(n))))
        best = (math.inf, None, None)
        for prefix in itertools.product(range(len(perms)), repeat=k - 2):
            rows = [atoms[0]] + [atoms[j + 1][perms[i]] for j, i in enumerate(prefix)]
            last = atoms[-1][perms]
            partial = sum(w * r for w, r in zip(weights[:-1], rows))
            xbars = partial + weights[-1] * last
            cost = weights[-1] * (xbars - last) ** 2
            for w, r in zip(weights[:-1], rows):
                cost = cost + w * (xbars - r) ** 2
            totals = cost.mean(axis=1)
            i_best = int(np.argmin(totals))
            if totals[i_best] < best[0]:
                chosen = (identity,) + tuple(tuple(perms[i]) for i in prefix) + (tuple(perms[i_best]),)
                best = (float(totals[i_best]), xbars[i_best].copy(), chosen)
        value, xbar, coupling = best
    barycenter = Empirical1D.from_samples(xbar)
    if return_coupling:
        return value, barycenter, coupling
    return value, barycenter


def coupling_cost(measures: Sequence[Empirical1D], weights, coupling) -> float:
    """Multimarginal cost of one permutation coupling (see :func:`brute_force_multimarginal`)."""
    rows = np.stack([p.atoms[list(perm)] for p, perm in zip(measures, coupling)])
    weights = np.asarray(weights, dtype=np.float64)
    xbar = weights @ rows
    return float(np.mean(weights @ (rows - xbar) ** 2))


def w2_grid_to_gaussian_squared(grid: QuantileGrid, mean: float, sd: float) -> float:
    """Exact squared W2 between a quantile grid (uniform on its values) and ``N(mean, sd^2)``.

    Integrates ``(v_i - mean - sd * Phi^{-1}(u))^2`` over each cell
    ``((i-1)/m, i/m]`` in closed form using the Gaussian partial moments.
    """
    m = grid.m
    std = NormalDist()
    edges = np.arange(m + 1) / m
    z = np.array([-math.inf] + [std.inv_cdf(u) for u in edges[1:-1]] + [math.inf])
    phi = np.array([0.0 if math.isinf(t) else std.pdf(t) for t in z])
    zphi = np.where(np.isinf(z), 0.0, z) * phi
    h = 1.0 / m
    first = phi[:-1] - phi[1:]
    second = h - (zphi[1:] - zphi[:-1])
    c = (grid.values - mean) / sd
    cells = c * c * h - 2.0 * c * first + second
    return max(float(sd * sd * np.sum(cells)), 0.0)
