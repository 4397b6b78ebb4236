"""Symmetric-matrix kernel.

Covariance matrices are carried as plain ``(d, d)`` float64 numpy arrays.
:func:`as_symmat` is the single entry point that validates and symmetrizes
them; every other function here assumes (and returns) symmetric input.

Two eigensolvers are provided: LAPACK's ``eigh`` (the default, used by the
solver hot loop) and a cyclic Jacobi implementation that serves as an
independent, dependency-free cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, EigenNoConvergence, NotPSD, SingularMatrix

PSD_CLAMP_REL = 1e-10
PD_EPS_REL = 1e-12
JACOBI_TOL_REL = 1e-12
JACOBI_MAX_SWEEPS = 100
ROUNDOFF_REL = 16 * np.finfo(np.float64).eps


def as_symmat(a, *, name: str = "matrix") -> np.ndarray:
    """Return ``(a + a.T) / 2`` as a fresh float64 array.

    Raises ``DimMismatch`` for non-square input and ``ValueError`` for
    non-finite entries. A scalar or length-1 input is promoted to ``1x1``.
    """
    arr = np.array(a, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimMismatch(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return 0.5 * (arr + arr.T)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class EigenDecomp:
    """Eigenpairs of a symmetric matrix, eigenvalues in descending order.

    ``q[:, i]`` is the eigenvector for ``lam[i]``.
    """

    q: np.ndarray
    lam: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return symmetrize((self.q * self.lam) @ self.q.T)

    def apply(self, fn) -> np.ndarray:
        """Spectral function ``Q diag(fn(lam)) Q^T``."""
        return symmetrize((self.q * fn(self.lam)) @ self.q.T)


def frob_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, "fro"))


def trace(a: np.ndarray) -> float:
    return float(np.trace(a))


def jacobi_eigen(
    a: np.ndarray, tol_rel: float = JACOBI_TOL_REL, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> EigenDecomp:
    """Cyclic Jacobi eigendecomposition.

    Sweeps over all ``(p, q)`` pairs, annihilating each off-diagonal entry
    with a plane rotation, until the off-diagonal Frobenius norm drops to
    ``tol_rel * ||a||_F``. Raises ``EigenNoConvergence`` after
    ``max_sweeps`` sweeps.
    """
    work = np.array(a, dtype=np.float64, copy=True)
    n = work.shape[0]
    v = np.eye(n)
    thresh = tol_rel * frob_norm(work)

    off_mask = ~np.eye(n, dtype=bool)

    def off_norm() -> float:
        # summed directly: ||a||^2 - ||diag||^2 cancels catastrophically
        return float(np.sqrt(np.sum(work[off_mask] ** 2)))

    for _ in range(max_sweeps):
        if off_norm() <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if apq == 0.0:
                    continue
                diff = work[q, q] - work[p, p]
                if abs(apq) < 1e-300 * max(abs(diff), 1.0):
                    work[p, q] = work[q, p] = 0.0
                    continue
                theta = diff / (2.0 * apq)
                # smaller root of t^2 + 2 t theta - 1 = 0 keeps the rotation angle <= pi/4
                if abs(theta) > 1e150:
                    t = 0.5 / abs(theta)
                else:
                    t = 1.0 / (abs(theta) + np.hypot(theta, 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                work[p, q] = work[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if off_norm() > thresh:
            raise EigenNoConvergence(
                f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off_norm():.3e})"
            )
    lam = np.diag(work).copy()
    order = np.argsort(lam)[::-1]
    return EigenDecomp(q=v[:, order], lam=lam[order])


def sym_eigen(a: np.ndarray, method: str = "lapack") -> EigenDecomp:
    """Eigendecomposition of a symmetric matrix (eigenvalues descending).

    ``method="lapack"`` calls ``numpy.linalg.eigh``; ``method="jacobi"``
    runs :func:`jacobi_eigen`.
    """
    if method == "jacobi":
        return jacobi_eigen(a)
    if method != "lapack":
        raise ValueError(f"unknown eigen method {method!r}")
    try:
        lam, q = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenNoConvergence(str(exc)) from exc
    return EigenDecomp(q=q[:, ::-1], lam=lam[::-1])


def pd_eps(a: np.ndarray) -> float:
    return PD_EPS_REL * max(1.0, frob_norm(a))


def _clamped_eigen(a: np.ndarray, method: str) -> EigenDecomp:
    eig = sym_eigen(a, method)
    floor = -PSD_CLAMP_REL * frob_norm(a)
    if eig.lam[-1] < floor:
        raise NotPSD(f"smallest eigenvalue {eig.lam[-1]:.6g} below clamp threshold {floor:.3g}")
    # eigenvalues within rounding noise of zero are zero; sqrt would amplify them to ~1e-8
    noise = ROUNDOFF_REL * a.shape[0] * max(abs(eig.lam[0]), abs(eig.lam[-1]))
    return EigenDecomp(q=eig.q, lam=np.where(eig.lam <= noise, 0.0, eig.lam))


def check_psd(a: np.ndarray) -> None:
    """Raise ``NotPSD`` unless ``a`` passes the PSD clamp."""
    _clamped_eigen(a, "lapack")


def is_pd(a: np.ndarray) -> bool:
    return bool(sym_eigen(a).lam[-1] > pd_eps(a))


def sqrtm_psd(a: np.ndarray, method: str = "lapack") -> np.ndarray:
    """Principal square root of a PSD matrix.

    Eigenvalues in ``(-1e-10 ||a||_F, 0)``, and positive ones at rounding
    level (``16 d eps`` relative to the largest), are treated as zero;
    anything more negative raises ``NotPSD``.
    """
    return _clamped_eigen(a, method).apply(np.sqrt)


def inv_sqrtm_pd(a: np.ndarray, method: str = "lapack") -> np.ndarray:
    return sqrtm_and_inv_sqrtm(a, method)[1]


def sqrtm_and_inv_sqrtm(a: np.ndarray, method: str = "lapack") -> tuple[np.ndarray, np.ndarray]:
    """``(a^{1/2}, a^{-1/2})`` from a single eigendecomposition.

    Raises ``SingularMatrix`` if the smallest eigenvalue is not above
    ``1e-12 * max(1, ||a||_F)``.
    """
    eig = sym_eigen(a, method)
    eps = pd_eps(a)
    if not eig.lam[-1] > eps:
        raise SingularMatrix(f"smallest eigenvalue {eig.lam[-1]:.6g} <= pd_eps {eps:.3g}")
    root = np.sqrt(eig.lam)
    return eig.apply(lambda _: root), eig.apply(lambda _: 1.0 / root)


def det_via_eigen(a: np.ndarray) -> float:
    return float(np.prod(sym_eigen(a).lam))


def logdet_pd(a: np.ndarray) -> float:
    """``log det a`` for PD ``a``; ``-inf`` if any eigenvalue is <= 0."""
    lam = sym_eigen(a).lam
    if lam[-1] <= 0.0:
        return float("-inf")
    return float(np.sum(np.log(lam)))


def det_root(a: np.ndarray) -> float:
    """``det(a)^{1/(2d)}`` computed in log space; zero for singular PSD input."""
    d = a.shape[0]
    ld = logdet_pd(a)
    return 0.0 if ld == float("-inf") else float(np.exp(ld / (2 * d)))


# --------------------------------------------------------------------------
# Random matrices


class RngState:
    """Seeded stream of standard normals.

    Uniforms come from the counter-based Philox4x64 generator keyed by the
    seed; normals are produced from pairs of uniforms with the Box-Muller
    transform. Integer state advance is platform independent.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        key = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)

    @classmethod
    def derive(cls, seed: int, *path: int) -> "RngState":
        """Independent sub-stream for ``(seed, *path)``, e.g. one replicate of a benchmark cell."""
        mixed = np.random.SeedSequence([int(seed), *map(int, path)]).generate_state(1, dtype=np.uint64)
        return cls(int(mixed[0]))

    def uniform_open(self, n: int) -> np.ndarray:
        """``n`` doubles in ``(0, 1]`` (53-bit resolution)."""
        raw = self._bitgen.random_raw(n)
        return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53

    def normal(self, size) -> np.ndarray:
        count = int(np.prod(size))
        pairs = (count + 1) // 2
        u1 = self.uniform_open(pairs)
        u2 = self.uniform_open(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:count].reshape(size)


def sample_wishart(rng: RngState, d: int) -> np.ndarray:
    """One draw from ``W_d(Id, d)``: ``G G^T`` with ``G`` a ``d x d`` standard normal matrix."""
    if d < 1:
        raise ValueError("d must be >= 1")
    g = rng.normal((d, d))
    return symmetrize(g @ g.T)
