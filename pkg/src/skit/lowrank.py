"""Pivoted incomplete Cholesky and the low-rank solves for COCO and KCC witnesses.

Both criteria reduce to a top singular triple once the centred kernel
matrices are replaced by thin factors ``H G = U diag(s) V'``:

    COCO   M  = (1/n) diag(s1) U1'U2 diag(s2)
    KCC    M* = (1/n) diag(rho1 s1) U1'U2 diag(s2 rho2),  rho(s) = 1/sqrt(s^2/n + kappa)

The returned coefficient vectors are scaled so that the RKHS norm of each
witness is at most one even though the factor only approximates K: the
dropped part R is PSD with trace at most the achieved residual, which adds at
most ``residual * ||H alpha||^2`` to the squared norm.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateInputError, InputError
from .kernels import KernelSpec, as_points, cross_kernel

log = logging.getLogger(__name__)

NEGATIVE_PIVOT_TOL = 1e-10
SINGULAR_CUTOFF = 1e-10
DEFAULT_DELTA0 = 1e-6
CRITERIA = ("coco", "kcc")


@dataclass
class LowRankFactor:
    g: np.ndarray  # (n, rank), K ~= g g'
    pivots: list[int]
    residual_trace: float
    delta: float
    truncated: bool = False

    @property
    def rank(self) -> int:
        return self.g.shape[1]


@dataclass
class WitnessCoefficients:
    alpha: np.ndarray
    beta: np.ndarray
    criterion: str = "coco"
    kappa1: float = 0.0
    kappa2: float = 0.0

    def centered(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficients of the centred expansions, ``H alpha`` and ``H beta``."""
        return self.alpha - self.alpha.mean(), self.beta - self.beta.mean()


def pivoted_incomplete_cholesky(
    column: Callable[[int], np.ndarray],
    diag: np.ndarray,
    delta: float,
    max_rank: int | None = None,
) -> LowRankFactor:
    """Greedy pivoted Cholesky of a PSD matrix given by its diagonal and a column accessor.

    Pivots on the largest remaining Schur-complement diagonal and stops once the
    residual trace (the nuclear norm of ``K - G G'`` for PSD ``K``) is at most
    ``delta`` or ``max_rank`` columns have been produced.
    """
    if not delta >= 0:
        raise InputError(f"delta must be nonnegative, got {delta!r}")
    d = np.array(diag, dtype=float)
    n = d.shape[0]
    if d.min(initial=0.0) < -NEGATIVE_PIVOT_TOL:
        raise InputError("matrix is not positive semidefinite (negative diagonal)")
    max_rank = n if max_rank is None else min(int(max_rank), n)
    # columns are allocated by doubling; the final rank is usually far below n
    g = np.zeros((n, min(max_rank, 32)))
    pivots: list[int] = []
    d = np.maximum(d, 0.0)
    resid = float(d.sum())
    k = 0
    while resid > delta and k < max_rank:
        j = int(np.argmax(d))
        pivot = d[j]
        if pivot <= 0.0:
            break
        col = np.asarray(column(j), dtype=float) - g[:, :k] @ g[j, :k]
        col /= np.sqrt(pivot)
        if k == g.shape[1]:
            g = np.hstack([g, np.zeros((n, min(g.shape[1], max_rank - k)))])
        g[:, k] = col
        d -= col * col
        if d.min() < -NEGATIVE_PIVOT_TOL:
            raise InputError(f"matrix is not positive semidefinite (pivot {d.min():.3e})")
        d[j] = 0.0
        np.maximum(d, 0.0, out=d)
        pivots.append(j)
        resid = float(d.sum())
        k += 1
    return LowRankFactor(g[:, :k].copy(), pivots, resid, float(delta), truncated=resid > delta)


def kernel_cholesky(spec: KernelSpec, points, delta: float | None = None, max_rank: int | None = None) -> LowRankFactor:
    """Incomplete Cholesky of the Gram matrix of ``points``; ``delta`` defaults to ``n * 1e-6``."""
    pts = as_points(points)
    n = pts.shape[0]
    if delta is None:
        delta = n * DEFAULT_DELTA0
    if spec.kind == "linear":
        diag = (pts * pts).sum(1)
    else:
        diag = np.ones(n)
    return pivoted_incomplete_cholesky(lambda j: cross_kernel(spec, pts, pts[j : j + 1])[:, 0], diag, delta, max_rank)


def _centered_svd(factor: LowRankFactor, side: str):
    hg = factor.g - factor.g.mean(0)
    if hg.shape[1] == 0:
        raise DegenerateInputError(f"{side} kernel factor is empty (constant data)")
    u, s, _ = np.linalg.svd(hg, full_matrices=False)
    keep = s >= SINGULAR_CUTOFF
    if not keep.any():
        raise DegenerateInputError(f"{side} data has no variation after centring")
    return u[:, keep], s[keep]


def _top_triple(m: np.ndarray):
    u, s, vt = np.linalg.svd(m)
    return u[:, 0], float(s[0]), vt[0]


def _solve(factor_x: LowRankFactor, factor_y: LowRankFactor, n: int, kappa1: float | None, kappa2: float | None):
    if factor_x.g.shape[0] != n or factor_y.g.shape[0] != n:
        raise InputError("factors do not share the sample size")
    u1, s1 = _centered_svd(factor_x, "x")
    u2, s2 = _centered_svd(factor_y, "y")
    if kappa1 is None:
        w1, w2 = s1, s2
        r1, r2 = np.ones_like(s1), np.ones_like(s2)
    else:
        r1 = 1.0 / np.sqrt(s1 * s1 / n + kappa1)
        r2 = 1.0 / np.sqrt(s2 * s2 / n + kappa2)
        w1, w2 = s1 * r1, s2 * r2
    m = (w1[:, None] * (u1.T @ u2) * w2[None, :]) / n
    a, gamma, b = _top_triple(m)

    alpha0 = u1 @ (a * r1 / s1)
    beta0 = u2 @ (b * r2 / s2)
    # singular vectors are defined up to a joint sign flip; pin it
    if alpha0[np.argmax(np.abs(alpha0))] < 0:
        alpha0, beta0, a, b = -alpha0, -beta0, -a, -b

    def scale(coef, proj, resid):
        hc = coef - coef.mean()
        return coef / np.sqrt(float(proj @ proj) + resid * float(hc @ hc))

    alpha = scale(alpha0, a * r1, factor_x.residual_trace)
    beta = scale(beta0, b * r2, factor_y.residual_trace)
    return alpha, beta, gamma


def solve_coco(factor_x: LowRankFactor, factor_y: LowRankFactor, n: int) -> tuple[WitnessCoefficients, float]:
    alpha, beta, gamma = _solve(factor_x, factor_y, n, None, None)
    return WitnessCoefficients(alpha, beta, "coco"), gamma


def solve_kcc(
    factor_x: LowRankFactor, factor_y: LowRankFactor, n: int, kappa1: float = 0.1, kappa2: float = 0.1
) -> tuple[WitnessCoefficients, float]:
    if not (kappa1 > 0 and kappa2 > 0):
        raise InputError("KCC regularizers must be positive")
    alpha, beta, gamma = _solve(factor_x, factor_y, n, float(kappa1), float(kappa2))
    return WitnessCoefficients(alpha, beta, "kcc", float(kappa1), float(kappa2)), gamma
