"""Batch permutation HSIC test and its repeated use under continuous monitoring."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .hsic import hsic_from_sums
from .kernels import KernelSpec, as_points, gram_matrix
from .lowrank import kernel_cholesky

PERM_CHUNK = 64
# tolerance per point for the factorised permutation statistic; far below any
# statistic gap that could flip a comparison in practice
PERM_DELTA0 = 1e-12
DENSE_LIMIT = 4000


@dataclass
class PermutationTestResult:
    statistic: float
    p_value: float
    m_permutations: int


@dataclass
class MonitorResult:
    checkpoints: list[int]
    p_values: list[float]
    thresholds: list[float]
    first_rejection: int | None = None
    rejected_at: list[bool] = field(default_factory=list)


def _pair_arrays(xs, ys):
    xs, ys = as_points(xs), as_points(ys)
    if xs.shape[0] != ys.shape[0]:
        raise InputError("x and y have different lengths")
    if xs.shape[0] < 2:
        raise InputError("need at least two observations")
    return xs, ys


def biased_hsic(xs, ys, kx: KernelSpec, ky: KernelSpec, dense_limit: int = DENSE_LIMIT) -> float:
    """``tr(K H L H) / t^2``.

    Up to ``dense_limit`` points this uses the same four Gram sums the
    sequential witness caches; beyond that it switches to centred
    incomplete-Cholesky factors, ``||A' B||_F^2 / t^2``, so memory stays linear.
    """
    xs, ys = _pair_arrays(xs, ys)
    t = len(xs)
    if t > dense_limit:
        a = _centered_factor(kx, xs)
        b = _centered_factor(ky, ys)
        return float(np.sum((a.T @ b) ** 2)) / t**2
    k = gram_matrix(kx, xs)
    l = gram_matrix(ky, ys)
    kr, lr = k.sum(1), l.sum(1)
    val = hsic_from_sums(float(np.einsum("ij,ij->", k, l)), float(kr.sum()), float(lr.sum()), float(kr @ lr), t)
    return max(0.0, val)


def _centered_factor(spec: KernelSpec, pts: np.ndarray) -> np.ndarray:
    g = kernel_cholesky(spec, pts, delta=PERM_DELTA0 * len(pts)).g
    return g - g.mean(0)


def permutation_test(xs, ys, kx: KernelSpec, ky: KernelSpec, m: int = 1000, rng=None) -> PermutationTestResult:
    """p = (1 + #{T_m >= T}) / (M + 1) over ``m`` uniform shuffles of ``ys``.

    Statistics use centred incomplete-Cholesky factors A, B with
    ``t^2 T(pi) = ||A' P_pi B||_F^2``, which costs O(t * rank^2) per shuffle.
    """
    if m < 1:
        raise InputError("need at least one permutation")
    xs, ys = _pair_arrays(xs, ys)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    t = len(xs)
    a = _centered_factor(kx, xs)
    b = _centered_factor(ky, ys)
    stat = float(np.sum((a.T @ b) ** 2)) / t**2
    if a.shape[1] == 0 or b.shape[1] == 0:
        # a constant side: every statistic is exactly zero
        return PermutationTestResult(0.0, 1.0, m)
    perms = np.array([rng.permutation(t) for _ in range(m)])
    at = a.T
    exceed = 0
    for lo in range(0, m, PERM_CHUNK):
        blk = np.matmul(at[None], b[perms[lo : lo + PERM_CHUNK]])
        tm = np.einsum("mij,mij->m", blk, blk) / t**2
        exceed += int(np.count_nonzero(tm >= stat))
    return PermutationTestResult(stat, (1 + exceed) / (m + 1), m)


def bonferroni_thresholds(alpha: float, k: int) -> list[float]:
    """``alpha / (i (i + 1))`` for the i-th look, i = 1..k; these sum to less than alpha."""
    return [alpha / (i * (i + 1)) for i in range(1, k + 1)]


def continuous_monitor(
    xs,
    ys,
    checkpoints,
    alpha: float = 0.05,
    corrected: bool = False,
    m: int = 1000,
    kx: KernelSpec | None = None,
    ky: KernelSpec | None = None,
    rng=None,
) -> MonitorResult:
    """Re-run the permutation test on the growing prefix at every checkpoint."""
    checkpoints = [int(c) for c in checkpoints]
    if not checkpoints or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise InputError("checkpoints must be a non-empty strictly increasing list")
    xs, ys = as_points(xs), as_points(ys)
    if checkpoints[-1] > len(xs):
        raise InputError(f"last checkpoint {checkpoints[-1]} exceeds the {len(xs)} available observations")
    kx = kx or KernelSpec("rbf", 0.25)
    ky = ky or KernelSpec("rbf", 0.25)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    pvals = [permutation_test(xs[:c], ys[:c], kx, ky, m, rng).p_value for c in checkpoints]
    thresholds = bonferroni_thresholds(alpha, len(checkpoints)) if corrected else [alpha] * len(checkpoints)
    return summarize_monitor(checkpoints, pvals, thresholds)


def summarize_monitor(checkpoints, pvals, thresholds) -> MonitorResult:
    rej = [p < th for p, th in zip(pvals, thresholds)]
    first = next((c for c, r in zip(checkpoints, rej) if r), None)
    return MonitorResult(list(checkpoints), list(pvals), list(thresholds), first, rej)
