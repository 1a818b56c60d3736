"""Kernel functions, Gram matrices and the median bandwidth heuristic.

Bandwidth convention: ``bandwidth`` is a *rate* ``lam``, not a length scale.

    rbf      k(x, x') = exp(-lam * ||x - x'||_2^2)
    laplace  k(x, x') = exp(-lam * ||x - x'||_1)
    linear   k(x, x') = <x, x'>            (bandwidth ignored)

Many libraries use ``exp(-||x - x'||^2 / (2 sigma^2))``; the two are related by
``lam = 1 / (2 sigma^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DegenerateInputError, InputError

KINDS = ("rbf", "laplace", "linear")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    bandwidth: float = 1.0

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise InputError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        bw = float(self.bandwidth)
        if kind != "linear" and not (np.isfinite(bw) and bw > 0):
            raise InputError(f"{kind} kernel needs a positive bandwidth, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", bw)

    @property
    def bounded(self) -> bool:
        """True when 0 < k <= 1 with k(x, x) = 1."""
        return self.kind != "linear"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bandwidth": self.bandwidth}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["kind"], d.get("bandwidth", 1.0))


def as_points(points) -> np.ndarray:
    """Coerce a point, a list of scalars or a list of vectors to an (n, d) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise InputError(f"points must be at most 2-dimensional, got shape {arr.shape}")
    return arr


def cross_kernel(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel block ``K[i, j] = k(a[i], b[j])`` for (n, d) and (m, d) arrays."""
    if a.shape[1] != b.shape[1]:
        raise InputError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if spec.kind == "linear":
        return a @ b.T
    if a.shape[1] == 1:
        # hot path of every betting round: work in place on one buffer
        dist = a[:, 0:1] - b[:, 0].reshape(1, -1)
        if spec.kind == "rbf":
            np.multiply(dist, dist, out=dist)
        else:
            np.abs(dist, out=dist)
    else:
        diff = a[:, None, :] - b[None, :, :]
        dist = (diff * diff).sum(-1) if spec.kind == "rbf" else np.abs(diff).sum(-1)
    dist *= -spec.bandwidth
    return np.exp(dist, out=dist)


def eval_kernel(spec: KernelSpec, x, xp) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    if x.shape != xp.shape:
        raise InputError(f"dimension mismatch: {x.shape} vs {xp.shape}")
    if spec.kind == "linear":
        return float(x @ xp)
    diff = x - xp
    dist = float(diff @ diff) if spec.kind == "rbf" else float(np.abs(diff).sum())
    return float(np.exp(-spec.bandwidth * dist))


def gram_matrix(spec: KernelSpec, points) -> np.ndarray:
    """Symmetric Gram matrix; the lower triangle is a bitwise mirror of the upper."""
    pts = as_points(points)
    if pts.shape[0] == 0:
        raise InputError("gram_matrix needs at least one point")
    k = np.triu(cross_kernel(spec, pts, pts))
    return k + np.triu(k, 1).T


def median_heuristic(points) -> float:
    """Rate ``1 / (2 m^2)`` where ``m`` is the median pairwise Euclidean distance."""
    pts = as_points(points)
    if pts.shape[0] < 2:
        raise InputError("median heuristic needs at least two points")
    m = float(np.median(pdist(pts)))
    if m == 0.0:
        raise DegenerateInputError("median pairwise distance is zero; cannot pick a bandwidth")
    return 1.0 / (2.0 * m * m)
