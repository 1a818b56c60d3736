"""Plug-in HSIC witness with linear-time cached normalisation.

The state keeps every observed point plus four scalar caches

    delta1 = sum_ij K_ij L_ij        delta2 = 1'K1
    delta3 = 1'L1                    delta4 = 1'KL1 = (K1)'(L1)

and the row sums K1, L1.  With them the squared RKHS norm of the empirical
cross-covariance ``mu_xy - mu_x (x) mu_y`` (the biased HSIC estimate) is

    delta1/n^2 + delta2*delta3/n^4 - 2*delta4/n^3

and appending ``m`` points costs O(n*m) kernel evaluations.
"""
from __future__ import annotations

import math

import numpy as np

from . import _codec
from .errors import EmptyStateError, InputError, InvariantError
from .kernels import KernelSpec, as_points, cross_kernel

NORM_EPS = 1e-12
# relative floor on the squared norm: below it the cached formula is pure cancellation noise
CANCELLATION_FLOOR = 1e-12
BOUND_SLACK = 1e-9


def hsic_from_sums(delta1: float, delta2: float, delta3: float, delta4: float, n: int) -> float:
    """Biased HSIC ``tr(KHLH) / n^2`` from the four cached sums (may be slightly negative)."""
    n = float(n)
    return delta1 / n**2 + delta2 * delta3 / n**4 - 2.0 * delta4 / n**3


def _check_bound(raw: float) -> float:
    if not math.isfinite(raw) or abs(raw) > 1.0 + BOUND_SLACK:
        raise InvariantError(f"payoff {raw!r} outside [-1, 1]")
    return min(1.0, max(-1.0, raw))


class HsicState:
    """Stored observations and caches for the plug-in HSIC witness."""

    def __init__(self, kernel_x: KernelSpec, kernel_y: KernelSpec, capacity: int = 64):
        self.kernel_x = kernel_x
        self.kernel_y = kernel_y
        self.n = 0
        self.delta1 = self.delta2 = self.delta3 = self.delta4 = 0.0
        self._cap = max(int(capacity), 2)
        self._xs: np.ndarray | None = None
        self._ys: np.ndarray | None = None
        self._krow = np.zeros(self._cap)
        self._lrow = np.zeros(self._cap)
        self._cols = None  # (n, x_block, y_block, Kq, Lq) from the last evaluation

    # -- views -------------------------------------------------------------
    @property
    def xs(self) -> np.ndarray:
        return self._xs[: self.n] if self._xs is not None else np.empty((0, 0))

    @property
    def ys(self) -> np.ndarray:
        return self._ys[: self.n] if self._ys is not None else np.empty((0, 0))

    @property
    def k_rowsums(self) -> np.ndarray:
        return self._krow[: self.n]

    @property
    def l_rowsums(self) -> np.ndarray:
        return self._lrow[: self.n]

    # -- kernel columns against the stored points --------------------------
    def _query(self, xb: np.ndarray, yb: np.ndarray):
        c = self._cols
        if c is not None and c[0] == self.n and np.array_equal(c[1], xb) and np.array_equal(c[2], yb):
            return c[3], c[4]
        # rows are query points, columns stored points
        kq = cross_kernel(self.kernel_x, xb, self.xs)
        lq = cross_kernel(self.kernel_y, yb, self.ys)
        self._cols = (self.n, xb, yb, kq, lq)
        return kq, lq

    def _check_dims(self, xb: np.ndarray, yb: np.ndarray):
        if xb.shape[0] != yb.shape[0]:
            raise InputError("x and y blocks have different lengths")
        if self._xs is not None and (xb.shape[1] != self._xs.shape[1] or yb.shape[1] != self._ys.shape[1]):
            raise InputError(
                f"dimension mismatch: got ({xb.shape[1]}, {yb.shape[1]}), "
                f"stored ({self._xs.shape[1]}, {self._ys.shape[1]})"
            )

    # -- witness -----------------------------------------------------------
    def unnormalized_witness(self, x, y) -> float:
        """``(mu_xy - mu_x (x) mu_y)(x, y)`` over the stored points."""
        if self.n == 0:
            raise EmptyStateError("witness is undefined before any observation is stored")
        xb, yb = as_points([np.atleast_1d(x)]), as_points([np.atleast_1d(y)])
        self._check_dims(xb, yb)
        kq, lq = self._query(xb, yb)
        k, l = kq[0], lq[0]
        return float(k @ l / self.n - k.sum() * l.sum() / self.n**2)

    def hsic(self) -> float:
        """Biased HSIC estimate of the stored sample (clamped at zero)."""
        if self.n == 0:
            raise EmptyStateError("no stored observations")
        return max(0.0, hsic_from_sums(self.delta1, self.delta2, self.delta3, self.delta4, self.n))

    def witness_norm(self) -> float:
        return math.sqrt(self.hsic())

    def _usable_norm(self) -> float:
        """Witness norm, or 0.0 when it is too small to divide by."""
        if self.n == 0:
            return 0.0
        n = float(self.n)
        h2 = hsic_from_sums(self.delta1, self.delta2, self.delta3, self.delta4, self.n)
        scale = abs(self.delta1) / n**2 + abs(self.delta2 * self.delta3) / n**4 + 2 * abs(self.delta4) / n**3
        if h2 <= CANCELLATION_FLOOR * scale:
            return 0.0
        norm = math.sqrt(h2)
        return norm if norm >= NORM_EPS else 0.0

    # -- payoffs -----------------------------------------------------------
    def pair_statistic(self, xb: np.ndarray, yb: np.ndarray) -> float:
        """``u(x1,y1) + u(x2,y2) - u(x1,y2) - u(x2,y1)`` for the unnormalised witness u."""
        if self.n == 0:
            return 0.0
        self._check_dims(xb, yb)
        kq, lq = self._query(xb, yb)
        dk = kq[0] - kq[1]
        dl = lq[0] - lq[1]
        return float(dk @ dl / self.n - dk.sum() * dl.sum() / self.n**2)

    def payoff(self, xb: np.ndarray, yb: np.ndarray) -> float:
        """HSIC payoff on a pair given as (2, d_x) and (2, d_y) arrays."""
        norm = self._usable_norm()
        if norm == 0.0:
            return 0.0
        return _check_bound(self.pair_statistic(xb, yb) / (2.0 * norm))

    def minibatch_payoff(self, xb: np.ndarray, yb: np.ndarray, b: int | None = None) -> float:
        """Joint-minus-shuffled average of the normalised witness over a block of ``b`` points."""
        if b is not None and xb.shape[0] != b:
            raise InputError(f"block has {xb.shape[0]} points, expected {b}")
        b = xb.shape[0]
        if b < 2:
            raise InputError("minibatch needs at least two points")
        norm = self._usable_norm()
        if norm == 0.0:
            return 0.0
        self._check_dims(xb, yb)
        kq, lq = self._query(xb, yb)
        u = kq @ lq.T / self.n - np.outer(kq.sum(1), lq.sum(1)) / self.n**2
        diag = np.trace(u)
        raw = (diag / b - (u.sum() - diag) / (b * (b - 1))) / norm
        return _check_bound(float(raw))

    # -- updates -----------------------------------------------------------
    def _grow(self, need: int, dx: int, dy: int):
        if self._xs is None:
            self._xs = np.empty((self._cap, dx))
            self._ys = np.empty((self._cap, dy))
        if need <= self._cap:
            return
        cap = self._cap
        while cap < need:
            cap *= 2
        for name in ("_xs", "_ys"):
            old = getattr(self, name)
            new = np.empty((cap, old.shape[1]))
            new[: self.n] = old[: self.n]
            setattr(self, name, new)
        for name in ("_krow", "_lrow"):
            new = np.zeros(cap)
            new[: self.n] = getattr(self, name)[: self.n]
            setattr(self, name, new)
        self._cap = cap

    def append(self, xb: np.ndarray, yb: np.ndarray):
        """Store a block of points, updating every cache in O(n * m)."""
        xb, yb = as_points(xb), as_points(yb)
        self._check_dims(xb, yb)
        m, n = xb.shape[0], self.n
        if n:
            kq, lq = self._query(xb, yb)
        else:
            kq = lq = np.zeros((m, 0))
        k_new = cross_kernel(self.kernel_x, xb, xb)
        l_new = cross_kernel(self.kernel_y, yb, yb)
        self._grow(n + m, xb.shape[1], yb.shape[1])

        kcol = kq.sum(0)  # contribution of the new points to old row sums
        lcol = lq.sum(0)
        krow_new = kq.sum(1) + k_new.sum(1)
        lrow_new = lq.sum(1) + l_new.sum(1)
        self.delta1 += 2.0 * float(np.einsum("ij,ij->", kq, lq)) + float(np.einsum("ij,ij->", k_new, l_new))
        self.delta2 += 2.0 * float(kcol.sum()) + float(k_new.sum())
        self.delta3 += 2.0 * float(lcol.sum()) + float(l_new.sum())
        self._krow[:n] += kcol
        self._lrow[:n] += lcol
        self._krow[n : n + m] = krow_new
        self._lrow[n : n + m] = lrow_new
        self._xs[n : n + m] = xb
        self._ys[n : n + m] = yb
        self.n = n + m
        self.delta4 = float(self._krow[: self.n] @ self._lrow[: self.n])
        self._cols = None

    def append_pair(self, z1, z2):
        self.append(as_points([z1[0], z2[0]]), as_points([z1[1], z2[1]]))

    # -- snapshot ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "kernel_x": self.kernel_x.to_dict(),
            "kernel_y": self.kernel_y.to_dict(),
            "n": self.n,
            "deltas": [self.delta1, self.delta2, self.delta3, self.delta4],
            "xs": _codec.encode_array(self.xs) if self.n else None,
            "ys": _codec.encode_array(self.ys) if self.n else None,
            "k_rowsums": _codec.encode_array(self.k_rowsums),
            "l_rowsums": _codec.encode_array(self.l_rowsums),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HsicState":
        st = cls(KernelSpec.from_dict(d["kernel_x"]), KernelSpec.from_dict(d["kernel_y"]))
        n = int(d["n"])
        st.delta1, st.delta2, st.delta3, st.delta4 = (float(v) for v in d["deltas"])
        if n:
            xs, ys = _codec.decode_array(d["xs"]), _codec.decode_array(d["ys"])
            st._grow(n, xs.shape[1], ys.shape[1])
            st._xs[:n], st._ys[:n] = xs, ys
            st._krow[:n] = _codec.decode_array(d["k_rowsums"])
            st._lrow[:n] = _codec.decode_array(d["l_rowsums"])
        st.n = n
        return st
