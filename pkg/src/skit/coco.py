"""COCO / KCC witness pair with a sparse refit schedule and the product payoff.

Witnesses are refit once the number of stored points reaches 2, 8, 18, 32, ...
(``2k^2``). Between refits the last fitted pair keeps betting: it was built from
past data only, so the bet stays fair.
"""
from __future__ import annotations

import logging

import numpy as np

from . import _codec
from .errors import DegenerateInputError, EmptyStateError, InputError, InvariantError
from .hsic import BOUND_SLACK
from .kernels import KernelSpec, as_points, cross_kernel
from .lowrank import CRITERIA, DEFAULT_DELTA0, WitnessCoefficients, kernel_cholesky, solve_coco, solve_kcc

log = logging.getLogger(__name__)


def refit_point(k: int) -> int:
    return 2 * k * k


class CocoKccState:
    def __init__(
        self,
        kernel_x: KernelSpec,
        kernel_y: KernelSpec,
        criterion: str = "coco",
        kappa1: float = 0.1,
        kappa2: float = 0.1,
        delta0: float = DEFAULT_DELTA0,
    ):
        criterion = criterion.lower()
        if criterion not in CRITERIA:
            raise InputError(f"unknown criterion {criterion!r}")
        self.kernel_x = kernel_x
        self.kernel_y = kernel_y
        self.criterion = criterion
        self.kappa1 = float(kappa1)
        self.kappa2 = float(kappa2)
        self.delta0 = float(delta0)
        self._xs: list[np.ndarray] = []
        self._ys: list[np.ndarray] = []
        self.coeffs: WitnessCoefficients | None = None
        self.gamma = 0.0
        self.fit_n = 0  # size of the prefix the coefficients were fit on
        self.refit_k = 1
        self.clamp_events = 0
        self.degenerate_fits = 0
        self._fit_x: np.ndarray | None = None
        self._fit_y: np.ndarray | None = None
        self._ca: np.ndarray | None = None
        self._cb: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self._xs)

    @property
    def next_refit_at(self) -> int:
        return refit_point(self.refit_k)

    @property
    def xs(self) -> np.ndarray:
        return np.array(self._xs) if self._xs else np.empty((0, 0))

    @property
    def ys(self) -> np.ndarray:
        return np.array(self._ys) if self._ys else np.empty((0, 0))

    def append(self, xb: np.ndarray, yb: np.ndarray):
        xb, yb = as_points(xb), as_points(yb)
        if xb.shape[0] != yb.shape[0]:
            raise InputError("x and y blocks have different lengths")
        if self._xs and (xb.shape[1] != self._xs[0].shape[0] or yb.shape[1] != self._ys[0].shape[0]):
            raise InputError("dimension mismatch with stored observations")
        self._xs.extend(np.array(r) for r in xb)
        self._ys.extend(np.array(r) for r in yb)

    def _set_fit(self, coeffs: WitnessCoefficients | None, fit_n: int):
        self.coeffs = coeffs
        self.fit_n = fit_n
        if coeffs is None:
            self._fit_x = self._fit_y = self._ca = self._cb = None
            return
        self._fit_x = np.array(self._xs[:fit_n])
        self._fit_y = np.array(self._ys[:fit_n])
        self._ca, self._cb = coeffs.centered()

    def maybe_refit(self) -> bool:
        """Refit both witnesses if the schedule says so; returns True when a refit happened."""
        n = self.n
        if n < self.next_refit_at:
            return False
        while refit_point(self.refit_k) <= n:
            self.refit_k += 1
        xs, ys = self.xs, self.ys
        delta = n * self.delta0
        try:
            fx = kernel_cholesky(self.kernel_x, xs, delta)
            fy = kernel_cholesky(self.kernel_y, ys, delta)
            if self.criterion == "coco":
                coeffs, gamma = solve_coco(fx, fy, n)
            else:
                coeffs, gamma = solve_kcc(fx, fy, n, self.kappa1, self.kappa2)
        except DegenerateInputError as exc:
            self.degenerate_fits += 1
            log.warning("witness refit at n=%d skipped: %s", n, exc)
            return False
        self.gamma = gamma
        self._set_fit(coeffs, n)
        return True

    def witness_pair_eval(self, x, y) -> tuple[float, float]:
        if self.coeffs is None:
            raise EmptyStateError("no fitted witness yet")
        g, h = self._witness_block(as_points([np.atleast_1d(x)]), as_points([np.atleast_1d(y)]))
        return float(g[0]), float(h[0])

    def _witness_block(self, xb: np.ndarray, yb: np.ndarray):
        g = self._ca @ cross_kernel(self.kernel_x, self._fit_x, xb)
        h = self._cb @ cross_kernel(self.kernel_y, self._fit_y, yb)
        return g, h

    def payoff(self, xb: np.ndarray, yb: np.ndarray) -> float:
        """``(g(x2) - g(x1)) (h(y2) - h(y1)) / 2`` with the current witnesses; 0 before the first fit."""
        if self.coeffs is None:
            return 0.0
        g, h = self._witness_block(xb, yb)
        raw = 0.5 * (g[1] - g[0]) * (h[1] - h[0])
        if not np.isfinite(raw) or abs(raw) > 1.0 + BOUND_SLACK:
            raise InvariantError(f"payoff {raw!r} outside [-1, 1]")
        if abs(raw) > 1.0:
            self.clamp_events += 1
            raw = float(np.sign(raw))
        return float(raw)

    def to_dict(self) -> dict:
        d = {
            "kernel_x": self.kernel_x.to_dict(),
            "kernel_y": self.kernel_y.to_dict(),
            "criterion": self.criterion,
            "kappa1": self.kappa1,
            "kappa2": self.kappa2,
            "delta0": self.delta0,
            "xs": _codec.encode_array(self.xs) if self.n else None,
            "ys": _codec.encode_array(self.ys) if self.n else None,
            "refit_k": self.refit_k,
            "gamma": self.gamma,
            "fit_n": self.fit_n,
            "clamp_events": self.clamp_events,
            "degenerate_fits": self.degenerate_fits,
            "alpha": None,
            "beta": None,
        }
        if self.coeffs is not None:
            d["alpha"] = _codec.encode_array(self.coeffs.alpha)
            d["beta"] = _codec.encode_array(self.coeffs.beta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CocoKccState":
        st = cls(
            KernelSpec.from_dict(d["kernel_x"]),
            KernelSpec.from_dict(d["kernel_y"]),
            d["criterion"],
            d["kappa1"],
            d["kappa2"],
            d["delta0"],
        )
        if d["xs"] is not None:
            st._xs = list(_codec.decode_array(d["xs"]))
            st._ys = list(_codec.decode_array(d["ys"]))
        st.refit_k = int(d["refit_k"])
        st.gamma = float(d["gamma"])
        st.clamp_events = int(d["clamp_events"])
        st.degenerate_fits = int(d["degenerate_fits"])
        if d["alpha"] is not None:
            coeffs = WitnessCoefficients(
                _codec.decode_array(d["alpha"]), _codec.decode_array(d["beta"]), st.criterion,
                st.kappa1 if st.criterion == "kcc" else 0.0, st.kappa2 if st.criterion == "kcc" else 0.0,
            )
            st._set_fit(coeffs, int(d["fit_n"]))
        return st
