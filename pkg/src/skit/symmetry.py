"""Payoffs built from the symmetric statistic W of a pair.

``W = u(x1,y1) + u(x2,y2) - u(x1,y2) - u(x2,y1)`` with u the unnormalised
plug-in witness. Under independence W is symmetric about zero given the past,
so any bounded odd transform of W, or ``sign(W)`` times a predictable weight of
``|W|``, is a fair bet. None of these payoffs needs a bounded kernel.
"""
from __future__ import annotations

import bisect
import math

import numpy as np

from .errors import ConfigError
from .hsic import HsicState
from .kernels import KernelSpec

KINDS = ("odd", "rank", "pred")
NORMALIZER_EPS = 1e-12


def _sign(w: float) -> int:
    return int(w > 0) - int(w < 0)


def sorted_quantile(values: list[float], q: float) -> float:
    """Linear-interpolation quantile of an already sorted list."""
    pos = q * (len(values) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(values) - 1)
    return values[lo] + (pos - lo) * (values[hi] - values[lo])


class SymmetryState:
    def __init__(
        self,
        kernel_x: KernelSpec,
        kernel_y: KernelSpec,
        kind: str = "rank",
        quantile_lo: float = 0.1,
        quantile_hi: float = 0.9,
        eta: float = 0.1,
    ):
        if kind not in KINDS:
            raise ConfigError(f"unknown symmetry payoff {kind!r}")
        self.kind = kind
        self.hsic = HsicState(kernel_x, kernel_y)
        self.abs_history: list[float] = []  # kept sorted
        self.sign_history: list[int] = []
        self.quantile_lo = quantile_lo
        self.quantile_hi = quantile_hi
        self.eta = eta
        self.weight = 0.0
        self.bias = 0.0

    @property
    def rounds(self) -> int:
        return len(self.sign_history)

    def compute_w(self, xb: np.ndarray, yb: np.ndarray) -> float:
        return self.hsic.pair_statistic(xb, yb)

    def normalizer(self) -> float:
        if len(self.abs_history) < 2:
            return 0.0
        h = self.abs_history
        return sorted_quantile(h, self.quantile_hi) - sorted_quantile(h, self.quantile_lo)

    def odd_payoff(self, w: float) -> float:
        norm = self.normalizer()
        if norm < NORMALIZER_EPS:
            return 0.0
        return math.tanh(w / norm)

    def rank_payoff(self, w: float) -> float:
        """``sign(w) * rank(|w|) / t`` with the current round included in the count."""
        s = _sign(w)
        if s == 0:
            return 0.0
        rank = bisect.bisect_right(self.abs_history, abs(w)) + 1
        return s * rank / (self.rounds + 1)

    def predicted_prob(self, w: float) -> float:
        z = self.weight * abs(w) + self.bias
        return 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))

    def predictive_payoff(self, w: float) -> float:
        s = _sign(w)
        if s == 0:
            return 0.0
        edge = 2.0 * self.predicted_prob(w) - 1.0
        if edge <= 0.0:
            return 0.0
        return edge if s > 0 else -edge

    def payoff_from_w(self, w: float) -> float:
        if self.kind == "odd":
            return self.odd_payoff(w)
        if self.kind == "rank":
            return self.rank_payoff(w)
        return self.predictive_payoff(w)

    def observe(self, w: float):
        """Record W after its payoff was placed; also one logistic step on (|w|, sign)."""
        s = _sign(w)
        if s != 0:
            p = self.predicted_prob(w)
            grad = (1.0 if s > 0 else 0.0) - p
            self.weight += self.eta * grad * abs(w)
            self.bias += self.eta * grad
        bisect.insort(self.abs_history, abs(w))
        self.sign_history.append(s)

    def payoff(self, xb: np.ndarray, yb: np.ndarray) -> float:
        w = self.compute_w(xb, yb)
        f = self.payoff_from_w(w)
        self.observe(w)
        return f

    def append(self, xb: np.ndarray, yb: np.ndarray):
        self.hsic.append(xb, yb)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "hsic": self.hsic.to_dict(),
            "abs_history": list(self.abs_history),
            "sign_history": list(self.sign_history),
            "quantile_lo": self.quantile_lo,
            "quantile_hi": self.quantile_hi,
            "eta": self.eta,
            "weight": self.weight,
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SymmetryState":
        h = HsicState.from_dict(d["hsic"])
        st = cls(h.kernel_x, h.kernel_y, d["kind"], d["quantile_lo"], d["quantile_hi"], d["eta"])
        st.hsic = h
        st.abs_history = [float(v) for v in d["abs_history"]]
        st.sign_history = [int(v) for v in d["sign_history"]]
        st.weight = float(d["weight"])
        st.bias = float(d["bias"])
        return st
