"""Betting-fraction strategies.

Every bettor exposes ``lam`` (the fraction for the next round, fixed before the
payoff is seen) and ``update(f)``. A mixture over a grid of constant fractions
is expressed the same way: its wealth equals a single process betting the
wealth-weighted average of the grid.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, InputError

ONS_STEP = 2.0 / (2.0 - math.log(3.0))
DEFAULT_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


def _check_payoff(f: float):
    if not (-1.0 <= f <= 1.0):
        raise InputError(f"payoff {f!r} outside [-1, 1]")


class OnsBettor:
    """Online Newton step on the log-wealth, fraction kept in [0, 1/2].

    ``variant="ascent"`` (default) moves the fraction up after a positive payoff:
    ``z = f / (1 + lam f)``, ``lam += c z / a``. ``variant="verbatim"`` keeps the
    alternative sign convention ``z = f / (1 - lam f)``, ``lam -= c z / a``, which
    shrinks the bet after wins and therefore has no power; it is kept only for
    comparison.
    """

    name = "ons"

    def __init__(self, variant: str = "ascent"):
        if variant not in ("ascent", "verbatim"):
            raise ConfigError(f"unknown ONS variant {variant!r}")
        self.variant = variant
        self.lam = 0.0
        self.a = 1.0

    def update(self, f: float):
        _check_payoff(f)
        if self.variant == "ascent":
            z = f / (1.0 + self.lam * f)
            self.a += z * z
            step = self.lam + ONS_STEP * z / self.a
        else:
            z = f / (1.0 - self.lam * f)
            self.a += z * z
            step = self.lam - ONS_STEP * z / self.a
        self.lam = min(0.5, max(0.0, step))

    def to_dict(self) -> dict:
        return {"type": "ons", "variant": self.variant, "lam": self.lam, "a": self.a}

    def _load(self, d: dict):
        self.lam, self.a = float(d["lam"]), float(d["a"])


class AgrapaBettor:
    """Truncated ratio of the running first and second payoff moments."""

    name = "agrapa"

    def __init__(self, c: float = 0.9):
        if not (0.0 < c <= 1.0):
            raise ConfigError(f"aGRAPA truncation must lie in (0, 1], got {c!r}")
        self.c = float(c)
        self.mu1 = 0.0
        self.mu2 = 1.0
        self.lam = 0.0

    def update(self, f: float):
        _check_payoff(f)
        self.mu1 += f
        self.mu2 += f * f
        self.lam = min(self.c, max(0.0, self.mu1 / self.mu2))

    def to_dict(self) -> dict:
        return {"type": "agrapa", "c": self.c, "mu1": self.mu1, "mu2": self.mu2, "lam": self.lam}

    def _load(self, d: dict):
        self.mu1, self.mu2, self.lam = float(d["mu1"]), float(d["mu2"]), float(d["lam"])


class MixtureBettor:
    """Uniform mixture of constant-fraction wealth processes over a static grid."""

    name = "mixture"

    def __init__(self, grid=DEFAULT_GRID):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or grid.min() < 0 or grid.max() >= 1:
            raise ConfigError("mixture grid must be a non-empty list of fractions in [0, 1)")
        self.grid = grid
        self.log_wealths = np.zeros(grid.size)

    @property
    def wealths(self) -> np.ndarray:
        return np.exp(self.log_wealths)

    @property
    def mixed_wealth(self) -> float:
        m = self.log_wealths.max()
        return float(math.exp(m) * np.exp(self.log_wealths - m).mean())

    @property
    def lam(self) -> float:
        w = np.exp(self.log_wealths - self.log_wealths.max())
        return float(w @ self.grid / w.sum())

    def update(self, f: float) -> float:
        _check_payoff(f)
        self.log_wealths += np.log1p(self.grid * f)
        return self.mixed_wealth

    def to_dict(self) -> dict:
        return {"type": "mixture", "grid": self.grid.tolist(), "log_wealths": self.log_wealths.tolist()}

    def _load(self, d: dict):
        self.log_wealths = np.array(d["log_wealths"], dtype=float)


class FixedBettor:
    name = "fixed"

    def __init__(self, lam: float):
        if not (0.0 <= lam < 1.0):
            raise ConfigError(f"fixed fraction must lie in [0, 1), got {lam!r}")
        self.lam = float(lam)

    def update(self, f: float):
        _check_payoff(f)

    def to_dict(self) -> dict:
        return {"type": "fixed", "lam": self.lam}

    def _load(self, d: dict):
        pass


def make_bettor(spec: str, agrapa_c: float = 0.9, mixture_grid=None):
    """Build a bettor from ``ons``, ``ons-verbatim``, ``agrapa``, ``mixture`` or ``fixed:<lam>``."""
    spec = spec.strip().lower()
    if spec == "ons":
        return OnsBettor()
    if spec == "ons-verbatim":
        return OnsBettor("verbatim")
    if spec == "agrapa":
        return AgrapaBettor(agrapa_c)
    if spec == "mixture":
        return MixtureBettor(DEFAULT_GRID if mixture_grid is None else mixture_grid)
    if spec.startswith("fixed:"):
        try:
            lam = float(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad fixed fraction in {spec!r}") from None
        return FixedBettor(lam)
    raise ConfigError(f"unknown bettor {spec!r}")


def bettor_from_dict(d: dict):
    kind = d["type"]
    if kind == "ons":
        b = OnsBettor(d["variant"])
    elif kind == "agrapa":
        b = AgrapaBettor(d["c"])
    elif kind == "mixture":
        b = MixtureBettor(d["grid"])
    elif kind == "fixed":
        b = FixedBettor(d["lam"])
    else:
        raise InputError(f"unknown bettor type {kind!r}")
    b._load(d)
    return b


def mixture_update(grid, wealths, f: float) -> tuple[np.ndarray, float]:
    """One step of the per-fraction wealths; returns the new wealths and their mean."""
    _check_payoff(f)
    new = np.asarray(wealths, dtype=float) * (1.0 + np.asarray(grid, dtype=float) * f)
    return new, float(new.mean())


def oracle_lambda(mean_f: float, mean_f2: float) -> float:
    """Second-order approximation to the growth-optimal constant fraction."""
    denom = mean_f + mean_f2
    if not denom > 0:
        raise InputError("mean_f + mean_f2 must be positive")
    return mean_f / denom
