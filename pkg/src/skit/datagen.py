"""Seeded synthetic paired streams and CSV ingestion.

Every generator draws from ``numpy.random.Generator(PCG64)`` seeded through a
``SeedSequence``; ``substream(seed, run)`` gives independent per-run streams so a
grid of runs is reproducible in any evaluation order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import ConfigError, FormatError, InputError
from .kernels import KernelSpec

CHUNK = 1024
KINDS = ("gaussian", "spherical", "hard", "drift_sin", "drift_beta", "csv")


def substream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else substream(seed)


# -- block samplers: (n, dx), (n, dy) arrays ------------------------------

def gaussian_sample(beta: float, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    x = rng.standard_normal(n)
    y = beta * x + rng.standard_normal(n)
    return x[:, None], y[:, None]


def spherical_sample(d: int, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """First two coordinates of a uniform draw from the unit sphere in R^d."""
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u[:, :1].copy(), u[:, 1:2].copy()


def hard_sample(w: float, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Rejection sampling from ``(1 + sin(w x) sin(w y)) / (4 pi^2)`` on [-pi, pi]^2."""
    xs, ys, got = [], [], 0
    while got < n:
        m = 2 * (n - got) + 16
        x = rng.uniform(-math.pi, math.pi, m)
        y = rng.uniform(-math.pi, math.pi, m)
        keep = rng.uniform(0.0, 2.0, m) <= 1.0 + np.sin(w * x) * np.sin(w * y)
        xs.append(x[keep])
        ys.append(y[keep])
        got += int(keep.sum())
    return np.concatenate(xs)[:n, None], np.concatenate(ys)[:n, None]


def drift_sin_sample(rho: float, c: float, n_pairs: int, rng, start_pair: int = 1):
    """Pairs share the offsets ``(2c sin t, 3c sin t)``; noise is fresh per observation with correlation rho."""
    t = np.repeat(np.arange(start_pair, start_pair + n_pairs, dtype=float), 2)
    w = rng.standard_normal(2 * n_pairs)
    v = rho * w + math.sqrt(1.0 - rho * rho) * rng.standard_normal(2 * n_pairs)
    s = np.sin(t)
    return (2 * c * s + w)[:, None], (3 * c * s + v)[:, None]


def drift_beta_schedule(i: np.ndarray, block_size: int) -> np.ndarray:
    return np.minimum(0.02 * (np.asarray(i) // block_size), 0.1)


def drift_beta_sample(block_size: int, n: int, rng, start: int = 0):
    beta = drift_beta_schedule(np.arange(start, start + n), block_size)
    x = rng.standard_normal(n)
    y = beta * x + rng.standard_normal(n)
    return x[:, None], y[:, None]


# -- streams --------------------------------------------------------------

def _chunked(draw) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    k = 0
    while True:
        xs, ys = draw(k)
        for i in range(xs.shape[0]):
            yield xs[i], ys[i]
        k += 1


def gaussian_stream(beta: float, seed=0):
    rng = _as_rng(seed)
    return _chunked(lambda k: gaussian_sample(beta, CHUNK, rng))


def spherical_stream(d: int, seed=0):
    if d < 2:
        raise InputError("sphere dimension must be at least 2")
    rng = _as_rng(seed)
    return _chunked(lambda k: spherical_sample(d, CHUNK, rng))


def hard_to_detect_stream(w: float, seed=0):
    rng = _as_rng(seed)
    return _chunked(lambda k: hard_sample(w, CHUNK, rng))


def drift_sin_stream(rho: float, c: float, seed=0):
    if not -1.0 <= rho <= 1.0:
        raise InputError("rho must lie in [-1, 1]")
    rng = _as_rng(seed)
    half = CHUNK // 2
    return _chunked(lambda k: drift_sin_sample(rho, c, half, rng, start_pair=1 + k * half))


def drift_beta_stream(block_size: int, seed=0):
    if block_size < 1:
        raise InputError("block size must be at least 1")
    rng = _as_rng(seed)
    return _chunked(lambda k: drift_beta_sample(block_size, CHUNK, rng, start=k * CHUNK))


def csv_stream(path, x_cols, y_cols) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Rows of a headed CSV file as (x, y) vectors, in file order."""
    x_cols, y_cols = list(x_cols), list(y_cols)
    if not x_cols or not y_cols:
        raise InputError("need at least one x column and one y column")
    return _csv_rows(path, x_cols, y_cols)


def _csv_rows(path, x_cols, y_cols):
    with open(path, newline="", encoding="utf-8") as fh:
        yield from read_csv_rows(fh, x_cols, y_cols)


def read_csv_rows(fh, x_cols, y_cols):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("CSV input is empty (no header row)") from None
    header = [h.strip() for h in header]
    try:
        xi = [header.index(c) for c in x_cols]
        yi = [header.index(c) for c in y_cols]
    except ValueError as exc:
        raise FormatError(f"column not found in header {header}: {exc}") from None
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            x = np.array([float(row[i]) for i in xi])
            y = np.array([float(row[i]) for i in yi])
        except (ValueError, IndexError) as exc:
            raise FormatError(f"row {lineno}: {exc}") from None
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise FormatError(f"row {lineno}: non-finite value")
        yield x, y


def write_csv(path, xs, ys, x_names=None, y_names=None):
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    xs = xs.reshape(len(xs), -1)
    ys = ys.reshape(len(ys), -1)
    x_names = x_names or [f"x{i}" if xs.shape[1] > 1 else "x" for i in range(xs.shape[1])]
    y_names = y_names or [f"y{i}" if ys.shape[1] > 1 else "y" for i in range(ys.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*x_names, *y_names])
        for a, b in zip(xs, ys):
            w.writerow([repr(float(v)) for v in (*a, *b)])


# -- scenario records -----------------------------------------------------

SCENARIO_PARAMS = {
    "gaussian": {"beta": 0.0},
    "spherical": {"d": 3},
    "hard": {"w": 0.0},
    "drift_sin": {"rho": 0.0, "c": 1.0},
    "drift_beta": {"block_size": 100},
    "csv": {"path": None, "x_cols": ["x"], "y_cols": ["y"]},
}


@dataclass
class ScenarioSpec:
    kind: str = "gaussian"
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario {self.kind!r}; expected one of {KINDS}", ("scenario",))
        unknown = set(self.params) - set(SCENARIO_PARAMS[self.kind])
        if unknown:
            raise ConfigError(f"unknown parameter {sorted(unknown)[0]!r}", ("params", sorted(unknown)[0]))
        self.params = {**SCENARIO_PARAMS[self.kind], **self.params}
        p = self.params
        bad = (
            (self.kind == "gaussian" and not p["beta"] >= 0)
            or (self.kind == "spherical" and not (int(p["d"]) == p["d"] and p["d"] >= 2))
            or (self.kind == "hard" and not p["w"] >= 0)
            or (self.kind == "drift_sin" and not -1 <= p["rho"] <= 1)
            or (self.kind == "drift_beta" and not p["block_size"] >= 1)
            or (self.kind == "csv" and not p["path"])
        )
        if bad:
            raise ConfigError(f"parameters out of range for {self.kind}: {p}", ("params",))

    def stream(self, run: int = 0):
        rng = substream(self.seed, run)
        p = self.params
        if self.kind == "gaussian":
            return gaussian_stream(p["beta"], rng)
        if self.kind == "spherical":
            return spherical_stream(int(p["d"]), rng)
        if self.kind == "hard":
            return hard_to_detect_stream(p["w"], rng)
        if self.kind == "drift_sin":
            return drift_sin_stream(p["rho"], p["c"], rng)
        if self.kind == "drift_beta":
            return drift_beta_stream(int(p["block_size"]), rng)
        return csv_stream(p["path"], p["x_cols"], p["y_cols"])

    def default_kernels(self) -> tuple[KernelSpec, KernelSpec]:
        """RBF rates used for each synthetic model."""
        p = self.params
        if self.kind == "gaussian":
            return KernelSpec("rbf", 0.25), KernelSpec("rbf", 0.25 / (1.0 + p["beta"] ** 2))
        if self.kind == "spherical":
            return KernelSpec("rbf", p["d"] / 4.0), KernelSpec("rbf", p["d"] / 4.0)
        if self.kind == "hard":
            lam = 3.0 / (4.0 * math.pi**2)
            return KernelSpec("rbf", lam), KernelSpec("rbf", lam)
        return KernelSpec("rbf", 0.25), KernelSpec("rbf", 0.25)


def take(stream, n: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for _, (x, y) in zip(range(n), stream):
        xs.append(x)
        ys.append(y)
    return np.array(xs), np.array(ys)


