"""The sequential test: pairing, payoff, wealth, stopping rule and bettor update.

Each round consumes ``minibatch`` observations (two by default). The order
inside a round is fixed:

1. payoff from the witness fitted on earlier rounds only,
2. ``K <- K * (1 + lam * f)``,
3. stop if ``K >= threshold`` (``1/alpha`` unless overridden),
4. otherwise update the bettor with ``f``,
5. store the round's observations in the witness state.

Wealth is carried in log space so long winning streaks cannot overflow.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .betting import bettor_from_dict, make_bettor
from .coco import CocoKccState
from .errors import ConfigError, FormatError, InputError, StateError
from .hsic import HsicState
from .kernels import KernelSpec
from .lowrank import DEFAULT_DELTA0
from .symmetry import SymmetryState

SNAPSHOT_VERSION = 1
PAYOFFS = ("hsic", "coco", "kcc", "sym_odd", "sym_rank", "sym_pred")


@dataclass
class SessionConfig:
    payoff: str = "hsic"
    bettor: str = "ons"
    alpha: float = 0.05
    kernel_x: KernelSpec = field(default_factory=lambda: KernelSpec("rbf", 0.25))
    kernel_y: KernelSpec = field(default_factory=lambda: KernelSpec("rbf", 0.25))
    minibatch: int = 2
    threshold: float | None = None  # defaults to 1/alpha
    agrapa_c: float = 0.9
    mixture_grid: tuple[float, ...] | None = None
    kappa1: float = 0.1
    kappa2: float = 0.1
    delta0: float = DEFAULT_DELTA0
    quantile_lo: float = 0.1
    quantile_hi: float = 0.9
    eta: float = 0.1
    record_trajectory: bool = False
    seed: int = 0

    def __post_init__(self):
        self.payoff = self.payoff.lower()
        if self.payoff not in PAYOFFS:
            raise ConfigError(f"unknown payoff {self.payoff!r}; expected one of {PAYOFFS}", ("payoff",))
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)", ("alpha",))
        if int(self.minibatch) != self.minibatch or self.minibatch < 2:
            raise ConfigError("minibatch must be an integer >= 2", ("minibatch",))
        self.minibatch = int(self.minibatch)
        if self.minibatch > 2 and self.payoff != "hsic":
            raise ConfigError("minibatches are only supported for the hsic payoff", ("minibatch",))
        if self.threshold is not None and not self.threshold > 1.0:
            raise ConfigError("threshold must exceed 1", ("threshold",))
        if isinstance(self.kernel_x, dict):
            self.kernel_x = KernelSpec.from_dict(self.kernel_x)
        if isinstance(self.kernel_y, dict):
            self.kernel_y = KernelSpec.from_dict(self.kernel_y)
        if self.mixture_grid is not None:
            self.mixture_grid = tuple(float(v) for v in self.mixture_grid)
        if self.payoff in ("hsic", "coco", "kcc") and not (self.kernel_x.bounded and self.kernel_y.bounded):
            raise ConfigError("the linear kernel is only allowed with the symmetry payoffs", ("kernel_x",))
        make_bettor(self.bettor, self.agrapa_c, self.mixture_grid)  # validates the bettor spec

    @property
    def reject_at(self) -> float:
        return 1.0 / self.alpha if self.threshold is None else float(self.threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel_x"] = self.kernel_x.to_dict()
        d["kernel_y"] = self.kernel_y.to_dict()
        d["mixture_grid"] = None if self.mixture_grid is None else list(self.mixture_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown key {sorted(extra)[0]!r}", (sorted(extra)[0],))
        return cls(**d)


@dataclass
class RoundReport:
    t: int
    f: float
    lam: float
    wealth: float
    log_wealth: float
    stopped: bool


@dataclass
class Verdict:
    rejected: bool
    stopping_time: int | None
    final_wealth: float
    rounds_processed: int
    final_log_wealth: float = 0.0


def _make_strategy(cfg: SessionConfig):
    if cfg.payoff == "hsic":
        return HsicState(cfg.kernel_x, cfg.kernel_y)
    if cfg.payoff in ("coco", "kcc"):
        return CocoKccState(cfg.kernel_x, cfg.kernel_y, cfg.payoff, cfg.kappa1, cfg.kappa2, cfg.delta0)
    return SymmetryState(cfg.kernel_x, cfg.kernel_y, cfg.payoff[4:], cfg.quantile_lo, cfg.quantile_hi, cfg.eta)


def _strategy_from_dict(payoff: str, d: dict):
    if payoff == "hsic":
        return HsicState.from_dict(d)
    if payoff in ("coco", "kcc"):
        return CocoKccState.from_dict(d)
    return SymmetryState.from_dict(d)


class TestSession:
    __test__ = False  # keep pytest from collecting this class

    def __init__(self, config: SessionConfig | None = None):
        self.config = config or SessionConfig()
        self.strategy = _make_strategy(self.config)
        self.bettor = make_bettor(self.config.bettor, self.config.agrapa_c, self.config.mixture_grid)
        self.log_wealth = 0.0
        self.max_log_wealth = 0.0
        self.round = 0
        self.pending: list[tuple[np.ndarray, np.ndarray]] = []
        self.stopped: int | None = None
        self.trajectory: list[tuple[int, float, float, float, float]] = []

    @property
    def wealth(self) -> float:
        return math.exp(self.log_wealth) if self.log_wealth < 709.0 else math.inf

    @property
    def n_observations(self) -> int:
        return self.round * self.config.minibatch + len(self.pending)

    def feed(self, x, y) -> RoundReport | None:
        """Consume one observation; returns a report when it completes a round."""
        if self.stopped is not None:
            raise StateError(f"session stopped at round {self.stopped}; no further observations accepted")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.ndim != 1 or y.ndim != 1:
            raise InputError("each observation must be a scalar or a flat vector per side")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise InputError("observation has non-finite coordinates")
        if self.pending and (x.shape != self.pending[0][0].shape or y.shape != self.pending[0][1].shape):
            raise InputError("observation dimension differs from the buffered one")
        self.pending.append((x, y))
        if len(self.pending) < self.config.minibatch:
            return None
        xb = np.array([p[0] for p in self.pending])
        yb = np.array([p[1] for p in self.pending])
        self.pending = []
        return self._play_round(xb, yb)

    def feed_many(self, xs, ys) -> list[RoundReport]:
        reports = []
        for x, y in zip(xs, ys):
            r = self.feed(x, y)
            if r is not None:
                reports.append(r)
                if r.stopped:
                    break
        return reports

    def _payoff(self, xb: np.ndarray, yb: np.ndarray) -> float:
        st = self.strategy
        if isinstance(st, HsicState) and self.config.minibatch > 2:
            return st.minibatch_payoff(xb, yb)
        return st.payoff(xb, yb)

    def _play_round(self, xb: np.ndarray, yb: np.ndarray) -> RoundReport:
        if isinstance(self.strategy, CocoKccState):
            self.strategy.maybe_refit()
        t = self.round + 1
        lam = self.bettor.lam
        f = self._payoff(xb, yb)
        self.log_wealth += math.log1p(lam * f)
        self.max_log_wealth = max(self.max_log_wealth, self.log_wealth)
        self.round = t
        reject_at = self.config.reject_at
        stop = math.isfinite(reject_at) and self.wealth >= reject_at
        if stop:
            self.stopped = t
        else:
            self.bettor.update(f)
            self.strategy.append(xb, yb)
        wealth = self.wealth
        if self.config.record_trajectory:
            self.trajectory.append((t, f, lam, wealth, self.log_wealth))
        return RoundReport(t, f, lam, wealth, self.log_wealth, stop)

    def verdict(self) -> Verdict:
        return Verdict(self.stopped is not None, self.stopped, self.wealth, self.round, self.log_wealth)

    # -- persistence -------------------------------------------------------
    def snapshot(self) -> bytes:
        rec = {
            "format": "skit-session",
            "version": SNAPSHOT_VERSION,
            "config": self.config.to_dict(),
            "strategy": self.strategy.to_dict(),
            "bettor": self.bettor.to_dict(),
            "log_wealth": self.log_wealth,
            "max_log_wealth": self.max_log_wealth,
            "round": self.round,
            "pending": [[p[0].tolist(), p[1].tolist()] for p in self.pending],
            "stopped": self.stopped,
            "trajectory": [list(r) for r in self.trajectory],
        }
        return json.dumps(rec, sort_keys=True).encode("utf-8")

    @classmethod
    def restore(cls, record: bytes | str | dict) -> "TestSession":
        try:
            rec = record if isinstance(record, dict) else json.loads(record)
        except (ValueError, UnicodeDecodeError) as exc:
            raise FormatError(f"snapshot is not valid JSON: {exc}") from exc
        if not isinstance(rec, dict) or rec.get("format") != "skit-session":
            raise FormatError("not a session snapshot")
        if rec.get("version") != SNAPSHOT_VERSION:
            raise FormatError(f"unsupported snapshot version {rec.get('version')!r}")
        try:
            cfg = SessionConfig.from_dict(rec["config"])
            s = cls(cfg)
            s.strategy = _strategy_from_dict(cfg.payoff, rec["strategy"])
            s.bettor = bettor_from_dict(rec["bettor"])
            s.log_wealth = float(rec["log_wealth"])
            s.max_log_wealth = float(rec["max_log_wealth"])
            s.round = int(rec["round"])
            s.pending = [(np.array(p[0], dtype=float), np.array(p[1], dtype=float)) for p in rec["pending"]]
            s.stopped = None if rec["stopped"] is None else int(rec["stopped"])
            s.trajectory = [tuple(r) for r in rec["trajectory"]]
        except FormatError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise FormatError(f"malformed snapshot: {exc!r}") from exc
        return s

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "f", "lambda", "wealth", "log_wealth"])
        for t, f, lam, wealth, lw in self.trajectory:
            w.writerow([t, repr(f), repr(lam), repr(wealth), repr(lw)])
        return buf.getvalue()


def run_stream(session: TestSession, stream: Iterable, horizon: int) -> Verdict:
    """Feed up to ``horizon`` observations (stopping early on rejection)."""
    if horizon < 2:
        raise InputError("horizon must be at least 2")
    it: Iterator = iter(stream)
    for _ in range(horizon):
        try:
            x, y = next(it)
        except StopIteration:
            break
        r = session.feed(x, y)
        if r is not None and r.stopped:
            break
    return session.verdict()


def d_skit(xs, ys, B: int, config: SessionConfig, seed: int = 0) -> tuple[float, bool]:
    """Average terminal wealth of the sequential test over ``B`` random orderings of a batch.

    Valid as a level-alpha batch test for i.i.d. data: the mean of nonnegative
    martingales started at one is an e-value.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) == 0:
        raise InputError("empty batch")
    if len(xs) != len(ys):
        raise InputError("x and y batches have different lengths")
    if B < 1:
        raise InputError("B must be at least 1")
    rng = np.random.default_rng(seed)
    run_cfg = SessionConfig.from_dict({**config.to_dict(), "threshold": math.inf, "record_trajectory": False})
    total = 0.0
    for _ in range(B):
        perm = rng.permutation(len(xs))
        s = TestSession(run_cfg)
        for i in perm:
            s.feed(xs[i], ys[i])
        total += s.wealth
    mean = total / B
    return mean, mean >= config.reject_at
