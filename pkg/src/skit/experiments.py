"""Grid runner: scenario parameters x seeds -> per-cell rejection statistics.

A config is one JSON document, for example::

    {"schema_version": 1, "scenario": "gaussian", "grid": {"beta": [0.0, 0.3]},
     "runs": 200, "horizon": 20000, "payoff": "hsic", "bettor": "ons", "alpha": 0.05}

Run ``r`` of every cell reads the stream ``substream(seed, r)``, so cells share
random numbers and a rerun with the same config reproduces ``results.csv`` byte
for byte.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datagen import SCENARIO_PARAMS, ScenarioSpec
from .engine import SessionConfig, TestSession, run_stream
from .errors import ConfigError, SkitError
from .kernels import KernelSpec

SCHEMA_VERSION = 1
RESULT_COLUMNS = [
    "scenario", "param", "payoff", "bettor", "alpha", "runs", "horizon",
    "rejection_rate", "mean_stop", "median_stop", "mean_log_wealth",
    "mean_stop_obs", "median_stop_obs",
]
SESSION_KEYS = {
    "payoff", "bettor", "alpha", "minibatch", "threshold", "agrapa_c", "mixture_grid",
    "kappa1", "kappa2", "delta0", "quantile_lo", "quantile_hi", "eta",
}
TOP_KEYS = SESSION_KEYS | {
    "schema_version", "scenario", "grid", "params", "runs", "horizon", "seed",
    "kernel_x", "kernel_y", "trajectories",
}


@dataclass
class Experiment:
    scenario: str
    grid: dict
    params: dict
    runs: int
    horizon: int
    seed: int
    session: dict
    kernel_x: KernelSpec | None
    kernel_y: KernelSpec | None
    trajectories: bool

    def cells(self) -> list[dict]:
        names = sorted(self.grid)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.grid[k] for k in names))]


def _need(cond: bool, message: str, *path):
    if not cond:
        raise ConfigError(message, path)


def parse_config(cfg: dict) -> Experiment:
    """Validate a config document; errors carry the offending key path."""
    _need(isinstance(cfg, dict), "config must be a JSON object")
    for key in cfg:
        _need(key in TOP_KEYS, f"unknown key {key!r}", key)
    version = cfg.get("schema_version", SCHEMA_VERSION)
    _need(version == SCHEMA_VERSION, f"unsupported schema_version {version!r}", "schema_version")
    scenario = cfg.get("scenario", "gaussian")
    _need(scenario in SCENARIO_PARAMS and scenario != "csv", f"unknown scenario {scenario!r}", "scenario")
    grid = cfg.get("grid", {})
    _need(isinstance(grid, dict), "grid must map parameter names to lists", "grid")
    for k, vals in grid.items():
        _need(k in SCENARIO_PARAMS[scenario], f"{scenario} has no parameter {k!r}", "grid", k)
        _need(isinstance(vals, list) and len(vals) > 0, "grid values must be a non-empty list", "grid", k)
    params = cfg.get("params", {})
    _need(isinstance(params, dict), "params must be an object", "params")
    runs = cfg.get("runs", 200)
    horizon = cfg.get("horizon", 20000)
    _need(isinstance(runs, int) and runs >= 1, "runs must be a positive integer", "runs")
    _need(isinstance(horizon, int) and horizon >= 2, "horizon must be an integer >= 2", "horizon")
    seed = cfg.get("seed", 0)
    _need(isinstance(seed, int) and seed >= 0, "seed must be a nonnegative integer", "seed")
    session = {k: cfg[k] for k in SESSION_KEYS if k in cfg}
    kernels = []
    for side in ("kernel_x", "kernel_y"):
        spec = cfg.get(side)
        if spec is None:
            kernels.append(None)
            continue
        try:
            kernels.append(KernelSpec.from_dict(spec))
        except (SkitError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc), (side,)) from None
    exp = Experiment(scenario, grid, params, runs, horizon, seed, session, kernels[0], kernels[1],
                     bool(cfg.get("trajectories", False)))
    # build every cell once so bad values fail before any run starts
    for cell in exp.cells():
        _session_config(exp, _scenario(exp, cell))
    return exp


def _scenario(exp: Experiment, cell: dict) -> ScenarioSpec:
    try:
        return ScenarioSpec(exp.scenario, {**exp.params, **cell}, exp.seed)
    except ConfigError as exc:
        raise ConfigError(str(exc), ("grid",)) from None


def _session_config(exp: Experiment, sc: ScenarioSpec) -> SessionConfig:
    kx, ky = sc.default_kernels()
    try:
        return SessionConfig(kernel_x=exp.kernel_x or kx, kernel_y=exp.kernel_y or ky, **exp.session)
    except ConfigError:
        raise
    except (SkitError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def run_one(sc: ScenarioSpec, cfg: SessionConfig, run: int, horizon: int, keep_trajectory: bool = False):
    if keep_trajectory:
        cfg = SessionConfig.from_dict({**cfg.to_dict(), "record_trajectory": True})
    s = TestSession(cfg)
    v = run_stream(s, sc.stream(run), horizon)
    return v.rejected, v.stopping_time, v.final_log_wealth, s.trajectory_csv() if keep_trajectory else None


def _run_task(task):
    return run_one(*task)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def _param_label(cell: dict) -> str:
    return ";".join(f"{k}={cell[k]!r}" for k in sorted(cell)) or "-"


def threads() -> int:
    env = os.environ.get("SKIT_THREADS")
    cap = int(env) if env and env.isdigit() and int(env) > 0 else (os.cpu_count() or 1)
    return max(1, cap)


def run_experiment(cfg: dict, out_dir=None, workers: int | None = None) -> list[dict]:
    """Run every (cell, seed) pair and aggregate; writes results.csv when ``out_dir`` is set."""
    exp = parse_config(cfg)
    cells = exp.cells()
    tasks, keys = [], []
    for ci, cell in enumerate(cells):
        sc = _scenario(exp, cell)
        scfg = _session_config(exp, sc)
        for r in range(exp.runs):
            tasks.append((sc, scfg, r, exp.horizon, exp.trajectories and out_dir is not None))
            keys.append((ci, r))
    workers = min(workers or threads(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        outcomes = [_run_task(t) for t in tasks]
    by_key = dict(zip(keys, outcomes))

    unit = int(exp.session.get("minibatch", 2))
    rows = []
    for ci, cell in enumerate(cells):
        res = [by_key[(ci, r)] for r in range(exp.runs)]
        stops = [s for rej, s, _, _ in res if rej]
        rows.append({
            "scenario": exp.scenario,
            "param": _param_label(cell),
            "payoff": exp.session.get("payoff", "hsic"),
            "bettor": exp.session.get("bettor", "ons"),
            "alpha": float(exp.session.get("alpha", 0.05)),
            "runs": exp.runs,
            "horizon": exp.horizon,
            "rejection_rate": len(stops) / exp.runs,
            "mean_stop": float(np.mean(stops)) if stops else None,
            "median_stop": float(np.median(stops)) if stops else None,
            "mean_log_wealth": float(np.mean([lw for _, _, lw, _ in res])),
            "mean_stop_obs": unit * float(np.mean(stops)) if stops else None,
            "median_stop_obs": unit * float(np.median(stops)) if stops else None,
        })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(results_csv(rows), encoding="utf-8")
        if exp.trajectories:
            for (ci, r), (_, _, _, traj) in sorted(by_key.items()):
                (out / f"trajectory_c{ci}_r{r}.csv").write_text(traj, encoding="utf-8")
    return rows


def results_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()
