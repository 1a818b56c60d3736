"""``skit`` command line.

Exit codes: 0 retain / success, 2 reject (stream and replay), 64 usage or
config error, 65 malformed data, 70 internal invariant violation.

With ``--server URL`` the ``stream`` and ``batch-hsic`` commands send their
work to a running ``skit serve`` instead of computing in-process.
"""
from __future__ import annotations

import argparse
import json
import sys
import urllib.error
import urllib.request
from pathlib import Path

import numpy as np

from . import baselines
from .datagen import csv_stream, read_csv_rows
from .engine import SessionConfig, TestSession
from .errors import ConfigError, FormatError, SkitError
from .experiments import run_experiment
from .kernels import KINDS, KernelSpec, median_heuristic

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 64, 65, 70
SERVER_CHUNK = 256


class UsageError(SkitError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_kernel_flags(p):
    p.add_argument("--kernel-x", choices=KINDS, default="rbf")
    p.add_argument("--kernel-y", choices=KINDS, default="rbf")
    p.add_argument("--bandwidth-x", type=float, help="kernel rate for x (default 0.25)")
    p.add_argument("--bandwidth-y", type=float, help="kernel rate for y (default 0.25)")
    p.add_argument("--median-heuristic-n", type=int, metavar="K",
                   help="spend the first K observations on picking both rates, then test the rest")


def _add_input_flags(p):
    p.add_argument("--input", default="-", help="CSV file with a header row, or - for stdin")
    p.add_argument("--x-cols", default="x", help="comma-separated x column names")
    p.add_argument("--y-cols", default="y", help="comma-separated y column names")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="skit", description="Sequential kernel independence testing by betting.")
    ap.add_argument("--server", help="base URL of a running skit service")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment grid from a JSON config")
    run.add_argument("config", help="path to the JSON config")
    run.add_argument("--out", default=".", help="output directory for results.csv")
    run.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                     help="override a top-level config key, e.g. --set runs=10")

    st = sub.add_parser("stream", help="test a paired stream, one line per round")
    _add_input_flags(st)
    _add_kernel_flags(st)
    st.add_argument("--payoff", default="hsic")
    st.add_argument("--bettor", default="ons")
    st.add_argument("--alpha", type=float, default=0.05)
    st.add_argument("--threshold", type=float, help="rejection threshold (default 1/alpha)")
    st.add_argument("--minibatch", type=int, default=2)
    st.add_argument("--snapshot-every", type=int, default=0, metavar="ROUNDS")
    st.add_argument("--snapshot-path", default="skit-session.json")

    bh = sub.add_parser("batch-hsic", help="permutation HSIC test at one or more checkpoints")
    _add_input_flags(bh)
    bh.add_argument("--kernel-x", choices=KINDS, default="rbf")
    bh.add_argument("--kernel-y", choices=KINDS, default="rbf")
    bh.add_argument("--bandwidth-x", type=float, default=0.25)
    bh.add_argument("--bandwidth-y", type=float, default=0.25)
    bh.add_argument("--alpha", type=float, default=0.05)
    bh.add_argument("--permutations", type=int, default=1000)
    bh.add_argument("--checkpoints", help="comma-separated sample sizes (default: all rows)")
    bh.add_argument("--bonferroni", action="store_true", help="use alpha/(i(i+1)) at the i-th look")
    bh.add_argument("--seed", type=int, default=0)

    rp = sub.add_parser("replay", help="restore a snapshot and continue on more data")
    rp.add_argument("snapshot")
    _add_input_flags(rp)
    rp.add_argument("--snapshot-out", help="write the final session snapshot here")

    sv = sub.add_parser("serve", help="start the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    return ap


# -- helpers --------------------------------------------------------------

def _rows(args):
    x_cols = [c.strip() for c in args.x_cols.split(",") if c.strip()]
    y_cols = [c.strip() for c in args.y_cols.split(",") if c.strip()]
    if args.input == "-":
        return read_csv_rows(sys.stdin, x_cols, y_cols)
    if not Path(args.input).is_file():
        raise UsageError(f"input file not found: {args.input}")
    return csv_stream(args.input, x_cols, y_cols)


def _round_line(r) -> str:
    return json.dumps({"t": r.t, "f": r.f, "lambda": r.lam, "wealth": r.wealth})


def _report_line(r: dict) -> str:
    return json.dumps({"t": r["t"], "f": r["f"], "lambda": r["lam"], "wealth": r["wealth"]})


def _kernels(args, warmup):
    if args.median_heuristic_n is not None and (args.bandwidth_x is not None or args.bandwidth_y is not None):
        raise UsageError("--median-heuristic-n cannot be combined with --bandwidth-x/--bandwidth-y")
    bx = 0.25 if args.bandwidth_x is None else args.bandwidth_x
    by = 0.25 if args.bandwidth_y is None else args.bandwidth_y
    if warmup is not None:
        xs = np.array([w[0] for w in warmup])
        ys = np.array([w[1] for w in warmup])
        bx, by = median_heuristic(xs), median_heuristic(ys)
    return KernelSpec(args.kernel_x, bx), KernelSpec(args.kernel_y, by)


def _take_warmup(rows, k):
    if k < 2:
        raise UsageError("--median-heuristic-n needs at least 2 observations")
    warm = []
    for row in rows:
        warm.append(row)
        if len(warm) == k:
            return warm
    raise FormatError(f"input ended during the {k}-observation warmup")


def _finish(verdict_rejected: bool, t) -> int:
    print(f"REJECT@{t}" if verdict_rejected else "RETAIN")
    return EXIT_REJECT if verdict_rejected else EXIT_OK


# -- commands -------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=JSON, got {item!r}")
        try:
            cfg[key] = json.loads(raw)
        except json.JSONDecodeError:
            cfg[key] = raw
    rows = run_experiment(cfg, out_dir=args.out)
    for row in rows:
        print(f"{row['param']}: rejection_rate={row['rejection_rate']:.3f} "
              f"median_stop={row['median_stop']} mean_log_wealth={row['mean_log_wealth']:.4f}")
    print(f"wrote {Path(args.out) / 'results.csv'}")
    return EXIT_OK


def _stream_config(args, kx, ky) -> SessionConfig:
    return SessionConfig(payoff=args.payoff, bettor=args.bettor, alpha=args.alpha, kernel_x=kx,
                         kernel_y=ky, minibatch=args.minibatch, threshold=args.threshold)


def cmd_stream(args) -> int:
    rows = _rows(args)
    warm = _take_warmup(rows, args.median_heuristic_n) if args.median_heuristic_n is not None else None
    kx, ky = _kernels(args, warm)
    cfg = _stream_config(args, kx, ky)
    if args.server:
        return _stream_remote(args.server, cfg, rows)
    session = TestSession(cfg)
    for x, y in rows:
        r = session.feed(x, y)
        if r is None:
            continue
        print(_round_line(r), flush=False)
        if args.snapshot_every and r.t % args.snapshot_every == 0:
            Path(args.snapshot_path).write_bytes(session.snapshot())
        if r.stopped:
            break
    sys.stdout.flush()
    v = session.verdict()
    return _finish(v.rejected, v.stopping_time)


def cmd_batch_hsic(args) -> int:
    rows = list(_rows(args))
    xs = np.array([r[0] for r in rows])
    ys = np.array([r[1] for r in rows])
    if args.checkpoints:
        try:
            cps = [int(c) for c in args.checkpoints.split(",") if c.strip()]
        except ValueError:
            raise UsageError(f"bad --checkpoints {args.checkpoints!r}") from None
    else:
        cps = [len(xs)]
    kx = KernelSpec(args.kernel_x, args.bandwidth_x)
    ky = KernelSpec(args.kernel_y, args.bandwidth_y)
    if args.server:
        payload = {
            "xs": xs.tolist(), "ys": ys.tolist(), "checkpoints": cps, "alpha": args.alpha,
            "permutations": args.permutations, "bonferroni": args.bonferroni, "seed": args.seed,
            "kernel_x": kx.to_dict(), "kernel_y": ky.to_dict(),
        }
        res = _post(args.server, "/batch-hsic", payload)
        pvals, ths = res["p_values"], res["thresholds"]
    else:
        res = baselines.continuous_monitor(xs, ys, cps, args.alpha, args.bonferroni, args.permutations,
                                           kx, ky, np.random.default_rng(args.seed))
        pvals, ths = res.p_values, res.thresholds
    print("n,p_value,threshold,reject")
    for c, p, th in zip(cps, pvals, ths):
        print(f"{c},{p!r},{th!r},{int(p < th)}")
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        record = Path(args.snapshot).read_bytes()
    except FileNotFoundError:
        raise UsageError(f"snapshot not found: {args.snapshot}") from None
    session = TestSession.restore(record)
    if session.stopped is None:
        for x, y in _rows(args):
            r = session.feed(x, y)
            if r is None:
                continue
            print(_round_line(r))
            if r.stopped:
                break
    if args.snapshot_out:
        Path(args.snapshot_out).write_bytes(session.snapshot())
    v = session.verdict()
    return _finish(v.rejected, v.stopping_time)


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


# -- thin client ----------------------------------------------------------

def _post(base: str, path: str, payload: dict) -> dict:
    req = urllib.request.Request(
        base.rstrip("/") + path,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode("utf-8", "replace")
        err = FormatError if exc.code == 422 else SkitError
        raise err(f"server returned {exc.code}: {detail}") from None
    except urllib.error.URLError as exc:
        raise UsageError(f"cannot reach server {base}: {exc.reason}") from None


def _stream_remote(base: str, cfg: SessionConfig, rows) -> int:
    sid = _post(base, "/sessions", {"config": cfg.to_dict()})["session_id"]
    status = None
    chunk_x, chunk_y = [], []

    def flush():
        nonlocal status
        status = _post(base, f"/sessions/{sid}/observations", {"xs": chunk_x, "ys": chunk_y})
        for r in status["reports"]:
            print(_report_line(r))
        chunk_x.clear()
        chunk_y.clear()
        return status["verdict"]["rejected"]

    for x, y in rows:
        chunk_x.append(np.asarray(x).tolist())
        chunk_y.append(np.asarray(y).tolist())
        if len(chunk_x) == SERVER_CHUNK and flush():
            break
    else:
        if chunk_x or status is None:
            flush()
    v = status["verdict"]
    return _finish(v["rejected"], v["stopping_time"])


COMMANDS = {
    "run": cmd_run,
    "stream": cmd_stream,
    "batch-hsic": cmd_batch_hsic,
    "replay": cmd_replay,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.server and args.command not in ("stream", "batch-hsic"):
        print(f"skit: --server is not supported for {args.command}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except SkitError as exc:
        print(f"skit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
