"""Statistical acceptance checks for the full test.

Each criterion records one PASS/FAIL line (printed and repeated in the pytest
terminal summary) and then asserts. These are slow: the whole module takes
roughly forty minutes on one core. Deselect with ``-m "not acceptance"``.
"""
import math

import numpy as np
import pytest

import oracles
from skit.baselines import biased_hsic, continuous_monitor, permutation_test
from skit.betting import oracle_lambda
from skit.datagen import ScenarioSpec, take
from skit.engine import SessionConfig, TestSession, run_stream
from skit.hsic import HsicState
from skit.kernels import KernelSpec
from skit.lowrank import kernel_cholesky, pivoted_incomplete_cholesky, solve_coco, solve_kcc

pytestmark = pytest.mark.acceptance

ALPHA = 0.05
HORIZON = 20_000
SEEDS = 200


def level_bound(alpha, n):
    return alpha + 3 * math.sqrt(alpha * (1 - alpha) / n)


def run_grid(scenario, params, runs, horizon=HORIZON, seed=0, **session):
    """Run ``runs`` independent sessions; returns (rejected flags, stopping rounds)."""
    sc = ScenarioSpec(scenario, params, seed)
    kx, ky = sc.default_kernels()
    session = {"kernel_x": kx, "kernel_y": ky, **session}
    rejected, stops = [], []
    for r in range(runs):
        v = run_stream(TestSession(SessionConfig(**session)), sc.stream(r), horizon)
        rejected.append(v.rejected)
        if v.rejected:
            stops.append(v.stopping_time)
    return np.array(rejected), np.array(stops)


def test_type_one_error_control(report):
    rej, _ = run_grid("gaussian", {"beta": 0.0}, SEEDS, seed=101)
    rate, bound = rej.mean(), level_bound(ALPHA, SEEDS)
    assert report(1, "type-I control (gaussian null)", rate <= bound, f"rate={rate:.3f} bound={bound:.3f}")


def test_power_and_adaptivity(report):
    rej_hi, stop_hi = run_grid("gaussian", {"beta": 0.3}, SEEDS, seed=102)
    rej_lo, stop_lo = run_grid("gaussian", {"beta": 0.15}, SEEDS, seed=103)
    med_hi = float(np.median(stop_hi)) if len(stop_hi) else math.inf
    med_lo = float(np.median(stop_lo)) if len(stop_lo) else math.inf
    ok = rej_hi.mean() >= 0.95 and med_hi < med_lo
    detail = (f"power(0.3)={rej_hi.mean():.3f} median_stop(0.3)={med_hi:.0f} "
              f"power(0.15)={rej_lo.mean():.3f} median_stop(0.15)={med_lo:.0f} (pairs)")
    assert report(2, "power and adaptivity", ok, detail)


def test_drift_validity_and_power(report):
    sc = ScenarioSpec("drift_sin", {"rho": 0.0, "c": 1.0}, seed=104)
    kx, ky = sc.default_kernels()
    rej, batch = [], []
    rng = np.random.default_rng(204)
    for r in range(SEEDS):
        rej.append(run_stream(TestSession(SessionConfig(kernel_x=kx, kernel_y=ky)), sc.stream(r), HORIZON).rejected)
        xs, ys = take(sc.stream(r), 1000)
        batch.append(permutation_test(xs, ys, kx, ky, 1000, rng).p_value < ALPHA)
    skit_rate, batch_rate = float(np.mean(rej)), float(np.mean(batch))
    power, _ = run_grid("drift_sin", {"rho": 0.5, "c": 1.0}, SEEDS, seed=105)
    bound = level_bound(ALPHA, SEEDS)
    ok = skit_rate <= bound and batch_rate >= skit_rate + 0.10 and power.mean() >= 0.9
    detail = (f"skit_null_rate={skit_rate:.3f} (bound {bound:.3f}) batch_rate@1000={batch_rate:.3f} "
              f"skit_power(rho=0.5)={power.mean():.3f}")
    assert report(3, "drift validity and power", ok, detail)


def test_continuous_monitoring_inflation(report):
    runs, checkpoints = 100, list(range(50, 601, 50))
    sc = ScenarioSpec("gaussian", {"beta": 0.0}, seed=106)
    k = KernelSpec("rbf", 0.25)
    first_plain, first_corr = [], []
    rng = np.random.default_rng(206)
    for r in range(runs):
        xs, ys = take(sc.stream(r), checkpoints[-1])
        plain = continuous_monitor(xs, ys, checkpoints, ALPHA, False, 1000, k, k, rng)
        # the corrected monitor reuses the same p-values with smaller thresholds
        corr = [p < ALPHA / (i * (i + 1)) for i, p in enumerate(plain.p_values, start=1)]
        first_plain.append(plain.first_rejection)
        first_corr.append(next((c for c, hit in zip(checkpoints, corr) if hit), None))
    cum_plain = [np.mean([f is not None and f <= c for f in first_plain]) for c in checkpoints]
    cum_corr = [np.mean([f is not None and f <= c for f in first_corr]) for c in checkpoints]
    bound = level_bound(ALPHA, runs)
    monotone = all(b >= a for a, b in zip(cum_plain, cum_plain[1:]))
    ok = monotone and cum_plain[-1] > ALPHA and cum_corr[-1] <= bound
    detail = (f"uncorrected={[round(float(v), 2) for v in cum_plain]} "
              f"bonferroni_final={cum_corr[-1]:.3f} (bound {bound:.3f})")
    assert report(4, "continuous-monitoring inflation", ok, detail)


@pytest.mark.parametrize("payoff", ["hsic", "coco", "kcc", "sym_odd", "sym_rank", "sym_pred"])
def test_null_wealth_is_a_martingale(payoff, report):
    n_seeds, rounds = 2000, 500
    sc = ScenarioSpec("gaussian", {"beta": 0.0}, seed=107)
    kx, ky = sc.default_kernels()
    cfg = SessionConfig(payoff=payoff, kernel_x=kx, kernel_y=ky, threshold=math.inf)
    final, crossed = [], []
    for r in range(n_seeds):
        s = TestSession(cfg)
        run_stream(s, sc.stream(r), 2 * rounds)
        final.append(s.wealth)
        crossed.append(s.max_log_wealth >= math.log(1 / ALPHA))
    final = np.array(final)
    se = final.std(ddof=1) / math.sqrt(n_seeds)
    p_cross, bound = float(np.mean(crossed)), level_bound(ALPHA, n_seeds)
    ok = abs(final.mean() - 1) <= 4 * se and p_cross <= bound
    detail = f"mean_wealth={final.mean():.4f} (4SE={4 * se:.4f}) P(max>=1/alpha)={p_cross:.4f} (bound {bound:.4f})"
    assert report(5, f"null martingale [{payoff}]", ok, detail)


def test_growth_rate_floor(report):
    sc = ScenarioSpec("gaussian", {"beta": 0.5}, seed=108)
    kx, ky = sc.default_kernels()
    xs, ys = take(sc.stream(1), 100_000)
    hsic = biased_hsic(xs, ys, kx, ky)
    s = TestSession(SessionConfig(kernel_x=kx, kernel_y=ky, threshold=math.inf))
    run_stream(s, sc.stream(0), 200_000)
    rate = s.log_wealth / s.round
    ok = s.round == 100_000 and rate >= 0.9 * hsic / 4
    assert report(6, "growth-rate floor", ok, f"log(K_t)/t={rate:.5f} 0.9*HSIC/4={0.9 * hsic / 4:.5f} t={s.round}")


def test_oracle_betting_fixtures(report):
    kelly, _ = oracles.kelly_grid([1.0, -1.0], [0.6, 0.4])
    rng = np.random.default_rng(109)
    n = 2_000_000
    w = np.where(rng.random(n) < 0.6, 1.0, -1.0)
    logs = np.log1p(0.4 * w)
    upper = logs.mean() + 4 * logs.std() / math.sqrt(n)
    frac = oracle_lambda(0.2, 1.0)
    ok = abs(kelly - 0.2) <= 1e-3 and upper < 0 and abs(frac - 1 / 6) <= 1e-9
    detail = f"kelly={kelly:.4f} E_log(1+0.4W)<= {upper:.5f} oracle_fraction={frac:.10f}"
    assert report(7, "oracle betting fixtures", ok, detail)


def test_numerics_equivalence(report):
    rng = np.random.default_rng(110)
    worst_cache = 0.0
    for _ in range(10):
        x = rng.normal(size=200)
        y = np.sin(2 * x) + rng.normal(size=200)
        s = HsicState(KernelSpec("rbf", 0.25), KernelSpec("rbf", 0.25))
        for i in range(0, 200, 2):
            s.append(x[i : i + 2], y[i : i + 2])
        ref = oracles.dense_sums(0.25, 0.25, x, y)
        for key in ("delta1", "delta2", "delta3", "delta4"):
            worst_cache = max(worst_cache, abs(getattr(s, key) - ref[key]) / abs(ref[key]))
    worst_gamma = 0.0
    for _ in range(10):
        n = int(rng.integers(10, 51))
        x = rng.normal(size=n)
        y = x**2 + rng.normal(size=n)
        fx = kernel_cholesky(KernelSpec("rbf", 0.25), x, 1e-12 * n)
        fy = kernel_cholesky(KernelSpec("rbf", 0.5), y, 1e-12 * n)
        k, l = oracles.dense_gram(0.25, x), oracles.dense_gram(0.5, y)
        for crit, solve in (("coco", solve_coco), ("kcc", solve_kcc)):
            got = solve(fx, fy, n)[1]
            worst_gamma = max(worst_gamma, abs(got - oracles.dense_geneig(k, l, crit)[2]))
    chol_ok = True
    for _ in range(200):
        n = int(rng.integers(2, 60))
        a = rng.normal(size=(n, int(rng.integers(1, n + 1))))
        kmat = a @ a.T
        delta = float(rng.uniform(1e-6, 1.0)) * np.trace(kmat)
        f = pivoted_incomplete_cholesky(lambda j: kmat[:, j], np.diag(kmat), delta)
        chol_ok &= bool(np.trace(kmat - f.g @ f.g.T) <= delta + 1e-9 * np.trace(kmat))
    ok = worst_cache <= 1e-9 and worst_gamma <= 1e-6 and chol_ok
    detail = f"cache_rel_err={worst_cache:.2e} gamma_abs_err={worst_gamma:.2e} cholesky_residual_ok={chol_ok}"
    assert report(8, "numerics equivalence", ok, detail)


def test_symmetry_payoff_power_and_linear_kernel_null(report):
    power, _ = run_grid("gaussian", {"beta": 0.3}, SEEDS, seed=111, payoff="sym_rank", bettor="agrapa")
    lin = KernelSpec("linear", 1.0)
    null, _ = run_grid("spherical", {"d": 5}, SEEDS, seed=112, payoff="sym_rank", bettor="agrapa",
                       kernel_x=lin, kernel_y=lin)
    bound = level_bound(ALPHA, SEEDS)
    ok = power.mean() >= 0.9 and null.mean() <= bound
    detail = f"sym_rank_power(beta=0.3)={power.mean():.3f} linear_null_rate(sphere d=5)={null.mean():.3f} (bound {bound:.3f})"
    assert report(9, "symmetry payoffs", ok, detail)


def test_snapshot_determinism(report):
    rng = np.random.default_rng(113)
    payoffs = ["hsic", "coco", "kcc", "sym_odd", "sym_rank", "sym_pred"]
    bettors = ["ons", "agrapa", "mixture", "ons-verbatim"]
    mismatches = 0
    for i in range(50):
        cfg = SessionConfig(payoff=payoffs[i % 6], bettor=bettors[int(rng.integers(4))], threshold=math.inf,
                            record_trajectory=True)
        sc = ScenarioSpec("gaussian", {"beta": float(rng.uniform(0, 0.5))}, seed=int(rng.integers(1 << 30)))
        xs, ys = take(sc.stream(0), int(rng.integers(20, 400)))
        cut = int(rng.integers(1, len(xs)))
        whole = TestSession(cfg)
        whole.feed_many(xs, ys)
        head = TestSession(cfg)
        head.feed_many(xs[:cut], ys[:cut])
        tail = TestSession.restore(head.snapshot())
        tail.feed_many(xs[cut:], ys[cut:])
        mismatches += tail.snapshot() != whole.snapshot()
    assert report(10, "snapshot determinism", mismatches == 0, f"{50 - mismatches}/50 split runs bit-identical")
