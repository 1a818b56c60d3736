import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from skit.betting import (
    ONS_STEP,
    AgrapaBettor,
    FixedBettor,
    MixtureBettor,
    OnsBettor,
    bettor_from_dict,
    make_bettor,
    mixture_update,
    oracle_lambda,
)
from skit.errors import ConfigError, InputError

payoffs = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=300)


def test_ons_constant_full_precision(golden):
    assert ONS_STEP == golden["betting"]["ons_step"]
    assert ONS_STEP == pytest.approx(2.2188, abs=1e-4)


class TestOnsVerbatim:
    def test_zero_payoff(self):
        b = OnsBettor("verbatim")
        b.update(0.0)
        assert (b.lam, b.a) == (0.0, 1.0)

    def test_positive_payoff(self):
        b = OnsBettor("verbatim")
        b.update(1.0)
        assert (b.lam, b.a) == (0.0, 2.0)

    def test_negative_payoff(self):
        b = OnsBettor("verbatim")
        b.update(-1.0)
        assert b.a == 2.0
        assert b.lam == 0.5  # 0 + 2.2188 * 0.5 clipped


class TestOnsAscent:
    def test_zero_payoff(self):
        b = OnsBettor()
        b.update(0.0)
        assert (b.lam, b.a) == (0.0, 1.0)

    def test_positive_payoff_raises_fraction(self):
        b = OnsBettor()
        b.update(1.0)
        assert b.a == 2.0 and b.lam == 0.5

    def test_negative_payoff_keeps_zero(self):
        b = OnsBettor()
        b.update(-1.0)
        assert b.a == 2.0 and b.lam == 0.0

    def test_matches_reference_loop(self, rng):
        fs = rng.uniform(-1, 1, 500) * 0.6 + 0.1
        b, seen = OnsBettor(), []
        for f in fs:
            seen.append(b.lam)
            b.update(f)
        np.testing.assert_allclose(seen, oracles.ons_reference(fs), rtol=0, atol=1e-15)

    def test_rejects_out_of_range(self):
        with pytest.raises(InputError):
            OnsBettor().update(1.5)


@settings(max_examples=200, deadline=None)
@given(payoffs, st.sampled_from(["ascent", "verbatim"]))
def test_ons_fraction_stays_in_range(fs, variant):
    b = OnsBettor(variant)
    a_prev = b.a
    for f in fs:
        b.update(f)
        assert 0.0 <= b.lam <= 0.5
        assert b.a >= a_prev >= 1.0
        a_prev = b.a


def test_ons_long_fuzz():
    rng = np.random.default_rng(0)
    b = OnsBettor()
    for f in rng.uniform(-1, 1, 100_000):
        b.update(f)
        assert 0.0 <= b.lam <= 0.5


class TestAgrapa:
    def test_positive(self):
        b = AgrapaBettor()
        b.update(0.5)
        assert (b.mu1, b.mu2, b.lam) == (0.5, 1.25, 0.4)

    def test_negative_truncated(self):
        b = AgrapaBettor()
        b.update(-0.5)
        assert b.lam == 0.0

    def test_zero(self):
        b = AgrapaBettor()
        b.update(0.0)
        assert b.lam == 0.0

    @settings(max_examples=100, deadline=None)
    @given(payoffs, st.floats(0.05, 1.0))
    def test_range(self, fs, c):
        b = AgrapaBettor(c)
        for f in fs:
            b.update(f)
            assert 0.0 <= b.lam <= c


class TestMixture:
    def test_zero_grid(self):
        w = np.ones(1)
        for f in (1.0, -1.0, 0.3):
            w, mixed = mixture_update([0.0], w, f)
            assert mixed == 1.0

    def test_one_step(self):
        w, mixed = mixture_update([0.0, 0.5], [1.0, 1.0], 1.0)
        assert w.tolist() == [1.0, 1.5] and mixed == 1.25

    def test_bettor_matches_explicit_mixture(self, rng):
        grid = [0.1, 0.3, 0.7]
        b = MixtureBettor(grid)
        w, wealth = np.ones(3), 1.0
        for f in rng.uniform(-1, 1, 200):
            wealth *= 1 + b.lam * f
            b.update(f)
            w, mixed = mixture_update(grid, w, f)
            assert wealth == pytest.approx(mixed, rel=1e-10)
            assert b.mixed_wealth == pytest.approx(mixed, rel=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(payoffs)
    def test_nonnegative(self, fs):
        b = MixtureBettor()
        for f in fs:
            assert b.update(f) >= 0.0

    def test_bad_grid(self):
        with pytest.raises(ConfigError):
            MixtureBettor([0.5, 1.0])


class TestOracleLambda:
    def test_example_distribution(self, golden):
        assert oracle_lambda(0.2, 1.0) == pytest.approx(1 / 6, abs=1e-12)
        assert oracle_lambda(0.2, 1.0) == pytest.approx(golden["betting"]["oracle_lambda_example"], abs=1e-15)

    def test_zero_mean(self):
        assert oracle_lambda(0.0, 0.5) == 0.0

    def test_bad_denominator(self):
        with pytest.raises(InputError):
            oracle_lambda(-1.0, 0.5)


class TestKellyOracle:
    def test_example(self, golden):
        lam, _ = oracles.kelly_grid([1.0, -1.0], [0.6, 0.4])
        assert lam == pytest.approx(0.2, abs=1e-3)
        assert golden["betting"]["kelly_example"] == pytest.approx(0.2, abs=1e-3)

    def test_symmetric(self):
        assert oracles.kelly_grid([1.0, -1.0], [0.5, 0.5])[0] == 0.0

    def test_point_mass_hits_boundary(self):
        lam, _ = oracles.kelly_grid([1.0], [1.0])
        assert lam == pytest.approx(1 - 1e-4)


@pytest.mark.parametrize("spec,cls", [("ons", OnsBettor), ("agrapa", AgrapaBettor), ("mixture", MixtureBettor), ("fixed:0.2", FixedBettor)])
def test_make_and_round_trip(spec, cls, rng):
    b = make_bettor(spec)
    assert isinstance(b, cls)
    for f in rng.uniform(-1, 1, 10):
        b.update(f)
    r = bettor_from_dict(b.to_dict())
    assert r.lam == b.lam
    assert r.to_dict() == b.to_dict()


@pytest.mark.parametrize("spec", ["kelly", "fixed:abc", "fixed:1.5"])
def test_bad_specs(spec):
    with pytest.raises(ConfigError):
        make_bettor(spec)


def test_wealth_factor_positive():
    for lam in np.linspace(0, 0.5, 11):
        for f in np.linspace(-1, 1, 21):
            assert 1 + lam * f >= 0.5


def test_ons_growth_matches_best_constant_bet():
    rng = np.random.default_rng(21)
    fs = np.where(rng.random(100_000) < 0.6, 1.0, -1.0)
    b, logw = OnsBettor(), 0.0
    for f in fs:
        logw += math.log1p(b.lam * f)
        b.update(f)
    _, best = oracles.kelly_grid([1.0, -1.0], [0.6, 0.4])
    assert abs(logw / len(fs) - best) <= 0.01


def test_overshooting_loses():
    rng = np.random.default_rng(4)
    n = 2_000_000
    w = np.where(rng.random(n) < 0.6, 1.0, -1.0)
    est = np.log1p(0.4 * w)
    assert est.mean() + 4 * est.std() / math.sqrt(n) < 0
