import math

import numpy as np
import pytest

import clonecommons as cc


def test_zinb_log_pmf_hand_value():
    assert cc.zinb_log_pmf(0, 2.0, 1.0, 0.2) == pytest.approx(math.log(0.2 + 0.8 / 3.0), abs=1e-12)
    assert cc.zinb_log_pmf(3, 1.0, 1.0, 0.0) == pytest.approx(-4 * math.log(2.0), abs=1e-12)


def test_standardize_roundtrip():
    values = [0.0, 3.0, 12.0, 55.0]
    stdized, mean, sd = cc.log1p_standardize(values)
    recovered = [math.expm1(z * sd + mean) for z in stdized]
    assert recovered == pytest.approx(values, abs=1e-9)


def test_complexity_and_duplicates():
    assert cc.cyclomatic_complexity("void f() { if (x) { g(); } }") == 2
    shared = "\n".join(f"line_{i}();" for i in range(15))
    prefix_a = "\n".join(f"a_{i}();" for i in range(12)) + "\n"
    prefix_b = "\n".join(f"b_{i}();" for i in range(12)) + "\n"
    blocks = cc.duplicate_blocks({"a.java": prefix_a + shared, "b.java": prefix_b + shared},
                                 window=10)
    assert blocks == {"a.java": 1, "b.java": 1}


def test_find_team():
    org = '[{"valid_from":"2020-01-01","teams":{"Red":["alice"]}}]'
    assert cc.find_team("alice", "2020-06-01", org) == "Red"
    assert cc.find_team("mallory", "2020-06-01", org) == "Unknown"


def test_simulate_fit_loo_pipeline():
    ds = cc.simulate_dataset(model="m0", teams=2, repos=2, n=200, seed=3)
    assert ds.n_obs == 200
    fit = cc.fit(ds, model="m0", chains=2, warmup=150, samples=120, seed=5)
    summary = fit.summary()
    assert summary["n_draws"] == 240
    assert summary["max_rhat"] < 1.3  # smoke-sized fit, loose bound

    ll = fit.log_lik()
    assert ll.shape == (240, 200)
    loo = cc.psis_loo(ll)
    assert np.isfinite(loo["elpd"])
    assert len(loo["pointwise"]) == 200

    pred = fit.prob_at_least_one({"team": "AVERAGE", "add": 143, "rem": 92, "comp": 282,
                                  "dup": 36})
    assert 0.0 <= pred["lo"] <= pred["estimate"] <= pred["hi"] <= 1.0

    draws = fit.posterior_predict({"team": "AVERAGE"}, n_rep=2, seed=7)
    assert len(draws) == 2 * 240


def test_diagnostic_helpers():
    rng = np.random.default_rng(1)
    chains = [list(rng.normal(size=500)) for _ in range(4)]
    assert cc.split_rhat(chains) < 1.05
    assert cc.ess(chains) > 500

    k, sigma, degenerate = cc.gpd_fit_tail(list(rng.exponential(size=2000)))
    assert not degenerate
    assert abs(k) < 0.15

    observed = [0] * 90 + [1] * 8 + [3] * 2
    draws, obs_value = cc.ppc_stat(observed, [observed, observed], "prop_zero")
    assert obs_value == pytest.approx(0.9)
    assert draws == pytest.approx([0.9, 0.9])
