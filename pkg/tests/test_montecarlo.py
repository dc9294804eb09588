import numpy as np
import pytest

from trialiv.dgp import DgpConfig, DgpModel, generate
from trialiv.errors import (
    InvalidParamError,
    TooManyResampleFailuresError,
    UnknownEstimatorError,
)
from trialiv.montecarlo import (
    CampaignSpec,
    EstimatorSpec,
    bootstrap_se,
    derive_seed,
    evaluate_estimator,
    export_distribution,
    run_campaign,
    summary_lines,
)
from trialiv.records import TrialRecord


def _spec(n=300, reps=25, estimators=None, **kw):
    return CampaignSpec(
        dgp=DgpConfig(model=DgpModel.PAIN_TRIAL_A, n=n, seed=0),
        replications=reps,
        estimators=estimators
        or (
            EstimatorSpec("policy"),
            EstimatorSpec("iv_ratio"),
            EstimatorSpec("complier_fraction"),
        ),
        master_seed=kw.pop("master_seed", 77),
        **kw,
    )


# --- spec validation -----------------------------------------------------------


def test_unknown_estimator_rejected_at_spec_time():
    with pytest.raises(UnknownEstimatorError):
        EstimatorSpec("made_up")


def test_duplicate_columns_rejected():
    with pytest.raises(InvalidParamError):
        _spec(estimators=(EstimatorSpec("policy"), EstimatorSpec("policy")))


def test_labels_disambiguate_duplicates():
    spec = _spec(
        estimators=(
            EstimatorSpec("policy"),
            EstimatorSpec("policy", label="policy_again"),
        ),
        reps=3,
    )
    result = run_campaign(spec)
    assert result.columns == ("policy", "policy_again")
    assert np.array_equal(result.values[:, 0], result.values[:, 1])


def test_replications_must_be_positive():
    with pytest.raises(InvalidParamError):
        _spec(reps=0)


# --- determinism ------------------------------------------------------------------


def test_rerun_is_bit_identical():
    spec = _spec(reps=20)
    a = run_campaign(spec)
    b = run_campaign(spec)
    assert np.array_equal(a.values, b.values)


def test_parallel_matches_serial():
    spec = _spec(reps=16)
    serial = run_campaign(spec, workers=1)
    parallel = run_campaign(spec, workers=4)
    assert np.array_equal(serial.values, parallel.values)


def test_seed_derivation_is_stable_and_distinct():
    seeds = {derive_seed(5, i) for i in range(100)}
    assert len(seeds) == 100
    assert derive_seed(5, 3) == derive_seed(5, 3)
    assert derive_seed(5, 3) != derive_seed(5, 3, stream=1)


# --- aggregation --------------------------------------------------------------------


def test_single_replication_sd_undefined():
    result = run_campaign(_spec(reps=1))
    summary = result.summary()["policy"]
    assert summary["mc_sd"] is None
    assert summary["mean"] == pytest.approx(result.values[0, 0])


def test_summary_recomputable_from_matrix():
    result = run_campaign(_spec(reps=30))
    summary = result.summary()
    for k, col in enumerate(result.columns):
        vals = result.values[:, k]
        assert summary[col]["mean"] == pytest.approx(vals.mean(), rel=1e-12)
        assert summary[col]["mc_sd"] == pytest.approx(vals.std(ddof=1), rel=1e-12)


def test_failures_recorded_not_fatal():
    # a constant-instrument dataset makes iv_ratio fail on every replication
    spec = CampaignSpec(
        dgp=DgpConfig(
            model=DgpModel.PAIN_TRIAL_A,
            n=80,
            seed=0,
            params={"t_intercept": 30.0, "t_u": 0.0, "t_r": 0.0, "t_rs": 0.0},
        ),
        replications=4,
        estimators=(EstimatorSpec("policy"), EstimatorSpec("iv_ratio")),
        master_seed=1,
    )
    result = run_campaign(spec)
    assert result.summary()["policy"]["n_fail"] == 0
    assert result.summary()["iv_ratio"]["n_fail"] == 4
    assert result.failures["iv_ratio"] == {"WeakInstrumentError": 4}
    assert np.isnan(result.column_values("iv_ratio")).all()


def test_export_distribution_round_trip():
    result = run_campaign(_spec(reps=12))
    series = export_distribution(result, "policy")
    assert series.shape == (12,)
    assert series.mean() == pytest.approx(result.summary()["policy"]["mean"])
    with pytest.raises(UnknownEstimatorError):
        export_distribution(result, "nope")


def test_export_toy_campaign_exact_series():
    spec = _spec(reps=3)
    result = run_campaign(spec)
    by_hand = []
    from dataclasses import replace

    for i in range(3):
        cfg = replace(spec.dgp, seed=derive_seed(spec.master_seed, i))
        by_hand.append(evaluate_estimator("policy", generate(cfg)).value)
    assert np.array_equal(export_distribution(result, "policy"), by_hand)


def test_summary_lines_render():
    lines = summary_lines(run_campaign(_spec(reps=5)))
    assert len(lines) == 3
    assert lines[0].startswith("policy: mean=")


# --- monte carlo error scaling --------------------------------------------------------


def test_mc_sd_shrinks_like_root_n():
    sds = {}
    for n in (250, 500, 1000):
        spec = CampaignSpec(
            dgp=DgpConfig(model=DgpModel.PAIN_TRIAL_A, n=n, seed=0),
            replications=600,
            estimators=(EstimatorSpec("policy"),),
            master_seed=11,
        )
        sds[n] = run_campaign(spec).summary()["policy"]["mc_sd"]
    for big, small in ((250, 500), (500, 1000)):
        ratio = sds[big] / sds[small]
        assert ratio == pytest.approx(np.sqrt(2.0), rel=0.20)


# --- bootstrap -------------------------------------------------------------------------


def test_bootstrap_requires_minimum_reps():
    recs = generate(DgpConfig(model=DgpModel.PAIN_TRIAL_A, n=50, seed=1))
    with pytest.raises(InvalidParamError):
        bootstrap_se(recs, "policy", reps=10)


def test_bootstrap_constant_estimator_gives_zero():
    # complier_fraction is constant when compliance is perfect
    recs = [
        TrialRecord(r=i % 2, t=i % 2, y=float(i)) for i in range(40)
    ]
    se = bootstrap_se(recs, "complier_fraction", reps=200, seed=4)
    assert se == 0.0


def test_bootstrap_tracks_analytic_se_of_mean_contrast():
    recs = generate(DgpConfig(model=DgpModel.PAIN_TRIAL_A, n=200, seed=5))
    se = bootstrap_se(recs, "policy", reps=600, seed=3)
    y = np.array([r.y for r in recs])
    r = np.array([r.r for r in recs])
    analytic = np.sqrt(
        y[r == 1].var(ddof=1) / (r == 1).sum() + y[r == 0].var(ddof=1) / (r == 0).sum()
    )
    assert se == pytest.approx(analytic, rel=0.15)


def test_bootstrap_failure_budget():
    # one treated subject in the whole sample: resamples drop it ~37% of
    # the time, leaving a constant treatment column and a weak instrument
    recs = [TrialRecord(r=i % 2, t=0, y=float(i % 3)) for i in range(99)]
    recs.append(TrialRecord(r=1, t=1, y=5.0))
    with pytest.raises(TooManyResampleFailuresError):
        bootstrap_se(recs, "iv_ratio", reps=200, seed=8)


def test_campaign_bootstrap_ses_populated():
    spec = _spec(reps=3, bootstrap_reps=120)
    result = run_campaign(spec)
    assert result.bootstrap_ses is not None
    assert result.bootstrap_ses.shape == result.values.shape
    assert np.all(result.bootstrap_ses[:, 0] > 0)
    assert "mean_bootstrap_se" in result.summary()["policy"]


def test_bootstrap_se_comparable_to_replication_sd():
    # per-dataset bootstrap SE of the biomarker-setting hypothetical
    # estimate should land in the neighbourhood of its replication SD
    recs = generate(DgpConfig(model=DgpModel.BIOMARKER_B, n=500, seed=6))
    se = bootstrap_se(
        recs, "psi_t", options={"covariate": "x", "link": "logistic"},
        reps=150, seed=2,
    )
    assert 0.04 < se < 0.16  # replication SD is about 0.08


def test_homogeneity_statistic_centers_at_zero_under_equal_effects():
    spec = CampaignSpec(
        dgp=DgpConfig(
            model=DgpModel.PAIN_TRIAL_A, n=1000, seed=0,
            params={"psi_at": -20.0},
        ),
        replications=300,
        estimators=(EstimatorSpec("homogeneity_diff", {"covariate": "s"}),),
        master_seed=33,
    )
    summary = run_campaign(spec).summary()["homogeneity_diff"]
    mc_se = summary["mc_sd"] / np.sqrt(summary["n_ok"])
    assert abs(summary["mean"]) < 3.0 * mc_se


def test_structural_override_propagates_downstream():
    # zeroing the treated-arm effect moves the hypothetical estimate from
    # around -0.14 to around zero
    def mean_psi_star(params):
        spec = CampaignSpec(
            dgp=DgpConfig(
                model=DgpModel.BIOMARKER_B, n=2000, seed=0, params=params
            ),
            replications=60,
            estimators=(
                EstimatorSpec("psi_t", {"covariate": "x", "link": "logistic"}),
            ),
            master_seed=21,
        )
        return run_campaign(spec).summary()["psi_t"]["mean"]

    assert mean_psi_star({}) < -0.10
    assert abs(mean_psi_star({"psi_b": 0.0})) < 0.05
