import pytest
from fastapi.testclient import TestClient

from trialiv import __version__
from trialiv.dgp import DgpConfig, DgpModel, generate
from trialiv.estimators import iv_ratio, policy_estimate
from trialiv.montecarlo import CampaignSpec, EstimatorSpec, run_campaign
from trialiv.service import create_app

TINY = [
    {"r": 0, "t": 0, "y": 1.0},
    {"r": 0, "t": 0, "y": 2.0},
    {"r": 0, "t": 0, "y": 3.0},
    {"r": 0, "t": 1, "y": 10.0},
    {"r": 1, "t": 0, "y": 2.0},
    {"r": 1, "t": 1, "y": 9.0},
    {"r": 1, "t": 1, "y": 8.0},
    {"r": 1, "t": 1, "y": 11.0},
]


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "version": __version__}


def test_estimate_matches_library(client):
    resp = client.post(
        "/estimate",
        json={
            "records": TINY,
            "estimators": [{"name": "policy"}, {"name": "iv_ratio"}],
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["estimands"]["policy"]["estimate"] == 3.5
    assert body["estimands"]["iv_ratio"]["estimate"] == 7.0
    assert body["estimands"]["iv_ratio"]["assumptions"] == [
        "IV1", "IV2", "IV3", "Monotonicity", "Homogeneity",
    ]
    assert body["provenance"]["version"] == __version__


def test_estimate_failure_becomes_warning(client):
    records = [dict(r=i % 2, t=1, y=float(i)) for i in range(8)]
    resp = client.post(
        "/estimate",
        json={"records": records, "estimators": [{"name": "iv_ratio"}]},
    )
    assert resp.status_code == 200
    entry = resp.json()["estimands"]["iv_ratio"]
    assert entry["estimate"] is None
    assert any("WeakInstrument" in w for w in entry["warnings"])


def test_estimate_empty_records_is_400(client):
    resp = client.post(
        "/estimate", json={"records": [], "estimators": [{"name": "policy"}]}
    )
    assert resp.status_code == 400
    assert resp.json()["error"] == "DataError"


def test_estimate_unknown_estimator_is_400(client):
    resp = client.post(
        "/estimate", json={"records": TINY, "estimators": [{"name": "nope"}]}
    )
    assert resp.status_code == 400
    assert resp.json()["error"] == "UnknownEstimatorError"


def test_simulate_deterministic_and_latent_hidden(client):
    req = {"model": "a", "n": 25, "seed": 12}
    first = client.post("/simulate", json=req).json()
    second = client.post("/simulate", json=req).json()
    assert first == second
    covs = first["records"][0]["covariates"]
    assert "s" in covs and "u" not in covs
    with_latent = client.post(
        "/simulate", json={**req, "emit_latent": True}
    ).json()
    assert "u" in with_latent["records"][0]["covariates"]


def test_simulate_matches_generator(client):
    body = client.post("/simulate", json={"model": "c", "n": 10, "seed": 3}).json()
    records = generate(DgpConfig(model=DgpModel.ADHERENCE_C, n=10, seed=3))
    assert [r["y"] for r in body["records"]] == [r.y for r in records]
    assert [r["a"] for r in body["records"]] == [r.a for r in records]


def test_simulate_bad_model_is_400(client):
    assert client.post("/simulate", json={"model": "q", "n": 5}).status_code == 400


def test_simulate_bad_param_is_400(client):
    resp = client.post(
        "/simulate", json={"model": "a", "n": 5, "params": {"nope": 1}}
    )
    assert resp.status_code == 400
    assert resp.json()["error"] == "InvalidParamError"


def test_check_iv_endpoint(client):
    dag = "R -> T\nT -> Y\nU -> T\nU -> Y\nlatent U"
    resp = client.post(
        "/check-iv",
        json={
            "dag": dag,
            "instrument": "R",
            "treatment": "T",
            "outcome": "Y",
            "confounders": ["U"],
        },
    )
    assert resp.status_code == 200
    assert resp.json() == {
        "iv1": True,
        "iv2": True,
        "iv3": True,
        "iv2_open_paths": {},
        "iv3_open_paths": [],
    }
    resp = client.post(
        "/check-iv",
        json={
            "dag": dag + "\nR -> Y",
            "instrument": "R",
            "treatment": "T",
            "outcome": "Y",
            "confounders": ["U"],
        },
    )
    body = resp.json()
    assert body["iv3"] is False
    assert body["iv3_open_paths"] == ["R -> Y"]


def test_check_iv_parse_error_is_400(client):
    resp = client.post(
        "/check-iv",
        json={"dag": "R => T", "instrument": "R", "treatment": "T", "outcome": "Y"},
    )
    assert resp.status_code == 400
    assert resp.json()["error"] == "ParseError"


def test_sensitivity_endpoint(client):
    resp = client.post(
        "/sensitivity",
        json={
            "records": TINY,
            "dace_min": -5.0,
            "dace_max": 5.0,
            "pi_d_min": 0.0,
            "pi_d_max": 0.2,
            "steps": 3,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["observed_iv"] == pytest.approx(7.0)
    zero_slice = [c for c in body["cells"] if c["pi_d"] == 0.0]
    assert all(c["implied_cace"] == pytest.approx(7.0) for c in zero_slice)
    assert len(body["cells"]) == 9


def test_campaign_endpoint_matches_harness(client):
    resp = client.post(
        "/campaign",
        json={
            "model": "a",
            "n": 200,
            "replications": 6,
            "estimators": [{"name": "policy"}, {"name": "iv_ratio"}],
            "master_seed": 55,
        },
    )
    assert resp.status_code == 200
    spec = CampaignSpec(
        dgp=DgpConfig(model=DgpModel.PAIN_TRIAL_A, n=200, seed=0),
        replications=6,
        estimators=(EstimatorSpec("policy"), EstimatorSpec("iv_ratio")),
        master_seed=55,
    )
    expected = run_campaign(spec).summary()
    body = resp.json()["summary"]
    assert body["policy"]["mean"] == pytest.approx(expected["policy"]["mean"])
    assert body["iv_ratio"]["mc_sd"] == pytest.approx(expected["iv_ratio"]["mc_sd"])


def test_validation_error_is_422(client):
    resp = client.post("/simulate", json={"model": "a", "n": "many"})
    assert resp.status_code == 422
