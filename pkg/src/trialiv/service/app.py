"""FastAPI application exposing the core operations over HTTP.

The service is a thin wrapper: requests are converted to records and
configs, handed to the same functions the CLI uses, and the results are
serialized back. Data problems map to 400, estimation failures to 422
(except inside /estimate, where per-estimator failures are reported as
warnings in the response body, matching the CLI report format).
"""

from __future__ import annotations

import math
from typing import List

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..dag import Dag, check_iv
from ..dgp import DgpConfig, DgpModel, Variant, generate_with_report
from ..errors import DataError, EstimationError
from ..estimators import compliance_profile, defier_sensitivity, iv_ratio
from ..montecarlo import CampaignSpec, EstimatorSpec, run_campaign
from ..records import TrialRecord
from ..report import build_report, config_hash
from . import schemas

import numpy as np

MODEL_ALIASES = {
    "a": DgpModel.PAIN_TRIAL_A,
    "pain_trial_a": DgpModel.PAIN_TRIAL_A,
    "b": DgpModel.BIOMARKER_B,
    "biomarker_b": DgpModel.BIOMARKER_B,
    "c": DgpModel.ADHERENCE_C,
    "adherence_c": DgpModel.ADHERENCE_C,
}

LATENT_NAMES = ("u", "z_latent")


def _to_records(payload: List[schemas.RecordIn]) -> List[TrialRecord]:
    if not payload:
        raise DataError("request carries no records")
    return [
        TrialRecord(
            r=item.r, t=item.t, y=item.y, a=item.a, z=item.z,
            covariates=dict(item.covariates),
        )
        for item in payload
    ]


def _from_record(rec: TrialRecord, emit_latent: bool) -> schemas.RecordIn:
    covs = {
        k: v
        for k, v in rec.covariates.items()
        if emit_latent or k not in LATENT_NAMES
    }
    return schemas.RecordIn(r=rec.r, t=rec.t, y=rec.y, a=rec.a, z=rec.z, covariates=covs)


def _model(raw: str) -> DgpModel:
    try:
        return MODEL_ALIASES[raw.lower()]
    except KeyError:
        raise DataError(f"model must be one of {sorted(MODEL_ALIASES)}") from None


def create_app() -> FastAPI:
    app = FastAPI(
        title="trialiv",
        version=__version__,
        description="Instrumental-variable estimation of clinical-trial "
        "estimands, sensitivity analyses, and seeded simulation studies.",
    )

    @app.exception_handler(DataError)
    async def _data_error(request, exc: DataError):
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(EstimationError)
    async def _estimation_error(request, exc: EstimationError):
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        config = DgpConfig(
            model=_model(req.model),
            n=req.n,
            seed=req.seed,
            params=req.params,
            variant=Variant(req.variant),
        )
        records, report = generate_with_report(config)
        return schemas.SimulateResponse(
            records=[_from_record(r, req.emit_latent) for r in records],
            clamp_fraction=report.clamp_fraction,
        )

    @app.post("/estimate", response_model=schemas.EstimateResponse)
    def estimate(req: schemas.EstimateRequest):
        records = _to_records(req.records)
        digest = config_hash(
            repr([(e.name, sorted(e.options.items())) for e in req.estimators]).encode(),
            str(len(records)).encode(),
        )
        report = build_report(
            records,
            [(e.name, e.options) for e in req.estimators],
            bootstrap_reps=req.bootstrap_reps,
            seed=req.seed,
            command="POST /estimate",
            input_hash=digest,
        )
        return report

    @app.post("/check-iv", response_model=schemas.CheckIvResponse)
    def check_iv_endpoint(req: schemas.CheckIvRequest):
        graph = Dag.from_text(req.dag)
        result = check_iv(
            graph, req.instrument, req.treatment, req.outcome, req.confounders
        )
        return schemas.CheckIvResponse(
            iv1=result.iv1,
            iv2=result.iv2,
            iv3=result.iv3,
            iv2_open_paths={
                conf: [graph.render_path(v.path) for v in paths]
                for conf, paths in result.iv2_open_paths.items()
            },
            iv3_open_paths=[graph.render_path(v.path) for v in result.iv3_open_paths],
        )

    @app.post("/sensitivity", response_model=schemas.SensitivityResponse)
    def sensitivity(req: schemas.SensitivityRequest):
        records = _to_records(req.records)
        profile = compliance_profile(records, monotonicity=False)
        observed = iv_ratio(records).value
        grid = defier_sensitivity(
            profile,
            observed,
            np.linspace(req.dace_min, req.dace_max, req.steps),
            np.linspace(req.pi_d_min, req.pi_d_max, req.steps),
        )
        cells = [
            schemas.SensitivityCell(
                dace=dace,
                pi_d=pi_d,
                implied_cace=None if math.isnan(implied) else implied,
                defined=defined,
            )
            for dace, pi_d, implied, defined in grid.cells()
        ]
        return schemas.SensitivityResponse(observed_iv=observed, cells=cells)

    @app.post("/campaign", response_model=schemas.CampaignResponse)
    def campaign(req: schemas.CampaignRequest):
        spec = CampaignSpec(
            dgp=DgpConfig(
                model=_model(req.model),
                n=req.n,
                seed=0,
                params=req.params,
                variant=Variant(req.variant),
            ),
            replications=req.replications,
            estimators=tuple(
                EstimatorSpec(e.name, dict(e.options)) for e in req.estimators
            ),
            master_seed=req.master_seed,
        )
        result = run_campaign(spec)
        return schemas.CampaignResponse(
            summary=result.summary(), failures=result.failures
        )

    return app
