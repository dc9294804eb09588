"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class RecordIn(BaseModel):
    r: int
    t: int
    y: float
    a: Optional[int] = None
    z: Optional[int] = None
    covariates: Dict[str, float] = Field(default_factory=dict)


class EstimatorRequest(BaseModel):
    name: str
    options: Dict[str, object] = Field(default_factory=dict)


class EstimateRequest(BaseModel):
    records: List[RecordIn]
    estimators: List[EstimatorRequest]
    bootstrap_reps: int = 0
    seed: int = 0


class EstimandOut(BaseModel):
    estimate: Optional[float]
    se: Optional[float]
    assumptions: List[str]
    n: int
    warnings: List[str]


class Provenance(BaseModel):
    command: str
    config_hash: str
    seed: Optional[int]
    version: str


class EstimateResponse(BaseModel):
    estimands: Dict[str, EstimandOut]
    provenance: Provenance


class SimulateRequest(BaseModel):
    model: str
    n: int = Field(ge=1)
    seed: int = 0
    params: Dict[str, float] = Field(default_factory=dict)
    variant: str = "confounded"
    emit_latent: bool = False


class SimulateResponse(BaseModel):
    records: List[RecordIn]
    clamp_fraction: float


class CheckIvRequest(BaseModel):
    dag: str = Field(description="DAG text: 'A -> B' and 'latent U' lines")
    instrument: str
    treatment: str
    outcome: str
    confounders: List[str] = Field(default_factory=list)


class CheckIvResponse(BaseModel):
    iv1: bool
    iv2: bool
    iv3: bool
    iv2_open_paths: Dict[str, List[str]]
    iv3_open_paths: List[str]


class SensitivityRequest(BaseModel):
    records: List[RecordIn]
    dace_min: float
    dace_max: float
    pi_d_min: float
    pi_d_max: float
    steps: int = Field(default=11, ge=2)


class SensitivityCell(BaseModel):
    dace: float
    pi_d: float
    implied_cace: Optional[float]
    defined: bool


class SensitivityResponse(BaseModel):
    observed_iv: float
    cells: List[SensitivityCell]


class CampaignRequest(BaseModel):
    model: str
    n: int = Field(ge=1)
    params: Dict[str, float] = Field(default_factory=dict)
    variant: str = "confounded"
    replications: int = Field(ge=1)
    estimators: List[EstimatorRequest]
    master_seed: int = 0


class EstimatorSummary(BaseModel):
    mean: Optional[float]
    mc_sd: Optional[float]
    n_ok: int
    n_fail: int


class CampaignResponse(BaseModel):
    summary: Dict[str, EstimatorSummary]
    failures: Dict[str, Dict[str, int]]
