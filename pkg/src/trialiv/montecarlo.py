"""Replication harness: seeded campaigns, bootstrap SEs, distribution export.

A campaign runs R replications of (generate -> estimate-all) and aggregates
means and Monte Carlo standard deviations. Replication i draws its data on
a seed derived from (master_seed, i) through a fixed hash mix, so the
per-replication matrix is identical whether replications run serially or
across worker processes, and reruns are byte-identical.

Estimator failures on unlucky draws (weak instrument, separation, ...) are
recorded per error kind and excluded from the summary statistics; the
exclusion counts are part of the result so downstream comparisons stay
honest.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .dgp import DgpConfig, generate
from .errors import (
    EstimationError,
    InvalidParamError,
    TooManyResampleFailuresError,
    UnknownEstimatorError,
)
from .estimators import (
    EstimandEstimate,
    adherence_estimands,
    compliance_profile,
    extended_tsls,
    iv_ratio,
    naive_estimates,
    policy_estimate,
    policy_in_s_plus_star,
    tsls,
)
from .records import TrialRecord, as_columns

BOOTSTRAP_DEFAULT_REPS = 500
BOOTSTRAP_MIN_REPS = 100
BOOTSTRAP_MAX_FAILURE_SHARE = 0.05

EstimatorValue = Union[float, EstimandEstimate]


def derive_seed(master_seed: int, index: int, stream: int = 0) -> int:
    """Deterministic 64-bit hash mix of (master_seed, index, stream)."""
    seq = np.random.SeedSequence((int(master_seed), int(index), int(stream)))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


# --- estimator registry ----------------------------------------------------
# Each entry maps a record list (plus a per-dataset memo for shared
# intermediate fits) to one numeric estimate. Multi-output operations are
# memoized so requesting psi_t and psi_c costs one fit.


def _memo_extended(records, memo, covariate: str, link: str):
    key = ("extended_tsls", covariate, link)
    if key not in memo:
        memo[key] = extended_tsls(records, covariate, link=link)
    return memo[key]


def _memo_adherence(records, memo, covariate: str):
    key = ("adherence", covariate)
    if key not in memo:
        memo[key] = adherence_estimands(records, covariate)
    return memo[key]


def _est_policy(records, memo):
    return policy_estimate(records)

def _est_complier_fraction(records, memo):
    return float(compliance_profile(records).pi_c)

def _est_iv_ratio(records, memo):
    return iv_ratio(records)

def _est_tsls(records, memo, outcome_model=(), first_stage=("r",)):
    return tsls(records, tuple(outcome_model), tuple(first_stage))

def _est_psi_t(records, memo, covariate="s", link="linear"):
    return _memo_extended(records, memo, covariate, link).psi_t

def _est_psi_at(records, memo, covariate="s", link="linear"):
    return _memo_extended(records, memo, covariate, link).psi_at

def _est_psi_c(records, memo, covariate="s", link="linear"):
    return _memo_extended(records, memo, covariate, link).psi_c

def _est_homogeneity_diff(records, memo, covariate="s", link="linear"):
    return float(_memo_extended(records, memo, covariate, link).homogeneity_stat)

def _est_policy_s_plus_star(records, memo, event="z", arm="r"):
    return policy_in_s_plus_star(records, event=event, arm=arm)

def _est_adherence_psi(records, memo, covariate="x"):
    return _memo_adherence(records, memo, covariate).psi

def _est_adherence_alpha_a(records, memo, covariate="x"):
    return _memo_adherence(records, memo, covariate).alpha_a

def _est_adherence_s_plus_plus(records, memo, covariate="x"):
    return _memo_adherence(records, memo, covariate).policy_s_plus_plus

def _est_adherence_s_plus_star(records, memo, covariate="x"):
    return _memo_adherence(records, memo, covariate).policy_s_plus_star

def _est_as_treated(records, memo):
    return naive_estimates(records, "as_treated")

def _est_per_protocol(records, memo):
    return naive_estimates(records, "per_protocol")

def _est_responder(records, memo, covariates=()):
    return naive_estimates(records, "responder", covariates=tuple(covariates))


REGISTRY = {
    "policy": _est_policy,
    "complier_fraction": _est_complier_fraction,
    "iv_ratio": _est_iv_ratio,
    "tsls": _est_tsls,
    "psi_t": _est_psi_t,
    "psi_at": _est_psi_at,
    "psi_c": _est_psi_c,
    "homogeneity_diff": _est_homogeneity_diff,
    "policy_in_s_plus_star": _est_policy_s_plus_star,
    "adherence_psi": _est_adherence_psi,
    "adherence_alpha_a": _est_adherence_alpha_a,
    "adherence_s_plus_plus": _est_adherence_s_plus_plus,
    "adherence_s_plus_star": _est_adherence_s_plus_star,
    "as_treated": _est_as_treated,
    "per_protocol": _est_per_protocol,
    "responder": _est_responder,
}


def evaluate_estimator(
    name: str,
    records: Sequence[TrialRecord],
    options: Mapping[str, object] = {},
    memo: Optional[dict] = None,
) -> EstimatorValue:
    """Run one registry estimator; returns a float or an EstimandEstimate."""
    try:
        fn = REGISTRY[name]
    except KeyError:
        raise UnknownEstimatorError(
            f"unknown estimator {name!r}; known: {sorted(REGISTRY)}"
        ) from None
    return fn(records, {} if memo is None else memo, **dict(options))


def estimate_value(result: EstimatorValue) -> float:
    return result.value if isinstance(result, EstimandEstimate) else float(result)


@dataclass(frozen=True)
class EstimatorSpec:
    """One campaign column: a registry estimator plus keyword options."""

    name: str
    options: Mapping[str, object] = field(default_factory=dict)
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.name not in REGISTRY:
            raise UnknownEstimatorError(
                f"unknown estimator {self.name!r}; known: {sorted(REGISTRY)}"
            )

    @property
    def column(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class CampaignSpec:
    dgp: DgpConfig
    replications: int
    estimators: Tuple[EstimatorSpec, ...]
    bootstrap_reps: int = 0
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise InvalidParamError("replications must be >= 1")
        if not self.estimators:
            raise InvalidParamError("campaign needs at least one estimator")
        cols = [e.column for e in self.estimators]
        if len(set(cols)) != len(cols):
            raise InvalidParamError(f"duplicate estimator columns in {cols}")
        if self.bootstrap_reps and self.bootstrap_reps < BOOTSTRAP_MIN_REPS:
            raise InvalidParamError(
                f"bootstrap_reps must be 0 or >= {BOOTSTRAP_MIN_REPS}"
            )


@dataclass
class CampaignResult:
    """Per-replication estimates and their aggregation.

    ``values[i, k]`` is estimator column k on replication i, NaN where the
    estimator failed; ``failures`` counts failures per column by error
    kind. ``bootstrap_ses`` mirrors ``values`` when the campaign asked for
    per-dataset bootstrap SEs.
    """

    spec: CampaignSpec
    columns: Tuple[str, ...]
    values: np.ndarray
    failures: Dict[str, Dict[str, int]]
    bootstrap_ses: Optional[np.ndarray] = None

    def column_values(self, column: str) -> np.ndarray:
        try:
            k = self.columns.index(column)
        except ValueError:
            raise UnknownEstimatorError(
                f"no estimator column {column!r}; columns are {self.columns}"
            ) from None
        return self.values[:, k]

    def summary(self) -> Dict[str, Dict[str, object]]:
        out: Dict[str, Dict[str, object]] = {}
        for k, col in enumerate(self.columns):
            vals = self.values[:, k]
            ok = vals[~np.isnan(vals)]
            entry: Dict[str, object] = {
                "mean": float(ok.mean()) if ok.size else None,
                "mc_sd": float(ok.std(ddof=1)) if ok.size >= 2 else None,
                "n_ok": int(ok.size),
                "n_fail": int(vals.size - ok.size),
            }
            if self.bootstrap_ses is not None:
                ses = self.bootstrap_ses[:, k]
                ses = ses[~np.isnan(ses)]
                entry["mean_bootstrap_se"] = float(ses.mean()) if ses.size else None
            out[col] = entry
        return out


def _run_replication(
    spec: CampaignSpec, index: int
) -> Tuple[int, List[float], List[Optional[str]], List[float]]:
    config = replace(spec.dgp, seed=derive_seed(spec.master_seed, index))
    records = generate(config)
    memo: dict = {}
    values: List[float] = []
    errors: List[Optional[str]] = []
    ses: List[float] = []
    for est in spec.estimators:
        try:
            values.append(
                estimate_value(evaluate_estimator(est.name, records, est.options, memo))
            )
            errors.append(None)
        except EstimationError as exc:
            values.append(float("nan"))
            errors.append(type(exc).__name__)
        if spec.bootstrap_reps:
            if np.isnan(values[-1]):
                ses.append(float("nan"))
            else:
                try:
                    ses.append(
                        bootstrap_se(
                            records,
                            est.name,
                            options=est.options,
                            reps=spec.bootstrap_reps,
                            seed=derive_seed(spec.master_seed, index, stream=1),
                        )
                    )
                except EstimationError:
                    ses.append(float("nan"))
    return index, values, errors, ses


def run_campaign(spec: CampaignSpec, workers: int = 1) -> CampaignResult:
    """Execute every replication; aggregation is ordered by replication index."""
    columns = tuple(e.column for e in spec.estimators)
    values = np.empty((spec.replications, len(columns)), dtype=np.float64)
    ses = (
        np.empty((spec.replications, len(columns)), dtype=np.float64)
        if spec.bootstrap_reps
        else None
    )
    failures: Dict[str, Dict[str, int]] = {c: {} for c in columns}

    def absorb(index, row, errs, row_ses):
        values[index] = row
        if ses is not None:
            ses[index] = row_ses
        for col, err in zip(columns, errs):
            if err is not None:
                failures[col][err] = failures[col].get(err, 0) + 1

    if workers <= 1:
        for i in range(spec.replications):
            absorb(*_run_replication(spec, i))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(
                _run_replication,
                [spec] * spec.replications,
                range(spec.replications),
                chunksize=max(1, spec.replications // (workers * 4)),
            ):
                absorb(*result)

    return CampaignResult(
        spec=spec,
        columns=columns,
        values=values,
        failures=failures,
        bootstrap_ses=ses,
    )


def bootstrap_se(
    records: Sequence[TrialRecord],
    estimator: str,
    options: Mapping[str, object] = {},
    reps: int = BOOTSTRAP_DEFAULT_REPS,
    seed: int = 0,
) -> float:
    """Nonparametric bootstrap SE: resample whole subject records.

    Failed resamples are dropped; more than 5% failures raises
    ``TooManyResampleFailuresError``.
    """
    if reps < BOOTSTRAP_MIN_REPS:
        raise InvalidParamError(f"bootstrap needs at least {BOOTSTRAP_MIN_REPS} reps")
    if estimator not in REGISTRY:
        raise UnknownEstimatorError(f"unknown estimator {estimator!r}")
    data = list(records)
    n = len(data)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    draws: List[float] = []
    fails = 0
    for _ in range(reps):
        idx = rng.integers(0, n, size=n)
        sample = [data[j] for j in idx]
        try:
            draws.append(estimate_value(evaluate_estimator(estimator, sample, options)))
        except EstimationError:
            fails += 1
    if fails > BOOTSTRAP_MAX_FAILURE_SHARE * reps:
        raise TooManyResampleFailuresError(
            f"{fails}/{reps} bootstrap resamples failed"
        )
    return float(np.std(draws, ddof=1))


def export_distribution(result: CampaignResult, column: str) -> np.ndarray:
    """Per-replication values for one estimator, in replication order."""
    return result.column_values(column).copy()


def summary_lines(result: CampaignResult) -> List[str]:
    """Plain-text summary, one line per estimator column."""
    lines = []
    for col, entry in result.summary().items():
        mean = entry["mean"]
        sd = entry["mc_sd"]
        lines.append(
            f"{col}: mean={mean if mean is None else f'{mean:.6f}'} "
            f"mc_sd={sd if sd is None else f'{sd:.6f}'} "
            f"n_ok={entry['n_ok']} n_fail={entry['n_fail']}"
        )
    return lines
