"""Estimand estimators, naive comparators, and sensitivity machinery.

Every estimator consumes a sequence of :class:`~trialiv.records.TrialRecord`
and returns an :class:`EstimandEstimate` stamped with the exact set of
identification assumptions it relies on. All effects are on the mean or
risk difference scale; odds ratios are excluded by design because they are
not collapsible.

Role conventions: ``r`` is the instrument (randomized arm), ``t`` the
endogenous post-randomization variable. In trials where everyone takes the
assigned treatment and the intercurrent event is something else (biomarker
response, adherence), the generators map the event into ``t`` or ``a`` so
the same estimators apply unchanged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    AdherenceOrderViolatedError,
    DataError,
    EmptyArmError,
    EmptyStratumError,
    EstimationError,
    NegativeComplierFractionError,
    WeakInstrumentError,
    WeakInteractionError,
)
from .records import Columns, TrialRecord, as_columns
from .regress import (
    DesignMatrix,
    RegressionFit,
    average_marginal_effect,
    design,
    logistic_fit,
    ols_fit,
    scaled_pivot_ratio,
)

# Absolute guard on the instrument-endogenous covariance.
WEAK_INSTRUMENT_TOL = 1e-10
# First-stage interaction must exceed this multiple of its bootstrap spread.
INTERACTION_SPREAD_MULTIPLE = 2.0
INTERACTION_BOOTSTRAP_REPS = 60
# Fixed stream for the interaction guard bootstrap; keeps estimators pure.
_GUARD_SEED = 202_006_17
# Generated second-stage designs whose normalized pivot ratio falls below
# this are treated as unidentified: sampling noise has made the predicted
# columns effectively collinear and the coefficients would be pure noise
# amplification. Healthy designs sit orders of magnitude above it.
GENERATED_DESIGN_TOL = 1e-3


class Estimand(str, enum.Enum):
    POLICY = "policy"
    CACE = "cace"
    HYPOTHETICAL = "hypothetical"
    PSI_T = "psi_t"
    PSI_AT = "psi_at"
    PSI_C = "psi_c"
    POLICY_IN_S_PLUS_STAR = "policy_in_s_plus_star"
    HYPOTHETICAL_IN_S_PLUS_STAR = "hypothetical_in_s_plus_star"
    POLICY_IN_S_PLUS_PLUS = "policy_in_s_plus_plus"
    ALPHA_A = "alpha_a"
    PSI = "psi"
    AS_TREATED = "as_treated"
    PER_PROTOCOL = "per_protocol"
    RESPONDER = "responder"


class Assumption(str, enum.Enum):
    IV1 = "IV1"
    IV2 = "IV2"
    IV3 = "IV3"
    MONOTONICITY = "Monotonicity"
    HOMOGENEITY = "Homogeneity"
    NO_TX_S_INTERACTION = "NoTxSInteraction"


IV_CORE = (Assumption.IV1, Assumption.IV2, Assumption.IV3)


@dataclass(frozen=True)
class EstimandEstimate:
    """A named estimand with its point estimate and identification stamp.

    ``value`` is on the mean/risk-difference scale. ``se`` stays None until
    a bootstrap fills it in; the regression kernel produces no analytic
    standard errors.
    """

    estimand: Estimand
    value: float
    assumptions: Tuple[Assumption, ...]
    n: int
    se: Optional[float] = None


@dataclass(frozen=True)
class ComplianceProfile:
    """Principal-stratum proportions from the observed treatment pattern.

    Under Monotonicity the four proportions are identified from the two
    arm-wise treatment probabilities; without it only the probabilities
    are returned and the stratum fields stay None. The same construction
    serves the renamed strata of the biomarker and adherence settings.
    """

    p_t_given_r1: float
    p_t_given_r0: float
    pi_c: Optional[float] = None
    pi_at: Optional[float] = None
    pi_nt: Optional[float] = None
    pi_d: Optional[float] = None

    def __post_init__(self) -> None:
        parts = (self.pi_c, self.pi_at, self.pi_nt, self.pi_d)
        if all(p is not None for p in parts):
            total = sum(parts)  # type: ignore[arg-type]
            if abs(total - 1.0) > 1e-12:
                raise EstimationError(
                    f"stratum proportions sum to {total!r}, expected 1"
                )


Data = Union[Sequence[TrialRecord], Columns]


def _columns(data: Data) -> Columns:
    if isinstance(data, Columns):
        return data
    return as_columns(data)


def _arm_means(values: np.ndarray, arm: np.ndarray) -> Tuple[float, float]:
    in1 = arm == 1.0
    in0 = arm == 0.0
    if not in1.any() or not in0.any():
        raise EmptyArmError("both randomized groups must be non-empty")
    return float(values[in1].mean()), float(values[in0].mean())


def _covariance(x: np.ndarray, y: np.ndarray) -> float:
    # Sample covariance with 1/(n-1); every use here is a ratio of two of
    # these, so the normalization cancels.
    n = x.shape[0]
    if n < 2:
        raise EstimationError("need at least two records")
    return float((x - x.mean()) @ (y - y.mean()) / (n - 1))


# ---------------------------------------------------------------------------
# Pure identity helpers, shared with the generator truths and unit tests.


def psi_c_from_parts(
    psi_t: float, psi_at: float, p_t_r1: float, p_t_r0: float
) -> float:
    """Complier effect implied by the two-parameter model.

    psi_c = (psi_t * Pr(T=1|R=1) - psi_at * Pr(T=1|R=0)) / pi_c with
    pi_c the difference of the two probabilities.
    """
    pi_c = p_t_r1 - p_t_r0
    if abs(pi_c) < WEAK_INSTRUMENT_TOL:
        raise WeakInstrumentError("complier fraction is numerically zero")
    return (psi_t * p_t_r1 - psi_at * p_t_r0) / pi_c


def s_plus_star_policy_from_parts(
    psi: float, alpha_a: float, p1: float, p0: float
) -> float:
    """Policy effect among those who adhere under treatment.

    psi + alpha_a * (p1 - p0) / p1 where pj = Pr(A=1|T=j).
    """
    if p1 <= 0.0:
        raise EmptyStratumError("Pr(A=1|T=1) must be positive")
    return psi + alpha_a * (p1 - p0) / p1


def implied_cace(
    observed_iv: float, first_stage_diff: float, dace: float, pi_d: float
) -> float:
    """Invert the defier-contaminated IV estimand for the complier effect.

    With pi_c = first_stage_diff + pi_d, the regular IV estimator targets
    (CACE*pi_c - DACE*pi_d) / (pi_c - pi_d); solving for CACE gives
    (observed_iv * first_stage_diff + dace * pi_d) / pi_c.
    """
    pi_c = first_stage_diff + pi_d
    return (observed_iv * first_stage_diff + dace * pi_d) / pi_c


# ---------------------------------------------------------------------------
# Core estimators.


def policy_estimate(data: Data) -> EstimandEstimate:
    """Mean outcome difference across randomized arms (the ITT contrast)."""
    cols = _columns(data)
    m1, m0 = _arm_means(cols.y, cols.r)
    return EstimandEstimate(
        estimand=Estimand.POLICY,
        value=m1 - m0,
        assumptions=(Assumption.IV2,),
        n=cols.n,
    )


def compliance_profile(data: Data, monotonicity: bool = True) -> ComplianceProfile:
    """Arm-wise treatment probabilities, plus stratum proportions.

    With ``monotonicity`` the defier stratum is set to zero and the other
    three proportions follow from the observed probabilities; a negative
    implied complier fraction raises ``NegativeComplierFractionError``.
    Without it the strata are unidentified and left as None.
    """
    cols = _columns(data)
    p1, p0 = _arm_means(cols.t, cols.r)
    if not monotonicity:
        return ComplianceProfile(p_t_given_r1=p1, p_t_given_r0=p0)
    pi_c = p1 - p0
    if pi_c < 0.0:
        raise NegativeComplierFractionError(
            f"Pr(T=1|R=1)={p1:.4f} < Pr(T=1|R=0)={p0:.4f}; "
            "monotonicity or relevance is in doubt"
        )
    return ComplianceProfile(
        p_t_given_r1=p1,
        p_t_given_r0=p0,
        pi_c=pi_c,
        pi_at=p0,
        pi_nt=1.0 - p1,
        pi_d=0.0,
    )


def iv_ratio(data: Data) -> EstimandEstimate:
    """Covariance-ratio IV estimate cov(r,y)/cov(r,t).

    The single number carries two readings: it is consistent for the
    complier-stratum effect under Monotonicity and for the hypothetical
    (whole-population) effect under Homogeneity, so both assumptions are
    stamped as alternative identification routes.
    """
    cols = _columns(data)
    cov_rt = _covariance(cols.r, cols.t)
    if abs(cov_rt) < WEAK_INSTRUMENT_TOL:
        raise WeakInstrumentError(
            "cov(r, t) is numerically zero; the instrument carries no signal"
        )
    value = _covariance(cols.r, cols.y) / cov_rt
    return EstimandEstimate(
        estimand=Estimand.CACE,
        value=value,
        assumptions=IV_CORE + (Assumption.MONOTONICITY, Assumption.HOMOGENEITY),
        n=cols.n,
    )


def _resolve_regressors(cols: Columns, names: Sequence[str]) -> list:
    out = []
    for name in names:
        if name in ("r", "t", "a", "z"):
            out.append((name, cols.field_array(name)))
        else:
            out.append((name, cols.covariate(name)))
    return out


def tsls(
    data: Data,
    outcome_model: Sequence[str] = (),
    first_stage: Sequence[str] = ("r",),
) -> EstimandEstimate:
    """Two-stage least squares for the common IV estimate.

    ``first_stage`` lists the stage-1 regressors (must contain the
    instrument ``r``); ``outcome_model`` lists stage-2 covariates besides
    the predicted treatment. With the single binary instrument and no
    covariates this reproduces :func:`iv_ratio` to numerical precision.
    """
    if "r" not in first_stage:
        raise DataError("first stage must include the instrument 'r'")
    if "r" in outcome_model:
        raise DataError("the instrument is excluded from the outcome model")
    if "t" in first_stage or "t" in outcome_model:
        raise DataError("the endogenous variable cannot appear as a regressor")
    cols = _columns(data)

    x1 = design(*_resolve_regressors(cols, first_stage))
    stage1 = ols_fit(x1, cols.t)
    if abs(stage1.coefficient("r")) < WEAK_INSTRUMENT_TOL:
        raise WeakInstrumentError("first-stage coefficient on 'r' is zero")

    x2 = design(
        ("t_hat", stage1.fitted_values),
        *_resolve_regressors(cols, outcome_model),
    )
    stage2 = ols_fit(x2, cols.y)
    return EstimandEstimate(
        estimand=Estimand.CACE,
        value=stage2.coefficient("t_hat"),
        assumptions=IV_CORE + (Assumption.MONOTONICITY, Assumption.HOMOGENEITY),
        n=cols.n,
    )


def _interaction_guard(
    x: DesignMatrix,
    response: np.ndarray,
    coef_name: str,
    fitter,
    observed: float,
) -> None:
    """Raise WeakInteractionError when the coefficient is within noise.

    Spread is estimated by a small fixed-seed nonparametric bootstrap of the
    first-stage fit; resamples that fail to fit are skipped.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(_GUARD_SEED)))
    n = x.rows
    draws = []
    for _ in range(INTERACTION_BOOTSTRAP_REPS):
        idx = rng.integers(0, n, size=n)
        try:
            refit = fitter(DesignMatrix(x.names, x.values[idx]), response[idx])
        except EstimationError:
            continue
        draws.append(refit.coefficient(coef_name))
    if len(draws) < INTERACTION_BOOTSTRAP_REPS // 2:
        raise WeakInteractionError(
            "first stage is unstable under resampling; interaction not usable"
        )
    spread = float(np.std(draws, ddof=1))
    if abs(observed) < INTERACTION_SPREAD_MULTIPLE * spread:
        raise WeakInteractionError(
            f"first-stage interaction {observed:.3g} is below "
            f"{INTERACTION_SPREAD_MULTIPLE} x bootstrap spread {spread:.3g}"
        )


@dataclass(frozen=True)
class ExtendedTslsResult:
    """Two-parameter IV fit relaxing Homogeneity.

    ``psi_t`` is the effect among the treated, ``psi_at`` among those who
    take treatment without assignment, and ``psi_c`` the implied
    complier-stratum effect. ``homogeneity_stat`` is psi_t - psi_at, whose
    distance from zero is the homogeneity diagnostic.
    """

    psi_t: EstimandEstimate
    psi_at: EstimandEstimate
    psi_c: EstimandEstimate
    homogeneity_stat: float
    first_stage_interaction: float


_EXT_ASSUMPTIONS = IV_CORE + (
    Assumption.MONOTONICITY,
    Assumption.NO_TX_S_INTERACTION,
)


def extended_tsls(
    data: Data,
    interaction_covariate: str,
    link: str = "linear",
) -> ExtendedTslsResult:
    """Two-parameter TSLS using a covariate-by-randomization interaction.

    Stage 1 regresses ``t`` on ``r``, the covariate ``s``, and ``r x s``;
    stage 2 regresses ``y`` on ``t_hat x r``, ``t_hat x (1-r)``, and the
    main effect of ``s``. With the logistic link both stages are logit fits
    and the reported effects are average marginal effects obtained by
    toggling the arm-respecting predicted-treatment column with everything
    else at its observed values.

    The derived complier effect applies the weighted-average identity with
    a finite-sample covariate-imbalance term, which makes it agree with the
    covariance-ratio estimate exactly on every dataset under the linear
    link (the term vanishes as the arms balance).
    """
    if link not in ("linear", "logistic"):
        raise DataError(f"link must be 'linear' or 'logistic', got {link!r}")
    cols = _columns(data)
    r = cols.r
    t = cols.t
    s = cols.covariate(interaction_covariate)
    sname = interaction_covariate
    fitter = ols_fit if link == "linear" else logistic_fit

    x1 = design(("r", r), (sname, s), (f"r:{sname}", r * s))
    stage1 = fitter(x1, t)
    interaction = stage1.coefficient(f"r:{sname}")
    _interaction_guard(x1, t, f"r:{sname}", fitter, interaction)
    t_hat = stage1.fitted_values

    x2 = design(
        ("t_hat:r", t_hat * r),
        ("t_hat:1-r", t_hat * (1.0 - r)),
        (sname, s),
    )
    ratio = scaled_pivot_ratio(x2)
    if ratio < GENERATED_DESIGN_TOL:
        raise WeakInteractionError(
            f"predicted-treatment columns are effectively collinear "
            f"(pivot ratio {ratio:.1e}); the two-parameter model is not "
            "identified on this sample"
        )
    stage2 = fitter(x2, cols.y)

    if link == "linear":
        psi_t_val = stage2.coefficient("t_hat:r")
        psi_at_val = stage2.coefficient("t_hat:1-r")
    else:
        psi_t_val = average_marginal_effect(stage2, x2, "t_hat:r", (0.0, 1.0))
        psi_at_val = average_marginal_effect(stage2, x2, "t_hat:1-r", (0.0, 1.0))

    p1, p0 = _arm_means(t, r)
    pi_c = p1 - p0
    if abs(pi_c) < WEAK_INSTRUMENT_TOL:
        raise WeakInstrumentError("complier fraction is numerically zero")
    psi_c_val = (psi_t_val * p1 - psi_at_val * p0) / pi_c
    if link == "linear":
        # Finite-sample imbalance of the covariate across arms feeds the
        # covariance ratio through the main effect; include it so the
        # identity with iv_ratio is exact rather than asymptotic.
        s1, s0 = _arm_means(s, r)
        psi_c_val += stage2.coefficient(sname) * (s1 - s0) / pi_c

    def stamp(est: Estimand, value: float) -> EstimandEstimate:
        return EstimandEstimate(
            estimand=est, value=value, assumptions=_EXT_ASSUMPTIONS, n=cols.n
        )

    return ExtendedTslsResult(
        psi_t=stamp(Estimand.PSI_T, psi_t_val),
        psi_at=stamp(Estimand.PSI_AT, psi_at_val),
        psi_c=stamp(Estimand.PSI_C, psi_c_val),
        homogeneity_stat=psi_t_val - psi_at_val,
        first_stage_interaction=interaction,
    )


def policy_in_s_plus_star(
    data: Data, event: str = "z", arm: str = "r"
) -> EstimandEstimate:
    """Policy effect among subjects who experience the event under treatment.

    The arm contrast divided by Pr(event=1 | arm=1). Identified from the
    three IV assumptions alone; Monotonicity is deliberately not required.
    """
    cols = _columns(data)
    arm_values = cols.field_array(arm)
    event_values = cols.field_array(event)
    in_arm1 = arm_values == 1.0
    if not in_arm1.any():
        raise EmptyStratumError(f"no records with {arm} = 1")
    prob = float(event_values[in_arm1].mean())
    if prob <= 0.0:
        raise EmptyStratumError(f"event {event!r} never occurs when {arm} = 1")
    pol = policy_estimate(cols)
    return EstimandEstimate(
        estimand=Estimand.POLICY_IN_S_PLUS_STAR,
        value=pol.value / prob,
        assumptions=IV_CORE,
        n=cols.n,
    )


@dataclass(frozen=True)
class AdherenceResult:
    """Two-parameter structural fit for the adherence setting.

    ``psi`` is the direct policy effect, ``alpha_a`` the additional effect
    of adhering on either arm, and the two policy estimands follow from the
    structural model: S++ equals psi, S+* adds the conditional-probability
    correction.
    """

    psi: EstimandEstimate
    alpha_a: EstimandEstimate
    policy_s_plus_plus: EstimandEstimate
    policy_s_plus_star: EstimandEstimate
    p_a_given_t1: float
    p_a_given_t0: float


_ADH_ASSUMPTIONS = IV_CORE + (Assumption.NO_TX_S_INTERACTION,)


def adherence_estimands(
    data: Data, interaction_covariate: str = "x"
) -> AdherenceResult:
    """Estimate the adherence-setting estimands via predicted adherence.

    Stage 1 is a logistic fit of ``a`` on ``t``, the covariate, and their
    interaction; stage 2 regresses ``y`` linearly on ``t``, predicted
    adherence, and the covariate. Requires Pr(A=1|T=1) > Pr(A=1|T=0).
    """
    cols = _columns(data)
    if cols.a is None:
        raise DataError("adherence estimands need an 'a' column")
    t = cols.t
    a = cols.a
    x = cols.covariate(interaction_covariate)
    xname = interaction_covariate

    p1, p0 = _arm_means(a, t)
    if p1 <= p0:
        raise AdherenceOrderViolatedError(
            f"Pr(A=1|T=1)={p1:.4f} must exceed Pr(A=1|T=0)={p0:.4f}"
        )

    x1 = design(("t", t), (xname, x), (f"t:{xname}", t * x))
    stage1 = logistic_fit(x1, a)
    interaction = stage1.coefficient(f"t:{xname}")
    _interaction_guard(x1, a, f"t:{xname}", logistic_fit, interaction)
    a_hat = stage1.fitted_values

    x2 = design(("t", t), ("a_hat", a_hat), (xname, x))
    ratio = scaled_pivot_ratio(x2)
    if ratio < GENERATED_DESIGN_TOL:
        raise WeakInteractionError(
            f"predicted adherence is effectively collinear with the other "
            f"regressors (pivot ratio {ratio:.1e})"
        )
    stage2 = ols_fit(x2, cols.y)
    psi_val = stage2.coefficient("t")
    alpha_val = stage2.coefficient("a_hat")

    def stamp(est: Estimand, value: float) -> EstimandEstimate:
        return EstimandEstimate(
            estimand=est, value=value, assumptions=_ADH_ASSUMPTIONS, n=cols.n
        )

    return AdherenceResult(
        psi=stamp(Estimand.PSI, psi_val),
        alpha_a=stamp(Estimand.ALPHA_A, alpha_val),
        policy_s_plus_plus=stamp(Estimand.POLICY_IN_S_PLUS_PLUS, psi_val),
        policy_s_plus_star=stamp(
            Estimand.POLICY_IN_S_PLUS_STAR,
            s_plus_star_policy_from_parts(psi_val, alpha_val, p1, p0),
        ),
        p_a_given_t1=p1,
        p_a_given_t0=p0,
    )


def naive_estimates(
    data: Data, kind: str, covariates: Sequence[str] = ()
) -> EstimandEstimate:
    """Naive comparators: as-treated, per-protocol, responder analysis.

    These condition on post-randomization quantities, so they carry no
    identification assumptions from the IV toolbox; they are here as the
    biased baselines the proper estimands are judged against. The responder
    analysis adjusts for the listed covariates via a regression marginal
    effect (logistic when the outcome is binary), or uses the raw contrast
    when none are given.
    """
    cols = _columns(data)
    if kind == "as_treated":
        m1, m0 = _group_means(cols.y, cols.t, "t")
        return _naive(Estimand.AS_TREATED, m1 - m0, cols.n)
    if kind == "per_protocol":
        if cols.a is None:
            raise DataError("per-protocol analysis needs an 'a' column")
        keep = cols.a == 1.0
        if not keep.any():
            raise EmptyStratumError("no adherent subjects")
        r = cols.r[keep]
        y = cols.y[keep]
        in1 = r == 1.0
        in0 = r == 0.0
        if not in1.any() or not in0.any():
            raise EmptyStratumError("an arm has no adherent subjects")
        return _naive(
            Estimand.PER_PROTOCOL,
            float(y[in1].mean() - y[in0].mean()),
            int(keep.sum()),
        )
    if kind == "responder":
        if cols.z is None:
            raise DataError("responder analysis needs a 'z' column")
        if not covariates:
            m1, m0 = _group_means(cols.y, cols.z, "z")
            return _naive(Estimand.RESPONDER, m1 - m0, cols.n)
        x = design(
            ("z", cols.z), *[(c, cols.covariate(c)) for c in covariates]
        )
        binary = np.all((cols.y == 0.0) | (cols.y == 1.0))
        fit = logistic_fit(x, cols.y) if binary else ols_fit(x, cols.y)
        return _naive(
            Estimand.RESPONDER,
            average_marginal_effect(fit, x, "z", (0.0, 1.0)),
            cols.n,
        )
    raise DataError(
        f"unknown naive analysis {kind!r}; "
        "expected as_treated, per_protocol, or responder"
    )


def _group_means(y: np.ndarray, group: np.ndarray, name: str) -> Tuple[float, float]:
    in1 = group == 1.0
    in0 = group == 0.0
    if not in1.any() or not in0.any():
        raise EmptyStratumError(f"both {name} groups must be non-empty")
    return float(y[in1].mean()), float(y[in0].mean())


def _naive(est: Estimand, value: float, n: int) -> EstimandEstimate:
    return EstimandEstimate(estimand=est, value=value, assumptions=(), n=n)


@dataclass(frozen=True)
class DefierSensitivityGrid:
    """Implied complier effect over a (DACE, defier-fraction) grid.

    ``implied_cace[i, j]`` pairs ``dace_values[i]`` with ``pi_d_values[j]``.
    Cells where the inversion degenerates (complier fraction or the
    first-stage difference numerically zero, or an implied proportion
    outside [0, 1]) are NaN with ``defined`` False; nothing raises.
    """

    dace_values: np.ndarray
    pi_d_values: np.ndarray
    implied_cace: np.ndarray
    defined: np.ndarray
    first_stage_diff: float

    def cells(self):
        """Iterate (dace, pi_d, implied, defined) in row-major order."""
        for i, dace in enumerate(self.dace_values):
            for j, pid in enumerate(self.pi_d_values):
                yield (
                    float(dace),
                    float(pid),
                    float(self.implied_cace[i, j]),
                    bool(self.defined[i, j]),
                )


def defier_sensitivity(
    profile: ComplianceProfile,
    observed_iv: float,
    dace_values: Sequence[float],
    pi_d_values: Sequence[float],
    epsilon: float = 1e-8,
) -> DefierSensitivityGrid:
    """Map assumed defier behaviour to the complier effect it implies.

    For each grid point the complier fraction is recomputed as the observed
    first-stage difference plus the assumed defier fraction, and the
    observed IV estimate is inverted through the defier-contaminated
    estimand. The pi_d = 0 slice reproduces the observed estimate exactly.
    """
    dace = np.asarray(list(dace_values), dtype=np.float64)
    pid = np.asarray(list(pi_d_values), dtype=np.float64)
    diff = profile.p_t_given_r1 - profile.p_t_given_r0
    pi_c = diff + pid

    implied = np.full((dace.size, pid.size), np.nan)
    defined = np.zeros((dace.size, pid.size), dtype=bool)
    ok = (
        (np.abs(pi_c) >= epsilon)
        & (np.abs(diff) >= epsilon)
        & (pid >= 0.0)
        & (pid <= 1.0)
        & (pi_c <= 1.0 + 1e-12)
    )
    for j in range(pid.size):
        if not ok[j]:
            continue
        implied[:, j] = (observed_iv * diff + dace * pid[j]) / pi_c[j]
        defined[:, j] = True
    return DefierSensitivityGrid(
        dace_values=dace,
        pi_d_values=pid,
        implied_cace=implied,
        defined=defined,
        first_stage_diff=diff,
    )
