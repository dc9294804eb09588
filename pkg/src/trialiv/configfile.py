"""Flat key-value config files for generator overrides and campaign specs.

Format: one ``key = value`` pair per line, ``#`` comments and blank lines
allowed. Generator parameter overrides use a ``param.`` prefix. A campaign
file names the generator, the replication count, and the estimator list;
estimator entries are comma-separated, each optionally carrying
``:option=value`` suffixes::

    model = adherence_c
    n = 500
    replications = 1000
    master_seed = 7
    param.a_xt = -6
    estimators = policy, adherence_psi:covariate=x, psi_t:covariate=x:link=logistic
"""

from __future__ import annotations

from typing import Dict, Tuple

from .dgp import DgpConfig, DgpModel, Variant
from .errors import ParseError
from .montecarlo import CampaignSpec, EstimatorSpec

_MODEL_NAMES = {m.value: m for m in DgpModel}
_MODEL_NAMES.update({"a": DgpModel.PAIN_TRIAL_A, "b": DgpModel.BIOMARKER_B,
                     "c": DgpModel.ADHERENCE_C})


def parse_key_values(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ParseError(f"line {lineno}: empty key or value in {raw!r}")
        if key in pairs:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"key {key!r}: {value!r} is not a number") from None


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"key {key!r}: {value!r} is not an integer") from None


def _split_dgp_keys(pairs: Dict[str, str]) -> Tuple[Dict[str, str], Dict[str, float]]:
    params = {}
    rest = {}
    for key, value in pairs.items():
        if key.startswith("param."):
            params[key[len("param."):]] = _float(key, value)
        else:
            rest[key] = value
    return rest, params


def dgp_config_from_text(
    text: str,
    model: str | None = None,
    n: int | None = None,
    seed: int | None = None,
    variant: str | None = None,
    extra_params: Dict[str, float] | None = None,
) -> DgpConfig:
    """Build a generator config from file text; explicit arguments win."""
    rest, params = _split_dgp_keys(parse_key_values(text))
    known = {"model", "n", "seed", "variant"}
    unknown = set(rest) - known
    if unknown:
        raise ParseError(f"unknown config keys: {sorted(unknown)}")
    model_name = model if model is not None else rest.get("model")
    if model_name is None:
        raise ParseError("config needs a 'model' key")
    try:
        model_enum = _MODEL_NAMES[model_name.lower()]
    except KeyError:
        raise ParseError(f"unknown model {model_name!r}") from None
    if extra_params:
        params.update(extra_params)
    return DgpConfig(
        model=model_enum,
        n=n if n is not None else _int("n", rest.get("n", "0")),
        seed=seed if seed is not None else _int("seed", rest.get("seed", "0")),
        params=params,
        variant=Variant(variant if variant is not None
                        else rest.get("variant", Variant.CONFOUNDED.value)),
    )


def _parse_estimator_entry(entry: str) -> EstimatorSpec:
    parts = [p.strip() for p in entry.split(":")]
    name = parts[0]
    options: Dict[str, object] = {}
    label = None
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise ParseError(
                f"estimator entry {entry!r}: expected option=value, got {part!r}"
            )
        key = key.strip()
        value = value.strip()
        if key == "label":
            label = value
        elif key == "covariates":
            options[key] = tuple(v for v in value.split("+") if v)
        else:
            options[key] = value
    return EstimatorSpec(name, options, label=label)


def campaign_spec_from_text(text: str) -> CampaignSpec:
    """Build a campaign spec from file text."""
    rest, params = _split_dgp_keys(parse_key_values(text))
    known = {
        "model", "n", "seed", "variant", "replications", "master_seed",
        "bootstrap_reps", "estimators",
    }
    unknown = set(rest) - known
    if unknown:
        raise ParseError(f"unknown config keys: {sorted(unknown)}")
    if "estimators" not in rest:
        raise ParseError("campaign config needs an 'estimators' key")
    if "replications" not in rest:
        raise ParseError("campaign config needs a 'replications' key")
    dgp = dgp_config_from_text(
        "\n".join(
            f"{k} = {v}" for k, v in rest.items()
            if k in ("model", "n", "seed", "variant")
        ),
        extra_params=params,
    )
    estimators = tuple(
        _parse_estimator_entry(e)
        for e in rest["estimators"].split(",")
        if e.strip()
    )
    return CampaignSpec(
        dgp=dgp,
        replications=_int("replications", rest["replications"]),
        estimators=estimators,
        bootstrap_reps=_int("bootstrap_reps", rest.get("bootstrap_reps", "0")),
        master_seed=_int("master_seed", rest.get("master_seed", "0")),
    )
