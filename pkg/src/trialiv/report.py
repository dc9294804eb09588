"""Estimation report assembly, shared by the CLI and the HTTP service.

A report is a JSON-ready dict: one entry per requested estimator with the
estimate, optional bootstrap SE, the stamped assumption list, the subject
count, and any warnings (estimator failures are reported as warnings, not
fatal errors), plus a provenance block identifying the command, the input
hash, the seed, and the package version. Estimates are rounded to six
decimals so reports are byte-stable across platforms.
"""

from __future__ import annotations

import hashlib
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import __version__
from .errors import EstimationError
from .estimators import EstimandEstimate
from .montecarlo import bootstrap_se, estimate_value, evaluate_estimator
from .records import TrialRecord

REPORT_DECIMALS = 6


def _round(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(float(value), REPORT_DECIMALS)


def config_hash(*parts: bytes) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part)
        digest.update(b"\x00")
    return digest.hexdigest()[:16]


def build_report(
    records: Sequence[TrialRecord],
    estimator_requests: Sequence[Tuple[str, Mapping[str, object]]],
    bootstrap_reps: int = 0,
    seed: int = 0,
    command: str = "",
    input_hash: str = "",
) -> Dict[str, object]:
    """Run every requested estimator and assemble the report document."""
    estimands: Dict[str, Dict[str, object]] = {}
    memo: dict = {}
    for name, options in estimator_requests:
        warnings: List[str] = []
        entry: Dict[str, object] = {
            "estimate": None,
            "se": None,
            "assumptions": [],
            "n": len(records),
            "warnings": warnings,
        }
        try:
            result = evaluate_estimator(name, records, options, memo)
        except EstimationError as exc:
            warnings.append(f"{type(exc).__name__}: {exc}")
            estimands[name] = entry
            continue
        entry["estimate"] = _round(estimate_value(result))
        if isinstance(result, EstimandEstimate):
            entry["assumptions"] = [a.value for a in result.assumptions]
            entry["n"] = result.n
        if bootstrap_reps:
            try:
                entry["se"] = _round(
                    bootstrap_se(
                        records, name, options=options, reps=bootstrap_reps, seed=seed
                    )
                )
            except EstimationError as exc:
                warnings.append(f"bootstrap failed: {type(exc).__name__}: {exc}")
        estimands[name] = entry
    return {
        "estimands": estimands,
        "provenance": {
            "command": command,
            "config_hash": input_hash,
            "seed": seed if bootstrap_reps else None,
            "version": __version__,
        },
    }
