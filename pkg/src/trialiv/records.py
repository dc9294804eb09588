"""Subject-level trial records and their columnar view.

A :class:`TrialRecord` is one subject's observed tuple. The role of each
field depends on the trial setting: ``r`` is always the randomized arm
(the instrument), ``t`` is the endogenous post-randomization variable
(treatment received, or the intercurrent-event indicator when the trial
has no non-compliance), ``a`` is adherence, ``z`` is a binary biomarker
response. Extra baseline or latent quantities live in ``covariates``.

Estimators operate on sequences of records; :func:`as_columns` converts a
sequence once into numpy arrays shared by all downstream computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DataError


def _check_binary(name: str, value: Optional[int]) -> None:
    if value is not None and value not in (0, 1):
        raise DataError(f"field {name!r} must be 0 or 1, got {value!r}")


@dataclass(frozen=True)
class TrialRecord:
    """One subject's observed data. Binary fields are coded 0/1."""

    r: int
    t: int
    y: float
    covariates: Mapping[str, float] = field(default_factory=dict)
    a: Optional[int] = None
    z: Optional[int] = None

    def __post_init__(self) -> None:
        _check_binary("r", self.r)
        _check_binary("t", self.t)
        _check_binary("a", self.a)
        _check_binary("z", self.z)
        if not math.isfinite(float(self.y)):
            raise DataError(f"outcome y must be finite, got {self.y!r}")


@dataclass(frozen=True)
class Columns:
    """Columnar view of a record sequence. Arrays are read-only."""

    r: np.ndarray
    t: np.ndarray
    y: np.ndarray
    covariates: Mapping[str, np.ndarray]
    a: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.r.shape[0]

    def field_array(self, name: str) -> np.ndarray:
        """Return one of the role fields r/t/y/a/z by name."""
        if name in ("r", "t", "y"):
            return getattr(self, name)
        if name in ("a", "z"):
            arr = getattr(self, name)
            if arr is None:
                raise DataError(f"records carry no {name!r} column")
            return arr
        raise DataError(f"unknown record field {name!r}")

    def covariate(self, name: str) -> np.ndarray:
        try:
            return self.covariates[name]
        except KeyError:
            raise DataError(f"records carry no covariate {name!r}") from None


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def as_columns(data: Sequence[TrialRecord]) -> Columns:
    """Convert records to arrays. All records must expose the same fields."""
    if len(data) == 0:
        raise DataError("record list is empty")
    first = data[0]
    has_a = first.a is not None
    has_z = first.z is not None
    cov_names = tuple(first.covariates.keys())

    r = np.empty(len(data), dtype=np.float64)
    t = np.empty(len(data), dtype=np.float64)
    y = np.empty(len(data), dtype=np.float64)
    a = np.empty(len(data), dtype=np.float64) if has_a else None
    z = np.empty(len(data), dtype=np.float64) if has_z else None
    covs = {name: np.empty(len(data), dtype=np.float64) for name in cov_names}

    for i, rec in enumerate(data):
        r[i] = rec.r
        t[i] = rec.t
        y[i] = rec.y
        if has_a:
            if rec.a is None:
                raise DataError(f"record {i} is missing field 'a' present elsewhere")
            a[i] = rec.a
        elif rec.a is not None:
            raise DataError(f"record {i} has field 'a' absent elsewhere")
        if has_z:
            if rec.z is None:
                raise DataError(f"record {i} is missing field 'z' present elsewhere")
            z[i] = rec.z
        elif rec.z is not None:
            raise DataError(f"record {i} has field 'z' absent elsewhere")
        for name in cov_names:
            try:
                covs[name][i] = rec.covariates[name]
            except KeyError:
                raise DataError(
                    f"record {i} is missing covariate {name!r} present elsewhere"
                ) from None

    return Columns(
        r=_freeze(r),
        t=_freeze(t),
        y=_freeze(y),
        covariates={k: _freeze(v) for k, v in covs.items()},
        a=_freeze(a) if a is not None else None,
        z=_freeze(z) if z is not None else None,
    )
