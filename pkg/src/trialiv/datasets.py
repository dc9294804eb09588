"""CSV dataset reading and writing for subject records.

The on-disk format is a plain header CSV. Role columns default to the
names ``r``, ``t``, ``y``, ``a``, ``z`` but can be remapped, so external
datasets need no renaming; every remaining numeric column is treated as a
covariate. Binary role columns must contain only 0/1. Values are written
with full precision (shortest round-trip decimal).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .errors import MissingColumnError, ParseError
from .records import TrialRecord

LATENT_COLUMNS = ("u", "z_latent")


@dataclass(frozen=True)
class ColumnRoles:
    """Column-name mapping for the role fields; None means absent."""

    r: str = "r"
    t: str = "t"
    y: str = "y"
    a: Optional[str] = "a"
    z: Optional[str] = "z"


def _parse_binary(raw: str, column: str, row: int) -> int:
    if raw == "0":
        return 0
    if raw == "1":
        return 1
    raise ParseError(
        f"row {row}: column {column!r} must be 0 or 1, got {raw!r}"
    )


def _parse_real(raw: str, column: str, row: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ParseError(
            f"row {row}: column {column!r} is not a number: {raw!r}"
        ) from None


def read_records(path: str, roles: ColumnRoles = ColumnRoles()) -> List[TrialRecord]:
    """Read a dataset CSV into records.

    Raises ``ParseError`` with row/column context on malformed cells and
    ``MissingColumnError`` when a required role column is absent.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty") from None
        if len(set(header)) != len(header):
            raise ParseError(f"{path}: duplicate column names in header {header}")
        index = {name: i for i, name in enumerate(header)}

        for required in (roles.r, roles.t, roles.y):
            if required not in index:
                raise MissingColumnError(
                    f"{path}: required column {required!r} not in header {header}"
                )
        has_a = roles.a is not None and roles.a in index
        has_z = roles.z is not None and roles.z in index
        role_names = {roles.r, roles.t, roles.y}
        if has_a:
            role_names.add(roles.a)
        if has_z:
            role_names.add(roles.z)
        covariate_names = [name for name in header if name not in role_names]

        records: List[TrialRecord] = []
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {rownum} has {len(row)} fields, header has "
                    f"{len(header)}"
                )
            records.append(
                TrialRecord(
                    r=_parse_binary(row[index[roles.r]], roles.r, rownum),
                    t=_parse_binary(row[index[roles.t]], roles.t, rownum),
                    y=_parse_real(row[index[roles.y]], roles.y, rownum),
                    a=_parse_binary(row[index[roles.a]], roles.a, rownum)
                    if has_a
                    else None,
                    z=_parse_binary(row[index[roles.z]], roles.z, rownum)
                    if has_z
                    else None,
                    covariates={
                        name: _parse_real(row[index[name]], name, rownum)
                        for name in covariate_names
                    },
                )
            )
    if not records:
        raise ParseError(f"{path}: no data rows")
    return records


def _format_value(value: float) -> str:
    as_float = float(value)
    if as_float.is_integer():
        return str(int(as_float))
    return repr(as_float)


def write_records(
    records: Sequence[TrialRecord],
    path: str,
    emit_latent: bool = False,
    latent_columns: Sequence[str] = LATENT_COLUMNS,
) -> None:
    """Write records as CSV: role columns first, then covariates sorted.

    Covariates named in ``latent_columns`` are withheld unless
    ``emit_latent`` is set.
    """
    if not records:
        raise ParseError("cannot write an empty record list")
    first = records[0]
    covs = list(first.covariates.keys())
    visible = sorted(c for c in covs if c not in latent_columns)
    latent = sorted(c for c in covs if c in latent_columns) if emit_latent else []

    header = ["r", "t", "y"]
    if first.a is not None:
        header.append("a")
    if first.z is not None:
        header.append("z")
    header += visible + latent

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            row: List[str] = [str(rec.r), str(rec.t), _format_value(rec.y)]
            if rec.a is not None:
                row.append(str(rec.a))
            if rec.z is not None:
                row.append(str(rec.z))
            row += [_format_value(rec.covariates[c]) for c in visible + latent]
            writer.writerow(row)
