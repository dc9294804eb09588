"""Deterministic regression kernel.

Ordinary least squares and logistic regression via iteratively reweighted
least squares, plus prediction and average marginal effects. Every fit is
a pure function of its inputs: no randomness, no global state, bit-identical
coefficients for identical inputs. Uncertainty is intentionally absent here;
standard errors are produced by resampling in the simulation harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import qr, solve_triangular
from scipy.special import expit

from .errors import (
    ColumnMismatchError,
    DimensionMismatchError,
    NonConvergenceError,
    RankDeficientError,
    SeparationError,
)

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 50
# |coefficient x column sd| beyond this is a saturated logit.
SEPARATION_BOUND = 30.0
# Probability clip applied to IRLS weights only; reported fitted values are
# unclipped inverse-logits.
WEIGHT_FLOOR = 1e-10
# Rank tolerance relative to the largest pivot of the column-pivoted QR.
RANK_RTOL = 1e-10

INTERCEPT = "intercept"


@dataclass(frozen=True)
class DesignMatrix:
    """Named regressor matrix with a leading all-ones intercept column."""

    names: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DimensionMismatchError("design values must be a 2-d array")
        if len(self.names) != vals.shape[1]:
            raise DimensionMismatchError(
                f"{len(self.names)} column names for {vals.shape[1]} columns"
            )
        if len(set(self.names)) != len(self.names):
            raise DimensionMismatchError(f"duplicate column names in {self.names}")
        if vals.shape[0] < vals.shape[1]:
            raise DimensionMismatchError(
                f"design has {vals.shape[0]} rows but {vals.shape[1]} columns"
            )
        if not np.all(vals[:, 0] == 1.0):
            raise DimensionMismatchError("first design column must be all ones")
        if vals is not self.values or vals.flags.writeable:
            vals = vals.copy()
            vals.flags.writeable = False
            object.__setattr__(self, "values", vals)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def columns(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self._index(name)]

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ColumnMismatchError(
                f"no column {name!r} in design {self.names}"
            ) from None

    def with_column(self, name: str, value: float) -> "DesignMatrix":
        """Copy of the design with one column set to a constant value."""
        vals = self.values.copy()
        vals[:, self._index(name)] = value
        return DesignMatrix(self.names, vals)


def design(*columns: Tuple[str, np.ndarray], n: int | None = None) -> DesignMatrix:
    """Assemble a design matrix, prepending the intercept column.

    ``design(("r", r), ("s", s))`` builds columns (intercept, r, s); an
    intercept-only design is ``design(n=len(y))``.
    """
    if columns:
        length = len(np.asarray(columns[0][1]))
    elif n is not None:
        length = int(n)
    else:
        raise DimensionMismatchError("intercept-only design needs an explicit n")
    names = [INTERCEPT]
    cols = [np.ones(length, dtype=np.float64)]
    for name, values in columns:
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (length,):
            raise DimensionMismatchError(
                f"column {name!r} has shape {arr.shape}, expected ({length},)"
            )
        names.append(name)
        cols.append(arr)
    return DesignMatrix(tuple(names), np.column_stack(cols))


@dataclass(frozen=True)
class RegressionFit:
    """Fitted coefficients plus convergence metadata.

    ``fitted_values`` are on the probability scale for logistic fits and on
    the outcome scale for OLS. ``log_likelihood`` is set for logistic fits
    only.
    """

    kind: str
    names: Tuple[str, ...]
    beta: np.ndarray
    fitted_values: np.ndarray
    residuals: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float | None = None

    @property
    def coefficients(self) -> dict:
        return dict(zip(self.names, self.beta))

    def coefficient(self, name: str) -> float:
        try:
            return float(self.beta[self.names.index(name)])
        except ValueError:
            raise ColumnMismatchError(
                f"fit has no coefficient {name!r}; columns are {self.names}"
            ) from None


def scaled_pivot_ratio(X: DesignMatrix) -> float:
    """Smallest-to-largest pivot ratio of the column-normalized design.

    A scale-free collinearity measure: 1.0 for orthonormal columns, 0.0 for
    an exactly singular design. Callers use it to screen generated-regressor
    designs whose near-collinearity is a statistical (not numerical) failure.
    """
    norms = np.linalg.norm(X.values, axis=0)
    if np.any(norms == 0.0):
        return 0.0
    r = qr(X.values / norms, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return 0.0
    return float(diag[-1] / diag[0])


def _solve_least_squares(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Column-pivoted QR solve with a scale-aware rank check."""
    q, r, piv = qr(values, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0 or np.any(diag < RANK_RTOL * diag[0]):
        raise RankDeficientError(
            "design matrix is rank deficient (collinear or constant column)"
        )
    beta_pivoted = solve_triangular(r, q.T @ y)
    beta = np.empty_like(beta_pivoted)
    beta[piv] = beta_pivoted
    return beta


def _check_response(X: DesignMatrix, y: np.ndarray) -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if arr.shape != (X.rows,):
        raise DimensionMismatchError(
            f"response has shape {arr.shape}, design has {X.rows} rows"
        )
    return arr


def ols_fit(X: DesignMatrix, y: Sequence[float]) -> RegressionFit:
    """Least-squares fit. Raises ``RankDeficientError`` on collinear designs."""
    arr = _check_response(X, y)
    beta = _solve_least_squares(X.values, arr)
    fitted = X.values @ beta
    return RegressionFit(
        kind="ols",
        names=X.names,
        beta=beta,
        fitted_values=fitted,
        residuals=arr - fitted,
        converged=True,
        iterations=0,
    )


def logistic_fit(X: DesignMatrix, y: Sequence[float]) -> RegressionFit:
    """Maximum-likelihood logit fit via iteratively reweighted least squares.

    Convergence is max absolute coefficient change below ``IRLS_TOL``.
    Coefficients whose column-sd-scaled magnitude exceeds
    ``SEPARATION_BOUND`` raise ``SeparationError``; hitting the iteration
    budget raises ``NonConvergenceError``.
    """
    arr = _check_response(X, y)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise DimensionMismatchError("logistic response must be coded 0/1")

    # Scale guard against the spread of each column; the intercept is
    # compared on its own scale.
    sd = X.values.std(axis=0)
    scale = np.where(sd > 0.0, sd, 1.0)
    scale[0] = 1.0

    beta = np.zeros(X.columns, dtype=np.float64)
    for iteration in range(1, IRLS_MAX_ITER + 1):
        eta = X.values @ beta
        prob = expit(eta)
        clipped = np.clip(prob, WEIGHT_FLOOR, 1.0 - WEIGHT_FLOOR)
        weight = clipped * (1.0 - clipped)
        root_w = np.sqrt(weight)
        working = eta + (arr - clipped) / weight
        beta_new = _solve_least_squares(X.values * root_w[:, None], working * root_w)
        if np.any(np.abs(beta_new * scale) > SEPARATION_BOUND):
            raise SeparationError(
                "coefficients diverged beyond the saturation bound; "
                "data are separated"
            )
        delta = np.max(np.abs(beta_new - beta))
        beta = beta_new
        if delta < IRLS_TOL:
            fitted = expit(X.values @ beta)
            safe = np.clip(fitted, 1e-300, 1.0 - 1e-16)
            loglik = float(np.sum(arr * np.log(safe) + (1.0 - arr) * np.log1p(-safe)))
            return RegressionFit(
                kind="logistic",
                names=X.names,
                beta=beta,
                fitted_values=fitted,
                residuals=arr - fitted,
                converged=True,
                iterations=iteration,
                log_likelihood=loglik,
            )
    raise NonConvergenceError(
        f"IRLS did not converge within {IRLS_MAX_ITER} iterations"
    )


def predict(fit: RegressionFit, X_new: DesignMatrix) -> np.ndarray:
    """Linear predictor for OLS fits, inverse-logit for logistic fits."""
    if X_new.names != fit.names:
        raise ColumnMismatchError(
            f"design columns {X_new.names} do not match fit columns {fit.names}"
        )
    eta = X_new.values @ fit.beta
    if fit.kind == "logistic":
        return expit(eta)
    return eta


def average_marginal_effect(
    fit: RegressionFit,
    X: DesignMatrix,
    target: str,
    contrast: Tuple[float, float] = (0.0, 1.0),
) -> float:
    """Mean prediction change when ``target`` is toggled low -> high.

    All other columns stay at their observed values, so for an OLS fit with
    no interaction columns this reduces to coefficient x (high - low).
    """
    low, high = contrast
    X._index(target)  # raises ColumnMismatchError early
    pred_high = predict(fit, X.with_column(target, high))
    pred_low = predict(fit, X.with_column(target, low))
    return float(np.mean(pred_high - pred_low))
