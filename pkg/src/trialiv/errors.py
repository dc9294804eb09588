"""Shared exception hierarchy.

Two broad families so front ends can map failures consistently:
``DataError`` for malformed or unusable inputs, ``EstimationError`` for
numerical and identification failures on well-formed data. The CLI maps
them to exit codes 3 and 4 respectively; the HTTP service maps them to
400 and 422.
"""


class TrialIVError(Exception):
    """Base class for all package errors."""


class DataError(TrialIVError):
    """Input data is malformed, inconsistent, or missing required pieces."""


class EstimationError(TrialIVError):
    """A fit or estimand could not be computed from well-formed data."""


# --- regression kernel ---------------------------------------------------

class DimensionMismatchError(DataError):
    """Response length, design shape, or response coding is incompatible."""


class RankDeficientError(EstimationError):
    """Design matrix is numerically rank deficient (collinear columns)."""


class SeparationError(EstimationError):
    """Logistic coefficients diverged; the data are (quasi-)separated."""


class NonConvergenceError(EstimationError):
    """IRLS failed to converge within the iteration budget."""


class ColumnMismatchError(DataError):
    """Design columns do not match the columns a fit was trained on."""


# --- causal diagrams -----------------------------------------------------

class DagError(DataError):
    """Graph construction failed (cycle, bad edge, duplicate edge)."""


class UnknownNodeError(DataError):
    """A query referenced a node that is not in the graph."""


# --- estimators ----------------------------------------------------------

class EmptyArmError(EstimationError):
    """A randomized arm required by the estimator has no subjects."""


class EmptyStratumError(EstimationError):
    """A comparison group or event stratum is empty."""


class NegativeComplierFractionError(EstimationError):
    """Treatment is less likely under assignment than without it."""


class WeakInstrumentError(EstimationError):
    """Instrument-treatment covariance is numerically indistinguishable from zero."""


class WeakInteractionError(EstimationError):
    """First-stage interaction too small relative to its resampling spread."""


class AdherenceOrderViolatedError(EstimationError):
    """Pr(A=1|T=1) does not exceed Pr(A=1|T=0)."""


# --- data generation and simulation harness -------------------------------

class InvalidParamError(DataError):
    """A generator or campaign parameter is out of range or unknown."""


class UnknownEstimatorError(DataError):
    """Estimator name not present in the registry or campaign result."""


class TooManyResampleFailuresError(EstimationError):
    """More than the allowed share of bootstrap resamples failed."""


# --- file handling --------------------------------------------------------

class ParseError(DataError):
    """A dataset, DAG, or config file failed to parse; message carries context."""


class MissingColumnError(DataError):
    """A required column is absent from the dataset."""
