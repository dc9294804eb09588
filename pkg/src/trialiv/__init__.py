"""Instrumental-variable estimation of clinical-trial estimands.

Subpackages cover the deterministic regression kernel, causal diagrams with
d-separation queries, the estimand estimators and sensitivity analyses, the
seeded trial data generators, and the Monte Carlo replication harness. The
CLI (`trialiv`) and the HTTP service (`trialiv.service`) are thin layers
over the same functions.
"""

__version__ = "0.1.0"
