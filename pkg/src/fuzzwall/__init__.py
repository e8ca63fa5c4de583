"""Fuzzy-controlled firewall model and hybrid-cloud traffic simulator."""

from fuzzwall.fuzzy import (
    GaussianMF,
    InferenceResult,
    LinguisticTerm,
    LinguisticVariable,
    FuzzyRule,
    RuleBase,
    SecurityBand,
    band_of,
    default_rulebase,
    infer,
)

__version__ = "0.1.0"

__all__ = [
    "GaussianMF",
    "InferenceResult",
    "LinguisticTerm",
    "LinguisticVariable",
    "FuzzyRule",
    "RuleBase",
    "SecurityBand",
    "band_of",
    "default_rulebase",
    "infer",
]
