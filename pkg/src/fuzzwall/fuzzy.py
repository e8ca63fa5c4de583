"""Mamdani fuzzy inference with Gaussian membership functions.

The controller maps two crisp, normalized observations (how fast a flow's
source sends, and how fast data comes back from its destination) to a
security level in [0, 1]:

    fuzzify -> fire rules (min) -> clip consequents (min) -> aggregate (max)
    -> centre-of-gravity defuzzification -> security band

Compound labels such as ``Medium-High`` name the fuzzy set lying midway
between two adjacent terms of a variable (see :meth:`LinguisticVariable.mf_for`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "FuzzyError",
    "FuzzyDomainError",
    "FuzzyConfigError",
    "GaussianMF",
    "LinguisticTerm",
    "LinguisticVariable",
    "FuzzyRule",
    "RuleBase",
    "SecurityBand",
    "InferenceResult",
    "membership_degree",
    "fuzzify",
    "activate_rule",
    "defuzzify_centroid",
    "infer",
    "band_of",
    "default_rulebase",
    "FIRING_FLOOR",
    "HIGH_SECURITY_FLOOR",
]

HEDGE_SEP = "-"

# Below this peak rule activation the controller treats the input as uncovered.
FIRING_FLOOR = 1e-9

HIGH_SECURITY_FLOOR = 0.7


class FuzzyError(ValueError):
    pass


class FuzzyDomainError(FuzzyError):
    """A crisp value is non-finite or outside the range an operation accepts."""


class FuzzyConfigError(FuzzyError):
    """A rule base, variable or rule is internally inconsistent."""


def _finite(x: float, what: str) -> float:
    try:
        x = float(x)
    except (TypeError, ValueError):
        raise FuzzyDomainError(f"{what} must be a real number, got {x!r}") from None
    if not math.isfinite(x):
        raise FuzzyDomainError(f"{what} must be finite, got {x!r}")
    return x


@dataclass(frozen=True)
class GaussianMF:
    center: float
    width: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.center) and math.isfinite(self.width)):
            raise FuzzyConfigError(f"non-finite Gaussian parameters ({self.center}, {self.width})")
        if self.width <= 0:
            raise FuzzyConfigError(f"Gaussian width must be positive, got {self.width}")

    def degree(self, x: float) -> float:
        d = x - self.center
        return math.exp(-(d * d) / (2.0 * self.width * self.width))

    def sample(self, xs: np.ndarray) -> np.ndarray:
        d = xs - self.center
        return np.exp(-(d * d) / (2.0 * self.width * self.width))


def membership_degree(mf: GaussianMF, x: float) -> float:
    """exp(-(x - c)^2 / (2 w^2)); raises FuzzyDomainError for non-finite x."""
    return mf.degree(_finite(x, "x"))


@dataclass(frozen=True)
class LinguisticTerm:
    name: str
    mf: GaussianMF


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    lo: float
    hi: float
    terms: tuple[LinguisticTerm, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise FuzzyConfigError(f"variable {self.name!r}: bad universe [{self.lo}, {self.hi}]")
        if len(self.terms) < 2:
            raise FuzzyConfigError(f"variable {self.name!r} needs at least 2 terms")
        seen = set()
        for t in self.terms:
            if t.name in seen:
                raise FuzzyConfigError(f"variable {self.name!r}: duplicate term {t.name!r}")
            seen.add(t.name)
            if not self.lo <= t.mf.center <= self.hi:
                raise FuzzyConfigError(
                    f"variable {self.name!r}: term {t.name!r} centre {t.mf.center} "
                    f"outside [{self.lo}, {self.hi}]"
                )

    @property
    def universe(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def term_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.terms)

    def clamp(self, x: float) -> float:
        return min(max(x, self.lo), self.hi)

    def hedges(self) -> tuple[str, ...]:
        """Compound labels for every pair of adjacent terms, in term order."""
        names = self.term_names
        return tuple(f"{a}{HEDGE_SEP}{b}" for a, b in zip(names, names[1:]))

    def mf_for(self, label: str) -> GaussianMF:
        """Membership function for a term name or an adjacent-pair label.

        ``A-B`` resolves to a Gaussian centred halfway between A and B with
        the mean of their widths.
        """
        parts = label.split(HEDGE_SEP)
        index = {t.name: i for i, t in enumerate(self.terms)}
        for p in parts:
            if p not in index:
                raise FuzzyConfigError(f"variable {self.name!r} has no term {p!r}")
        if len(parts) == 1:
            return self.terms[index[parts[0]]].mf
        if len(parts) != 2 or abs(index[parts[0]] - index[parts[1]]) != 1:
            raise FuzzyConfigError(
                f"variable {self.name!r}: {label!r} must join two adjacent terms"
            )
        a, b = self.terms[index[parts[0]]].mf, self.terms[index[parts[1]]].mf
        return GaussianMF((a.center + b.center) / 2.0, (a.width + b.width) / 2.0)


def fuzzify(variable: LinguisticVariable, x: float) -> dict[str, float]:
    """Degrees of every term and adjacent-pair label of ``variable`` at ``x``.

    ``x`` is clamped to the variable's universe first.
    """
    x = variable.clamp(_finite(x, f"input {variable.name!r}"))
    out = {t.name: t.mf.degree(x) for t in variable.terms}
    for label in variable.hedges():
        out[label] = variable.mf_for(label).degree(x)
    return out


@dataclass(frozen=True)
class FuzzyRule:
    """``if v1 is t1 and v2 is t2 ... then out is t``."""

    antecedents: tuple[tuple[str, str], ...]
    consequent: tuple[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "antecedents", tuple(tuple(a) for a in self.antecedents))
        object.__setattr__(self, "consequent", tuple(self.consequent))
        if not self.antecedents:
            raise FuzzyConfigError("a rule needs at least one antecedent")

    def __str__(self) -> str:
        cond = " and ".join(f"{v} is {t}" for v, t in self.antecedents)
        return f"if {cond} then {self.consequent[0]} is {self.consequent[1]}"


def activate_rule(rule: FuzzyRule, degrees: Mapping[str, Mapping[str, float]]) -> float:
    """Firing strength of ``rule``: the minimum of its antecedent degrees."""
    strength = 1.0
    for var, label in rule.antecedents:
        try:
            d = degrees[var][label]
        except KeyError:
            raise FuzzyConfigError(f"no degree for {var} is {label} in rule `{rule}`") from None
        if d < strength:
            strength = d
    return strength


class SecurityBand(enum.Enum):
    INSECURE = ("Insecure", 0.0, HIGH_SECURITY_FLOOR / 3)
    LOW_SECURED = ("LowSecured", HIGH_SECURITY_FLOOR / 3, 2 * HIGH_SECURITY_FLOOR / 3)
    MEDIUM_SECURED = ("MediumSecured", 2 * HIGH_SECURITY_FLOOR / 3, HIGH_SECURITY_FLOOR)
    HIGH_SECURED = ("HighSecured", HIGH_SECURITY_FLOOR, 1.0)

    def __init__(self, label: str, lo: float, hi: float) -> None:
        self.label = label
        self.lo = lo
        self.hi = hi

    def __str__(self) -> str:
        return self.label

    @classmethod
    def from_label(cls, label: str) -> "SecurityBand":
        for b in cls:
            if b.label == label:
                return b
        raise KeyError(label)


def band_of(crisp: float) -> SecurityBand:
    """Band containing ``crisp``; intervals are closed on the left, the top one on both ends."""
    crisp = _finite(crisp, "security level")
    if not 0.0 <= crisp <= 1.0:
        raise FuzzyDomainError(f"security level {crisp} outside [0, 1]")
    if crisp >= SecurityBand.HIGH_SECURED.lo:
        return SecurityBand.HIGH_SECURED
    if crisp >= SecurityBand.MEDIUM_SECURED.lo:
        return SecurityBand.MEDIUM_SECURED
    if crisp >= SecurityBand.LOW_SECURED.lo:
        return SecurityBand.LOW_SECURED
    return SecurityBand.INSECURE


def defuzzify_centroid(xs: Sequence[float], mu: Sequence[float], empty: float = 0.0) -> float:
    """Centre of gravity of the sampled aggregate.

    Both moments are trapezoid integrals over the grid, so the result
    approximates the continuous centroid to O(h^2) instead of the O(h) a
    plain sum(x*mu)/sum(mu) gives when the aggregate has mass at the edges.
    Returns ``empty`` when the aggregate carries no mass.
    """
    xs = np.asarray(xs, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if xs.shape != mu.shape or xs.ndim != 1 or xs.size < 2:
        raise FuzzyDomainError("need at least 2 samples and matching grid/degree arrays")
    if mu.min() < 0.0 or mu.max() > 1.0:
        raise FuzzyDomainError("aggregated degrees must lie in [0, 1]")
    mass = float(np.trapezoid(mu, xs))
    if mass == 0.0:
        return empty
    return float(np.trapezoid(xs * mu, xs) / mass)


@dataclass(frozen=True)
class InferenceResult:
    crisp: float
    firing_strengths: tuple[float, ...]
    band: SecurityBand
    inputs: tuple[tuple[str, float], ...] = field(default=())

    @property
    def fail_closed(self) -> bool:
        return max(self.firing_strengths, default=0.0) <= FIRING_FLOOR


@dataclass(frozen=True)
class RuleBase:
    """Input/output variables plus rules: the controller's whole configuration."""

    inputs: tuple[LinguisticVariable, ...]
    output: LinguisticVariable
    rules: tuple[FuzzyRule, ...]
    defuzz_samples: int = 2001

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.inputs:
            raise FuzzyConfigError("rule base needs at least one input variable")
        names = [v.name for v in self.inputs] + [self.output.name]
        if len(set(names)) != len(names):
            raise FuzzyConfigError(f"variable names must be distinct: {names}")
        if isinstance(self.defuzz_samples, bool) or not isinstance(self.defuzz_samples, int):
            raise FuzzyConfigError("defuzz_samples must be an integer")
        if self.defuzz_samples < 101:
            raise FuzzyConfigError(f"defuzz_samples must be >= 101, got {self.defuzz_samples}")
        if not self.rules:
            raise FuzzyConfigError("rule base has no rules")
        by_name = {v.name: v for v in self.inputs}
        for rule in self.rules:
            seen = set()
            for var, label in rule.antecedents:
                if var not in by_name:
                    raise FuzzyConfigError(f"rule `{rule}`: unknown input variable {var!r}")
                if var in seen:
                    raise FuzzyConfigError(f"rule `{rule}`: variable {var!r} tested twice")
                seen.add(var)
                by_name[var].mf_for(label)
            out_var, out_term = rule.consequent
            if out_var != self.output.name:
                raise FuzzyConfigError(f"rule `{rule}`: consequent must use {self.output.name!r}")
            if out_term not in self.output.term_names:
                raise FuzzyConfigError(f"rule `{rule}`: output has no term {out_term!r}")

    def input_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.inputs)

    @cached_property
    def grid(self) -> np.ndarray:
        return np.linspace(self.output.lo, self.output.hi, self.defuzz_samples)

    @cached_property
    def _consequent_curves(self) -> dict[str, np.ndarray]:
        return {t.name: t.mf.sample(self.grid) for t in self.output.terms}


def infer(rb: RuleBase, inputs: Mapping[str, float]) -> InferenceResult:
    degrees = {}
    used = []
    for var in rb.inputs:
        if var.name not in inputs:
            raise FuzzyConfigError(f"missing input {var.name!r}")
        x = var.clamp(_finite(inputs[var.name], f"input {var.name!r}"))
        used.append((var.name, x))
        degrees[var.name] = fuzzify(var, x)

    strengths = tuple(activate_rule(r, degrees) for r in rb.rules)

    lo = rb.output.lo
    if max(strengths) <= FIRING_FLOOR:
        return InferenceResult(lo, strengths, SecurityBand.INSECURE, tuple(used))

    # min(w, mf) is monotone in w, so the max over rules sharing a
    # consequent equals clipping that consequent once at their max strength.
    level: dict[str, float] = {}
    for rule, w in zip(rb.rules, strengths):
        term = rule.consequent[1]
        if w > level.get(term, 0.0):
            level[term] = w
    curves = rb._consequent_curves
    agg = np.zeros(rb.defuzz_samples)
    for term, w in level.items():
        np.maximum(agg, np.minimum(curves[term], w), out=agg)

    crisp = defuzzify_centroid(rb.grid, agg, empty=lo)
    span = rb.output.hi - lo
    band = band_of(min(1.0, max(0.0, (crisp - lo) / span)))
    return InferenceResult(crisp, strengths, band, tuple(used))


# Default controller parameters (normalized rates on [0, 1]).
INPUT_WIDTH = 0.07
OUTPUT_WIDTH = 0.12

TABLE_I = (
    ("Low", "Low", "Insecure"),
    ("Low", "Medium", "LowSecured"),
    ("Low", "Medium-High", "MediumSecured"),
    ("Low", "High", "HighSecured"),
    ("Medium", "Low-Medium", "MediumSecured"),
    ("Medium", "Low", "Insecure"),
    ("High", "High", "HighSecured"),
)


def _rate_variable(name: str) -> LinguisticVariable:
    return LinguisticVariable(
        name,
        0.0,
        1.0,
        (
            LinguisticTerm("Low", GaussianMF(0.0, INPUT_WIDTH)),
            LinguisticTerm("Medium", GaussianMF(0.5, INPUT_WIDTH)),
            LinguisticTerm("High", GaussianMF(1.0, INPUT_WIDTH)),
        ),
    )


def default_rulebase() -> RuleBase:
    """The seven-row source/destination rule table with the default MF parameters."""
    security = LinguisticVariable(
        "security",
        0.0,
        1.0,
        (
            LinguisticTerm("Insecure", GaussianMF(0.1, OUTPUT_WIDTH)),
            LinguisticTerm("LowSecured", GaussianMF(0.35, OUTPUT_WIDTH)),
            LinguisticTerm("MediumSecured", GaussianMF(0.6, OUTPUT_WIDTH)),
            LinguisticTerm("HighSecured", GaussianMF(0.85, OUTPUT_WIDTH)),
        ),
    )
    rules = tuple(
        FuzzyRule((("source", s), ("destination", d)), ("security", out))
        for s, d, out in TABLE_I
    )
    return RuleBase((_rate_variable("source"), _rate_variable("destination")), security, rules)
