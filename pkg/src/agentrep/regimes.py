"""Verification-regime ontology: strength levels, regime documents, catalog.

A regime declares what a verification procedure checks (task class and
properties), what evidence it must produce, what counts as passing, and how
strong the procedure is. Strength is a four-level ordinal scale:

    1 static-analysis < 2 automated-test-execution
      < 3 independent-human-review < 4 expert-adversarial-review

Regime documents use the shared line format (see `lineconf`), with keys
exactly {id, task_class, properties, required_evidence, threshold,
threshold_value, strength}.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import lineconf


class StrengthLevel(enum.IntEnum):
    STATIC_ANALYSIS = 1
    AUTOMATED_TEST_EXECUTION = 2
    INDEPENDENT_HUMAN_REVIEW = 3
    EXPERT_ADVERSARIAL_REVIEW = 4

    @property
    def label(self) -> str:
        return _STRENGTH_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "StrengthLevel":
        try:
            return _STRENGTH_BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown strength label {label!r}") from None


_STRENGTH_LABELS = {
    StrengthLevel.STATIC_ANALYSIS: "static-analysis",
    StrengthLevel.AUTOMATED_TEST_EXECUTION: "automated-test-execution",
    StrengthLevel.INDEPENDENT_HUMAN_REVIEW: "independent-human-review",
    StrengthLevel.EXPERT_ADVERSARIAL_REVIEW: "expert-adversarial-review",
}
_STRENGTH_BY_LABEL = {label: level for level, label in _STRENGTH_LABELS.items()}

# Core property vocabulary. Other labels are accepted as domain extensions.
KNOWN_PROPERTIES = frozenset({"correctness", "performance", "security", "maintainability"})

# Evidence kinds that only a human reviewer can produce. Regimes at strength
# 3-4 must require at least one of these; strength 1-2 regimes must not
# require an expert review report.
HUMAN_EVIDENCE_KINDS = frozenset(
    {"expert-review-report", "manual-review-notes", "adversarial-test-report"}
)
EXPERT_REVIEW_KIND = "expert-review-report"


@dataclass(frozen=True)
class VerificationRegime:
    regime_id: str
    task_class: str
    properties_assessed: frozenset[str]
    required_evidence: frozenset[str]
    strength: StrengthLevel
    threshold: str = ""
    threshold_value: float | None = None


@dataclass(frozen=True)
class RegimeViolation:
    code: str
    detail: str = ""


def validate_regime(regime: VerificationRegime) -> list[RegimeViolation]:
    """Return every violated regime invariant (empty list means valid)."""
    violations: list[RegimeViolation] = []
    if not regime.regime_id or any(ch.isspace() for ch in regime.regime_id):
        violations.append(RegimeViolation("bad-regime-id", regime.regime_id))
    if not regime.task_class:
        violations.append(RegimeViolation("empty-task-class"))
    if not regime.properties_assessed:
        violations.append(RegimeViolation("empty-properties"))
    if regime.threshold_value is not None and not 0.0 <= regime.threshold_value <= 1.0:
        violations.append(
            RegimeViolation("threshold-out-of-range", str(regime.threshold_value))
        )
    if regime.strength <= StrengthLevel.AUTOMATED_TEST_EXECUTION:
        if EXPERT_REVIEW_KIND in regime.required_evidence:
            violations.append(
                RegimeViolation(
                    "evidence-strength-mismatch",
                    f"strength {int(regime.strength)} regime requires {EXPERT_REVIEW_KIND}",
                )
            )
    else:
        if not regime.required_evidence & HUMAN_EVIDENCE_KINDS:
            violations.append(
                RegimeViolation(
                    "evidence-strength-mismatch",
                    f"strength {int(regime.strength)} regime requires no human-produced evidence",
                )
            )
    return violations


def satisfies(provided: frozenset[str] | set[str], regime: VerificationRegime) -> bool:
    """True iff the provided evidence kinds cover the regime's requirements."""
    return regime.required_evidence <= set(provided)


# --- document format -------------------------------------------------------

_REGIME_KEYS = {
    "id",
    "task_class",
    "properties",
    "required_evidence",
    "threshold",
    "threshold_value",
    "strength",
}
_REQUIRED_KEYS = ("id", "task_class", "properties", "required_evidence", "strength")


@dataclass(frozen=True)
class ParseIssue:
    line: int
    col: int
    code: str
    message: str

    def render(self) -> str:
        return f"{self.line}:{self.col}: {self.code}: {self.message}"


def parse_regime(document: str) -> VerificationRegime | list[ParseIssue]:
    """Parse one regime document.

    Returns the regime when the document is fully valid, otherwise the
    complete list of syntax and semantic issues with positions. Never
    returns a partially populated regime.
    """
    entries, line_errors = lineconf.parse(document)
    issues = [ParseIssue(e.line, e.col, "syntax-error", e.message) for e in line_errors]
    seen: dict[str, lineconf.Entry] = {}
    for entry in entries:
        if entry.kind == "section":
            issues.append(
                ParseIssue(entry.line, entry.key_col, "syntax-error", "unexpected section header")
            )
            continue
        if entry.key not in _REGIME_KEYS:
            issues.append(
                ParseIssue(entry.line, entry.key_col, "unknown-field", entry.key)
            )
            continue
        if entry.key in seen:
            issues.append(
                ParseIssue(entry.line, entry.key_col, "duplicate-field", entry.key)
            )
            continue
        seen[entry.key] = entry

    for key in _REQUIRED_KEYS:
        if key not in seen:
            issues.append(ParseIssue(0, 0, "missing-field", key))

    strength: StrengthLevel | None = None
    if "strength" in seen:
        entry = seen["strength"]
        try:
            strength = StrengthLevel.from_label(entry.value)
        except ValueError:
            issues.append(
                ParseIssue(entry.line, entry.value_col, "invalid-strength-label", entry.value)
            )

    threshold_value: float | None = None
    if "threshold_value" in seen:
        entry = seen["threshold_value"]
        try:
            threshold_value = float(entry.value)
        except ValueError:
            issues.append(
                ParseIssue(entry.line, entry.value_col, "invalid-threshold-value", entry.value)
            )

    if issues:
        return issues

    regime = VerificationRegime(
        regime_id=seen["id"].value,
        task_class=seen["task_class"].value,
        properties_assessed=frozenset(lineconf.split_list(seen["properties"].value)),
        required_evidence=frozenset(lineconf.split_list(seen["required_evidence"].value)),
        strength=strength,  # type: ignore[arg-type]
        threshold=seen["threshold"].value if "threshold" in seen else "",
        threshold_value=threshold_value,
    )
    semantic = validate_regime(regime)
    if semantic:
        anchor = seen.get("strength", seen["id"])
        return [
            ParseIssue(anchor.line, anchor.key_col, v.code, v.detail) for v in semantic
        ]
    return regime


def print_regime(regime: VerificationRegime) -> str:
    """Render a regime back into the document format (parse round-trips)."""
    lines = [
        f"id: {regime.regime_id}",
        f"task_class: {regime.task_class}",
        f"properties: {', '.join(sorted(regime.properties_assessed))}",
        f"required_evidence: {', '.join(sorted(regime.required_evidence))}",
        f"threshold: {regime.threshold}",
    ]
    if regime.threshold_value is not None:
        lines.append(f"threshold_value: {regime.threshold_value}")
    lines.append(f"strength: {regime.strength.label}")
    return "\n".join(lines) + "\n"


# --- catalog ----------------------------------------------------------------

class DuplicateRegimeId(Exception):
    pass


class UnknownRegime(Exception):
    pass


class InvalidRegime(Exception):
    def __init__(self, violations: list[RegimeViolation]):
        super().__init__(", ".join(v.code for v in violations))
        self.violations = violations


class RegimeCatalog:
    """Registry of regimes keyed by id. Immutable once registration ends."""

    def __init__(self):
        self._regimes: dict[str, VerificationRegime] = {}

    def register(self, regime: VerificationRegime) -> None:
        violations = validate_regime(regime)
        if violations:
            raise InvalidRegime(violations)
        if regime.regime_id in self._regimes:
            raise DuplicateRegimeId(regime.regime_id)
        self._regimes[regime.regime_id] = regime

    def lookup(self, regime_id: str) -> VerificationRegime | None:
        return self._regimes.get(regime_id)

    def require(self, regime_id: str) -> VerificationRegime:
        regime = self._regimes.get(regime_id)
        if regime is None:
            raise UnknownRegime(regime_id)
        return regime

    def __contains__(self, regime_id: str) -> bool:
        return regime_id in self._regimes

    def __len__(self) -> int:
        return len(self._regimes)

    def ids(self) -> list[str]:
        return sorted(self._regimes)


def default_catalog() -> RegimeCatalog:
    """The shipped starter catalog: two regimes per core task class."""
    catalog = RegimeCatalog()
    for regime in (
        VerificationRegime(
            regime_id="debugging-lint",
            task_class="debugging",
            properties_assessed=frozenset({"correctness", "maintainability"}),
            required_evidence=frozenset({"static-analysis-report"}),
            strength=StrengthLevel.STATIC_ANALYSIS,
            threshold="no findings at warning severity or above",
            threshold_value=1.0,
        ),
        VerificationRegime(
            regime_id="debugging-ci",
            task_class="debugging",
            properties_assessed=frozenset({"correctness"}),
            required_evidence=frozenset({"ci-logs", "test-additions"}),
            strength=StrengthLevel.AUTOMATED_TEST_EXECUTION,
            threshold="full suite green including the new regression tests",
            threshold_value=1.0,
        ),
        VerificationRegime(
            regime_id="patch-ci",
            task_class="patch-submission",
            properties_assessed=frozenset({"correctness", "maintainability"}),
            required_evidence=frozenset({"ci-logs", "coverage-delta"}),
            strength=StrengthLevel.AUTOMATED_TEST_EXECUTION,
            threshold="suite green and coverage non-decreasing",
            threshold_value=0.8,
        ),
        VerificationRegime(
            regime_id="patch-review",
            task_class="patch-submission",
            properties_assessed=frozenset({"correctness", "maintainability"}),
            required_evidence=frozenset({"manual-review-notes", "ci-logs"}),
            strength=StrengthLevel.INDEPENDENT_HUMAN_REVIEW,
            threshold="an independent reviewer approves the change",
            threshold_value=1.0,
        ),
        VerificationRegime(
            regime_id="security-scan",
            task_class="security-audit",
            properties_assessed=frozenset({"security"}),
            required_evidence=frozenset({"static-analysis-report"}),
            strength=StrengthLevel.STATIC_ANALYSIS,
            threshold="scanner reports no high-severity findings",
            threshold_value=1.0,
        ),
        VerificationRegime(
            regime_id="security-expert",
            task_class="security-audit",
            properties_assessed=frozenset({"security", "correctness"}),
            required_evidence=frozenset({"expert-review-report", "adversarial-test-report"}),
            strength=StrengthLevel.EXPERT_ADVERSARIAL_REVIEW,
            threshold="no critical vulnerabilities outstanding after adversarial review",
            threshold_value=1.0,
        ),
    ):
        catalog.register(regime)
    return catalog


def load_catalog(paths) -> RegimeCatalog:
    """Build a catalog from regime document files; raises on any parse issue."""
    catalog = RegimeCatalog()
    for path in paths:
        with open(path, "r", encoding="utf-8") as handle:
            result = parse_regime(handle.read())
        if isinstance(result, list):
            rendered = "; ".join(issue.render() for issue in result)
            raise InvalidRegime([RegimeViolation("parse-failure", f"{path}: {rendered}")])
        catalog.register(result)
    return catalog
