"""Regime ontology: strength order, document parsing, catalog behavior."""

from __future__ import annotations

import itertools
import random
from pathlib import Path

import pytest

from agentrep import regimes as rg

REGIME_DIR = Path(__file__).parent.parent / "regimes"

MINIMAL_DOC = """\
id: quick-check
task_class: debugging
properties: correctness
required_evidence: ci-logs
strength: automated-test-execution
"""


class TestStrengthLevel:
    def test_total_order(self):
        levels = list(rg.StrengthLevel)
        assert levels == sorted(levels)
        for a, b in itertools.combinations(levels, 2):
            assert a < b

    def test_transitivity_exhaustive(self):
        for a, b, c in itertools.product(rg.StrengthLevel, repeat=3):
            if a < b and b < c:
                assert a < c

    def test_label_mapping_bijective(self):
        labels = {level.label for level in rg.StrengthLevel}
        assert len(labels) == 4
        for level in rg.StrengthLevel:
            assert rg.StrengthLevel.from_label(level.label) is level

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            rg.StrengthLevel.from_label("vibes")


class TestParse:
    def test_minimal_document(self):
        regime = rg.parse_regime(MINIMAL_DOC)
        assert isinstance(regime, rg.VerificationRegime)
        assert regime.regime_id == "quick-check"
        assert regime.task_class == "debugging"
        assert regime.properties_assessed == frozenset({"correctness"})
        assert regime.required_evidence == frozenset({"ci-logs"})
        assert regime.strength is rg.StrengthLevel.AUTOMATED_TEST_EXECUTION

    def test_missing_strength(self):
        doc = "\n".join(
            line for line in MINIMAL_DOC.splitlines() if not line.startswith("strength")
        )
        issues = rg.parse_regime(doc)
        assert isinstance(issues, list)
        assert [(i.code, i.message) for i in issues] == [("missing-field", "strength")]

    def test_unknown_field_with_position(self):
        issues = rg.parse_regime(MINIMAL_DOC + "bogus: value\n")
        assert isinstance(issues, list)
        assert issues[0].code == "unknown-field"
        assert issues[0].line == 6

    def test_syntax_error_position(self):
        issues = rg.parse_regime("id: x\nno colon here\n")
        assert isinstance(issues, list)
        assert any(i.code == "syntax-error" and i.line == 2 for i in issues)

    def test_invalid_strength_label(self):
        doc = MINIMAL_DOC.replace("automated-test-execution", "gut-feeling")
        issues = rg.parse_regime(doc)
        assert any(i.code == "invalid-strength-label" for i in issues)

    def test_all_errors_reported(self):
        doc = "task_class: debugging\nbogus: 1\nmore bogus\n"
        issues = rg.parse_regime(doc)
        codes = sorted(i.code for i in issues)
        assert "syntax-error" in codes
        assert "unknown-field" in codes
        assert codes.count("missing-field") == 4  # id, properties, required_evidence, strength

    def test_expert_strength_without_human_evidence_rejected(self):
        doc = MINIMAL_DOC.replace(
            "strength: automated-test-execution", "strength: expert-adversarial-review"
        )
        issues = rg.parse_regime(doc)
        assert isinstance(issues, list)
        assert any(i.code == "evidence-strength-mismatch" for i in issues)

    def test_comments_ignored(self):
        assert isinstance(rg.parse_regime("# header\n" + MINIMAL_DOC), rg.VerificationRegime)

    def test_print_parse_roundtrip(self, catalog):
        for regime_id in catalog.ids():
            regime = catalog.require(regime_id)
            assert rg.parse_regime(rg.print_regime(regime)) == regime


class TestValidateRegime:
    def test_empty_properties(self):
        regime = rg.VerificationRegime(
            regime_id="r", task_class="debugging",
            properties_assessed=frozenset(),
            required_evidence=frozenset({"ci-logs"}),
            strength=rg.StrengthLevel.AUTOMATED_TEST_EXECUTION,
        )
        assert [v.code for v in rg.validate_regime(regime)] == ["empty-properties"]

    def test_valid_strength_two(self):
        regime = rg.VerificationRegime(
            regime_id="r", task_class="debugging",
            properties_assessed=frozenset({"correctness"}),
            required_evidence=frozenset({"ci-logs"}),
            strength=rg.StrengthLevel.AUTOMATED_TEST_EXECUTION,
        )
        assert rg.validate_regime(regime) == []

    def test_low_strength_cannot_require_expert_report(self):
        regime = rg.VerificationRegime(
            regime_id="r", task_class="debugging",
            properties_assessed=frozenset({"correctness"}),
            required_evidence=frozenset({"expert-review-report"}),
            strength=rg.StrengthLevel.STATIC_ANALYSIS,
        )
        assert [v.code for v in rg.validate_regime(regime)] == ["evidence-strength-mismatch"]


class TestSatisfies:
    def test_exact_match(self, catalog):
        regime = catalog.require("debugging-ci")
        assert rg.satisfies(regime.required_evidence, regime)

    def test_empty_provided_fails(self, catalog):
        regime = catalog.require("debugging-ci")
        assert not rg.satisfies(frozenset(), regime)

    def test_superset_satisfies(self, catalog):
        regime = catalog.require("debugging-ci")
        assert rg.satisfies(regime.required_evidence | {"extra"}, regime)

    def test_monotone_under_additions(self, catalog):
        rnd = random.Random(5)
        kinds = ["ci-logs", "test-additions", "coverage-delta", "static-analysis-report",
                 "expert-review-report", "adversarial-test-report", "manual-review-notes"]
        for _ in range(200):
            regime = catalog.require(rnd.choice(catalog.ids()))
            provided = set(rnd.sample(kinds, rnd.randrange(len(kinds) + 1)))
            before = rg.satisfies(provided, regime)
            provided.add(rnd.choice(kinds))
            after = rg.satisfies(provided, regime)
            if before:
                assert after


class TestCatalog:
    def test_register_lookup_identity(self):
        catalog = rg.RegimeCatalog()
        regime = rg.parse_regime(MINIMAL_DOC)
        catalog.register(regime)
        assert catalog.lookup("quick-check") == regime

    def test_duplicate_id_rejected(self):
        catalog = rg.RegimeCatalog()
        regime = rg.parse_regime(MINIMAL_DOC)
        catalog.register(regime)
        with pytest.raises(rg.DuplicateRegimeId):
            catalog.register(regime)

    def test_lookup_unknown_absent(self):
        assert rg.RegimeCatalog().lookup("nope") is None

    def test_register_validates(self):
        bad = rg.VerificationRegime(
            regime_id="r", task_class="t",
            properties_assessed=frozenset(),
            required_evidence=frozenset(),
            strength=rg.StrengthLevel.STATIC_ANALYSIS,
        )
        with pytest.raises(rg.InvalidRegime):
            rg.RegimeCatalog().register(bad)


class TestShippedCorpus:
    def test_corpus_has_two_regimes_per_task_class(self, catalog):
        files = sorted(REGIME_DIR.glob("*.regime"))
        assert len(files) >= 6
        loaded = rg.load_catalog(files)
        classes = {}
        for regime_id in loaded.ids():
            regime = loaded.require(regime_id)
            classes.setdefault(regime.task_class, []).append(regime_id)
        for task_class in ("debugging", "patch-submission", "security-audit"):
            assert len(classes[task_class]) >= 2

    def test_corpus_matches_builtin_catalog(self, catalog):
        loaded = rg.load_catalog(sorted(REGIME_DIR.glob("*.regime")))
        assert loaded.ids() == catalog.ids()
        for regime_id in loaded.ids():
            assert loaded.require(regime_id) == catalog.require(regime_id)
