"""Shared builders and independent oracles for the test suite.

The oracles here deliberately re-derive expected values from first
principles (direct summation, brute-force filtering, recursive hashing)
instead of calling the code paths they check.
"""

from __future__ import annotations

import math
import random
from pathlib import Path

import pytest

from agentrep import evidence as ev
from agentrep.cards import AggregationConfig
from agentrep.regimes import StrengthLevel, default_catalog

GOLDEN_DIR = Path(__file__).parent / "golden"

BASE_TIME = 1_700_000_000


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


def make_event(**overrides) -> ev.EvidenceEvent:
    """A valid debugging-ci success event; fields overridable per test."""
    fields = dict(
        agent="agent-alpha",
        task="task-0001",
        context=ev.ContextKey("debugging"),
        regime_id="debugging-ci",
        outcome=ev.Outcome(ev.Verdict.SUCCESS),
        strength=StrengthLevel.AUTOMATED_TEST_EXECUTION,
        timestamp=BASE_TIME,
        verifier="verifier-ci",
        integrity=ev.IntegrityRecord(),
        evidence_kinds=frozenset({"ci-logs", "test-additions"}),
    )
    fields.update(overrides)
    return ev.EvidenceEvent(**fields)


_REGIME_IDS = [
    "debugging-lint", "debugging-ci", "patch-ci",
    "patch-review", "security-scan", "security-expert",
]
_CONTEXTS = [
    ev.ContextKey("debugging"),
    ev.ContextKey("debugging", "kernel"),
    ev.ContextKey("security-audit"),
    ev.ContextKey("patch-submission"),
]
_AGENTS = ["agent-a", "agent-b", "agent-c"]
_VERIFIERS = ["ver-1", "ver-2", "ver-3"]


def random_event(rnd: random.Random, cat, index: int,
                 context: ev.ContextKey | None = None,
                 agent: str | None = None,
                 allow_violations: bool = True) -> ev.EvidenceEvent:
    """Catalog-valid randomized event with a unique task id."""
    regime = cat.require(rnd.choice(_REGIME_IDS))
    if allow_violations and rnd.random() < 0.15:
        status = rnd.choice([ev.IntegrityStatus.REVERSED, ev.IntegrityStatus.PENALIZED])
        integrity = ev.IntegrityRecord(
            status=status,
            severity=rnd.choice([ev.Severity.NEGLIGENCE, ev.Severity.FRAUD]),
            dispute_time=BASE_TIME + rnd.randrange(100_000),
        )
    else:
        integrity = ev.IntegrityRecord()
    return ev.EvidenceEvent(
        agent=agent if agent is not None else rnd.choice(_AGENTS),
        task=f"task-{index:05d}-{rnd.randrange(1_000_000):06d}",
        context=context if context is not None else rnd.choice(_CONTEXTS),
        regime_id=regime.regime_id,
        outcome=ev.Outcome(rnd.choice([ev.Verdict.SUCCESS, ev.Verdict.FAILURE])),
        strength=regime.strength,
        timestamp=BASE_TIME + rnd.randrange(90 * 86_400),
        verifier=rnd.choice(_VERIFIERS),
        integrity=integrity,
        evidence_kinds=regime.required_evidence,
    )


def oracle_assessment(events, agent: str, context: ev.ContextKey,
                      s_req: StrengthLevel, now: int, cfg: AggregationConfig,
                      reliability_counts: dict[str, tuple[int, int]] | None = None):
    """Brute-force recomputation of the scoring formula straight from the
    raw event list: per-event weight gamma^gap * 2^(-age/h) * r(verifier),
    fsum accumulation, flat pseudo-failures per integrity violation.
    reliability_counts None means reliability weighting off (r = 1)."""

    def rel(verifier: str) -> float:
        if reliability_counts is None:
            return 1.0
        agreements, checks = reliability_counts.get(verifier, (0, 0))
        return (agreements + 9.0) / (checks + 10.0)

    matching = [e for e in events if e.agent == agent and e.context == context]
    success_weights, failure_weights, mass = [], [], []
    violations = 0
    for e in matching:
        decay = 2.0 ** (-(now - e.timestamp) / cfg.recency_half_life)
        gap = max(0, int(s_req) - int(e.strength))
        weight = (cfg.strength_discount ** gap) * decay * rel(e.verifier)
        if e.outcome.verdict is ev.Verdict.SUCCESS:
            success_weights.append(weight)
        else:
            failure_weights.append(weight)
        if int(e.strength) >= int(s_req):
            mass.append(decay * rel(e.verifier))
        if e.integrity.status in ev.VIOLATION_STATUSES:
            violations += 1
    a = cfg.prior_successes + math.fsum(success_weights)
    b = cfg.prior_failures + math.fsum(failure_weights) + cfg.violation_penalty * violations
    mean = a / (a + b)
    lcb = max(0.0, mean - cfg.lcb_z * math.sqrt(mean * (1.0 - mean) / (a + b)))
    return mean, lcb, mean - lcb, math.fsum(mass)


def brute_force_query(events, flt) -> list[ev.EvidenceEvent]:
    """Filter semantics re-stated independently of the store."""
    out = []
    for e in events:
        if flt.agent is not None and e.agent != flt.agent:
            continue
        if flt.task_class is not None and e.context.task_class != flt.task_class:
            continue
        if flt.regime_id is not None and e.regime_id != flt.regime_id:
            continue
        if flt.min_strength is not None and int(e.strength) < int(flt.min_strength):
            continue
        if flt.verdict is not None and e.outcome.verdict is not flt.verdict:
            continue
        if flt.time_range is not None and not (
            flt.time_range[0] <= e.timestamp <= flt.time_range[1]
        ):
            continue
        out.append(e)
    return out
