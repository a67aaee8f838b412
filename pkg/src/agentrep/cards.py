"""Context-conditioned reputation cards and strength/recency-weighted scoring.

A card holds one agent's history for one context; context isolation is
structural (an event for another context cannot enter the card). Scoring is
a weighted Beta-Bernoulli posterior: each entry contributes

    w = gamma^max(0, s_req - s) * 2^(-age / half_life) * r(verifier)

to the success or failure pseudo-count by verdict, integrity violations add
flat pseudo-failures, and the assessment reports the posterior mean, a
one-sided normal-approximation lower confidence bound, and the effective
mass of evidence at or above the required strength.

Card entries are kept sorted by (timestamp, event_id), so folding
`update_card` over any permutation of an event set produces the same card
as `rebuild_card`, field for field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from types import MappingProxyType

from . import evidence as ev
from .regimes import StrengthLevel


class NegativeAge(ValueError):
    pass


class ContextMismatch(Exception):
    pass


class AgentMismatch(Exception):
    pass


class UnknownTask(Exception):
    pass


@dataclass(frozen=True)
class AggregationConfig:
    """Scoring constants. All positive; strength_discount in (0, 1]."""

    prior_successes: float = 1.0
    prior_failures: float = 1.0
    strength_discount: float = 0.5
    recency_half_life: float = 90.0 * 86400.0
    violation_penalty: float = 5.0
    scrutiny_duration: float = 30.0 * 86400.0
    lcb_z: float = 1.645

    def __post_init__(self):
        for name in ("prior_successes", "prior_failures", "strength_discount",
                     "recency_half_life", "violation_penalty", "scrutiny_duration",
                     "lcb_z"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.strength_discount > 1.0:
            raise ValueError("strength_discount must be in (0, 1]")

    _FIELD_TYPES = MappingProxyType({
        "prior_successes": float,
        "prior_failures": float,
        "strength_discount": float,
        "recency_half_life": float,
        "violation_penalty": float,
        "scrutiny_duration": float,
        "lcb_z": float,
    })

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "AggregationConfig":
        """Build from `key: value` entries; missing keys take defaults."""
        kwargs = {}
        for key, raw in mapping.items():
            caster = cls._FIELD_TYPES.get(key)
            if caster is None:
                raise ValueError(f"unknown aggregation key {key!r}")
            kwargs[key] = caster(raw)
        return cls(**kwargs)


DEFAULT_AGGREGATION = AggregationConfig()


@dataclass(frozen=True)
class CardEntry:
    event_id: str
    task: str
    strength: StrengthLevel
    verdict: ev.Verdict
    timestamp: int
    verifier: str
    integrity_status: ev.IntegrityStatus
    integrity_severity: ev.Severity


@dataclass(frozen=True)
class ReputationCard:
    agent: str
    context: ev.ContextKey
    entries: tuple[CardEntry, ...] = ()
    violation_count: int = 0
    scrutiny_until: int | None = None
    last_updated: int = 0

    @classmethod
    def empty(cls, agent: str, context: ev.ContextKey) -> "ReputationCard":
        return cls(agent=agent, context=context)


@dataclass(frozen=True)
class Assessment:
    score: float
    lcb: float
    uncertainty: float
    n_eff: float
    scrutiny_active: bool


class VerifierReliabilityTable:
    """Cross-check bookkeeping per verifier: r(v) = (agreements+9)/(checks+10).

    The Beta(9, 1) prior makes unknown verifiers usable (r = 0.9) while a
    few disagreements pull reliability down quickly.
    """

    def __init__(self, counts: dict[str, tuple[int, int]] | None = None):
        self._counts: dict[str, tuple[int, int]] = dict(counts or {})

    def counts(self, verifier: str) -> tuple[int, int]:
        return self._counts.get(verifier, (0, 0))

    def reliability(self, verifier: str) -> float:
        agreements, checks = self.counts(verifier)
        return (agreements + 9.0) / (checks + 10.0)

    def with_check(self, verifier: str, agreed: bool) -> "VerifierReliabilityTable":
        agreements, checks = self.counts(verifier)
        updated = dict(self._counts)
        updated[verifier] = (agreements + (1 if agreed else 0), checks + 1)
        return VerifierReliabilityTable(updated)

    def verifiers(self) -> list[str]:
        return sorted(self._counts)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VerifierReliabilityTable) and self._counts == other._counts


def record_cross_check(
    table: VerifierReliabilityTable, verifier: str, agreed: bool
) -> VerifierReliabilityTable:
    return table.with_check(verifier, agreed)


def decay_weight(age_seconds: float, half_life: float) -> float:
    """Exponential recency weight 2^(-age/half_life), 1.0 at age zero."""
    if age_seconds < 0:
        raise NegativeAge(f"age {age_seconds} < 0")
    if half_life <= 0:
        raise ValueError("half_life must be positive")
    return 2.0 ** (-age_seconds / half_life)


def _scrutiny_from_entries(
    entries: tuple[CardEntry, ...], cfg: AggregationConfig
) -> int | None:
    deadlines = [
        int(e.timestamp + cfg.scrutiny_duration)
        for e in entries
        if e.integrity_status in ev.VIOLATION_STATUSES
    ]
    return max(deadlines) if deadlines else None


def _rebuilt(
    card: ReputationCard,
    entries: tuple[CardEntry, ...],
    cfg: AggregationConfig,
    scrutiny_floor: int | None,
) -> ReputationCard:
    derived = _scrutiny_from_entries(entries, cfg)
    candidates = [s for s in (derived, scrutiny_floor) if s is not None]
    return replace(
        card,
        entries=entries,
        violation_count=sum(
            1 for e in entries if e.integrity_status in ev.VIOLATION_STATUSES
        ),
        scrutiny_until=max(candidates) if candidates else None,
        last_updated=max((e.timestamp for e in entries), default=0),
    )


def update_card(
    card: ReputationCard,
    event: ev.EvidenceEvent,
    cfg: AggregationConfig = DEFAULT_AGGREGATION,
) -> ReputationCard:
    """Fold one validated event into the card (pure; returns a new card)."""
    if event.context != card.context:
        raise ContextMismatch(f"{event.context} != {card.context}")
    if event.agent != card.agent:
        raise AgentMismatch(f"{event.agent} != {card.agent}")
    entry = CardEntry(
        event_id=ev.event_id(event),
        task=event.task,
        strength=event.strength,
        verdict=event.outcome.verdict,
        timestamp=event.timestamp,
        verifier=event.verifier,
        integrity_status=event.integrity.status,
        integrity_severity=event.integrity.severity,
    )
    entries = list(card.entries)
    key = (entry.timestamp, entry.event_id)
    position = len(entries)
    while position > 0 and (entries[position - 1].timestamp, entries[position - 1].event_id) > key:
        position -= 1
    entries.insert(position, entry)
    return _rebuilt(card, tuple(entries), cfg, card.scrutiny_until)


def rebuild_card(
    events,
    agent: str,
    context: ev.ContextKey,
    cfg: AggregationConfig = DEFAULT_AGGREGATION,
) -> ReputationCard:
    """Oracle path: filter to (agent, context), sort, fold update_card."""
    matching = [e for e in events if e.agent == agent and e.context == context]
    matching.sort(key=lambda e: (e.timestamp, ev.event_id(e)))
    card = ReputationCard.empty(agent, context)
    for event in matching:
        card = update_card(card, event, cfg)
    return card


def score(
    card: ReputationCard,
    s_req: StrengthLevel,
    now: int,
    cfg: AggregationConfig = DEFAULT_AGGREGATION,
    reliability: VerifierReliabilityTable | None = None,
) -> Assessment:
    """Assess the card at a required strength level.

    Requires now >= every entry timestamp (raises NegativeAge otherwise).
    Without a reliability table every verifier counts at full weight; with
    one, each entry is scaled by its verifier's estimated reliability
    (0.9 for verifiers with no cross-check history).
    """
    successes = 0.0
    failures = 0.0
    n_eff = 0.0
    for entry in card.entries:
        decay = decay_weight(now - entry.timestamp, cfg.recency_half_life)
        r = reliability.reliability(entry.verifier) if reliability is not None else 1.0
        gap = max(0, int(s_req) - int(entry.strength))
        weight = (cfg.strength_discount ** gap) * decay * r
        if entry.verdict is ev.Verdict.SUCCESS:
            successes += weight
        else:
            failures += weight
        if entry.strength >= s_req:
            n_eff += decay * r
    failures += cfg.violation_penalty * card.violation_count
    a = cfg.prior_successes + successes
    b = cfg.prior_failures + failures
    mean = a / (a + b)
    lcb = max(0.0, mean - cfg.lcb_z * math.sqrt(mean * (1.0 - mean) / (a + b)))
    return Assessment(
        score=mean,
        lcb=lcb,
        uncertainty=mean - lcb,
        n_eff=n_eff,
        scrutiny_active=card.scrutiny_until is not None and now < card.scrutiny_until,
    )


def apply_integrity_violation(
    card: ReputationCard,
    task: str,
    severity: ev.Severity,
    now: int,
    cfg: AggregationConfig = DEFAULT_AGGREGATION,
) -> ReputationCard:
    """Mark the card's entries for a task as penalized and open a scrutiny
    window ending at now + scrutiny_duration."""
    if not any(e.task == task for e in card.entries):
        raise UnknownTask(task)
    entries = tuple(
        replace(e, integrity_status=ev.IntegrityStatus.PENALIZED, integrity_severity=severity)
        if e.task == task
        else e
        for e in card.entries
    )
    floor = int(now + cfg.scrutiny_duration)
    if card.scrutiny_until is not None:
        floor = max(floor, card.scrutiny_until)
    return _rebuilt(card, entries, cfg, floor)


class CardStore:
    """Per-(agent, context) card registry following the single-writer contract."""

    def __init__(self, cfg: AggregationConfig = DEFAULT_AGGREGATION):
        self.cfg = cfg
        self._cards: dict[tuple[str, ev.ContextKey], ReputationCard] = {}

    def card(self, agent: str, context: ev.ContextKey) -> ReputationCard:
        return self._cards.get((agent, context)) or ReputationCard.empty(agent, context)

    def apply_event(self, event: ev.EvidenceEvent) -> ReputationCard:
        updated = update_card(self.card(event.agent, event.context), event, self.cfg)
        self._cards[(event.agent, event.context)] = updated
        return updated

    def apply_violation(
        self, agent: str, context: ev.ContextKey, task: str,
        severity: ev.Severity, now: int,
    ) -> ReputationCard:
        updated = apply_integrity_violation(
            self.card(agent, context), task, severity, now, self.cfg
        )
        self._cards[(agent, context)] = updated
        return updated

    def items(self):
        return sorted(self._cards.items(), key=lambda kv: (kv[0][0], kv[0][1].label()))

    def __len__(self) -> int:
        return len(self._cards)
