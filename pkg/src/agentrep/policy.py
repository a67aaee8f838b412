"""The decision-facing engine: eligibility, ranking, stakes, slashing,
access tiers, verification escalation, and randomized verifier assignment.

Eligibility for a task assessed at the task's required strength:

    cold agent (empty context card): sandbox task -> eligible at the
        cold-start stake multiple; anything else -> ineligible.
    scrutiny window active: ineligible for non-sandbox tasks.
    lcb >= threshold and n_eff >= minimum mass -> eligible at base stake.
    lcb >= threshold, thin evidence -> conditional with a risk premium
        proportional to uncertainty.
    lcb below threshold -> ineligible.

Ranking excludes the ineligible, puts eligible before conditional, and
orders within class by lcb, then effective mass, then agent id, giving a
total deterministic order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType

from . import cards, lineconf
from .cards import AggregationConfig, Assessment, CardStore, VerifierReliabilityTable
from .evidence import ContextKey, IntegrityRecord, IntegrityStatus, Severity
from .regimes import RegimeCatalog, StrengthLevel
from .rng import Xorshift64Star


class NoEligibleAgent(Exception):
    pass


class InsufficientVerifiers(Exception):
    pass


class UnknownSeverity(Exception):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    """Numeric policy constants; thresholds operate on assessment lcb."""

    eligibility_threshold: float = 0.7
    min_effective_mass: float = 5.0
    risk_premium: float = 2.0
    cold_start_multiplier: float = 3.0
    slash_negligence: float = 0.5
    slash_fraud: float = 1.0
    tier_lcb: tuple[float, ...] = (0.0, 0.5, 0.7, 0.85)
    tier_n_eff: tuple[float, ...] = (0.0, 2.0, 5.0, 10.0)
    cross_verification_threshold: float = 10_000.0
    uncertainty_escalation_bound: float = 0.25
    panel_size: int = 1
    escalated_panel_size: int = 3

    def __post_init__(self):
        for table in (self.tier_lcb, self.tier_n_eff):
            if list(table) != sorted(table) or len(set(table)) != len(table):
                raise ValueError("tier thresholds must be strictly increasing")
        for fraction in (self.slash_negligence, self.slash_fraud):
            if not 0.0 <= fraction <= 1.0:
                raise ValueError("slash fractions must be in [0, 1]")
        if self.panel_size < 1 or self.escalated_panel_size < self.panel_size:
            raise ValueError("panel sizes must be >= 1 and escalation must not shrink")

    def slash_fraction(self, severity: Severity) -> float:
        if severity is Severity.NEGLIGENCE:
            return self.slash_negligence
        if severity is Severity.FRAUD:
            return self.slash_fraud
        raise UnknownSeverity(str(severity))

    _FIELD_TYPES = MappingProxyType({
        "eligibility_threshold": float,
        "min_effective_mass": float,
        "risk_premium": float,
        "cold_start_multiplier": float,
        "slash_negligence": float,
        "slash_fraud": float,
        "cross_verification_threshold": float,
        "uncertainty_escalation_bound": float,
        "panel_size": int,
        "escalated_panel_size": int,
    })

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "PolicyConfig":
        """Build from `key: value` entries; missing keys take defaults.
        Tier tables use comma lists under tier_lcb / tier_n_eff."""
        kwargs: dict = {}
        for key, raw in mapping.items():
            if key in ("tier_lcb", "tier_n_eff"):
                kwargs[key] = tuple(float(v) for v in lineconf.split_list(raw))
                continue
            caster = cls._FIELD_TYPES.get(key)
            if caster is None:
                raise ValueError(f"unknown policy key {key!r}")
            kwargs[key] = caster(raw)
        return cls(**kwargs)


DEFAULT_POLICY = PolicyConfig()


def load_policy_config(text: str) -> PolicyConfig:
    entries, errors = lineconf.parse(text)
    if errors:
        raise ValueError(f"line {errors[0].line}: {errors[0].message}")
    return PolicyConfig.from_mapping({e.key: e.value for e in entries if e.kind == "kv"})


@dataclass(frozen=True)
class TaskSpec:
    task: str
    owner: str
    context: ContextKey
    required_regime: str
    required_strength: StrengthLevel
    base_stake: float = 0.0
    value_at_risk: float = 0.0
    sandbox: bool = False


class DecisionStatus(str, Enum):
    ELIGIBLE = "eligible"
    CONDITIONAL = "conditional"
    INELIGIBLE = "ineligible"


REASON_BELOW_THRESHOLD = "below-threshold"
REASON_COLD_START = "cold-start-sandbox-only"
REASON_SCRUTINY = "scrutiny-block"


@dataclass(frozen=True)
class PolicyDecision:
    status: DecisionStatus
    required_stake: float | None = None
    reason: str | None = None

    def render(self) -> str:
        if self.status is DecisionStatus.INELIGIBLE:
            return f"{self.status.value} {self.reason}"
        return f"{self.status.value} stake={self.required_stake:.6f}"


def eligibility(
    assessment: Assessment,
    task: TaskSpec,
    cfg: PolicyConfig = DEFAULT_POLICY,
    is_cold: bool = False,
) -> PolicyDecision:
    if is_cold:
        if task.sandbox:
            return PolicyDecision(
                DecisionStatus.ELIGIBLE,
                required_stake=cfg.cold_start_multiplier * task.base_stake,
            )
        return PolicyDecision(DecisionStatus.INELIGIBLE, reason=REASON_COLD_START)
    if assessment.scrutiny_active and not task.sandbox:
        return PolicyDecision(DecisionStatus.INELIGIBLE, reason=REASON_SCRUTINY)
    if assessment.lcb >= cfg.eligibility_threshold:
        if assessment.n_eff >= cfg.min_effective_mass:
            return PolicyDecision(DecisionStatus.ELIGIBLE, required_stake=task.base_stake)
        return PolicyDecision(
            DecisionStatus.CONDITIONAL,
            required_stake=task.base_stake * (1.0 + cfg.risk_premium * assessment.uncertainty),
        )
    return PolicyDecision(DecisionStatus.INELIGIBLE, reason=REASON_BELOW_THRESHOLD)


Candidate = tuple[str, Assessment, PolicyDecision]


def rank(candidates: list[Candidate]) -> list[Candidate]:
    """Total deterministic order: eligible before conditional, then lcb
    descending, n_eff descending, agent id ascending; ineligible excluded."""
    admitted = [c for c in candidates if c[2].status is not DecisionStatus.INELIGIBLE]
    return sorted(
        admitted,
        key=lambda c: (
            0 if c[2].status is DecisionStatus.ELIGIBLE else 1,
            -c[1].lcb,
            -c[1].n_eff,
            c[0],
        ),
    )


def required_stake(decision: PolicyDecision) -> float:
    if decision.required_stake is None:
        raise ValueError("ineligible decisions carry no stake requirement")
    return decision.required_stake


@dataclass(frozen=True)
class SlashResult:
    slashed: float
    remaining: float
    integrity: IntegrityRecord


def slash(staked: float, severity: Severity, cfg: PolicyConfig = DEFAULT_POLICY) -> SlashResult:
    """Forfeit the severity's fraction of the stake and emit the integrity
    record to apply to the agent's card."""
    if staked < 0:
        raise ValueError("staked amount must be >= 0")
    fraction = cfg.slash_fraction(severity)
    slashed = staked * fraction
    return SlashResult(
        slashed=slashed,
        remaining=staked - slashed,
        integrity=IntegrityRecord(status=IntegrityStatus.PENALIZED, severity=severity),
    )


def tier_for(assessment: Assessment, cfg: PolicyConfig = DEFAULT_POLICY) -> int:
    tier = 0
    for level, (min_lcb, min_mass) in enumerate(zip(cfg.tier_lcb, cfg.tier_n_eff)):
        if assessment.lcb >= min_lcb and assessment.n_eff >= min_mass:
            tier = level
    return tier


def access_tier(assessments: dict[ContextKey, Assessment],
                cfg: PolicyConfig = DEFAULT_POLICY) -> dict[ContextKey, int]:
    return {context: tier_for(a, cfg) for context, a in assessments.items()}


@dataclass(frozen=True)
class Escalation:
    panel_size: int
    strength_floor: StrengthLevel


def escalate(assessment: Assessment, task: TaskSpec,
             cfg: PolicyConfig = DEFAULT_POLICY) -> Escalation:
    """Verification intensity: a wider panel under scrutiny, high
    uncertainty, or high value at risk. The strength floor is never lowered."""
    widen = (
        assessment.scrutiny_active
        or assessment.uncertainty > cfg.uncertainty_escalation_bound
        or task.value_at_risk >= cfg.cross_verification_threshold
    )
    return Escalation(
        panel_size=cfg.escalated_panel_size if widen else cfg.panel_size,
        strength_floor=task.required_strength,
    )


def assign_verifiers(
    task: TaskSpec,
    pool: list[str],
    panel_size: int,
    rng: Xorshift64Star,
    excluded: frozenset[str] = frozenset(),
) -> list[str]:
    """Uniform panel without replacement, excluding the winner's declared
    affiliates. Deterministic given the rng state."""
    eligible_pool = [v for v in pool if v not in excluded]
    if len(eligible_pool) < panel_size:
        raise InsufficientVerifiers(
            f"need {panel_size}, have {len(eligible_pool)} after exclusions"
        )
    return rng.sample(eligible_pool, panel_size)


@dataclass(frozen=True)
class AgentRef:
    agent_id: str
    affiliates: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Allocation:
    winner: str
    decision: PolicyDecision
    assessment: Assessment
    escalation: Escalation
    panel: tuple[str, ...]
    candidates: tuple[Candidate, ...]


def allocate(
    task: TaskSpec,
    agents: list[AgentRef],
    card_store: CardStore,
    catalog: RegimeCatalog,
    policy_cfg: PolicyConfig,
    agg_cfg: AggregationConfig,
    reliability: VerifierReliabilityTable | None,
    verifier_pool: list[str],
    now: int,
    rng: Xorshift64Star,
) -> Allocation:
    """Assess every candidate at the task's required strength, gate, rank,
    pick the leader, and attach its verifier panel."""
    regime = catalog.require(task.required_regime)
    if regime.strength != task.required_strength:
        raise ValueError(
            f"task strength {int(task.required_strength)} does not match "
            f"regime {task.required_regime} strength {int(regime.strength)}"
        )
    candidates: list[Candidate] = []
    for agent in agents:
        card = card_store.card(agent.agent_id, task.context)
        assessment = cards.score(card, task.required_strength, now, agg_cfg, reliability)
        decision = eligibility(assessment, task, policy_cfg, is_cold=not card.entries)
        candidates.append((agent.agent_id, assessment, decision))
    ranked = rank(candidates)
    if not ranked:
        raise NoEligibleAgent(task.task)
    winner_id, winner_assessment, winner_decision = ranked[0]
    winner = next(a for a in agents if a.agent_id == winner_id)
    escalation = escalate(winner_assessment, task, policy_cfg)
    panel = assign_verifiers(
        task, verifier_pool, escalation.panel_size, rng, excluded=winner.affiliates
    )
    return Allocation(
        winner=winner_id,
        decision=winner_decision,
        assessment=winner_assessment,
        escalation=escalation,
        panel=tuple(panel),
        candidates=tuple(candidates),
    )
