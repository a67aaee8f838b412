"""Deterministic adversarial marketplace simulator.

Each round draws a task from the configured mix, allocates it through the
policy engine, has the winner attempt the work against its latent
competence, collects verdicts from a randomly assigned verifier panel, and
feeds the majority verdict through the full evidence pipeline: validation,
card update, object storage, and epoch commitment. Panel disagreements feed
the verifier reliability table; discovered false-positive successes trigger
integrity violations and stake slashing.

All randomness comes from named xorshift64* substreams (one per agent, one
per verifier, plus streams for task draws, panel assignment, and dispute
discovery), so a (config, seed) pair reproduces a run bit for bit and the
simulator's latent competence bookkeeping never leaks into the reputation
engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import cards, evidence as ev, ledger as ledger_mod, lineconf, policy
from .cards import AggregationConfig, CardStore, VerifierReliabilityTable
from .evidence import ContextKey, EvidenceEvent, EvidenceStore, Outcome, Verdict
from .policy import AgentRef, Allocation, PolicyConfig, TaskSpec
from .regimes import (
    RegimeCatalog,
    StrengthLevel,
    VerificationRegime,
    default_catalog,
    load_catalog,
)
from .rng import StreamFactory, Xorshift64Star

BEHAVIOR_HONEST = "honest"
BEHAVIOR_OVERFITTER = "overfitter"
BEHAVIOR_COLLUDER = "colluder"

# Regimes at or below this strength are the ones benchmark overfitting beats.
OVERFIT_MAX_STRENGTH = 2

DEGRADATION_WINDOW = 50


class ConfigError(Exception):
    pass


class EmptyHistory(Exception):
    pass


@dataclass
class AgentModel:
    agent_id: str
    competence: dict[ContextKey, float]
    behavior: str = BEHAVIOR_HONEST
    low_strength_boost: float = 0.0
    partner: str | None = None
    stake_balance: float = 1000.0
    affiliates: frozenset[str] = frozenset()


@dataclass
class VerifierModel:
    verifier_id: str
    false_positive_rate: float = 0.0
    false_negative_rate: float = 0.0
    colluding_with: str | None = None


@dataclass(frozen=True)
class TaskTemplate:
    weight: float
    context: ContextKey
    regime_id: str
    value_at_risk: float = 0.0
    sandbox: bool = False
    base_stake: float | None = None


@dataclass(frozen=True)
class SeedBatch:
    """Pre-run evidence history: `successes` + `failures` events for one
    (agent, context, regime), evenly spaced from first_timestamp."""

    agent_id: str
    context: ContextKey
    regime_id: str
    verifier: str
    successes: int
    failures: int
    first_timestamp: int
    step_seconds: int = 3600


@dataclass
class ScenarioConfig:
    seed: int
    rounds: int
    agents: list[AgentModel]
    verifiers: list[VerifierModel]
    task_mix: list[TaskTemplate]
    catalog: RegimeCatalog = field(default_factory=default_catalog)
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    seed_history: list[SeedBatch] = field(default_factory=list)
    start_time: int = 1_700_000_000
    round_seconds: int = 3600
    epoch_cadence: int = 64
    discovery_probability: float = 0.3
    base_stake: float = 100.0


def validate_scenario(config: ScenarioConfig) -> None:
    if config.rounds < 0:
        raise ConfigError("rounds must be >= 0")
    if config.task_mix:
        total = sum(t.weight for t in config.task_mix)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"task mix weights sum to {total}, expected 1.0")
    elif config.rounds > 0:
        raise ConfigError("task mix is empty")
    seen_agents = set()
    for agent in config.agents:
        if agent.agent_id in seen_agents:
            raise ConfigError(f"duplicate agent id {agent.agent_id}")
        seen_agents.add(agent.agent_id)
        for context, p in agent.competence.items():
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{agent.agent_id} competence for {context.label()} not in [0,1]")
        if agent.behavior not in (BEHAVIOR_HONEST, BEHAVIOR_OVERFITTER, BEHAVIOR_COLLUDER):
            raise ConfigError(f"unknown behavior {agent.behavior!r}")
        if agent.behavior == BEHAVIOR_COLLUDER and not agent.partner:
            raise ConfigError(f"colluder {agent.agent_id} has no partner")
    seen_verifiers = set()
    for verifier in config.verifiers:
        if verifier.verifier_id in seen_verifiers:
            raise ConfigError(f"duplicate verifier id {verifier.verifier_id}")
        seen_verifiers.add(verifier.verifier_id)
        if not 0.0 <= verifier.false_positive_rate < 1.0:
            raise ConfigError(f"{verifier.verifier_id} false positive rate out of range")
        if not 0.0 <= verifier.false_negative_rate < 1.0:
            raise ConfigError(f"{verifier.verifier_id} false negative rate out of range")
    for template in config.task_mix:
        if template.regime_id not in config.catalog:
            raise ConfigError(f"task mix references unknown regime {template.regime_id}")


def effective_pass_probability(agent: AgentModel, regime: VerificationRegime,
                               context: ContextKey) -> float:
    """Probability the agent's work passes this regime's check."""
    p = agent.competence.get(context, 0.0)
    if (
        agent.behavior == BEHAVIOR_OVERFITTER
        and int(regime.strength) <= OVERFIT_MAX_STRENGTH
    ):
        p = min(1.0, p + agent.low_strength_boost)
    return p


def draw_true_result(agent: AgentModel, regime: VerificationRegime,
                     context: ContextKey, rng: Xorshift64Star) -> bool:
    return rng.random() < effective_pass_probability(agent, regime, context)


def report_verdict(verifier: VerifierModel, agent_id: str, true_result: bool,
                   rng: Xorshift64Star) -> bool:
    """One verifier's reported verdict for an observed result."""
    if verifier.colluding_with == agent_id:
        return True
    if true_result:
        return not rng.random() < verifier.false_negative_rate
    return rng.random() < verifier.false_positive_rate


def sample_outcome(agent: AgentModel, regime: VerificationRegime,
                   verifier: VerifierModel, context: ContextKey,
                   rng: Xorshift64Star) -> Outcome:
    true_result = draw_true_result(agent, regime, context, rng)
    reported = report_verdict(verifier, agent.agent_id, true_result, rng)
    return Outcome(Verdict.SUCCESS if reported else Verdict.FAILURE)


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    timestamp: int
    context: ContextKey
    regime_id: str
    strength: int
    sandbox: bool
    allocation: Allocation | None
    winner: str | None = None
    true_success: bool | None = None
    majority: Verdict | None = None
    reports: tuple[tuple[str, Verdict], ...] = ()
    winner_competence: float = 0.0
    best_competence: float = 0.0
    disputed: bool = False
    slashed: float = 0.0


@dataclass
class SimMetrics:
    rounds: int
    allocated_rounds: int
    events: int
    allocation_regret: float
    reputation_truth_correlation: dict[str, float]
    regime_degradation: dict[str, list[float]]
    collusion_inflation: float
    slash_events: int
    total_slashed: float
    final_root: str

    def render(self) -> str:
        lines = [
            f"rounds: {self.rounds}",
            f"allocated_rounds: {self.allocated_rounds}",
            f"events: {self.events}",
            f"allocation_regret: {self.allocation_regret:.6f}",
            f"collusion_inflation: {self.collusion_inflation:.6f}",
            f"slash_events: {self.slash_events}",
            f"total_slashed: {self.total_slashed:.6f}",
        ]
        for label in sorted(self.reputation_truth_correlation):
            value = self.reputation_truth_correlation[label]
            lines.append(f"reputation_truth_correlation.{label}: {value:.6f}")
        for regime_id in sorted(self.regime_degradation):
            series = ",".join(f"{v:.6f}" for v in self.regime_degradation[regime_id])
            lines.append(f"regime_degradation.{regime_id}: {series}")
        lines.append(f"final_root: {self.final_root}")
        return "".join(line + "\n" for line in lines)


@dataclass
class SimResult:
    config: ScenarioConfig
    metrics: SimMetrics
    cards: CardStore
    reliability: VerifierReliabilityTable
    evidence: EvidenceStore
    objects: ledger_mod.ObjectStore
    ledger: ledger_mod.Ledger
    rounds: list[RoundRecord]
    stakes: dict[str, float]


def spearman_rank_correlation(xs: list[float], ys: list[float]) -> float:
    """Spearman correlation with average ranks for ties; 0.0 when either
    side has no variation or fewer than two points."""
    if len(xs) != len(ys) or len(xs) < 2:
        return 0.0

    def ranks(values: list[float]) -> list[float]:
        order = sorted(range(len(values)), key=lambda i: values[i])
        result = [0.0] * len(values)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
                j += 1
            average = (i + j) / 2.0 + 1.0
            for k in range(i, j + 1):
                result[order[k]] = average
            i = j + 1
        return result

    rx, ry = ranks(xs), ranks(ys)
    mean_x = sum(rx) / len(rx)
    mean_y = sum(ry) / len(ry)
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(rx, ry))
    var_x = sum((a - mean_x) ** 2 for a in rx)
    var_y = sum((b - mean_y) ** 2 for b in ry)
    if var_x == 0.0 or var_y == 0.0:
        return 0.0
    return cov / math.sqrt(var_x * var_y)


def measure_regime_degradation(
    rounds: list[RoundRecord], window: int = DEGRADATION_WINDOW
) -> dict[str, list[float]]:
    """Per regime: windowed observed pass rate minus winners' mean latent
    competence. Positive gaps mean the regime is being beaten."""
    if not rounds:
        raise EmptyHistory("no rounds to measure")
    series: dict[str, list[float]] = {}
    allocated = [r for r in rounds if r.majority is not None]
    if not allocated:
        return series
    last_window = max(r.round_index for r in allocated) // window
    for w in range(last_window + 1):
        buckets: dict[str, list[RoundRecord]] = {}
        for record in allocated:
            if record.round_index // window == w:
                buckets.setdefault(record.regime_id, []).append(record)
        for regime_id, records in buckets.items():
            passes = sum(1 for r in records if r.majority is Verdict.SUCCESS)
            mean_true = sum(r.winner_competence for r in records) / len(records)
            series.setdefault(regime_id, []).append(passes / len(records) - mean_true)
    return series


def _seed_history_events(config: ScenarioConfig) -> list[EvidenceEvent]:
    events = []
    for batch in config.seed_history:
        regime = config.catalog.require(batch.regime_id)
        total = batch.successes + batch.failures
        for i in range(total):
            # Bresenham spread keeps failures evenly interleaved.
            is_failure = ((i + 1) * batch.failures) // total > (i * batch.failures) // total
            events.append(
                EvidenceEvent(
                    agent=batch.agent_id,
                    task=f"seed-{batch.agent_id}-{batch.regime_id}-{i:04d}",
                    context=batch.context,
                    regime_id=batch.regime_id,
                    outcome=Outcome(Verdict.FAILURE if is_failure else Verdict.SUCCESS),
                    strength=regime.strength,
                    timestamp=batch.first_timestamp + i * batch.step_seconds,
                    verifier=batch.verifier,
                    evidence_kinds=regime.required_evidence,
                )
            )
    return events


class _Pipeline:
    """Evidence path shared by seed history and simulated rounds."""

    def __init__(self, config: ScenarioConfig, out_dir: Path | None):
        self.store = EvidenceStore(
            out_dir / "events.jsonl" if out_dir is not None else None
        )
        self.objects = ledger_mod.ObjectStore(out_dir)
        self.ledger = ledger_mod.Ledger(self.objects)
        self.cards = CardStore(config.aggregation)
        self.cadence = config.epoch_cadence
        self.catalog = config.catalog

    def record(self, event: EvidenceEvent, now: int, update_card: bool = True) -> None:
        checked = ev.validate_event(event, self.catalog, now)
        if isinstance(checked, list):
            raise ConfigError(
                "generated event failed validation: "
                + "; ".join(v.render() for v in checked)
            )
        self.store.append(event)
        if update_card:
            self.cards.apply_event(event)
        digest = self.objects.put(ev.canonical_bytes(event))
        self.ledger.stage(digest)
        self.ledger.commit_if_due(self.cadence, now)


def _weighted_choice(templates: list[TaskTemplate], rng: Xorshift64Star) -> TaskTemplate:
    roll = rng.random()
    acc = 0.0
    for template in templates:
        acc += template.weight
        if roll < acc:
            return template
    return templates[-1]


def run_sim(config: ScenarioConfig, out_dir: str | Path | None = None) -> SimResult:
    """Run the scenario; bit-reproducible for a given (config, seed)."""
    validate_scenario(config)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    streams = StreamFactory(config.seed)
    task_stream = streams.stream("tasks")
    panel_stream = streams.stream("panel")
    dispute_stream = streams.stream("disputes")
    agent_streams = {a.agent_id: streams.stream(f"agent:{a.agent_id}") for a in config.agents}
    verifier_streams = {
        v.verifier_id: streams.stream(f"verifier:{v.verifier_id}") for v in config.verifiers
    }

    pipeline = _Pipeline(config, out_path)
    reliability = VerifierReliabilityTable()
    agents_by_id = {a.agent_id: a for a in config.agents}
    verifiers_by_id = {v.verifier_id: v for v in config.verifiers}
    agent_refs = [AgentRef(a.agent_id, a.affiliates) for a in config.agents]
    verifier_pool = [v.verifier_id for v in config.verifiers]
    stakes = {a.agent_id: a.stake_balance for a in config.agents}

    for event in _seed_history_events(config):
        pipeline.record(event, now=config.start_time)

    rounds: list[RoundRecord] = []
    slash_events = 0
    total_slashed = 0.0

    for round_index in range(config.rounds):
        now = config.start_time + round_index * config.round_seconds
        template = _weighted_choice(config.task_mix, task_stream)
        regime = config.catalog.require(template.regime_id)
        task = TaskSpec(
            task=f"task-{round_index:06d}",
            owner="market",
            context=template.context,
            required_regime=template.regime_id,
            required_strength=regime.strength,
            base_stake=template.base_stake if template.base_stake is not None else config.base_stake,
            value_at_risk=template.value_at_risk,
            sandbox=template.sandbox,
        )
        base_record = RoundRecord(
            round_index=round_index,
            timestamp=now,
            context=template.context,
            regime_id=template.regime_id,
            strength=int(regime.strength),
            sandbox=template.sandbox,
            allocation=None,
        )
        try:
            allocation = policy.allocate(
                task, agent_refs, pipeline.cards, config.catalog,
                config.policy, config.aggregation, reliability,
                verifier_pool, now, panel_stream,
            )
        except policy.NoEligibleAgent:
            rounds.append(base_record)
            continue

        winner = agents_by_id[allocation.winner]
        true_success = draw_true_result(
            winner, regime, template.context, agent_streams[winner.agent_id]
        )
        reports = tuple(
            (
                vid,
                Verdict.SUCCESS
                if report_verdict(
                    verifiers_by_id[vid], winner.agent_id, true_success,
                    verifier_streams[vid],
                )
                else Verdict.FAILURE,
            )
            for vid in allocation.panel
        )
        success_votes = sum(1 for _, verdict in reports if verdict is Verdict.SUCCESS)
        majority = (
            Verdict.SUCCESS if 2 * success_votes > len(reports) else Verdict.FAILURE
        )

        event = EvidenceEvent(
            agent=winner.agent_id,
            task=task.task,
            context=template.context,
            regime_id=template.regime_id,
            outcome=Outcome(majority),
            strength=regime.strength,
            timestamp=now,
            verifier=allocation.panel[0],
            evidence_kinds=regime.required_evidence,
        )
        pipeline.record(event, now=now)

        if len(reports) > 1:
            for vid, verdict in reports:
                reliability = reliability.with_check(vid, verdict is majority)

        disputed = False
        slashed_amount = 0.0
        is_false_positive = majority is Verdict.SUCCESS and not true_success
        if is_false_positive and dispute_stream.random() < config.discovery_probability:
            disputed = True
            slash_events += 1
            colluding_panel = any(
                verifiers_by_id[vid].colluding_with == winner.agent_id
                for vid in allocation.panel
            )
            severity = ev.Severity.FRAUD if colluding_panel else ev.Severity.NEGLIGENCE
            result = policy.slash(
                policy.required_stake(allocation.decision), severity, config.policy
            )
            slashed_amount = result.slashed
            stakes[winner.agent_id] -= result.slashed
            total_slashed += result.slashed
            pipeline.cards.apply_violation(
                winner.agent_id, template.context, task.task, severity, now
            )
            superseding = replace(
                event,
                integrity=ev.IntegrityRecord(
                    status=ev.IntegrityStatus.PENALIZED,
                    severity=severity,
                    dispute_time=now,
                ),
            )
            pipeline.record(superseding, now=now, update_card=False)

        rounds.append(
            replace(
                base_record,
                allocation=allocation,
                winner=winner.agent_id,
                true_success=true_success,
                majority=majority,
                reports=reports,
                winner_competence=winner.competence.get(template.context, 0.0),
                best_competence=max(
                    a.competence.get(template.context, 0.0) for a in config.agents
                ),
                disputed=disputed,
                slashed=slashed_amount,
            )
        )

    if pipeline.ledger.pending:
        final_now = config.start_time + max(config.rounds, 1) * config.round_seconds
        pipeline.ledger.commit_epoch(now=final_now)

    metrics = _compute_metrics(
        config, rounds, pipeline, reliability, slash_events, total_slashed
    )
    if out_path is not None:
        pipeline.ledger.save(out_path)
        (out_path / "metrics.txt").write_text(metrics.render(), encoding="utf-8")

    return SimResult(
        config=config,
        metrics=metrics,
        cards=pipeline.cards,
        reliability=reliability,
        evidence=pipeline.store,
        objects=pipeline.objects,
        ledger=pipeline.ledger,
        rounds=rounds,
        stakes=stakes,
    )


# Final scores are read at the lowest strength level so every entry carries
# full strength weight; the correlation is about ordering, not calibration.
def _final_score(config: ScenarioConfig, pipeline: _Pipeline,
                 reliability: VerifierReliabilityTable,
                 agent_id: str, context: ContextKey, now: int) -> float:
    card = pipeline.cards.card(agent_id, context)
    return cards.score(
        card, StrengthLevel.STATIC_ANALYSIS, now, config.aggregation, reliability
    ).score


def _compute_metrics(
    config: ScenarioConfig,
    rounds: list[RoundRecord],
    pipeline: _Pipeline,
    reliability: VerifierReliabilityTable,
    slash_events: int,
    total_slashed: float,
) -> SimMetrics:
    allocated = [r for r in rounds if r.winner is not None]
    now = config.start_time + max(config.rounds, 1) * config.round_seconds

    regret = (
        sum(r.best_competence - r.winner_competence for r in allocated) / len(allocated)
        if allocated
        else 0.0
    )

    contexts = sorted({t.context for t in config.task_mix}, key=lambda c: c.label())
    correlation: dict[str, float] = {}
    for context in contexts:
        scores = [
            _final_score(config, pipeline, reliability, a.agent_id, context, now)
            for a in config.agents
        ]
        truths = [a.competence.get(context, 0.0) for a in config.agents]
        correlation[context.label()] = spearman_rank_correlation(scores, truths)

    degradation = measure_regime_degradation(rounds) if rounds else {}

    colluder_scores: list[float] = []
    honest_scores: list[float] = []
    for context in contexts:
        colluders = [a for a in config.agents if a.behavior == BEHAVIOR_COLLUDER]
        for colluder in colluders:
            p = colluder.competence.get(context, 0.0)
            cohort = [
                a for a in config.agents
                if a.behavior == BEHAVIOR_HONEST
                and abs(a.competence.get(context, 0.0) - p) < 1e-9
            ]
            if not cohort:
                continue
            colluder_scores.append(
                _final_score(config, pipeline, reliability, colluder.agent_id, context, now)
            )
            honest_scores.extend(
                _final_score(config, pipeline, reliability, a.agent_id, context, now)
                for a in cohort
            )
    inflation = (
        sum(colluder_scores) / len(colluder_scores)
        - sum(honest_scores) / len(honest_scores)
        if colluder_scores and honest_scores
        else 0.0
    )

    return SimMetrics(
        rounds=config.rounds,
        allocated_rounds=len(allocated),
        events=len(pipeline.store),
        allocation_regret=regret,
        reputation_truth_correlation=correlation,
        regime_degradation=degradation,
        collusion_inflation=inflation,
        slash_events=slash_events,
        total_slashed=total_slashed,
        final_root=pipeline.ledger.records[-1].merkle_root.hex()
        if pipeline.ledger.records
        else "-",
    )


# --- the illustrative two-agent security-audit scenario -----------------------

PAPER_SCENARIO_START = 1_700_000_000
_DAY = 86_400


def paper_scenario(alpha_security_successes: int = 10) -> ScenarioConfig:
    """Two agents compete for one high-value security audit.

    alpha: long automated-testing debugging record (460 of 500) plus a thin
    strength-1 security history whose success count is configurable.
    beta: shorter debugging record (44 of 50) plus 30 security tasks with 26
    passes under expert adversarial review.
    """
    if not 0 <= alpha_security_successes <= 10:
        raise ConfigError("alpha security successes must be within 0..10")
    start = PAPER_SCENARIO_START
    security = ContextKey("security-audit")
    debugging = ContextKey("debugging")
    seed_history = [
        SeedBatch(
            agent_id="alpha", context=debugging, regime_id="debugging-ci",
            verifier="ci-runner", successes=460, failures=40,
            first_timestamp=start - 60 * _DAY, step_seconds=9000,
        ),
        SeedBatch(
            agent_id="alpha", context=security, regime_id="security-scan",
            verifier="scanner-bot", successes=alpha_security_successes,
            failures=10 - alpha_security_successes,
            first_timestamp=start - 5 * _DAY, step_seconds=43_200,
        ),
        SeedBatch(
            agent_id="beta", context=debugging, regime_id="debugging-ci",
            verifier="ci-runner", successes=44, failures=6,
            first_timestamp=start - 50 * _DAY, step_seconds=80_000,
        ),
        SeedBatch(
            agent_id="beta", context=security, regime_id="security-expert",
            verifier="expert-1", successes=26, failures=4,
            first_timestamp=start - 6 * _DAY, step_seconds=17_280,
        ),
    ]
    return ScenarioConfig(
        seed=1,
        rounds=1,
        start_time=start,
        agents=[
            AgentModel("alpha", {debugging: 0.92, security: 0.4}),
            AgentModel("beta", {debugging: 0.88, security: 0.85}),
        ],
        verifiers=[
            VerifierModel("expert-1"),
            VerifierModel("expert-2"),
            VerifierModel("expert-3"),
        ],
        task_mix=[
            TaskTemplate(
                weight=1.0,
                context=security,
                regime_id="security-expert",
                value_at_risk=10_000_000.0,
                sandbox=False,
            )
        ],
        seed_history=seed_history,
        base_stake=100.0,
    )


@dataclass(frozen=True)
class PaperScenarioOutcome:
    winner: str
    alpha_decision: policy.PolicyDecision
    beta_decision: policy.PolicyDecision
    result: SimResult


def run_paper_scenario(alpha_security_successes: int = 10) -> PaperScenarioOutcome:
    result = run_sim(paper_scenario(alpha_security_successes))
    allocation = result.rounds[0].allocation
    if allocation is None:
        raise ConfigError("security audit round failed to allocate")
    decisions = {agent_id: decision for agent_id, _, decision in allocation.candidates}
    return PaperScenarioOutcome(
        winner=allocation.winner,
        alpha_decision=decisions["alpha"],
        beta_decision=decisions["beta"],
        result=result,
    )


# --- scenario files -----------------------------------------------------------

_GLOBAL_KEYS = {
    "seed": int,
    "rounds": int,
    "start_time": int,
    "round_seconds": int,
    "epoch_cadence": int,
    "discovery_probability": float,
    "base_stake": float,
}


def parse_scenario(text: str, base_dir: str | Path | None = None) -> ScenarioConfig:
    """Parse a scenario file: global keys, then [task], [agent] and
    [verifier] blocks. `policy.*` / `aggregation.*` keys override defaults;
    `regime_dir` points at a directory of regime documents."""
    entries, errors = lineconf.parse(text)
    if errors:
        first = errors[0]
        raise ConfigError(f"line {first.line}: {first.message}")

    globals_kv: dict[str, str] = {}
    policy_kv: dict[str, str] = {}
    aggregation_kv: dict[str, str] = {}
    blocks: list[tuple[str, dict[str, str]]] = []
    current: dict[str, str] | None = None
    for entry in entries:
        if entry.kind == "section":
            if entry.key not in ("task", "agent", "verifier"):
                raise ConfigError(f"line {entry.line}: unknown section [{entry.key}]")
            current = {}
            blocks.append((entry.key, current))
            continue
        if current is not None:
            if entry.key in current:
                raise ConfigError(f"line {entry.line}: duplicate key {entry.key}")
            current[entry.key] = entry.value
        elif entry.key.startswith("policy."):
            policy_kv[entry.key[len("policy."):]] = entry.value
        elif entry.key.startswith("aggregation."):
            aggregation_kv[entry.key[len("aggregation."):]] = entry.value
        else:
            globals_kv[entry.key] = entry.value

    catalog = default_catalog()
    if "regime_dir" in globals_kv:
        regime_dir = Path(globals_kv.pop("regime_dir"))
        if base_dir is not None and not regime_dir.is_absolute():
            regime_dir = Path(base_dir) / regime_dir
        catalog = load_catalog(sorted(regime_dir.glob("*.regime")))

    kwargs: dict = {}
    for key, value in globals_kv.items():
        caster = _GLOBAL_KEYS.get(key)
        if caster is None:
            raise ConfigError(f"unknown scenario key {key!r}")
        kwargs[key] = caster(value)
    if "seed" not in kwargs or "rounds" not in kwargs:
        raise ConfigError("scenario requires seed and rounds")

    def parse_competence(raw: str) -> dict[ContextKey, float]:
        competence = {}
        for item in lineconf.split_list(raw):
            label, _, prob = item.partition("=")
            if not prob:
                raise ConfigError(f"bad competence entry {item!r}")
            competence[ev.parse_context_label(label.strip())] = float(prob)
        return competence

    agents: list[AgentModel] = []
    verifiers: list[VerifierModel] = []
    task_mix: list[TaskTemplate] = []
    for kind, block in blocks:
        try:
            if kind == "agent":
                agents.append(
                    AgentModel(
                        agent_id=block["id"],
                        competence=parse_competence(block.get("competence", "")),
                        behavior=block.get("behavior", BEHAVIOR_HONEST),
                        low_strength_boost=float(block.get("low_strength_boost", "0")),
                        partner=block.get("partner") or None,
                        stake_balance=float(block.get("stake", "1000")),
                        affiliates=frozenset(lineconf.split_list(block.get("affiliates", ""))),
                    )
                )
            elif kind == "verifier":
                verifiers.append(
                    VerifierModel(
                        verifier_id=block["id"],
                        false_positive_rate=float(block.get("false_positive_rate", "0")),
                        false_negative_rate=float(block.get("false_negative_rate", "0")),
                        colluding_with=block.get("colluding_with") or None,
                    )
                )
            else:
                context = ContextKey(
                    block["task_class"], block.get("subdomain") or None
                )
                task_mix.append(
                    TaskTemplate(
                        weight=float(block["weight"]),
                        context=context,
                        regime_id=block["regime"],
                        value_at_risk=float(block.get("value_at_risk", "0")),
                        sandbox=lineconf.parse_bool(block.get("sandbox", "false")),
                        base_stake=float(block["base_stake"]) if "base_stake" in block else None,
                    )
                )
        except KeyError as exc:
            raise ConfigError(f"[{kind}] block missing key {exc.args[0]}") from None
        except ValueError as exc:
            raise ConfigError(f"[{kind}] block: {exc}") from None

    config = ScenarioConfig(
        agents=agents,
        verifiers=verifiers,
        task_mix=task_mix,
        catalog=catalog,
        aggregation=AggregationConfig.from_mapping(aggregation_kv),
        policy=PolicyConfig.from_mapping(policy_kv),
        **kwargs,
    )
    validate_scenario(config)
    return config
