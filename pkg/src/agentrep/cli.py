"""Single command-line entry point: `agentrep <group> <verb> [flags]`.

Groups: regime, evidence, card, allocate, ledger, sim. All output is
line-oriented and machine-parseable. Exit codes: 0 success, 1 domain error
(validation failure, broken chain), 2 allocation failure, 64 usage error.
Write paths mutate only the configured data directory and are serialized
through an advisory lock.
"""

from __future__ import annotations

import argparse
import contextlib
import fcntl
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import evidence as ev, hashing, ledger as ledger_mod, lineconf, policy
from . import regimes as regimes_mod, sim
from .cards import AggregationConfig, CardStore, rebuild_card, score
from .rng import StreamFactory
from .policy import PolicyConfig
from .regimes import (
    RegimeCatalog,
    StrengthLevel,
    default_catalog,
    load_catalog,
    parse_regime,
)

USAGE = "usage: agentrep <regime|evidence|card|allocate|ledger|sim> <verb> [flags]"

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_NO_AGENT = 2
EXIT_USAGE = 64

DATA_ENV = "AGENTREP_DATA"


@dataclass
class GlobalConfig:
    data_dir: Path = Path("agentrep-data")
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    hash_algorithm: str = hashing.DEFAULT_ALGORITHM
    epoch_cadence: int = 64


def load_global_config(path: str | None, data_override: str | None) -> GlobalConfig:
    cfg = GlobalConfig()
    data_dir_set = False
    if path is not None:
        entries, errors = lineconf.parse(Path(path).read_text(encoding="utf-8"))
        if errors:
            first = errors[0]
            raise ValueError(f"{path}:{first.line}: {first.message}")
        aggregation_kv: dict[str, str] = {}
        policy_kv: dict[str, str] = {}
        for entry in entries:
            if entry.kind != "kv":
                raise ValueError(f"{path}:{entry.line}: unexpected section")
            if entry.key.startswith("aggregation."):
                aggregation_kv[entry.key[len("aggregation."):]] = entry.value
            elif entry.key.startswith("policy."):
                policy_kv[entry.key[len("policy."):]] = entry.value
            elif entry.key == "data_dir":
                cfg.data_dir = Path(entry.value)
                data_dir_set = True
            elif entry.key == "hash_algorithm":
                hashing.hasher(entry.value)
                cfg.hash_algorithm = entry.value
            elif entry.key == "epoch_cadence":
                cfg.epoch_cadence = int(entry.value)
            else:
                raise ValueError(f"{path}:{entry.line}: unknown key {entry.key!r}")
        cfg.aggregation = AggregationConfig.from_mapping(aggregation_kv)
        cfg.policy = PolicyConfig.from_mapping(policy_kv)
    if data_override:
        cfg.data_dir = Path(data_override)
    elif not data_dir_set and os.environ.get(DATA_ENV):
        cfg.data_dir = Path(os.environ[DATA_ENV])
    return cfg


@contextlib.contextmanager
def _write_lock(data_dir: Path):
    data_dir.mkdir(parents=True, exist_ok=True)
    lock_path = data_dir / ".lock"
    with open(lock_path, "w") as handle:
        fcntl.flock(handle, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(handle, fcntl.LOCK_UN)


def _load_data_catalog(cfg: GlobalConfig) -> RegimeCatalog:
    regime_dir = cfg.data_dir / "regimes"
    if regime_dir.is_dir():
        files = sorted(regime_dir.glob("*.regime"))
        if files:
            return load_catalog(files)
    return default_catalog()


def _open_store(cfg: GlobalConfig) -> ev.EvidenceStore:
    return ev.EvidenceStore(cfg.data_dir / "events.jsonl", cfg.hash_algorithm)


def _open_ledger(cfg: GlobalConfig) -> ledger_mod.Ledger:
    objects = ledger_mod.ObjectStore(cfg.data_dir, cfg.hash_algorithm)
    return ledger_mod.Ledger.load(cfg.data_dir, objects, cfg.hash_algorithm)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentrep", add_help=True, usage=USAGE)
    parser.add_argument("--config", default=None)
    parser.add_argument("--data", default=None)
    groups = parser.add_subparsers(dest="group", required=True)

    regime = groups.add_parser("regime").add_subparsers(dest="verb", required=True)
    regime_validate = regime.add_parser("validate")
    regime_validate.add_argument("file")

    evidence_group = groups.add_parser("evidence").add_subparsers(dest="verb", required=True)
    ingest = evidence_group.add_parser("ingest")
    ingest.add_argument("file")
    ingest.add_argument("--now", type=int, default=None)
    query = evidence_group.add_parser("query")
    query.add_argument("--agent")
    query.add_argument("--task-class")
    query.add_argument("--regime")
    query.add_argument("--min-strength", type=int)
    query.add_argument("--verdict", choices=[v.value for v in ev.Verdict])
    query.add_argument("--since", type=int)
    query.add_argument("--until", type=int)

    card = groups.add_parser("card").add_subparsers(dest="verb", required=True)
    show = card.add_parser("show")
    show.add_argument("--agent", required=True)
    show.add_argument("--context", required=True)
    show.add_argument("--strength", type=int, required=True, choices=[1, 2, 3, 4])
    show.add_argument("--at", type=int, default=None)

    allocate = groups.add_parser("allocate")
    allocate.add_argument("--task", required=True)
    allocate.add_argument("--agents", required=True)
    allocate.add_argument("--verifiers", default=None)
    allocate.add_argument("--seed", type=int, default=0)
    allocate.add_argument("--now", type=int, default=None)

    ledger_group = groups.add_parser("ledger").add_subparsers(dest="verb", required=True)
    commit = ledger_group.add_parser("commit")
    commit.add_argument("--now", type=int, default=None)
    ledger_group.add_parser("verify")
    prove = ledger_group.add_parser("prove")
    prove.add_argument("--event", required=True)

    sim_group = groups.add_parser("sim").add_subparsers(dest="verb", required=True)
    run = sim_group.add_parser("run")
    run.add_argument("--config", dest="scenario", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", required=True)
    paper = sim_group.add_parser("paper-scenario")
    paper.add_argument("--alpha-security-successes", type=int, default=10)

    return parser


def _cmd_regime_validate(args, cfg, out, err) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    result = parse_regime(text)
    if isinstance(result, list):
        for issue in result:
            print(issue.render(), file=out)
        return EXIT_DOMAIN
    return EXIT_OK


def _cmd_evidence_ingest(args, cfg, out, err) -> int:
    now = args.now if args.now is not None else int(time.time())
    catalog = _load_data_catalog(cfg)
    lines = Path(args.file).read_text(encoding="utf-8").splitlines()
    failures: list[str] = []
    parsed: list[ev.EvidenceEvent] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            failures.append(f"{number}: invalid JSON: {exc.msg}")
            continue
        event, errors = ev.event_from_json(obj)
        if errors or event is None:
            failures.extend(f"{number}: {message}" for message in errors)
            continue
        checked = ev.validate_event(event, catalog, now)
        if isinstance(checked, list):
            failures.extend(f"{number}: {v.render()}" for v in checked)
            continue
        parsed.append(event)
    if failures:
        for failure in failures:
            print(failure, file=out)
        return EXIT_DOMAIN
    with _write_lock(cfg.data_dir):
        store = _open_store(cfg)
        ledger = _open_ledger(cfg)
        for event in store.events():
            digest = ev.event_id(event, cfg.hash_algorithm)
            if not ledger.is_committed(digest):
                ledger.objects.put(ev.canonical_bytes(event))
                ledger.stage(digest)
        for event in parsed:
            receipt = store.append(event)
            ledger.objects.put(ev.canonical_bytes(event))
            ledger.stage(receipt.event_id)
            print(f"appended: {receipt.sequence_number} {receipt.event_id}", file=out)
        committed = False
        while ledger.commit_if_due(cfg.epoch_cadence, now) is not None:
            committed = True
        if committed:
            ledger.save(cfg.data_dir)
    print(f"ingested: {len(parsed)}", file=out)
    return EXIT_OK


def _cmd_evidence_query(args, cfg, out, err) -> int:
    store = _open_store(cfg)
    time_range = None
    if args.since is not None or args.until is not None:
        time_range = (
            args.since if args.since is not None else 0,
            args.until if args.until is not None else 2**62,
        )
    flt = ev.QueryFilter(
        agent=args.agent,
        task_class=args.task_class,
        regime_id=args.regime,
        min_strength=StrengthLevel(args.min_strength) if args.min_strength else None,
        verdict=ev.Verdict(args.verdict) if args.verdict else None,
        time_range=time_range,
    )
    result = store.query(flt)
    print(f"count: {result.count}", file=out)
    for event in result.events:
        print(ev.event_to_json_line(event), file=out)
    return EXIT_OK


def _cmd_card_show(args, cfg, out, err) -> int:
    store = _open_store(cfg)
    context = ev.parse_context_label(args.context)
    card = rebuild_card(store.events(), args.agent, context, cfg.aggregation)
    at = args.at if args.at is not None else card.last_updated
    assessment = score(card, StrengthLevel(args.strength), at, cfg.aggregation)
    print(
        f"score={assessment.score:.6f} lcb={assessment.lcb:.6f} "
        f"uncertainty={assessment.uncertainty:.6f} n_eff={assessment.n_eff:.6f} "
        f"scrutiny={'true' if assessment.scrutiny_active else 'false'}",
        file=out,
    )
    return EXIT_OK


def _parse_task_file(path: str, catalog: RegimeCatalog) -> policy.TaskSpec:
    entries, errors = lineconf.parse(Path(path).read_text(encoding="utf-8"))
    if errors:
        first = errors[0]
        raise ValueError(f"{path}:{first.line}: {first.message}")
    kv = {e.key: e.value for e in entries if e.kind == "kv"}
    required = {"task", "owner", "task_class", "regime"}
    missing = required - set(kv)
    if missing:
        raise ValueError(f"task file missing keys: {', '.join(sorted(missing))}")
    regime = catalog.require(kv["regime"])
    return policy.TaskSpec(
        task=kv["task"],
        owner=kv["owner"],
        context=ev.ContextKey(kv["task_class"], kv.get("subdomain") or None),
        required_regime=regime.regime_id,
        required_strength=regime.strength,
        base_stake=float(kv.get("base_stake", "0")),
        value_at_risk=float(kv.get("value_at_risk", "0")),
        sandbox=lineconf.parse_bool(kv.get("sandbox", "false")),
    )


def _cmd_allocate(args, cfg, out, err) -> int:
    catalog = _load_data_catalog(cfg)
    task = _parse_task_file(args.task, catalog)
    store = _open_store(cfg)
    card_store = CardStore(cfg.aggregation)
    for event in store.events():
        card_store.apply_event(event)
    if args.verifiers:
        pool = lineconf.split_list(args.verifiers)
    else:
        pool = sorted({event.verifier for event in store.events()})
    agents = [policy.AgentRef(a) for a in lineconf.split_list(args.agents)]
    now = args.now if args.now is not None else max(
        (e.timestamp for e in store.events()), default=0
    )
    allocation = policy.allocate(
        task, agents, card_store, catalog, cfg.policy, cfg.aggregation,
        None, pool, now, StreamFactory(args.seed).stream("panel"),
    )
    print(f"winner: {allocation.winner}", file=out)
    print(f"decision: {allocation.decision.render()}", file=out)
    print(f"stake: {policy.required_stake(allocation.decision):.6f}", file=out)
    print(f"panel: {','.join(allocation.panel)}", file=out)
    return EXIT_OK


def _cmd_ledger_commit(args, cfg, out, err) -> int:
    now = args.now if args.now is not None else int(time.time())
    with _write_lock(cfg.data_dir):
        store = _open_store(cfg)
        ledger = _open_ledger(cfg)
        pending = [
            ev.event_id(event, cfg.hash_algorithm)
            for event in store.events()
            if not ledger.is_committed(ev.event_id(event, cfg.hash_algorithm))
        ]
        record = ledger.commit_epoch(pending, now=now)
        ledger.save(cfg.data_dir)
    print(f"epoch: {record.epoch}", file=out)
    print(f"root: {record.merkle_root.hex()}", file=out)
    print(f"events: {record.event_count}", file=out)
    return EXIT_OK


def _cmd_ledger_verify(args, cfg, out, err) -> int:
    ledger = _open_ledger(cfg)
    bad_epoch = ledger.verify()
    if bad_epoch is None:
        print("Ok", file=out)
        return EXIT_OK
    print(f"Broken{{{bad_epoch}}}", file=out)
    return EXIT_DOMAIN


def _cmd_ledger_prove(args, cfg, out, err) -> int:
    ledger = _open_ledger(cfg)
    proof = ledger.inclusion_proof(args.event)
    print(f"event: {proof.event_id}", file=out)
    print(f"epoch: {proof.epoch}", file=out)
    print(f"index: {proof.leaf_index}", file=out)
    for sibling, side in proof.path:
        print(f"{side} {sibling.hex()}", file=out)
    return EXIT_OK


def _cmd_sim_run(args, cfg, out, err) -> int:
    path = Path(args.scenario)
    config = sim.parse_scenario(path.read_text(encoding="utf-8"), path.parent)
    if args.seed is not None:
        config.seed = args.seed
    out_dir = Path(args.out)
    if out_dir.exists() and any(out_dir.iterdir()):
        raise sim.ConfigError(f"output directory {out_dir} is not empty")
    result = sim.run_sim(config, out_dir=out_dir)
    print(f"rounds: {result.metrics.rounds}", file=out)
    print(f"events: {result.metrics.events}", file=out)
    print(f"final_root: {result.metrics.final_root}", file=out)
    print(f"out: {args.out}", file=out)
    return EXIT_OK


def _cmd_sim_paper(args, cfg, out, err) -> int:
    outcome = sim.run_paper_scenario(args.alpha_security_successes)
    print(f"winner: {outcome.winner}", file=out)
    print(f"alpha_decision: {outcome.alpha_decision.render()}", file=out)
    print(f"beta_decision: {outcome.beta_decision.render()}", file=out)
    return EXIT_OK


_HANDLERS = {
    ("regime", "validate"): _cmd_regime_validate,
    ("evidence", "ingest"): _cmd_evidence_ingest,
    ("evidence", "query"): _cmd_evidence_query,
    ("card", "show"): _cmd_card_show,
    ("allocate", None): _cmd_allocate,
    ("ledger", "commit"): _cmd_ledger_commit,
    ("ledger", "verify"): _cmd_ledger_verify,
    ("ledger", "prove"): _cmd_ledger_prove,
    ("sim", "run"): _cmd_sim_run,
    ("sim", "paper-scenario"): _cmd_sim_paper,
}

_DOMAIN_ERRORS = (
    ev.DuplicateEvent,
    ev.StorageFailure,
    ledger_mod.EmptyEpoch,
    ledger_mod.DanglingEvent,
    ledger_mod.NotCommitted,
    ledger_mod.MissingObject,
    ledger_mod.StorageFailure,
    ledger_mod.EmptyLeaves,
    policy.InsufficientVerifiers,
    policy.UnknownSeverity,
    sim.ConfigError,
    sim.EmptyHistory,
    hashing.UnknownHashAlgorithm,
    regimes_mod.UnknownRegime,
    regimes_mod.InvalidRegime,
    regimes_mod.DuplicateRegimeId,
)


def run_command(argv: list[str], out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        print(USAGE, file=err)
        return EXIT_USAGE

    try:
        cfg = load_global_config(args.config, args.data)
        handler = _HANDLERS[(args.group, getattr(args, "verb", None))]
        return handler(args, cfg, out, err)
    except policy.NoEligibleAgent as exc:
        print(f"no eligible agent: {exc}", file=err)
        return EXIT_NO_AGENT
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DOMAIN
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
