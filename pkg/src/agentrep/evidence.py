"""Evidence events: the verified-interaction records all reputation derives from.

An event records one verified agent-task interaction: who did the work, in
what context, under which verification regime, what the verifier reported,
and whether the record was later disputed. Events are validated against the
regime catalog, canonically serialized for hashing, and kept in an
append-only store that answers provenance queries.

Canonical encoding (the basis of `event_id` and every ledger commitment):
fields in the fixed order

    agent, task, context.task_class, context.subdomain-or-empty, regime_id,
    outcome.verdict, strength, timestamp, verifier, integrity.status,
    integrity.severity, sorted evidence kinds

each field framed as a 4-byte big-endian length followed by the payload;
string payloads are UTF-8, integer payloads are 8-byte big-endian.
Free-text outcome detail and dispute timestamps never affect scoring and
are deliberately excluded from the encoding.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from pathlib import Path

from . import hashing
from .regimes import RegimeCatalog, StrengthLevel

MAX_IDENTIFIER_LENGTH = 128
MAX_DETAIL_LENGTH = 1024

# Labels additionally exclude characters the line/label syntax reserves.
_LABEL_FORBIDDEN = frozenset(",/=:#[]")


class Verdict(str, enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


class IntegrityStatus(str, enum.Enum):
    CLEAN = "clean"
    DISPUTED = "disputed"
    REVERSED = "reversed"
    PENALIZED = "penalized"


class Severity(str, enum.Enum):
    NONE = "none"
    NEGLIGENCE = "negligence"
    FRAUD = "fraud"


_INTEGRITY_RANK = {
    IntegrityStatus.CLEAN: 0,
    IntegrityStatus.DISPUTED: 1,
    IntegrityStatus.REVERSED: 2,
    IntegrityStatus.PENALIZED: 2,
}

VIOLATION_STATUSES = frozenset({IntegrityStatus.REVERSED, IntegrityStatus.PENALIZED})


def is_valid_identifier(value: str) -> bool:
    """Opaque identifier: 1-128 printable characters, no whitespace."""
    if not isinstance(value, str) or not 1 <= len(value) <= MAX_IDENTIFIER_LENGTH:
        return False
    return all(ch.isprintable() and not ch.isspace() for ch in value)


def is_valid_label(value: str) -> bool:
    """Context/property/evidence-kind label: identifier minus reserved syntax."""
    return is_valid_identifier(value) and not set(value) & _LABEL_FORBIDDEN


def integrity_can_advance(current: IntegrityStatus, new: IntegrityStatus) -> bool:
    """Monotone transitions only: clean -> disputed -> {reversed, penalized}."""
    return _INTEGRITY_RANK[new] > _INTEGRITY_RANK[current]


@dataclass(frozen=True)
class ContextKey:
    task_class: str
    subdomain: str | None = None

    def label(self) -> str:
        if self.subdomain:
            return f"{self.task_class}/{self.subdomain}"
        return self.task_class


def parse_context_label(text: str) -> ContextKey:
    task_class, sep, subdomain = text.partition("/")
    return ContextKey(task_class, subdomain if sep else None)


@dataclass(frozen=True)
class Outcome:
    verdict: Verdict
    detail: str | None = None


@dataclass(frozen=True)
class IntegrityRecord:
    status: IntegrityStatus = IntegrityStatus.CLEAN
    severity: Severity = Severity.NONE
    dispute_time: int | None = None


@dataclass(frozen=True)
class EvidenceEvent:
    agent: str
    task: str
    context: ContextKey
    regime_id: str
    outcome: Outcome
    strength: StrengthLevel
    timestamp: int
    verifier: str
    integrity: IntegrityRecord = IntegrityRecord()
    evidence_kinds: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Violation:
    code: str
    field: str | None = None
    detail: str = ""

    def render(self) -> str:
        parts = [self.code]
        if self.field:
            parts.append(self.field)
        if self.detail:
            parts.append(self.detail)
        return ": ".join(parts)


UNKNOWN_REGIME = "unknown-regime"
STRENGTH_MISMATCH = "strength-mismatch"
MISSING_EVIDENCE_KIND = "missing-evidence-kind"
FUTURE_TIMESTAMP = "future-timestamp"
MALFORMED_IDENTIFIER = "malformed-identifier"
BAD_CONTEXT = "bad-context"
BAD_OUTCOME = "bad-outcome"
BAD_INTEGRITY = "bad-integrity"
BAD_TIMESTAMP = "bad-timestamp"
BAD_EVIDENCE_KIND = "bad-evidence-kind"


def event_violations(
    event: EvidenceEvent, catalog: RegimeCatalog, now: int
) -> list[Violation]:
    """Check every event invariant against the catalog; return all breaches."""
    violations: list[Violation] = []

    for name in ("agent", "task", "verifier", "regime_id"):
        if not is_valid_identifier(getattr(event, name)):
            violations.append(Violation(MALFORMED_IDENTIFIER, field=name))

    if not is_valid_label(event.context.task_class):
        violations.append(Violation(BAD_CONTEXT, field="task_class"))
    if event.context.subdomain is not None and not is_valid_label(event.context.subdomain):
        violations.append(Violation(BAD_CONTEXT, field="subdomain"))

    if not isinstance(event.outcome.verdict, Verdict):
        violations.append(Violation(BAD_OUTCOME, field="verdict"))
    if event.outcome.detail is not None and len(event.outcome.detail) > MAX_DETAIL_LENGTH:
        violations.append(Violation(BAD_OUTCOME, field="detail", detail="too long"))

    integrity = event.integrity
    is_clean = integrity.status is IntegrityStatus.CLEAN
    looks_clean = integrity.severity is Severity.NONE and integrity.dispute_time is None
    if is_clean != looks_clean:
        violations.append(
            Violation(BAD_INTEGRITY, detail="clean iff severity none and no dispute time")
        )

    if not isinstance(event.timestamp, int) or event.timestamp < 0:
        violations.append(Violation(BAD_TIMESTAMP, detail="timestamp must be an integer >= 0"))
    elif event.timestamp > now:
        violations.append(Violation(FUTURE_TIMESTAMP, detail=str(event.timestamp)))

    for kind in event.evidence_kinds:
        if not is_valid_label(kind):
            violations.append(Violation(BAD_EVIDENCE_KIND, detail=kind))

    regime = catalog.lookup(event.regime_id)
    if regime is None:
        violations.append(Violation(UNKNOWN_REGIME, detail=event.regime_id))
    else:
        if event.strength != regime.strength:
            violations.append(
                Violation(
                    STRENGTH_MISMATCH,
                    detail=f"event {int(event.strength)} vs regime {int(regime.strength)}",
                )
            )
        for kind in sorted(regime.required_evidence - event.evidence_kinds):
            violations.append(Violation(MISSING_EVIDENCE_KIND, detail=kind))

    return violations


def validate_event(event: EvidenceEvent, catalog: RegimeCatalog, now: int):
    """Return the event unchanged when every invariant holds, else the full
    violation list (never just the first breach)."""
    violations = event_violations(event, catalog, now)
    return event if not violations else violations


# --- canonical encoding ------------------------------------------------------

def canonical_bytes(event: EvidenceEvent) -> bytes:
    parts: list[str | int] = [
        event.agent,
        event.task,
        event.context.task_class,
        event.context.subdomain or "",
        event.regime_id,
        event.outcome.verdict.value,
        int(event.strength),
        event.timestamp,
        event.verifier,
        event.integrity.status.value,
        event.integrity.severity.value,
    ]
    parts.extend(sorted(event.evidence_kinds))
    out = bytearray()
    for part in parts:
        payload = struct.pack(">Q", part) if isinstance(part, int) else part.encode("utf-8")
        out += struct.pack(">I", len(payload))
        out += payload
    return bytes(out)


def _read_fields(data: bytes) -> list[bytes]:
    fields: list[bytes] = []
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise ValueError("truncated length prefix")
        (length,) = struct.unpack_from(">I", data, offset)
        offset += 4
        if offset + length > len(data):
            raise ValueError("truncated field payload")
        fields.append(data[offset : offset + length])
        offset += length
    return fields


def decode_canonical(data: bytes) -> EvidenceEvent:
    """Inverse of `canonical_bytes` over the canonically encoded fields.

    Outcome detail and dispute time are not part of the encoding and come
    back absent.
    """
    fields = _read_fields(data)
    if len(fields) < 11:
        raise ValueError(f"expected at least 11 fields, got {len(fields)}")

    def text(i: int) -> str:
        return fields[i].decode("utf-8")

    def integer(i: int) -> int:
        if len(fields[i]) != 8:
            raise ValueError(f"field {i} is not an 8-byte integer")
        return struct.unpack(">Q", fields[i])[0]

    return EvidenceEvent(
        agent=text(0),
        task=text(1),
        context=ContextKey(text(2), text(3) or None),
        regime_id=text(4),
        outcome=Outcome(Verdict(text(5))),
        strength=StrengthLevel(integer(6)),
        timestamp=integer(7),
        verifier=text(8),
        integrity=IntegrityRecord(IntegrityStatus(text(9)), Severity(text(10))),
        evidence_kinds=frozenset(f.decode("utf-8") for f in fields[11:]),
    )


def event_id(event: EvidenceEvent, algorithm: str = hashing.DEFAULT_ALGORITHM) -> str:
    """Hex digest of the canonical encoding; the event's identity everywhere."""
    return hashing.hex_digest(canonical_bytes(event), algorithm)


# --- JSON Lines interchange --------------------------------------------------

_TOP_KEYS = {
    "agent", "task", "context", "regime_id", "outcome",
    "strength", "timestamp", "verifier", "integrity", "evidence_kinds",
}
_CONTEXT_KEYS = {"task_class", "subdomain"}
_OUTCOME_KEYS = {"verdict", "detail"}
_INTEGRITY_KEYS = {"status", "severity", "dispute_time"}


def event_to_json(event: EvidenceEvent) -> dict:
    context: dict = {"task_class": event.context.task_class}
    if event.context.subdomain is not None:
        context["subdomain"] = event.context.subdomain
    outcome: dict = {"verdict": event.outcome.verdict.value}
    if event.outcome.detail is not None:
        outcome["detail"] = event.outcome.detail
    integrity: dict = {
        "status": event.integrity.status.value,
        "severity": event.integrity.severity.value,
    }
    if event.integrity.dispute_time is not None:
        integrity["dispute_time"] = event.integrity.dispute_time
    return {
        "agent": event.agent,
        "task": event.task,
        "context": context,
        "regime_id": event.regime_id,
        "outcome": outcome,
        "strength": int(event.strength),
        "timestamp": event.timestamp,
        "verifier": event.verifier,
        "integrity": integrity,
        "evidence_kinds": sorted(event.evidence_kinds),
    }


def event_to_json_line(event: EvidenceEvent) -> str:
    return json.dumps(event_to_json(event), sort_keys=True, separators=(",", ":"))


def event_from_json(obj: object) -> tuple[EvidenceEvent | None, list[str]]:
    """Decode one JSON record; unknown or missing keys are reported, not ignored."""
    errors: list[str] = []
    if not isinstance(obj, dict):
        return None, ["record is not a JSON object"]
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        errors.append(f"unknown keys: {', '.join(sorted(unknown))}")
    missing = _TOP_KEYS - set(obj)
    if missing:
        errors.append(f"missing keys: {', '.join(sorted(missing))}")
    if errors:
        return None, errors

    def sub(name: str, allowed: set[str], required: set[str]) -> dict | None:
        value = obj[name]
        if not isinstance(value, dict):
            errors.append(f"{name} must be an object")
            return None
        bad = set(value) - allowed
        if bad:
            errors.append(f"unknown keys in {name}: {', '.join(sorted(bad))}")
        lost = required - set(value)
        if lost:
            errors.append(f"missing keys in {name}: {', '.join(sorted(lost))}")
        return None if bad or lost else value

    context = sub("context", _CONTEXT_KEYS, {"task_class"})
    outcome = sub("outcome", _OUTCOME_KEYS, {"verdict"})
    integrity = sub("integrity", _INTEGRITY_KEYS, {"status", "severity"})
    if errors or context is None or outcome is None or integrity is None:
        return None, errors

    try:
        event = EvidenceEvent(
            agent=obj["agent"],
            task=obj["task"],
            context=ContextKey(context["task_class"], context.get("subdomain")),
            regime_id=obj["regime_id"],
            outcome=Outcome(Verdict(outcome["verdict"]), outcome.get("detail")),
            strength=StrengthLevel(obj["strength"]),
            timestamp=obj["timestamp"],
            verifier=obj["verifier"],
            integrity=IntegrityRecord(
                IntegrityStatus(integrity["status"]),
                Severity(integrity["severity"]),
                integrity.get("dispute_time"),
            ),
            evidence_kinds=frozenset(obj["evidence_kinds"]),
        )
    except (ValueError, TypeError) as exc:
        return None, [str(exc)]
    return event, []


# --- store --------------------------------------------------------------------

class DuplicateEvent(Exception):
    pass


class StorageFailure(Exception):
    pass


@dataclass(frozen=True)
class AppendReceipt:
    sequence_number: int
    event_id: str


@dataclass(frozen=True)
class QueryFilter:
    agent: str | None = None
    task_class: str | None = None
    regime_id: str | None = None
    min_strength: StrengthLevel | None = None
    verdict: Verdict | None = None
    time_range: tuple[int, int] | None = None


@dataclass(frozen=True)
class QueryResult:
    count: int
    events: tuple[EvidenceEvent, ...]


def matches_filter(event: EvidenceEvent, flt: QueryFilter) -> bool:
    if flt.agent is not None and event.agent != flt.agent:
        return False
    if flt.task_class is not None and event.context.task_class != flt.task_class:
        return False
    if flt.regime_id is not None and event.regime_id != flt.regime_id:
        return False
    if flt.min_strength is not None and event.strength < flt.min_strength:
        return False
    if flt.verdict is not None and event.outcome.verdict is not flt.verdict:
        return False
    if flt.time_range is not None:
        start, end = flt.time_range
        if not start <= event.timestamp <= end:
            return False
    return True


class EvidenceStore:
    """Append-only event store: single writer, strictly increasing sequence
    numbers, duplicate digests rejected, optional JSON Lines persistence."""

    def __init__(self, path: str | Path | None = None,
                 algorithm: str = hashing.DEFAULT_ALGORITHM):
        self._path = Path(path) if path is not None else None
        self._algorithm = algorithm
        self._events: list[EvidenceEvent] = []
        self._ids: dict[str, int] = {}
        if self._path is not None and self._path.exists():
            self._load()

    def _load(self) -> None:
        assert self._path is not None
        try:
            text = self._path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            event, errors = event_from_json(json.loads(line))
            if errors or event is None:
                raise StorageFailure(f"{self._path}:{number}: {'; '.join(errors)}")
            digest = event_id(event, self._algorithm)
            self._ids[digest] = len(self._events)
            self._events.append(event)

    def append(self, event: EvidenceEvent) -> AppendReceipt:
        digest = event_id(event, self._algorithm)
        if digest in self._ids:
            raise DuplicateEvent(digest)
        sequence = len(self._events)
        if self._path is not None:
            try:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with self._path.open("a", encoding="utf-8") as handle:
                    handle.write(event_to_json_line(event) + "\n")
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc
        self._events.append(event)
        self._ids[digest] = sequence
        return AppendReceipt(sequence_number=sequence, event_id=digest)

    def query(self, flt: QueryFilter = QueryFilter()) -> QueryResult:
        """Events matching the conjunction of present filter fields, in
        append order."""
        matched = tuple(e for e in self._events if matches_filter(e, flt))
        return QueryResult(count=len(matched), events=matched)

    def events(self) -> tuple[EvidenceEvent, ...]:
        return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __contains__(self, digest: str) -> bool:
        return digest in self._ids


def append_event(store: EvidenceStore, event: EvidenceEvent) -> AppendReceipt:
    return store.append(event)


def provenance_query(store: EvidenceStore, flt: QueryFilter = QueryFilter()) -> QueryResult:
    return store.query(flt)
