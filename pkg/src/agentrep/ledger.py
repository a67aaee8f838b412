"""Hybrid persistence emulation: content-addressed object store plus an
append-only, hash-linked epoch commitment log with Merkle inclusion proofs.

Merkle node rule (domain separated, transparency-log style):

    leaf node     = H(0x00 || leaf_digest)
    interior node = H(0x01 || left || right)

An odd node at any level is promoted unchanged to the next level, so proof
paths have at most ceil(log2(n)) elements and promoted positions skip
levels.

Every commitment record hash-links to its predecessor; the hash of the
newest record is kept as an explicit head anchor (the role an on-chain
pointer would play), so mutating any field of any record, including the
newest, is detected by `verify_chain`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from . import hashing

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
ZERO_DIGEST = b"\x00" * hashing.DIGEST_SIZE

SIDE_LEFT = "left"
SIDE_RIGHT = "right"


class EmptyLeaves(Exception):
    pass


class EmptyEpoch(Exception):
    pass


class DanglingEvent(Exception):
    pass


class NotCommitted(Exception):
    pass


class MissingObject(Exception):
    pass


class StorageFailure(Exception):
    pass


class ObjectStore:
    """Content-addressed store: address = hex digest of the object bytes.

    With a root directory, objects live as `objects/<address>`; without one
    the store is memory-only. Puts are idempotent.
    """

    def __init__(self, root: str | Path | None = None,
                 algorithm: str = hashing.DEFAULT_ALGORITHM):
        self._algorithm = algorithm
        self._objects: dict[str, bytes] = {}
        self._dir: Path | None = None
        if root is not None:
            self._dir = Path(root) / "objects"
            try:
                self._dir.mkdir(parents=True, exist_ok=True)
                for entry in self._dir.iterdir():
                    if entry.is_file():
                        self._objects[entry.name] = entry.read_bytes()
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc

    def put(self, data: bytes) -> str:
        address = hashing.hex_digest(data, self._algorithm)
        if address not in self._objects:
            self._objects[address] = data
            if self._dir is not None:
                try:
                    (self._dir / address).write_bytes(data)
                except OSError as exc:
                    raise StorageFailure(str(exc)) from exc
        return address

    def get(self, address: str) -> bytes:
        try:
            return self._objects[address]
        except KeyError:
            raise MissingObject(address) from None

    def __contains__(self, address: str) -> bool:
        return address in self._objects

    def __len__(self) -> int:
        return len(self._objects)

    def addresses(self) -> list[str]:
        return sorted(self._objects)


# --- Merkle tree -------------------------------------------------------------

def _leaf_level(leaves, algorithm: str) -> list[bytes]:
    if not leaves:
        raise EmptyLeaves("merkle tree needs at least one leaf")
    return [hashing.digest(LEAF_PREFIX + leaf, algorithm) for leaf in leaves]


def _next_level(level: list[bytes], algorithm: str) -> list[bytes]:
    paired = [
        hashing.digest(NODE_PREFIX + level[i] + level[i + 1], algorithm)
        for i in range(0, len(level) - 1, 2)
    ]
    if len(level) % 2 == 1:
        paired.append(level[-1])
    return paired


def merkle_root(leaves, algorithm: str = hashing.DEFAULT_ALGORITHM) -> bytes:
    level = _leaf_level(leaves, algorithm)
    while len(level) > 1:
        level = _next_level(level, algorithm)
    return level[0]


def merkle_path(leaves, index: int,
                algorithm: str = hashing.DEFAULT_ALGORITHM) -> list[tuple[bytes, str]]:
    """Sibling path for one leaf; each element is (digest, side-of-sibling)."""
    level = _leaf_level(leaves, algorithm)
    if not 0 <= index < len(level):
        raise IndexError(f"leaf index {index} out of range")
    path: list[tuple[bytes, str]] = []
    while len(level) > 1:
        if index % 2 == 1:
            path.append((level[index - 1], SIDE_LEFT))
        elif index + 1 < len(level):
            path.append((level[index + 1], SIDE_RIGHT))
        index //= 2
        level = _next_level(level, algorithm)
    return path


def expected_path_sides(index: int, leaf_count: int) -> list[str]:
    """Side sequence a valid proof for (index, leaf_count) must carry."""
    sides: list[str] = []
    n = leaf_count
    while n > 1:
        if index % 2 == 1:
            sides.append(SIDE_LEFT)
        elif index + 1 < n:
            sides.append(SIDE_RIGHT)
        index //= 2
        n = (n + 1) // 2
    return sides


# --- commitment log -----------------------------------------------------------

@dataclass(frozen=True)
class CommitmentRecord:
    epoch: int
    merkle_root: bytes
    prev_hash: bytes
    event_count: int
    timestamp: int


def record_bytes(record: CommitmentRecord) -> bytes:
    return (
        struct.pack(">Q", record.epoch)
        + record.merkle_root
        + record.prev_hash
        + struct.pack(">Q", record.event_count)
        + struct.pack(">Q", record.timestamp)
    )


def record_hash(record: CommitmentRecord,
                algorithm: str = hashing.DEFAULT_ALGORITHM) -> bytes:
    return hashing.digest(record_bytes(record), algorithm)


def verify_chain(records, head: bytes | None = None,
                 algorithm: str = hashing.DEFAULT_ALGORITHM) -> int | None:
    """Check epoch density and every prev_hash link (plus the head anchor
    when given). Returns None when intact, else the first bad epoch."""
    prev = ZERO_DIGEST
    for i, record in enumerate(records):
        if (
            record.epoch != i
            or record.prev_hash != prev
            or record.event_count < 0
            or record.timestamp < 0
        ):
            return i
        prev = record_hash(record, algorithm)
    if head is not None and head != prev:
        return max(len(records) - 1, 0)
    return None


@dataclass(frozen=True)
class InclusionProof:
    event_id: str
    epoch: int
    leaf_index: int
    path: tuple[tuple[bytes, str], ...]


def verify_proof(
    proof: InclusionProof,
    event_bytes: bytes,
    records,
    head: bytes | None = None,
    algorithm: str = hashing.DEFAULT_ALGORITHM,
) -> bool:
    """Recompute the leaf from the event bytes, fold the sibling path,
    compare against the epoch root, and require an intact chain. The path's
    side sequence must match what (leaf_index, event_count) dictates."""
    if verify_chain(records, head, algorithm) is not None:
        return False
    if not 0 <= proof.epoch < len(records):
        return False
    record = records[proof.epoch]
    if not 0 <= proof.leaf_index < record.event_count:
        return False
    if [side for _, side in proof.path] != expected_path_sides(
        proof.leaf_index, record.event_count
    ):
        return False
    node = hashing.digest(LEAF_PREFIX + hashing.digest(event_bytes, algorithm), algorithm)
    for sibling, side in proof.path:
        if side == SIDE_LEFT:
            node = hashing.digest(NODE_PREFIX + sibling + node, algorithm)
        elif side == SIDE_RIGHT:
            node = hashing.digest(NODE_PREFIX + node + sibling, algorithm)
        else:
            return False
    return node == record.merkle_root


class Ledger:
    """Commitment log over an object store of canonical event bytes.

    Events are staged as hex digests and committed in epochs, either
    explicitly or automatically every `cadence` staged events.
    """

    LOG_NAME = "commitments.log"
    HEAD_NAME = "commitments.head"
    INDEX_NAME = "epochs.idx"

    def __init__(self, objects: ObjectStore,
                 algorithm: str = hashing.DEFAULT_ALGORITHM):
        self.objects = objects
        self.algorithm = algorithm
        self.records: list[CommitmentRecord] = []
        self.head: bytes = ZERO_DIGEST
        self._epoch_events: list[list[str]] = []
        self._locator: dict[str, tuple[int, int]] = {}
        self._pending: list[str] = []

    @property
    def pending(self) -> tuple[str, ...]:
        return tuple(self._pending)

    def stage(self, event_id: str) -> None:
        self._pending.append(event_id)

    def is_committed(self, event_id: str) -> bool:
        return event_id in self._locator

    def commit_epoch(self, event_ids=None, *, now: int) -> CommitmentRecord:
        ids = list(self._pending if event_ids is None else event_ids)
        if not ids:
            raise EmptyEpoch("nothing to commit")
        for eid in ids:
            if eid not in self.objects:
                raise DanglingEvent(eid)
        leaves = [bytes.fromhex(eid) for eid in ids]
        record = CommitmentRecord(
            epoch=len(self.records),
            merkle_root=merkle_root(leaves, self.algorithm),
            prev_hash=self.head,
            event_count=len(ids),
            timestamp=now,
        )
        self.records.append(record)
        self.head = record_hash(record, self.algorithm)
        for index, eid in enumerate(ids):
            self._locator[eid] = (record.epoch, index)
        self._epoch_events.append(ids)
        committed = set(ids)
        self._pending = [eid for eid in self._pending if eid not in committed]
        return record

    def commit_if_due(self, cadence: int, now: int) -> CommitmentRecord | None:
        """Commit one epoch of exactly `cadence` events once that many are
        pending; older stages commit first."""
        if cadence > 0 and len(self._pending) >= cadence:
            return self.commit_epoch(self._pending[:cadence], now=now)
        return None

    def inclusion_proof(self, event_id: str) -> InclusionProof:
        try:
            epoch, index = self._locator[event_id]
        except KeyError:
            raise NotCommitted(event_id) from None
        leaves = [bytes.fromhex(eid) for eid in self._epoch_events[epoch]]
        return InclusionProof(
            event_id=event_id,
            epoch=epoch,
            leaf_index=index,
            path=tuple(merkle_path(leaves, index, self.algorithm)),
        )

    def verify_proof(self, proof: InclusionProof, event_bytes: bytes) -> bool:
        return verify_proof(proof, event_bytes, self.records, self.head, self.algorithm)

    def verify(self) -> int | None:
        return verify_chain(self.records, self.head, self.algorithm)

    def committed_event_ids(self) -> list[str]:
        return [eid for epoch in self._epoch_events for eid in epoch]

    # --- persistence ----------------------------------------------------------

    def save(self, root: str | Path) -> None:
        root = Path(root)
        try:
            root.mkdir(parents=True, exist_ok=True)
            log_lines = [
                f"{r.epoch}\t{r.merkle_root.hex()}\t{r.prev_hash.hex()}"
                f"\t{r.event_count}\t{r.timestamp}"
                for r in self.records
            ]
            (root / self.LOG_NAME).write_text(
                "".join(line + "\n" for line in log_lines), encoding="utf-8"
            )
            (root / self.HEAD_NAME).write_text(self.head.hex() + "\n", encoding="utf-8")
            index_lines = [
                f"{epoch}\t{eid}"
                for epoch, ids in enumerate(self._epoch_events)
                for eid in ids
            ]
            (root / self.INDEX_NAME).write_text(
                "".join(line + "\n" for line in index_lines), encoding="utf-8"
            )
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    @classmethod
    def load(cls, root: str | Path, objects: ObjectStore,
             algorithm: str = hashing.DEFAULT_ALGORITHM) -> "Ledger":
        root = Path(root)
        ledger = cls(objects, algorithm)
        log_path = root / cls.LOG_NAME
        if not log_path.exists():
            return ledger
        try:
            for line in log_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                epoch, root_hex, prev_hex, count, ts = line.split("\t")
                ledger.records.append(
                    CommitmentRecord(
                        epoch=int(epoch),
                        merkle_root=bytes.fromhex(root_hex),
                        prev_hash=bytes.fromhex(prev_hex),
                        event_count=int(count),
                        timestamp=int(ts),
                    )
                )
            head_path = root / cls.HEAD_NAME
            if head_path.exists():
                ledger.head = bytes.fromhex(head_path.read_text(encoding="utf-8").strip())
            elif ledger.records:
                ledger.head = record_hash(ledger.records[-1], algorithm)
            ledger._epoch_events = [[] for _ in ledger.records]
            index_path = root / cls.INDEX_NAME
            if index_path.exists():
                for line in index_path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    epoch, eid = line.split("\t")
                    epoch_index = int(epoch)
                    ledger._locator[eid] = (
                        epoch_index,
                        len(ledger._epoch_events[epoch_index]),
                    )
                    ledger._epoch_events[epoch_index].append(eid)
        except (OSError, ValueError) as exc:
            raise StorageFailure(str(exc)) from exc
        return ledger


def put_object(store: ObjectStore, data: bytes) -> str:
    return store.put(data)


def get_object(store: ObjectStore, address: str) -> bytes:
    return store.get(address)


def commit_epoch(ledger: Ledger, event_ids, now: int) -> CommitmentRecord:
    return ledger.commit_epoch(event_ids, now=now)


def inclusion_proof(ledger: Ledger, event_id: str) -> InclusionProof:
    return ledger.inclusion_proof(event_id)
