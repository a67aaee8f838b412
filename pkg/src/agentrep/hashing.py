"""Hash registry shared by event digests, the object store, and the ledger.

Every digest in the system is 256 bits. The algorithm is selectable at
configuration time; SHA-256 is the default everywhere.
"""

from __future__ import annotations

import hashlib

DIGEST_SIZE = 32

_ALGORITHMS = {
    "sha256": hashlib.sha256,
    "sha3-256": hashlib.sha3_256,
}

DEFAULT_ALGORITHM = "sha256"


class UnknownHashAlgorithm(ValueError):
    pass


def hasher(algorithm: str = DEFAULT_ALGORITHM):
    """Return the hash constructor for a configured algorithm name."""
    try:
        return _ALGORITHMS[algorithm]
    except KeyError:
        raise UnknownHashAlgorithm(
            f"unknown hash algorithm {algorithm!r}; known: {sorted(_ALGORITHMS)}"
        ) from None


def digest(data: bytes, algorithm: str = DEFAULT_ALGORITHM) -> bytes:
    return hasher(algorithm)(data).digest()


def hex_digest(data: bytes, algorithm: str = DEFAULT_ALGORITHM) -> str:
    return hasher(algorithm)(data).hexdigest()
