"""Hash-chained block structures, proposal envelopes, and on-disk stores.

Blocks link through the SHA-256 of the previous header; the world state is
an in-memory map backed by an append-only commit log, and the block store
is one file of length-prefixed records per run.
"""
from __future__ import annotations

import hashlib
import json
import struct
import threading
from pathlib import Path
from typing import Any, Optional

from .canonical import canonical_bytes

Version = tuple[int, int]

GENESIS_PREV_HASH = "0" * 64

# Per-tx commit metadata codes.
VALID = "VALID"
MVCC_CONFLICT = "MVCC_CONFLICT"
INVALID_ENDORSEMENT = "INVALID_ENDORSEMENT"
BAD_SIGNATURE = "BAD_SIGNATURE"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def proposal_digest(proposal: dict) -> str:
    return sha256_hex(canonical_bytes(proposal))


def envelope_tx_id(envelope: dict) -> str:
    return proposal_digest(envelope["proposal"])


def data_hash(envelopes: list[dict]) -> str:
    return sha256_hex(b"".join(canonical_bytes(env) for env in envelopes))


def block_header_hash(block: dict) -> str:
    header = {
        "number": block["number"],
        "prevHash": block["prevHash"],
        "dataHash": block["dataHash"],
    }
    return sha256_hex(canonical_bytes(header))


def make_block(number: int, prev_hash: str, envelopes: list[dict]) -> dict:
    return {
        "number": number,
        "prevHash": prev_hash,
        "dataHash": data_hash(envelopes),
        "txs": envelopes,
    }


def make_genesis_block(config: dict) -> dict:
    """Block 0 carries the network config: CA root, seeded authority DID
    document, endorsement policy, and node addresses."""
    return {
        "number": 0,
        "prevHash": GENESIS_PREV_HASH,
        "dataHash": sha256_hex(canonical_bytes(config)),
        "txs": [],
        "config": config,
    }


def request_auth_payload(operation: str, args: Any, nonce: str) -> bytes:
    """The one payload a client signs per request: binds the operation name,
    the digest of its canonical arguments, and a fresh nonce."""
    return canonical_bytes(
        {
            "argsSha256": sha256_hex(canonical_bytes(args)),
            "nonce": nonce,
            "operation": operation,
        }
    )


class WorldState:
    """Versioned key-value view of all VALID committed writes.

    Thread-safe; optionally persists every applied write to an append-only
    log so the map can be rebuilt after a restart.
    """

    def __init__(self, log_path: Optional[Path] = None):
        self._data: dict[str, tuple[Any, Version]] = {}
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        self._log_file = None
        if self._log_path is not None:
            if self._log_path.exists():
                self._replay_log()
            self._log_file = self._log_path.open("a", encoding="utf-8")

    def _replay_log(self) -> None:
        with self._log_path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec["value"] is None:
                    self._data.pop(rec["key"], None)
                else:
                    self._data[rec["key"]] = (rec["value"], tuple(rec["version"]))

    def get(self, key: str) -> Optional[tuple[Any, Version]]:
        with self._lock:
            return self._data.get(key)

    def scan(self, prefix: str) -> list[tuple[str, Any, Version]]:
        with self._lock:
            return [
                (key, value, version)
                for key, (value, version) in sorted(self._data.items())
                if key.startswith(prefix)
            ]

    def apply(self, key: str, value: Optional[Any], version: Version) -> None:
        with self._lock:
            if value is None:
                self._data.pop(key, None)
            else:
                self._data[key] = (value, version)
            if self._log_file is not None:
                self._log_file.write(
                    json.dumps({"key": key, "value": value, "version": list(version)}) + "\n"
                )
                self._log_file.flush()

    def state_hash(self) -> str:
        """Digest of the full (key, value, version) map; used to compare peers."""
        with self._lock:
            snapshot = [
                {"key": k, "value": v, "version": list(ver)}
                for k, (v, ver) in sorted(self._data.items())
            ]
        return sha256_hex(canonical_bytes(snapshot))

    def close(self) -> None:
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None


class BlockStore:
    """Committed blocks plus per-tx validation codes, in commit order."""

    def __init__(self, path: Optional[Path] = None):
        self._records: list[dict] = []
        self._lock = threading.RLock()
        self._path = Path(path) if path else None
        self._file = None
        if self._path is not None:
            if self._path.exists():
                self._replay()
            self._file = self._path.open("ab")

    def _replay(self) -> None:
        with self._path.open("rb") as fh:
            while True:
                header = fh.read(4)
                if len(header) < 4:
                    break
                (length,) = struct.unpack(">I", header)
                payload = fh.read(length)
                if len(payload) < length:
                    break  # truncated trailing record from a crash
                self._records.append(json.loads(payload.decode("utf-8")))

    def append(self, block: dict, codes: list[str]) -> None:
        record = {"block": block, "codes": codes}
        with self._lock:
            self._records.append(record)
            if self._file is not None:
                payload = json.dumps(record).encode("utf-8")
                self._file.write(struct.pack(">I", len(payload)) + payload)
                self._file.flush()

    def get(self, number: int) -> Optional[dict]:
        with self._lock:
            if 0 <= number < len(self._records):
                return self._records[number]
            return None

    @property
    def height(self) -> int:
        with self._lock:
            return len(self._records)

    def tip_hash(self) -> str:
        with self._lock:
            if not self._records:
                return GENESIS_PREV_HASH
            return block_header_hash(self._records[-1]["block"])

    def chain_hash(self) -> str:
        """Digest over all committed headers and codes; equal across peers
        that delivered the same blocks with the same validation outcomes."""
        with self._lock:
            parts = [
                {"hash": block_header_hash(rec["block"]), "codes": rec["codes"]}
                for rec in self._records
            ]
        return sha256_hex(canonical_bytes(parts))

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None
