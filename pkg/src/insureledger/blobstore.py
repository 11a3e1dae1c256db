"""Content-addressed store for property imagery: deterministic CIDs,
directory manifests, pinning, and garbage collection.

CIDs are ``b256:<64 hex>`` over raw blob bytes, or over the canonical
manifest bytes for a directory. The on-disk layout is one file per CID
under a two-level hex fan-out; the pin set is a line-oriented text file.
"""
from __future__ import annotations

import hashlib
import re
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Union

CID_PATTERN = re.compile(r"^b256:[0-9a-f]{64}$")
DEFAULT_MAX_BLOB_BYTES = 32 * 1024 * 1024


class BlobErrorCode(str, Enum):
    TOO_LARGE = "TOO_LARGE"
    NOT_FOUND = "NOT_FOUND"
    CORRUPT = "CORRUPT"
    MISSING_CHILD = "MISSING_CHILD"
    BAD_NAME = "BAD_NAME"
    BAD_CID = "BAD_CID"


class BlobError(Exception):
    def __init__(self, code: BlobErrorCode, message: str = ""):
        super().__init__(f"{code.value}: {message}" if message else code.value)
        self.code = code


def cid_of(data: bytes) -> str:
    return "b256:" + hashlib.sha256(data).hexdigest()


def validate_cid(cid: str) -> str:
    if not isinstance(cid, str) or not CID_PATTERN.match(cid):
        raise BlobError(BlobErrorCode.BAD_CID, repr(cid))
    return cid


@dataclass(frozen=True)
class DirectoryManifest:
    entries: tuple[tuple[str, str], ...]  # (name, cid), sorted bytewise by name

    def to_bytes(self) -> bytes:
        return b"".join(
            name.encode("utf-8") + b"\0" + cid.encode("ascii") + b"\n"
            for name, cid in self.entries
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "DirectoryManifest":
        entries = []
        for line in raw.split(b"\n"):
            if not line:
                continue
            name, _, cid = line.partition(b"\0")
            entries.append((name.decode("utf-8"), cid.decode("ascii")))
        return cls(entries=tuple(entries))

    @classmethod
    def build(cls, entries: Iterable[tuple[str, str]]) -> "DirectoryManifest":
        seen = set()
        for name, cid in entries:
            if not name or "/" in name or "\0" in name:
                raise BlobError(BlobErrorCode.BAD_NAME, repr(name))
            if name in seen:
                raise BlobError(BlobErrorCode.BAD_NAME, f"duplicate name {name!r}")
            seen.add(name)
            validate_cid(cid)
        ordered = tuple(sorted(entries, key=lambda e: e[0].encode("utf-8")))
        return cls(entries=ordered)


class BlobStore:
    def __init__(self, root: str | Path, max_blob_bytes: int = DEFAULT_MAX_BLOB_BYTES):
        self.root = Path(root)
        self.max_blob_bytes = max_blob_bytes
        self._objects = self.root / "objects"
        self._objects.mkdir(parents=True, exist_ok=True)
        self._pins_path = self.root / "pins.txt"
        self._dirs_path = self.root / "dirs.txt"
        self._lock = threading.RLock()
        self._pins: set[str] = self._load_lines(self._pins_path)
        self._dirs: set[str] = self._load_lines(self._dirs_path)

    @staticmethod
    def _load_lines(path: Path) -> set[str]:
        if not path.exists():
            return set()
        return {line.strip() for line in path.read_text().splitlines() if line.strip()}

    def _save_lines(self, path: Path, values: set[str]) -> None:
        path.write_text("".join(v + "\n" for v in sorted(values)))

    def _object_path(self, cid: str) -> Path:
        digest = cid.split(":", 1)[1]
        return self._objects / digest[:2] / digest[2:4] / digest

    def _store(self, cid: str, data: bytes) -> None:
        path = self._object_path(cid)
        if path.exists():
            return  # identical content: deduplicated
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(data)
        tmp.rename(path)

    # --------------------------------------------------------------- writes

    def put_blob(self, data: bytes) -> str:
        if len(data) > self.max_blob_bytes:
            raise BlobError(
                BlobErrorCode.TOO_LARGE, f"{len(data)} > {self.max_blob_bytes} bytes"
            )
        cid = cid_of(data)
        with self._lock:
            self._store(cid, data)
        return cid

    def put_directory(self, entries: Iterable[tuple[str, str]]) -> str:
        manifest = DirectoryManifest.build(entries)
        with self._lock:
            for name, child in manifest.entries:
                if not self._object_path(child).exists():
                    raise BlobError(BlobErrorCode.MISSING_CHILD, f"{name} -> {child}")
            raw = manifest.to_bytes()
            cid = cid_of(raw)
            self._store(cid, raw)
            self._dirs.add(cid)
            self._save_lines(self._dirs_path, self._dirs)
        return cid

    # ---------------------------------------------------------------- reads

    def get(self, cid: str) -> Union[bytes, DirectoryManifest]:
        validate_cid(cid)
        with self._lock:
            path = self._object_path(cid)
            if not path.exists():
                raise BlobError(BlobErrorCode.NOT_FOUND, cid)
            data = path.read_bytes()
            if cid_of(data) != cid:
                raise BlobError(BlobErrorCode.CORRUPT, cid)
            if cid in self._dirs:
                return DirectoryManifest.from_bytes(data)
            return data

    def has(self, cid: str) -> bool:
        return self._object_path(cid).exists()

    # ----------------------------------------------------------------- pins

    def pin(self, cid: str) -> None:
        validate_cid(cid)
        with self._lock:
            if not self._object_path(cid).exists():
                raise BlobError(BlobErrorCode.NOT_FOUND, cid)
            self._pins.add(cid)
            self._save_lines(self._pins_path, self._pins)

    def unpin(self, cid: str) -> None:
        validate_cid(cid)
        with self._lock:
            self._pins.discard(cid)
            self._save_lines(self._pins_path, self._pins)

    @property
    def pins(self) -> set[str]:
        with self._lock:
            return set(self._pins)

    # ------------------------------------------------------------------- gc

    def _reachable(self) -> set[str]:
        reachable: set[str] = set()
        frontier = list(self._pins)
        while frontier:
            cid = frontier.pop()
            if cid in reachable:
                continue
            reachable.add(cid)
            if cid in self._dirs and self._object_path(cid).exists():
                manifest = DirectoryManifest.from_bytes(self._object_path(cid).read_bytes())
                frontier.extend(child for _, child in manifest.entries)
        return reachable

    def gc(self) -> list[str]:
        """Remove exactly the contents unreachable from any pin."""
        removed = []
        with self._lock:
            keep = self._reachable()
            for path in sorted(self._objects.glob("*/*/*")):
                cid = "b256:" + path.name
                if cid in keep:
                    continue
                path.unlink()
                self._dirs.discard(cid)
                removed.append(cid)
            self._save_lines(self._dirs_path, self._dirs)
        return removed

    def stored_cids(self) -> set[str]:
        return {"b256:" + path.name for path in self._objects.glob("*/*/*")}
