"""Canonical byte serialization used for every signature in the system.

All signing payloads are the UTF-8 bytes of a canonical JSON rendering:
map keys sorted by code point, no insignificant whitespace, minimal string
escaping, excluded fields omitted entirely. Equal object trees (up to map
key order) always produce identical bytes.
"""
from __future__ import annotations

import json
from typing import Any, Iterable


class CanonicalizationError(ValueError):
    """Raised when an object cannot be rendered canonically (UNSERIALIZABLE)."""


def canonical_bytes(obj: Any, excluded_fields: Iterable[str] = ()) -> bytes:
    """Render ``obj`` as canonical UTF-8 JSON bytes.

    ``excluded_fields`` names top-level map keys that are omitted from the
    rendering (not emitted as null). Values must be trees of strings,
    integers, floats, booleans, None, lists and dicts; non-finite numbers
    and raw bytes are rejected.
    """
    excluded = set(excluded_fields)
    if isinstance(obj, dict):
        obj = {k: v for k, v in obj.items() if k not in excluded}
    elif excluded:
        raise CanonicalizationError("field exclusion requires a map at the top level")
    _check_tree(obj)
    try:
        text = json.dumps(
            obj,
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
            allow_nan=False,
        )
    except (TypeError, ValueError) as exc:
        raise CanonicalizationError(str(exc)) from exc
    return text.encode("utf-8")


def _check_tree(obj: Any) -> None:
    if obj is None or isinstance(obj, (str, bool, int)):
        return
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            raise CanonicalizationError("non-finite number")
        return
    if isinstance(obj, (bytes, bytearray)):
        raise CanonicalizationError("binary field without a declared text encoding")
    if isinstance(obj, (list, tuple)):
        for item in obj:
            _check_tree(item)
        return
    if isinstance(obj, dict):
        for key, value in obj.items():
            if not isinstance(key, str):
                raise CanonicalizationError("map keys must be strings")
            _check_tree(value)
        return
    raise CanonicalizationError(f"unserializable value of type {type(obj).__name__}")
