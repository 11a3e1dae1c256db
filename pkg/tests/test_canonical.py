"""Canonical serialization against an independently written oracle.

The oracle builds the canonical rendering by hand (recursive descent with
explicit escaping rules) without touching json.dumps, so agreement between
the two is meaningful evidence rather than self-confirmation.
"""
from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insureledger.canonical import CanonicalizationError, canonical_bytes

# ------------------------------------------------------------------ the oracle

_ESCAPES = {
    '"': '\\"',
    "\\": "\\\\",
    "\b": "\\b",
    "\f": "\\f",
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}


def _oracle_string(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _oracle_render(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return repr(obj) if obj == obj and math.isfinite(obj) else "?"
    if isinstance(obj, str):
        return _oracle_string(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_oracle_render(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ",".join(f"{_oracle_string(k)}:{_oracle_render(v)}" for k, v in items) + "}"
    raise TypeError(type(obj))


def oracle_bytes(obj, excluded=()) -> bytes:
    if isinstance(obj, dict):
        obj = {k: v for k, v in obj.items() if k not in set(excluded)}
    return _oracle_render(obj).encode("utf-8")


# ------------------------------------------------------------------ strategies

json_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**53), max_value=2**53)
    | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=20),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=10), children, max_size=4),
    max_leaves=25,
)


# ----------------------------------------------------------------------- tests

def test_fixed_vectors():
    assert canonical_bytes({"b": 1, "a": 2}) == b'{"a":2,"b":1}'
    assert canonical_bytes([1, "x", None, True]) == b'[1,"x",null,true]'
    assert canonical_bytes({}) == b"{}"
    assert canonical_bytes("café") == 'café'.encode("utf-8").join([b'"', b'"'])
    assert canonical_bytes({"k": "line\nbreak"}) == b'{"k":"line\\nbreak"}'


def test_key_order_is_code_point_order():
    obj = {"Z": 1, "a": 2, "0": 3, "é": 4}
    assert canonical_bytes(obj) == oracle_bytes(obj)
    assert canonical_bytes(obj).index(b"Z") < canonical_bytes(obj).index(b"a")


def test_exclusions_only_top_level():
    obj = {"sig": 1, "body": {"sig": 2}}
    assert canonical_bytes(obj, {"sig"}) == b'{"body":{"sig":2}}'


def test_exclusion_on_non_map_rejected():
    with pytest.raises(CanonicalizationError):
        canonical_bytes([1, 2], {"sig"})


@pytest.mark.parametrize(
    "bad",
    [b"raw", float("nan"), float("inf"), float("-inf"), {1: "x"}, {"k": object()}, {"k": {"j": b""}}],
)
def test_unserializable_rejected(bad):
    with pytest.raises(CanonicalizationError):
        canonical_bytes(bad)


@settings(max_examples=300)
@given(json_values)
def test_matches_oracle(obj):
    assert canonical_bytes(obj) == oracle_bytes(obj)


@settings(max_examples=200)
@given(st.dictionaries(st.text(max_size=10), json_values, max_size=5))
def test_key_order_invariance(obj):
    reordered = dict(reversed(list(obj.items())))
    assert canonical_bytes(obj) == canonical_bytes(reordered)


@settings(max_examples=200)
@given(json_values)
def test_round_trip(obj):
    rendered = canonical_bytes(obj)
    assert json.loads(rendered.decode("utf-8")) == obj


@settings(max_examples=200)
@given(st.dictionaries(st.text(max_size=8), json_values, max_size=5), st.sets(st.text(max_size=8), max_size=3))
def test_exclusions_match_oracle(obj, excluded):
    assert canonical_bytes(obj, excluded) == oracle_bytes(obj, excluded)
