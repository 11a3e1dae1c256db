"""Content-addressed store: CIDs, directory manifests, pinning, and GC
against an independent reachability oracle over randomly generated DAGs."""
from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insureledger.blobstore import (
    BlobError,
    BlobErrorCode,
    BlobStore,
    DirectoryManifest,
    cid_of,
)


@pytest.fixture()
def store(tmp_path):
    return BlobStore(tmp_path / "store")


def test_cid_is_sha256(store):
    import hashlib

    cid = store.put_blob(b"hello")
    assert cid == "b256:" + hashlib.sha256(b"hello").hexdigest()
    assert store.get(cid) == b"hello"


def test_identical_content_deduplicates(store):
    assert store.put_blob(b"same") == store.put_blob(b"same")


def test_too_large_rejected(tmp_path):
    store = BlobStore(tmp_path / "small", max_blob_bytes=4)
    with pytest.raises(BlobError) as err:
        store.put_blob(b"12345")
    assert err.value.code is BlobErrorCode.TOO_LARGE


def test_missing_not_found(store):
    with pytest.raises(BlobError) as err:
        store.get("b256:" + "0" * 64)
    assert err.value.code is BlobErrorCode.NOT_FOUND


def test_corruption_detected(store):
    cid = store.put_blob(b"payload")
    store._object_path(cid).write_bytes(b"tampered")
    with pytest.raises(BlobError) as err:
        store.get(cid)
    assert err.value.code is BlobErrorCode.CORRUPT


def test_bad_cid_rejected(store):
    for bad in ("b256:short", "sha1:" + "0" * 64, "", None):
        with pytest.raises(BlobError):
            store.get(bad)


# ---------------------------------------------------------------- directories

def test_directory_round_trip(store):
    a = store.put_blob(b"A")
    b = store.put_blob(b"B")
    dcid = store.put_directory([("b.jpg", b), ("a.jpg", a)])
    manifest = store.get(dcid)
    assert isinstance(manifest, DirectoryManifest)
    assert manifest.entries == (("a.jpg", a), ("b.jpg", b))  # sorted bytewise


def test_directory_cid_independent_of_entry_order(store):
    a = store.put_blob(b"A")
    b = store.put_blob(b"B")
    assert store.put_directory([("x", a), ("y", b)]) == store.put_directory([("y", b), ("x", a)])


def test_directory_missing_child_rejected(store):
    with pytest.raises(BlobError) as err:
        store.put_directory([("gone", "b256:" + "7" * 64)])
    assert err.value.code is BlobErrorCode.MISSING_CHILD


@pytest.mark.parametrize("name", ["", "a/b", "nul\0name"])
def test_directory_bad_names_rejected(store, name):
    cid = store.put_blob(b"c")
    with pytest.raises(BlobError) as err:
        store.put_directory([(name, cid)])
    assert err.value.code is BlobErrorCode.BAD_NAME


def test_directory_duplicate_name_rejected(store):
    cid = store.put_blob(b"c")
    with pytest.raises(BlobError):
        store.put_directory([("x", cid), ("x", cid)])


def test_manifest_bytes_format():
    cid = cid_of(b"child")
    manifest = DirectoryManifest.build([("img", cid)])
    assert manifest.to_bytes() == b"img\0" + cid.encode() + b"\n"
    assert DirectoryManifest.from_bytes(manifest.to_bytes()) == manifest


# ------------------------------------------------------------------ pins & gc

def test_pin_requires_presence(store):
    with pytest.raises(BlobError):
        store.pin("b256:" + "9" * 64)


def test_gc_transitive_pinning(store):
    a = store.put_blob(b"A")
    b = store.put_blob(b"B")
    loose = store.put_blob(b"loose")
    inner = store.put_directory([("a", a)])
    outer = store.put_directory([("inner", inner), ("b", b)])
    store.pin(outer)
    removed = store.gc()
    assert set(removed) == {loose}
    assert store.stored_cids() == {a, b, inner, outer}
    # Unpinning then collecting removes everything.
    store.unpin(outer)
    store.gc()
    assert store.stored_cids() == set()


def test_pins_survive_reopen(tmp_path):
    store = BlobStore(tmp_path / "p")
    cid = store.put_blob(b"keep")
    store.pin(cid)
    reopened = BlobStore(tmp_path / "p")
    assert cid in reopened.pins
    assert reopened.gc() == []
    assert reopened.get(cid) == b"keep"


# ------------------------------------------- random DAGs vs reachability oracle

def _build_random_dag(store, rng: random.Random):
    """Random blob/directory DAG; returns {cid: children} for the oracle."""
    children_of: dict[str, list[str]] = {}
    blobs = []
    for i in range(rng.randint(1, 8)):
        cid = store.put_blob(rng.randbytes(rng.randint(0, 32)))
        children_of.setdefault(cid, [])
        blobs.append(cid)
    nodes = list(blobs)
    for d in range(rng.randint(0, 5)):
        picks = rng.sample(nodes, rng.randint(1, min(4, len(nodes))))
        entries = [(f"e{j}", c) for j, c in enumerate(picks)]
        cid = store.put_directory(entries)
        children_of[cid] = picks
        nodes.append(cid)
    return children_of


def _oracle_reachable(pins, children_of):
    seen = set()
    frontier = list(pins)
    while frontier:
        cid = frontier.pop()
        if cid in seen:
            continue
        seen.add(cid)
        frontier.extend(children_of.get(cid, []))
    return seen


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_gc_matches_reachability_oracle(tmp_path_factory, seed):
    rng = random.Random(seed)
    store = BlobStore(tmp_path_factory.mktemp("dag"))
    children_of = _build_random_dag(store, rng)
    nodes = list(children_of)
    pins = rng.sample(nodes, rng.randint(0, len(nodes)))
    for cid in pins:
        store.pin(cid)
    expected_keep = _oracle_reachable(pins, children_of)
    removed = store.gc()
    assert store.stored_cids() == expected_keep
    assert set(removed) == set(nodes) - expected_keep
    # Pinned content still reads back intact.
    for cid in pins:
        store.get(cid)
