"""Shared fixtures. RSA key generation dominates test runtime, so a small
session-scoped key pool is reused everywhere key *material* (not identity)
is what matters.
"""
from __future__ import annotations

import pytest

from insureledger import crypto


@pytest.fixture(scope="session")
def key_pool():
    """Eight distinct 2048-bit keys, generated once per session."""
    return [crypto.generate_private_key() for _ in range(8)]


@pytest.fixture(scope="session")
def key_a(key_pool):
    return key_pool[0]


@pytest.fixture(scope="session")
def key_b(key_pool):
    return key_pool[1]


@pytest.fixture(scope="session")
def key_c(key_pool):
    return key_pool[2]
