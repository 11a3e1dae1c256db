"""Test helpers: an in-memory world-state snapshot plus an actor model for
driving chaincode operations directly (no network)."""
from __future__ import annotations

import uuid
from typing import Any, Optional

from insureledger import chaincode, client
from insureledger.chaincode import TxContext
from insureledger.model import ClaimState, EntityType, RsaPublicKey

Version = tuple[int, int]


class MemSnapshot:
    """Dict-backed Snapshot with explicit versions."""

    def __init__(self):
        self.data: dict[str, tuple[Any, Version]] = {}
        self._counter = 0

    def get(self, key: str) -> Optional[tuple[Any, Version]]:
        return self.data.get(key)

    def scan(self, prefix: str) -> list[tuple[str, Any, Version]]:
        return [
            (k, v, ver) for k, (v, ver) in sorted(self.data.items()) if k.startswith(prefix)
        ]

    def apply_writes(self, writes: list[tuple[str, Any]]) -> None:
        self._counter += 1
        for key, value in writes:
            if value is None:
                self.data.pop(key, None)
            else:
                self.data[key] = (value, (self._counter, 0))


class Actor:
    def __init__(self, did: str, entity_type: EntityType, key):
        self.did = did
        self.entity_type = entity_type
        self.key = key
        self.public_key = RsaPublicKey.of_private(key)


class World:
    """A seeded ledger world: HA, one IC, one client, one auditor."""

    def __init__(self, key_pool):
        self.snapshot = MemSnapshot()
        self.ha = Actor("did:insure:authority-00", EntityType.HIGHER_AUTHORITY, key_pool[0])
        self.company = Actor("did:insure:company-000", EntityType.INSURANCE_COMPANY, key_pool[1])
        self.client = Actor("did:insure:client-0000", EntityType.CLIENT, key_pool[2])
        self.auditor = Actor("did:insure:auditor-000", EntityType.AUDITOR, key_pool[3])
        # Seed the authority directly (genesis), then register the rest.
        ha_doc = client.build_did_document(
            self.ha.did, self.ha.public_key, EntityType.HIGHER_AUTHORITY, self.ha.key
        )
        self.snapshot.apply_writes([(chaincode.did_key(self.ha.did), ha_doc)])
        self.invoke_ok(self.ha, "createDidDocument", {"document": self.did_doc(self.company, self.ha)})
        self.invoke_ok(self.company, "createDidDocument", {"document": self.did_doc(self.client, self.company)})
        self.invoke_ok(self.company, "createDidDocument", {"document": self.did_doc(self.auditor, self.company)})

    def did_doc(self, actor: Actor, authority: Actor) -> dict:
        return client.build_did_document(
            actor.did, actor.public_key, actor.entity_type, authority.key
        )

    def ctx(self, actor: Actor) -> TxContext:
        return TxContext(
            issuer_id=actor.did,
            issuer_entity_type=actor.entity_type,
            issuer_did=actor.did,
            snapshot=self.snapshot,
        )

    def invoke(self, actor: Actor, operation: str, args: dict):
        """Execute and commit; returns the operation result."""
        ctx = self.ctx(actor)
        result = chaincode.invoke(ctx, operation, args)
        self.snapshot.apply_writes(ctx.write_set)
        return result

    def invoke_ok(self, actor: Actor, operation: str, args: dict):
        return self.invoke(actor, operation, args)

    # ------------------------------------------------------------- conveniences

    def make_contract(self, signed_by_client: bool = True) -> dict:
        wire = client.build_contract(
            str(uuid.uuid4()),
            self.company.did,
            self.client.did,
            "vc:land:0001",
            "b256:" + "0" * 64,
            self.company.key,
        )
        stored = self.invoke(self.company, "createInsuranceContract", {"contract": wire})
        if signed_by_client:
            sig = client.countersign_contract(stored, self.client.key)
            stored = self.invoke(
                self.client,
                "updateClientSignature",
                {"contractId": stored["contractId"], "clientSignature": sig},
            )
        return stored

    def make_claim(self, contract: Optional[dict] = None, issuer: Optional[Actor] = None) -> dict:
        contract = contract or self.make_contract()
        issuer = issuer or self.client
        wire = client.build_claim(
            str(uuid.uuid4()),
            contract["contractId"],
            "b256:" + "1" * 64,
            issuer.did,
            issuer.key,
        )
        return self.invoke(issuer, "createClaim", {"claim": wire})

    def set_claim_state(self, claim: dict, state: ClaimState, actor: Optional[Actor] = None) -> dict:
        actor = actor or self.company
        fields = client.claim_state_update_fields(claim, state, actor.did, actor.key)
        return self.invoke(actor, "updateClaimState", {"claimId": claim["claimId"], **fields})
