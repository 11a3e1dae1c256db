"""Deterministic transaction logic: RBAC, signature checks, claim lifecycle.

Every operation runs against an isolated world-state snapshot through a
TxContext that records the read set (including misses) and buffers writes,
so the peer can capture both for endorsement and MVCC validation.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional, Protocol

from .model import (
    ALLOWED_CLAIM_TRANSITIONS,
    TERMINAL_CLAIM_STATES,
    ClaimState,
    DamageClaim,
    DidDocument,
    EntityType,
    InsuranceContract,
    InvalidFieldError,
    Signature,
    validate_did,
    validate_rfc3339,
)

Version = tuple[int, int]  # (blockNum, txIdx)


class ChainError(str, Enum):
    AUTH_DENIED = "AUTH_DENIED"
    SIG_INVALID = "SIG_INVALID"
    NOT_FOUND = "NOT_FOUND"
    ALREADY_EXISTS = "ALREADY_EXISTS"
    INVALID_TRANSITION = "INVALID_TRANSITION"
    INVALID_FIELD = "INVALID_FIELD"
    CONTRACT_NOT_VALID = "CONTRACT_NOT_VALID"


class ChaincodeError(Exception):
    def __init__(self, code: ChainError, message: str = ""):
        super().__init__(f"{code.value}: {message}" if message else code.value)
        self.code = code
        self.message = message


class Snapshot(Protocol):
    def get(self, key: str) -> Optional[tuple[Any, Version]]: ...

    def scan(self, prefix: str) -> list[tuple[str, Any, Version]]: ...


# Role gate per operation, before any object-level check. Higher Authority
# only manages identities; auditors read assigned claims; clients and
# insurance companies act on their own contracts and claims.
ROLE_PERMISSIONS: dict[str, frozenset[EntityType]] = {
    "createDidDocument": frozenset({EntityType.HIGHER_AUTHORITY, EntityType.INSURANCE_COMPANY}),
    "getDidDocument": frozenset(EntityType),
    "createInsuranceContract": frozenset({EntityType.INSURANCE_COMPANY}),
    "updateInsuranceContract": frozenset({EntityType.INSURANCE_COMPANY}),
    "updateClientSignature": frozenset({EntityType.CLIENT}),
    "getContracts": frozenset({EntityType.INSURANCE_COMPANY, EntityType.CLIENT}),
    "createClaim": frozenset({EntityType.INSURANCE_COMPANY, EntityType.CLIENT}),
    "updateClaimState": frozenset({EntityType.INSURANCE_COMPANY, EntityType.CLIENT}),
    "assignAuditor": frozenset({EntityType.INSURANCE_COMPANY}),
    "getClaims": frozenset(
        {EntityType.INSURANCE_COMPANY, EntityType.CLIENT, EntityType.AUDITOR}
    ),
}

# Which document types each creator role may register.
CREATABLE_ENTITY_TYPES: dict[EntityType, frozenset[EntityType]] = {
    EntityType.HIGHER_AUTHORITY: frozenset({EntityType.INSURANCE_COMPANY}),
    EntityType.INSURANCE_COMPANY: frozenset({EntityType.CLIENT, EntityType.AUDITOR}),
}


def did_key(did: str) -> str:
    return f"did/{did}"


def contract_key(contract_id: str) -> str:
    return f"contract/{contract_id}"


def claim_key(claim_id: str) -> str:
    return f"claim/{claim_id}"


def contract_index_key(did: str, contract_id: str) -> str:
    return f"cidx/{did}/{contract_id}"


def claim_index_key(contract_id: str, claim_id: str) -> str:
    return f"klidx/{contract_id}/{claim_id}"


def auditor_index_key(auditor_did: str, claim_id: str) -> str:
    return f"aidx/{auditor_did}/{claim_id}"


@dataclass
class TxContext:
    issuer_id: str
    issuer_entity_type: EntityType
    issuer_did: str
    snapshot: Snapshot
    read_set: list[tuple[str, Optional[Version]]] = field(default_factory=list)
    write_set: list[tuple[str, Optional[Any]]] = field(default_factory=list)
    _writes: dict[str, Optional[Any]] = field(default_factory=dict)

    def get(self, key: str) -> Optional[Any]:
        if key in self._writes:
            return self._writes[key]
        found = self.snapshot.get(key)
        self.read_set.append((key, found[1] if found else None))
        return found[0] if found else None

    def scan(self, prefix: str) -> list[tuple[str, Any]]:
        out = []
        for key, value, version in self.snapshot.scan(prefix):
            if key in self._writes:
                continue
            self.read_set.append((key, version))
            out.append((key, value))
        for key, value in sorted(self._writes.items()):
            if key.startswith(prefix) and value is not None:
                out.append((key, value))
        return out

    def put(self, key: str, value: Any) -> None:
        self.write_set.append((key, value))
        self._writes[key] = value

    def delete(self, key: str) -> None:
        self.write_set.append((key, None))
        self._writes[key] = None


def _require_role(ctx: TxContext, operation: str) -> None:
    if ctx.issuer_entity_type not in ROLE_PERMISSIONS[operation]:
        raise ChaincodeError(
            ChainError.AUTH_DENIED,
            f"{ctx.issuer_entity_type.value} may not invoke {operation}",
        )


def _load_did_document(ctx: TxContext, did: str) -> DidDocument:
    wire = ctx.get(did_key(did))
    if wire is None:
        raise ChaincodeError(ChainError.NOT_FOUND, f"unknown DID {did}")
    return DidDocument.from_wire(wire)


def _load_contract(ctx: TxContext, contract_id: str) -> InsuranceContract:
    wire = ctx.get(contract_key(contract_id))
    if wire is None:
        raise ChaincodeError(ChainError.NOT_FOUND, f"unknown contract {contract_id}")
    return InsuranceContract.from_wire(wire)


def _load_claim(ctx: TxContext, claim_id: str) -> DamageClaim:
    wire = ctx.get(claim_key(claim_id))
    if wire is None:
        raise ChaincodeError(ChainError.NOT_FOUND, f"unknown claim {claim_id}")
    return DamageClaim.from_wire(wire)


def contract_is_valid(ctx: TxContext, contract: InsuranceContract) -> bool:
    """Both signatures present and verifying over the current payload."""
    if contract.insuranceCompanySignature is None or contract.clientSignature is None:
        return False
    payload = contract.signing_payload()
    company = _load_did_document(ctx, contract.insuranceCompanyDid)
    client = _load_did_document(ctx, contract.clientDid)
    return company.key.verify(payload, contract.insuranceCompanySignature) and client.key.verify(
        payload, contract.clientSignature
    )


def create_did_document(ctx: TxContext, doc_wire: dict) -> dict:
    _require_role(ctx, "createDidDocument")
    try:
        doc = DidDocument.from_wire(doc_wire)
    except (InvalidFieldError, KeyError, ValueError) as exc:
        raise ChaincodeError(ChainError.INVALID_FIELD, str(exc)) from exc
    allowed = CREATABLE_ENTITY_TYPES.get(ctx.issuer_entity_type, frozenset())
    if doc.entityType not in allowed:
        raise ChaincodeError(
            ChainError.AUTH_DENIED,
            f"{ctx.issuer_entity_type.value} may not create {doc.entityType.value}",
        )
    issuer_doc = _load_did_document(ctx, ctx.issuer_did)
    if doc.authoritySignature is None or not issuer_doc.key.verify(
        doc.signing_payload(), doc.authoritySignature
    ):
        raise ChaincodeError(ChainError.SIG_INVALID, "authority signature does not verify")
    if ctx.get(did_key(doc.did)) is not None:
        raise ChaincodeError(ChainError.ALREADY_EXISTS, doc.did)
    ctx.put(did_key(doc.did), doc.to_wire())
    return doc.to_wire()


def get_did_document(ctx: TxContext, did: str) -> dict:
    _require_role(ctx, "getDidDocument")
    return _load_did_document(ctx, did).to_wire()


def create_insurance_contract(ctx: TxContext, contract_wire: dict) -> dict:
    _require_role(ctx, "createInsuranceContract")
    try:
        contract = InsuranceContract.from_wire(contract_wire)
    except (InvalidFieldError, KeyError, ValueError) as exc:
        raise ChaincodeError(ChainError.INVALID_FIELD, str(exc)) from exc
    if contract.insuranceCompanyDid != ctx.issuer_did:
        raise ChaincodeError(ChainError.AUTH_DENIED, "issuer is not the contract's company")
    client_doc = _load_did_document(ctx, contract.clientDid)
    if client_doc.entityType is not EntityType.CLIENT:
        raise ChaincodeError(ChainError.INVALID_FIELD, "clientDid is not a CLIENT")
    # Stored without a client signature: the contract starts NOT VALID.
    contract = replace(contract, clientSignature=None)
    company_doc = _load_did_document(ctx, contract.insuranceCompanyDid)
    if contract.insuranceCompanySignature is None or not company_doc.key.verify(
        contract.signing_payload(), contract.insuranceCompanySignature
    ):
        raise ChaincodeError(ChainError.SIG_INVALID, "company signature does not verify")
    if ctx.get(contract_key(contract.contractId)) is not None:
        raise ChaincodeError(ChainError.ALREADY_EXISTS, contract.contractId)
    ctx.put(contract_key(contract.contractId), contract.to_wire())
    ctx.put(contract_index_key(contract.insuranceCompanyDid, contract.contractId), "")
    ctx.put(contract_index_key(contract.clientDid, contract.contractId), "")
    return contract.to_wire()


def update_insurance_contract(ctx: TxContext, args: dict) -> dict:
    _require_role(ctx, "updateInsuranceContract")
    allowed_keys = {"contractId", "ipfsHash", "dateTime", "insuranceCompanySignature"}
    extra = set(args) - allowed_keys
    if extra:
        raise ChaincodeError(
            ChainError.INVALID_FIELD, f"only ipfsHash/dateTime may change, got {sorted(extra)}"
        )
    contract = _load_contract(ctx, args["contractId"])
    if contract.insuranceCompanyDid != ctx.issuer_did:
        raise ChaincodeError(ChainError.AUTH_DENIED, "issuer is not the contract's company")
    try:
        validate_rfc3339(args["dateTime"])
    except InvalidFieldError as exc:
        raise ChaincodeError(ChainError.INVALID_FIELD, str(exc)) from exc
    updated = contract.with_update(args["ipfsHash"], args["dateTime"])
    sig = Signature.from_wire(args["insuranceCompanySignature"])
    company_doc = _load_did_document(ctx, contract.insuranceCompanyDid)
    if not company_doc.key.verify(updated.signing_payload(), sig):
        raise ChaincodeError(ChainError.SIG_INVALID, "company signature does not verify")
    updated = replace(updated, insuranceCompanySignature=sig)
    ctx.put(contract_key(updated.contractId), updated.to_wire())
    return updated.to_wire()


def update_client_signature(ctx: TxContext, args: dict) -> dict:
    _require_role(ctx, "updateClientSignature")
    contract = _load_contract(ctx, args["contractId"])
    if contract.clientDid != ctx.issuer_did:
        raise ChaincodeError(ChainError.AUTH_DENIED, "issuer is not the contract's client")
    sig = Signature.from_wire(args["clientSignature"])
    client_doc = _load_did_document(ctx, contract.clientDid)
    if not client_doc.key.verify(contract.signing_payload(), sig):
        raise ChaincodeError(ChainError.SIG_INVALID, "client signature does not verify")
    updated = replace(contract, clientSignature=sig)
    ctx.put(contract_key(updated.contractId), updated.to_wire())
    return updated.to_wire()


def get_contracts(ctx: TxContext, did: str) -> list[dict]:
    _require_role(ctx, "getContracts")
    try:
        validate_did(did)
    except InvalidFieldError as exc:
        raise ChaincodeError(ChainError.INVALID_FIELD, str(exc)) from exc
    if did != ctx.issuer_did:
        raise ChaincodeError(ChainError.AUTH_DENIED, "may only list own contracts")
    contracts = []
    for key, _ in ctx.scan(f"cidx/{did}/"):
        contract_id = key.rsplit("/", 1)[1]
        contracts.append(ctx.get(contract_key(contract_id)))
    return contracts


def create_claim(ctx: TxContext, claim_wire: dict) -> dict:
    _require_role(ctx, "createClaim")
    try:
        claim = DamageClaim.from_wire(claim_wire)
    except (InvalidFieldError, KeyError, ValueError) as exc:
        raise ChaincodeError(ChainError.INVALID_FIELD, str(exc)) from exc
    contract = _load_contract(ctx, claim.contractId)
    if ctx.issuer_did not in (contract.insuranceCompanyDid, contract.clientDid):
        raise ChaincodeError(ChainError.AUTH_DENIED, "issuer is not a party to the contract")
    if not contract_is_valid(ctx, contract):
        raise ChaincodeError(ChainError.CONTRACT_NOT_VALID, claim.contractId)
    if ctx.get(claim_key(claim.claimId)) is not None:
        raise ChaincodeError(ChainError.ALREADY_EXISTS, claim.claimId)
    # Initial state and auditor are chaincode-controlled, whatever was sent;
    # the issuer signs the claim exactly as it will be stored.
    claim = replace(
        claim,
        claimState=ClaimState.PRESENTED,
        auditorDid=None,
        lastSignerDid=ctx.issuer_did,
    )
    signer_doc = _load_did_document(ctx, ctx.issuer_did)
    if claim.contentsSignature is None or not signer_doc.key.verify(
        claim.signing_payload(), claim.contentsSignature
    ):
        raise ChaincodeError(ChainError.SIG_INVALID, "contents signature does not verify")
    ctx.put(claim_key(claim.claimId), claim.to_wire())
    ctx.put(claim_index_key(claim.contractId, claim.claimId), "")
    return claim.to_wire()


def update_claim_state(ctx: TxContext, args: dict) -> dict:
    _require_role(ctx, "updateClaimState")
    claim = _load_claim(ctx, args["claimId"])
    contract = _load_contract(ctx, claim.contractId)
    if ctx.issuer_did not in (contract.insuranceCompanyDid, contract.clientDid):
        raise ChaincodeError(ChainError.AUTH_DENIED, "issuer is not a party to the contract")
    try:
        new_state = ClaimState(args["claimState"])
        validate_rfc3339(args["dateTime"])
    except (InvalidFieldError, ValueError) as exc:
        raise ChaincodeError(ChainError.INVALID_FIELD, str(exc)) from exc
    if (claim.claimState, new_state) not in ALLOWED_CLAIM_TRANSITIONS:
        raise ChaincodeError(
            ChainError.INVALID_TRANSITION,
            f"{claim.claimState.value} -> {new_state.value}",
        )
    updated = replace(
        claim,
        claimState=new_state,
        dateTime=args["dateTime"],
        lastSignerDid=ctx.issuer_did,
        contentsSignature=None,
    )
    sig = Signature.from_wire(args["contentsSignature"])
    signer_doc = _load_did_document(ctx, ctx.issuer_did)
    if not signer_doc.key.verify(updated.signing_payload(), sig):
        raise ChaincodeError(ChainError.SIG_INVALID, "contents signature does not verify")
    updated = replace(updated, contentsSignature=sig)
    ctx.put(claim_key(updated.claimId), updated.to_wire())
    return updated.to_wire()


def assign_auditor(ctx: TxContext, args: dict) -> dict:
    _require_role(ctx, "assignAuditor")
    claim = _load_claim(ctx, args["claimId"])
    contract = _load_contract(ctx, claim.contractId)
    if contract.insuranceCompanyDid != ctx.issuer_did:
        raise ChaincodeError(ChainError.AUTH_DENIED, "issuer is not the contract's company")
    if claim.claimState in TERMINAL_CLAIM_STATES:
        raise ChaincodeError(ChainError.INVALID_TRANSITION, "claim is terminal")
    auditor_doc = _load_did_document(ctx, args["auditorDid"])
    if auditor_doc.entityType is not EntityType.AUDITOR:
        raise ChaincodeError(ChainError.INVALID_FIELD, "target DID is not an AUDITOR")
    try:
        validate_rfc3339(args["dateTime"])
    except InvalidFieldError as exc:
        raise ChaincodeError(ChainError.INVALID_FIELD, str(exc)) from exc
    updated = replace(
        claim,
        auditorDid=args["auditorDid"],
        dateTime=args["dateTime"],
        lastSignerDid=ctx.issuer_did,
        contentsSignature=None,
    )
    sig = Signature.from_wire(args["contentsSignature"])
    signer_doc = _load_did_document(ctx, ctx.issuer_did)
    if not signer_doc.key.verify(updated.signing_payload(), sig):
        raise ChaincodeError(ChainError.SIG_INVALID, "contents signature does not verify")
    updated = replace(updated, contentsSignature=sig)
    if claim.auditorDid is not None and claim.auditorDid != updated.auditorDid:
        ctx.delete(auditor_index_key(claim.auditorDid, claim.claimId))
    ctx.put(claim_key(updated.claimId), updated.to_wire())
    ctx.put(auditor_index_key(updated.auditorDid, updated.claimId), "")
    return updated.to_wire()


def get_claims(ctx: TxContext, selector: str) -> list[dict]:
    _require_role(ctx, "getClaims")
    if _looks_like_uuid(selector):
        claim = _load_claim(ctx, selector)
        contract = _load_contract(ctx, claim.contractId)
        if ctx.issuer_did in (contract.insuranceCompanyDid, contract.clientDid):
            return [claim.to_wire()]
        if (
            ctx.issuer_entity_type is EntityType.AUDITOR
            and claim.auditorDid == ctx.issuer_did
        ):
            return [claim.to_wire()]
        raise ChaincodeError(ChainError.AUTH_DENIED, "claim not visible to issuer")
    try:
        validate_did(selector)
    except InvalidFieldError as exc:
        raise ChaincodeError(ChainError.INVALID_FIELD, str(exc)) from exc
    if selector != ctx.issuer_did:
        raise ChaincodeError(ChainError.AUTH_DENIED, "may only list own claims")
    claims = []
    if ctx.issuer_entity_type is EntityType.AUDITOR:
        for key, _ in ctx.scan(f"aidx/{selector}/"):
            claims.append(ctx.get(claim_key(key.rsplit("/", 1)[1])))
        return claims
    for ckey, _ in ctx.scan(f"cidx/{selector}/"):
        contract_id = ckey.rsplit("/", 1)[1]
        for kkey, _ in ctx.scan(f"klidx/{contract_id}/"):
            claims.append(ctx.get(claim_key(kkey.rsplit("/", 1)[1])))
    return claims


def _looks_like_uuid(value: str) -> bool:
    try:
        uuid.UUID(value)
        return True
    except (ValueError, AttributeError, TypeError):
        return False


OPERATIONS = {
    "createDidDocument": lambda ctx, args: create_did_document(ctx, args["document"]),
    "getDidDocument": lambda ctx, args: get_did_document(ctx, args["did"]),
    "createInsuranceContract": lambda ctx, args: create_insurance_contract(
        ctx, args["contract"]
    ),
    "updateInsuranceContract": lambda ctx, args: update_insurance_contract(ctx, args),
    "updateClientSignature": lambda ctx, args: update_client_signature(ctx, args),
    "getContracts": lambda ctx, args: get_contracts(ctx, args["did"]),
    "createClaim": lambda ctx, args: create_claim(ctx, args["claim"]),
    "updateClaimState": lambda ctx, args: update_claim_state(ctx, args),
    "assignAuditor": lambda ctx, args: assign_auditor(ctx, args),
    "getClaims": lambda ctx, args: get_claims(ctx, args["selector"]),
}

READ_ONLY_OPERATIONS = frozenset({"getDidDocument", "getContracts", "getClaims"})


def invoke(ctx: TxContext, operation: str, args: dict) -> Any:
    if operation not in OPERATIONS:
        raise ChaincodeError(ChainError.INVALID_FIELD, f"unknown operation {operation}")
    return OPERATIONS[operation](ctx, args)
