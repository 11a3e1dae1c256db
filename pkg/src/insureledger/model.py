"""Ledger object types: DID documents, insurance contracts, damage claims.

Each type round-trips to a wire dict with fixed JSON key names; signing
payloads are the canonical bytes of the wire form with the signature
fields excluded.
"""
from __future__ import annotations

import base64
import re
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Optional

from . import crypto
from .canonical import canonical_bytes

DID_PATTERN = re.compile(r"^did:insure:[a-z0-9-]{8,64}$")

DID_DOCUMENT_SIGNING_EXCLUSIONS = frozenset({"authoritySignature"})
CONTRACT_SIGNING_EXCLUSIONS = frozenset({"insuranceCompanySignature", "clientSignature"})
CLAIM_SIGNING_EXCLUSIONS = frozenset({"contentsSignature"})


class InvalidFieldError(ValueError):
    """A field fails its structural invariant."""


def validate_did(value: str) -> str:
    if not isinstance(value, str) or not DID_PATTERN.match(value):
        raise InvalidFieldError(f"malformed DID: {value!r}")
    return value


def validate_rfc3339(value: str) -> str:
    if not isinstance(value, str):
        raise InvalidFieldError("dateTime must be a string")
    try:
        parsed = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError as exc:
        raise InvalidFieldError(f"unparseable dateTime: {value!r}") from exc
    if parsed.tzinfo is None:
        raise InvalidFieldError(f"dateTime missing UTC offset: {value!r}")
    return value


def validate_uuid(value: str, field: str) -> str:
    try:
        uuid.UUID(value, version=4)
    except (ValueError, AttributeError, TypeError) as exc:
        raise InvalidFieldError(f"{field} must be uuid-v4 text: {value!r}") from exc
    return value


def utc_now_rfc3339() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


class EntityType(str, Enum):
    HIGHER_AUTHORITY = "HIGHER_AUTHORITY"
    INSURANCE_COMPANY = "INSURANCE_COMPANY"
    CLIENT = "CLIENT"
    AUDITOR = "AUDITOR"


class ClaimState(str, Enum):
    PRESENTED = "PRESENTED"
    PROCESSING = "PROCESSING"
    HANDLED = "HANDLED"
    CANCELED = "CANCELED"


# Forward progression only; HANDLED and CANCELED are terminal.
ALLOWED_CLAIM_TRANSITIONS = frozenset(
    {
        (ClaimState.PRESENTED, ClaimState.PROCESSING),
        (ClaimState.PROCESSING, ClaimState.HANDLED),
        (ClaimState.PRESENTED, ClaimState.CANCELED),
        (ClaimState.PROCESSING, ClaimState.CANCELED),
    }
)

TERMINAL_CLAIM_STATES = frozenset({ClaimState.HANDLED, ClaimState.CANCELED})


@dataclass(frozen=True)
class RsaPublicKey:
    exponent: int
    modulus: int

    def __post_init__(self) -> None:
        if self.exponent < 3 or self.exponent % 2 == 0:
            raise InvalidFieldError("exponent must be odd and >= 3")
        if self.modulus.bit_length() not in crypto.ALLOWED_MODULUS_BITS:
            raise InvalidFieldError(
                f"modulus bit length {self.modulus.bit_length()} not in "
                f"{crypto.ALLOWED_MODULUS_BITS}"
            )

    def to_wire(self) -> dict:
        return {
            "exponent": crypto.b64url_uint(self.exponent),
            "modulus": crypto.b64url_uint(self.modulus),
        }

    @classmethod
    def from_wire(cls, wire: dict) -> "RsaPublicKey":
        return cls(
            exponent=crypto.uint_from_b64url(wire["exponent"]),
            modulus=crypto.uint_from_b64url(wire["modulus"]),
        )

    @classmethod
    def of_private(cls, private_key) -> "RsaPublicKey":
        e, n = crypto.public_numbers(private_key)
        return cls(exponent=e, modulus=n)

    def verify(self, payload: bytes, sig: "Signature") -> bool:
        if sig is None or sig.algorithm != "RS256":
            return False
        try:
            raw = base64.b64decode(sig.bytes_b64, validate=True)
        except Exception:
            return False
        if len(raw) != (self.modulus.bit_length() + 7) // 8:
            return False
        return crypto.verify_bytes(self.exponent, self.modulus, raw, payload)


@dataclass(frozen=True)
class Signature:
    bytes_b64: str
    algorithm: str = "RS256"

    def to_wire(self) -> dict:
        return {"sigBytes": self.bytes_b64, "algorithm": self.algorithm}

    @classmethod
    def from_wire(cls, wire: dict) -> "Signature":
        return cls(bytes_b64=wire["sigBytes"], algorithm=wire.get("algorithm", "RS256"))

    @classmethod
    def create(cls, private_key, payload: bytes) -> "Signature":
        raw = crypto.sign_bytes(private_key, payload)
        return cls(bytes_b64=base64.b64encode(raw).decode("ascii"))


@dataclass(frozen=True)
class DidDocument:
    did: str
    key: RsaPublicKey
    dateTime: str
    entityType: EntityType
    authoritySignature: Optional[Signature] = None
    kty: str = "RSA"

    def __post_init__(self) -> None:
        validate_did(self.did)
        validate_rfc3339(self.dateTime)
        if self.kty != "RSA":
            raise InvalidFieldError("kty is fixed to RSA")

    def to_wire(self) -> dict:
        wire = {
            "did": self.did,
            "key": self.key.to_wire(),
            "kty": self.kty,
            "dateTime": self.dateTime,
            "entityType": self.entityType.value,
        }
        if self.authoritySignature is not None:
            wire["authoritySignature"] = self.authoritySignature.to_wire()
        return wire

    @classmethod
    def from_wire(cls, wire: dict) -> "DidDocument":
        sig = wire.get("authoritySignature")
        return cls(
            did=wire["did"],
            key=RsaPublicKey.from_wire(wire["key"]),
            kty=wire.get("kty", "RSA"),
            dateTime=wire["dateTime"],
            entityType=EntityType(wire["entityType"]),
            authoritySignature=Signature.from_wire(sig) if sig else None,
        )

    def signing_payload(self) -> bytes:
        return canonical_bytes(self.to_wire(), DID_DOCUMENT_SIGNING_EXCLUSIONS)


@dataclass(frozen=True)
class InsuranceContract:
    contractId: str
    insuranceCompanyDid: str
    clientDid: str
    landRegistrationVc: str
    ipfsHash: str
    dateTime: str
    insuranceCompanySignature: Optional[Signature] = None
    clientSignature: Optional[Signature] = None

    def __post_init__(self) -> None:
        validate_uuid(self.contractId, "contractId")
        validate_did(self.insuranceCompanyDid)
        validate_did(self.clientDid)
        validate_rfc3339(self.dateTime)
        if self.insuranceCompanyDid == self.clientDid:
            raise InvalidFieldError("contract parties must be distinct DIDs")

    def to_wire(self) -> dict:
        wire = {
            "contractId": self.contractId,
            "insuranceCompanyDid": self.insuranceCompanyDid,
            "clientDid": self.clientDid,
            "landRegistrationVc": self.landRegistrationVc,
            "ipfsHash": self.ipfsHash,
            "dateTime": self.dateTime,
        }
        if self.insuranceCompanySignature is not None:
            wire["insuranceCompanySignature"] = self.insuranceCompanySignature.to_wire()
        if self.clientSignature is not None:
            wire["clientSignature"] = self.clientSignature.to_wire()
        return wire

    @classmethod
    def from_wire(cls, wire: dict) -> "InsuranceContract":
        company_sig = wire.get("insuranceCompanySignature")
        client_sig = wire.get("clientSignature")
        return cls(
            contractId=wire["contractId"],
            insuranceCompanyDid=wire["insuranceCompanyDid"],
            clientDid=wire["clientDid"],
            landRegistrationVc=wire["landRegistrationVc"],
            ipfsHash=wire["ipfsHash"],
            dateTime=wire["dateTime"],
            insuranceCompanySignature=Signature.from_wire(company_sig) if company_sig else None,
            clientSignature=Signature.from_wire(client_sig) if client_sig else None,
        )

    def signing_payload(self) -> bytes:
        return canonical_bytes(self.to_wire(), CONTRACT_SIGNING_EXCLUSIONS)

    def with_update(self, ipfs_hash: str, date_time: str) -> "InsuranceContract":
        # Updates erase both stored signatures; re-signing restores validity.
        return replace(
            self,
            ipfsHash=ipfs_hash,
            dateTime=date_time,
            insuranceCompanySignature=None,
            clientSignature=None,
        )


@dataclass(frozen=True)
class DamageClaim:
    claimId: str
    contractId: str
    ipfsHash: str
    dateTime: str
    claimState: ClaimState
    lastSignerDid: str
    auditorDid: Optional[str] = None
    contentsSignature: Optional[Signature] = None

    def __post_init__(self) -> None:
        validate_uuid(self.claimId, "claimId")
        validate_uuid(self.contractId, "contractId")
        validate_rfc3339(self.dateTime)
        validate_did(self.lastSignerDid)
        if self.auditorDid is not None:
            validate_did(self.auditorDid)

    def to_wire(self) -> dict:
        wire = {
            "claimId": self.claimId,
            "contractId": self.contractId,
            "ipfsHash": self.ipfsHash,
            "dateTime": self.dateTime,
            "claimState": self.claimState.value,
            "lastSignerDid": self.lastSignerDid,
        }
        if self.auditorDid is not None:
            wire["auditorDid"] = self.auditorDid
        if self.contentsSignature is not None:
            wire["contentsSignature"] = self.contentsSignature.to_wire()
        return wire

    @classmethod
    def from_wire(cls, wire: dict) -> "DamageClaim":
        sig = wire.get("contentsSignature")
        return cls(
            claimId=wire["claimId"],
            contractId=wire["contractId"],
            ipfsHash=wire["ipfsHash"],
            dateTime=wire["dateTime"],
            claimState=ClaimState(wire["claimState"]),
            lastSignerDid=wire["lastSignerDid"],
            auditorDid=wire.get("auditorDid"),
            contentsSignature=Signature.from_wire(sig) if sig else None,
        )

    def signing_payload(self) -> bytes:
        # claimState, auditorDid and lastSignerDid are part of the payload.
        return canonical_bytes(self.to_wire(), CLAIM_SIGNING_EXCLUSIONS)
