"""Certificate authority and enrollment: the platform's MSP.

Transaction credentials are deliberately independent of DID signing keys;
certificates are canonical-encoded signed records, not X.509.
"""
from __future__ import annotations

import base64
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Optional

from .canonical import canonical_bytes
from .model import EntityType, RsaPublicKey, Signature, utc_now_rfc3339, validate_did

SECRET_TTL = timedelta(hours=24)
CERT_VALIDITY = timedelta(days=90)

CERT_SIGNING_EXCLUSIONS = frozenset({"caSignature"})

# Admin rights: who may register which entity types.
REGISTRABLE: dict[EntityType, frozenset[EntityType]] = {
    EntityType.HIGHER_AUTHORITY: frozenset({EntityType.INSURANCE_COMPANY}),
    EntityType.INSURANCE_COMPANY: frozenset({EntityType.CLIENT, EntityType.AUDITOR}),
}


class MembershipErrorCode(str, Enum):
    AUTH_DENIED = "AUTH_DENIED"
    ALREADY_EXISTS = "ALREADY_EXISTS"
    BAD_SECRET = "BAD_SECRET"
    EXPIRED = "EXPIRED"


class MembershipError(Exception):
    def __init__(self, code: MembershipErrorCode, message: str = ""):
        super().__init__(f"{code.value}: {message}" if message else code.value)
        self.code = code


def _parse_time(value: str) -> datetime:
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


def cert_signing_payload(cert_wire: dict) -> bytes:
    return canonical_bytes(cert_wire, CERT_SIGNING_EXCLUSIONS)


def verify_credential(
    cert_wire: dict, now: str, ca_root_key: RsaPublicKey
) -> Optional[dict]:
    """Identity {participantId, entityType, boundDid} or None if invalid."""
    try:
        sig = Signature.from_wire(cert_wire["caSignature"])
        if not ca_root_key.verify(cert_signing_payload(cert_wire), sig):
            return None
        moment = _parse_time(now)
        if not (_parse_time(cert_wire["notBefore"]) <= moment <= _parse_time(cert_wire["notAfter"])):
            return None
        return {
            "participantId": cert_wire["participantId"],
            "entityType": EntityType(cert_wire["entityType"]),
            "boundDid": cert_wire["boundDid"],
            "publicKey": RsaPublicKey.from_wire(cert_wire["publicKey"]),
        }
    except Exception:
        return None


@dataclass
class _Registration:
    participant_id: str
    entity_type: EntityType
    bound_did: str
    secret: str
    expiry: datetime
    used: bool = False


class CertificateAuthority:
    """Registers participants and issues signed MSP certificates."""

    def __init__(self, root_private_key):
        self._root_key = root_private_key
        self.root_public_key = RsaPublicKey.of_private(root_private_key)
        self._registrations: dict[str, _Registration] = {}
        self._lock = threading.Lock()

    def issue_certificate(
        self,
        participant_id: str,
        entity_type: EntityType,
        bound_did: str,
        public_key: RsaPublicKey,
        now: Optional[str] = None,
    ) -> dict:
        """Directly mint a certificate; used for genesis bootstrap only."""
        validate_did(bound_did)
        issued = _parse_time(now or utc_now_rfc3339())
        cert = {
            "participantId": participant_id,
            "entityType": entity_type.value,
            "boundDid": bound_did,
            "publicKey": public_key.to_wire(),
            "notBefore": issued.isoformat().replace("+00:00", "Z"),
            "notAfter": (issued + CERT_VALIDITY).isoformat().replace("+00:00", "Z"),
        }
        sig = Signature.create(self._root_key, cert_signing_payload(cert))
        cert["caSignature"] = sig.to_wire()
        return cert

    def register(
        self,
        admin_cert: dict,
        participant_id: str,
        entity_type: EntityType,
        bound_did: str,
        now: Optional[str] = None,
    ) -> dict:
        now = now or utc_now_rfc3339()
        identity = verify_credential(admin_cert, now, self.root_public_key)
        if identity is None:
            raise MembershipError(MembershipErrorCode.AUTH_DENIED, "invalid admin credential")
        allowed = REGISTRABLE.get(identity["entityType"], frozenset())
        if entity_type not in allowed:
            raise MembershipError(
                MembershipErrorCode.AUTH_DENIED,
                f"{identity['entityType'].value} may not register {entity_type.value}",
            )
        with self._lock:
            if participant_id in self._registrations:
                raise MembershipError(MembershipErrorCode.ALREADY_EXISTS, participant_id)
            secret = base64.b64encode(secrets.token_bytes(32)).decode("ascii")
            expiry = _parse_time(now) + SECRET_TTL
            self._registrations[participant_id] = _Registration(
                participant_id, entity_type, bound_did, secret, expiry
            )
        return {
            "participantId": participant_id,
            "secret": secret,
            "expiry": expiry.isoformat().replace("+00:00", "Z"),
            "singleUse": True,
        }

    def enroll(
        self,
        participant_id: str,
        secret: str,
        public_key: RsaPublicKey,
        now: Optional[str] = None,
    ) -> dict:
        now = now or utc_now_rfc3339()
        with self._lock:
            reg = self._registrations.get(participant_id)
            if reg is None or reg.used or not secrets.compare_digest(reg.secret, secret):
                raise MembershipError(MembershipErrorCode.BAD_SECRET, participant_id)
            if _parse_time(now) > reg.expiry:
                raise MembershipError(MembershipErrorCode.EXPIRED, participant_id)
            reg.used = True
        return self.issue_certificate(
            participant_id, reg.entity_type, reg.bound_did, public_key, now
        )
