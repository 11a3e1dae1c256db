"""Certificate authority: registration rights, one-time secrets, validity
windows, and the deliberate separation of MSP keys from DID signing keys."""
from __future__ import annotations

import pytest

from insureledger import ledger
from insureledger.membership import (
    CertificateAuthority,
    MembershipError,
    MembershipErrorCode,
    verify_credential,
)
from insureledger.model import EntityType, RsaPublicKey, Signature


@pytest.fixture(scope="module")
def ca(key_pool):
    return CertificateAuthority(key_pool[0])


@pytest.fixture(scope="module")
def ha_cert(ca, key_pool):
    return ca.issue_certificate(
        "ha-admin", EntityType.HIGHER_AUTHORITY, "did:insure:authority-00",
        RsaPublicKey.of_private(key_pool[1]),
    )


def _enroll(ca, ha_cert, key_pool, participant_id, entity_type=EntityType.INSURANCE_COMPANY):
    reg = ca.register(ha_cert, participant_id, entity_type, "did:insure:somebody-00")
    return ca.enroll(participant_id, reg["secret"], RsaPublicKey.of_private(key_pool[2]))


def test_register_enroll_verify(ca, ha_cert, key_pool):
    cert = _enroll(ca, ha_cert, key_pool, "company-1")
    identity = verify_credential(cert, cert["notBefore"], ca.root_public_key)
    assert identity is not None
    assert identity["entityType"] is EntityType.INSURANCE_COMPANY
    assert identity["boundDid"] == "did:insure:somebody-00"


def test_registration_rights(ca, ha_cert, key_pool):
    # HA cannot register clients directly.
    with pytest.raises(MembershipError) as err:
        ca.register(ha_cert, "c1", EntityType.CLIENT, "did:insure:somebody-01")
    assert err.value.code is MembershipErrorCode.AUTH_DENIED
    # An IC can register clients and auditors but not companies.
    company_cert = _enroll(ca, ha_cert, key_pool, "company-2")
    ca.register(company_cert, "client-1", EntityType.CLIENT, "did:insure:somebody-02")
    ca.register(company_cert, "auditor-1", EntityType.AUDITOR, "did:insure:somebody-03")
    with pytest.raises(MembershipError):
        ca.register(company_cert, "company-3", EntityType.INSURANCE_COMPANY, "did:insure:somebody-04")


def test_secret_is_single_use(ca, ha_cert, key_pool):
    reg = ca.register(ha_cert, "company-su", EntityType.INSURANCE_COMPANY, "did:insure:somebody-05")
    ca.enroll("company-su", reg["secret"], RsaPublicKey.of_private(key_pool[2]))
    with pytest.raises(MembershipError) as err:
        ca.enroll("company-su", reg["secret"], RsaPublicKey.of_private(key_pool[2]))
    assert err.value.code is MembershipErrorCode.BAD_SECRET


def test_wrong_secret_rejected(ca, ha_cert, key_pool):
    ca.register(ha_cert, "company-ws", EntityType.INSURANCE_COMPANY, "did:insure:somebody-06")
    with pytest.raises(MembershipError):
        ca.enroll("company-ws", "bm90LXRoZS1zZWNyZXQ=", RsaPublicKey.of_private(key_pool[2]))


def test_secret_expiry(ca, ha_cert, key_pool):
    from datetime import datetime, timedelta

    start = datetime.fromisoformat(ha_cert["notBefore"].replace("Z", "+00:00"))
    reg = ca.register(
        ha_cert, "company-exp", EntityType.INSURANCE_COMPANY, "did:insure:somebody-07",
        now=start.isoformat().replace("+00:00", "Z"),
    )
    late = (start + timedelta(hours=24, seconds=1)).isoformat().replace("+00:00", "Z")
    with pytest.raises(MembershipError) as err:
        ca.enroll("company-exp", reg["secret"], RsaPublicKey.of_private(key_pool[2]), now=late)
    assert err.value.code is MembershipErrorCode.EXPIRED


def test_duplicate_registration_rejected(ca, ha_cert):
    ca.register(ha_cert, "company-dup", EntityType.INSURANCE_COMPANY, "did:insure:somebody-08")
    with pytest.raises(MembershipError) as err:
        ca.register(ha_cert, "company-dup", EntityType.INSURANCE_COMPANY, "did:insure:somebody-08")
    assert err.value.code is MembershipErrorCode.ALREADY_EXISTS


def test_certificate_validity_window(ca, ha_cert, key_pool):
    cert = _enroll(ca, ha_cert, key_pool, "company-vw")
    assert verify_credential(cert, "2000-01-01T00:00:00Z", ca.root_public_key) is None
    assert verify_credential(cert, "2100-01-01T00:00:00Z", ca.root_public_key) is None


def test_tampered_certificate_rejected(ca, ha_cert, key_pool):
    cert = dict(_enroll(ca, ha_cert, key_pool, "company-tm"))
    cert["entityType"] = "HIGHER_AUTHORITY"
    assert verify_credential(cert, cert["notBefore"], ca.root_public_key) is None


def test_wrong_root_rejected(ca, ha_cert, key_pool):
    cert = _enroll(ca, ha_cert, key_pool, "company-wr")
    other_root = RsaPublicKey.of_private(key_pool[3])
    assert verify_credential(cert, cert["notBefore"], other_root) is None


def test_msp_and_did_keys_are_not_interchangeable(ca, ha_cert, key_pool):
    """Signing a request with the DID key (not the enrolled MSP key) fails,
    and vice versa: the two credential sets stay independent."""
    msp_key, did_key = key_pool[4], key_pool[5]
    reg = ca.register(ha_cert, "company-ki", EntityType.INSURANCE_COMPANY, "did:insure:somebody-09")
    cert = ca.enroll("company-ki", reg["secret"], RsaPublicKey.of_private(msp_key))
    identity = verify_credential(cert, cert["notBefore"], ca.root_public_key)
    payload = ledger.request_auth_payload("getContracts", {"did": "did:insure:somebody-09"}, "n1")
    assert identity["publicKey"].verify(payload, Signature.create(msp_key, payload))
    assert not identity["publicKey"].verify(payload, Signature.create(did_key, payload))
    # And the DID public key does not accept the MSP key's signature.
    did_pub = RsaPublicKey.of_private(did_key)
    assert not did_pub.verify(payload, Signature.create(msp_key, payload))
