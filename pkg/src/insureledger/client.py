"""Client-side signing and gateway access.

Everything that touches a private key lives here, client-side: content
signatures with the DID key, request signatures with the MSP key. The CLI,
the bench harness, and the web client all produce identical payloads.
"""
from __future__ import annotations

import base64
import json
import secrets
from dataclasses import dataclass
from typing import Any, Optional

import httpx

from . import ledger
from .model import (
    ClaimState,
    DamageClaim,
    DidDocument,
    EntityType,
    InsuranceContract,
    RsaPublicKey,
    Signature,
    utc_now_rfc3339,
)

OPERATION_ROUTES = {
    "createDidDocument": ("POST", "/dids"),
    "getDidDocument": ("GET", "/dids/{did}"),
    "createInsuranceContract": ("POST", "/contracts"),
    "updateInsuranceContract": ("PATCH", "/contracts/{id}"),
    "updateClientSignature": ("POST", "/contracts/{id}/client-signature"),
    "getContracts": ("GET", "/contracts"),
    "createClaim": ("POST", "/claims"),
    "updateClaimState": ("PATCH", "/claims/{id}/state"),
    "assignAuditor": ("PATCH", "/claims/{id}/auditor"),
    "getClaims": ("GET", "/claims"),
}


# --------------------------------------------------------------- content signing

def build_did_document(
    did: str,
    public_key: RsaPublicKey,
    entity_type: EntityType,
    authority_private_key,
    date_time: Optional[str] = None,
) -> dict:
    doc = DidDocument(
        did=did,
        key=public_key,
        dateTime=date_time or utc_now_rfc3339(),
        entityType=entity_type,
    )
    sig = Signature.create(authority_private_key, doc.signing_payload())
    return DidDocument(
        did=doc.did,
        key=doc.key,
        dateTime=doc.dateTime,
        entityType=doc.entityType,
        authoritySignature=sig,
    ).to_wire()


def build_contract(
    contract_id: str,
    company_did: str,
    client_did: str,
    land_registration_vc: str,
    ipfs_hash: str,
    company_private_key,
    date_time: Optional[str] = None,
) -> dict:
    contract = InsuranceContract(
        contractId=contract_id,
        insuranceCompanyDid=company_did,
        clientDid=client_did,
        landRegistrationVc=land_registration_vc,
        ipfsHash=ipfs_hash,
        dateTime=date_time or utc_now_rfc3339(),
    )
    sig = Signature.create(company_private_key, contract.signing_payload())
    wire = contract.to_wire()
    wire["insuranceCompanySignature"] = sig.to_wire()
    return wire


def contract_update_fields(
    contract_wire: dict,
    new_ipfs_hash: str,
    company_private_key,
    date_time: Optional[str] = None,
) -> dict:
    """Args body for updateInsuranceContract: updated fields + fresh company
    signature over the post-update payload (client signature is erased)."""
    updated = InsuranceContract.from_wire(contract_wire).with_update(
        new_ipfs_hash, date_time or utc_now_rfc3339()
    )
    sig = Signature.create(company_private_key, updated.signing_payload())
    return {
        "ipfsHash": updated.ipfsHash,
        "dateTime": updated.dateTime,
        "insuranceCompanySignature": sig.to_wire(),
    }


def countersign_contract(contract_wire: dict, client_private_key) -> dict:
    contract = InsuranceContract.from_wire(contract_wire)
    sig = Signature.create(client_private_key, contract.signing_payload())
    return sig.to_wire()


def build_claim(
    claim_id: str,
    contract_id: str,
    ipfs_hash: str,
    issuer_did: str,
    issuer_private_key,
    date_time: Optional[str] = None,
) -> dict:
    # The signature covers the claim exactly as stored: PRESENTED, no auditor.
    claim = DamageClaim(
        claimId=claim_id,
        contractId=contract_id,
        ipfsHash=ipfs_hash,
        dateTime=date_time or utc_now_rfc3339(),
        claimState=ClaimState.PRESENTED,
        lastSignerDid=issuer_did,
    )
    sig = Signature.create(issuer_private_key, claim.signing_payload())
    wire = claim.to_wire()
    wire["contentsSignature"] = sig.to_wire()
    return wire


def claim_state_update_fields(
    claim_wire: dict,
    new_state: ClaimState,
    signer_did: str,
    signer_private_key,
    date_time: Optional[str] = None,
) -> dict:
    claim = DamageClaim.from_wire(claim_wire)
    updated = DamageClaim(
        claimId=claim.claimId,
        contractId=claim.contractId,
        ipfsHash=claim.ipfsHash,
        dateTime=date_time or utc_now_rfc3339(),
        claimState=new_state,
        lastSignerDid=signer_did,
        auditorDid=claim.auditorDid,
    )
    sig = Signature.create(signer_private_key, updated.signing_payload())
    return {
        "claimState": new_state.value,
        "dateTime": updated.dateTime,
        "contentsSignature": sig.to_wire(),
    }


def auditor_assign_fields(
    claim_wire: dict,
    auditor_did: str,
    signer_did: str,
    signer_private_key,
    date_time: Optional[str] = None,
) -> dict:
    claim = DamageClaim.from_wire(claim_wire)
    updated = DamageClaim(
        claimId=claim.claimId,
        contractId=claim.contractId,
        ipfsHash=claim.ipfsHash,
        dateTime=date_time or utc_now_rfc3339(),
        claimState=claim.claimState,
        lastSignerDid=signer_did,
        auditorDid=auditor_did,
    )
    sig = Signature.create(signer_private_key, updated.signing_payload())
    return {
        "auditorDid": auditor_did,
        "dateTime": updated.dateTime,
        "contentsSignature": sig.to_wire(),
    }


# --------------------------------------------------------------- request signing

@dataclass
class Credential:
    """MSP credential: certificate plus its private key."""

    certificate: dict
    private_key: Any

    def headers(self, operation: str, args: Any, nonce: Optional[str] = None) -> dict:
        nonce = nonce or secrets.token_hex(16)
        payload = ledger.request_auth_payload(operation, args, nonce)
        sig = Signature.create(self.private_key, payload)
        return {
            "x-certificate": base64.b64encode(
                json.dumps(self.certificate).encode("utf-8")
            ).decode("ascii"),
            "x-signature": sig.bytes_b64,
            "x-nonce": nonce,
            "content-type": "application/json",
        }


def build_request(
    operation: str, args: Any, credential: Credential, nonce: Optional[str] = None
) -> tuple[str, str, bytes, dict]:
    """(method, path-with-query, body, headers) for one gateway request."""
    method, path = OPERATION_ROUTES[operation]
    body: bytes = b""
    if operation == "createDidDocument":
        body = json.dumps(args["document"]).encode()
    elif operation == "getDidDocument":
        path = path.format(did=args["did"])
    elif operation == "createInsuranceContract":
        body = json.dumps(args["contract"]).encode()
    elif operation == "updateInsuranceContract":
        path = path.format(id=args["contractId"])
        body = json.dumps({k: v for k, v in args.items() if k != "contractId"}).encode()
    elif operation == "updateClientSignature":
        path = path.format(id=args["contractId"])
        body = json.dumps({"clientSignature": args["clientSignature"]}).encode()
    elif operation == "getContracts":
        path = f"{path}?did={args['did']}"
    elif operation == "createClaim":
        body = json.dumps(args["claim"]).encode()
    elif operation in ("updateClaimState", "assignAuditor"):
        path = path.format(id=args["claimId"])
        body = json.dumps({k: v for k, v in args.items() if k != "claimId"}).encode()
    elif operation == "getClaims":
        path = f"{path}?selector={args['selector']}"
    else:
        raise ValueError(f"unknown operation {operation}")
    return method, path, body, credential.headers(operation, args, nonce)


class GatewayClient:
    """Thin synchronous client over the gateway HTTP API."""

    def __init__(self, base_url: str, credential: Optional[Credential] = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.credential = credential
        self._http = httpx.Client(timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def invoke(self, operation: str, args: Any) -> httpx.Response:
        if self.credential is None:
            raise ValueError("no credential loaded")
        method, path, body, headers = build_request(operation, args, self.credential)
        return self._http.request(method, self.base_url + path, content=body, headers=headers)

    def invoke_ok(self, operation: str, args: Any) -> Any:
        response = self.invoke(operation, args)
        if response.status_code >= 400:
            raise GatewayError(response.status_code, response.text)
        return response.json()

    # Storage routes need no request signature.
    def put_blob(self, data: bytes) -> str:
        response = self._http.post(self.base_url + "/storage/blob", content=data)
        response.raise_for_status()
        return response.json()["cid"]

    def put_directory(self, entries: list[tuple[str, str]]) -> str:
        response = self._http.post(
            self.base_url + "/storage/dir", json={"entries": [list(e) for e in entries]}
        )
        response.raise_for_status()
        return response.json()["cid"]

    def pin(self, cid: str) -> None:
        self._http.post(self.base_url + f"/storage/pin/{cid}").raise_for_status()


class GatewayError(Exception):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body}")
        self.status = status
        self.body = body
