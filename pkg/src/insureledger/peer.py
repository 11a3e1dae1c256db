"""Peer node: endorses proposals against the committed snapshot, validates
delivered blocks (endorsement policy, signatures, MVCC) and commits writes.
"""
from __future__ import annotations

import threading
import time
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Optional

from . import chaincode, ledger, membership
from .canonical import canonical_bytes
from .model import RsaPublicKey, Signature, utc_now_rfc3339
from .chaincode import ChaincodeError, TxContext

NONCE_WINDOW_SECS = 600.0


class EndorseErrorCode(str, Enum):
    BAD_CREDENTIAL = "BAD_CREDENTIAL"
    REPLAY = "REPLAY"


class EndorseError(Exception):
    def __init__(self, code: EndorseErrorCode, message: str = ""):
        super().__init__(f"{code.value}: {message}" if message else code.value)
        self.code = code


class ChainBrokenError(Exception):
    """Delivered block does not extend the local chain; rejected entirely."""


def endorsement_signing_payload(endorsement: dict) -> bytes:
    return canonical_bytes(endorsement, {"signature"})


def endorsement_rw_digest(endorsement: dict) -> bytes:
    return canonical_bytes(
        {
            "readSet": endorsement["readSet"],
            "writeSet": endorsement["writeSet"],
            "result": endorsement["result"],
        }
    )


class Peer:
    def __init__(
        self,
        peer_id: str,
        private_key,
        genesis_block: dict,
        data_dir: Optional[str | Path] = None,
    ):
        self.peer_id = peer_id
        self._private_key = private_key
        self.public_key = RsaPublicKey.of_private(private_key)
        config = genesis_block["config"]
        self.ca_root_key = RsaPublicKey.from_wire(config["caRootCert"]["publicKey"])
        self.endorsement_policy_k = int(config.get("endorsementPolicy", {}).get("k", 1))
        self.peer_keys = {
            entry["id"]: RsaPublicKey.from_wire(entry["publicKey"])
            for entry in config.get("peers", [])
        }
        # A peer always trusts its own endorsements (single-peer test setups
        # need not appear in the genesis peer list).
        self.peer_keys.setdefault(peer_id, self.public_key)

        state_log = Path(data_dir) / "state.log" if data_dir else None
        blocks_path = Path(data_dir) / "blocks.dat" if data_dir else None
        if data_dir:
            Path(data_dir).mkdir(parents=True, exist_ok=True)
        self.world_state = ledger.WorldState(state_log)
        self.block_store = ledger.BlockStore(blocks_path)

        self._lock = threading.RLock()
        self._commit_cond = threading.Condition(self._lock)
        self._tx_codes: dict[str, tuple[int, str]] = {}
        self._nonces: dict[str, float] = {}
        self._commit_listeners: list[Callable[[dict, list[str]], None]] = []
        self.pin_callback: Optional[Callable[[str], None]] = None

        if self.block_store.height == 0:
            self._commit_genesis(genesis_block)
        else:
            self._reindex_tx_codes()

    def _commit_genesis(self, genesis_block: dict) -> None:
        config = genesis_block["config"]
        ha_doc = config["haDidDocument"]
        with self._lock:
            self.block_store.append(genesis_block, [])
            self.world_state.apply(chaincode.did_key(ha_doc["did"]), ha_doc, (0, 0))

    def _reindex_tx_codes(self) -> None:
        for number in range(self.block_store.height):
            record = self.block_store.get(number)
            for env, code in zip(record["block"]["txs"], record["codes"]):
                self._tx_codes[ledger.envelope_tx_id(env)] = (number, code)

    # ------------------------------------------------------------------ endorse

    def endorse(self, proposal: dict) -> dict:
        identity = self._authenticate(proposal)
        with self._lock:
            ctx = TxContext(
                issuer_id=identity["participantId"],
                issuer_entity_type=identity["entityType"],
                issuer_did=identity["boundDid"],
                snapshot=self.world_state,
            )
            try:
                result: dict[str, Any] = {
                    "ok": chaincode.invoke(ctx, proposal["operation"], proposal["args"])
                }
                write_set = [[k, v] for k, v in ctx.write_set]
            except ChaincodeError as exc:
                result = {"error": exc.code.value, "message": exc.message}
                write_set = []
            endorsement = {
                "proposalDigest": ledger.proposal_digest(proposal),
                "readSet": [[k, list(v) if v else None] for k, v in ctx.read_set],
                "writeSet": write_set,
                "result": result,
                "peerId": self.peer_id,
            }
        sig = Signature.create(self._private_key, endorsement_signing_payload(endorsement))
        endorsement["signature"] = sig.to_wire()
        return endorsement

    def _authenticate(self, proposal: dict) -> dict:
        try:
            cert = proposal["certificate"]
            nonce = proposal["nonce"]
            sig = Signature.from_wire(proposal["requestSignature"])
        except (KeyError, TypeError) as exc:
            raise EndorseError(EndorseErrorCode.BAD_CREDENTIAL, "malformed proposal") from exc
        identity = membership.verify_credential(cert, utc_now_rfc3339(), self.ca_root_key)
        if identity is None:
            raise EndorseError(EndorseErrorCode.BAD_CREDENTIAL, "certificate rejected")
        payload = ledger.request_auth_payload(
            proposal["operation"], proposal["args"], nonce
        )
        if not identity["publicKey"].verify(payload, sig):
            raise EndorseError(EndorseErrorCode.BAD_CREDENTIAL, "request signature invalid")
        now = time.monotonic()
        with self._lock:
            seen = self._nonces.get(nonce)
            if seen is not None and now - seen < NONCE_WINDOW_SECS:
                raise EndorseError(EndorseErrorCode.REPLAY, "nonce reuse")
            self._nonces[nonce] = now
            if len(self._nonces) > 100_000:
                cutoff = now - NONCE_WINDOW_SECS
                self._nonces = {n: t for n, t in self._nonces.items() if t >= cutoff}
        return identity

    # ------------------------------------------------------------------- commit

    def validate_and_commit(self, block: dict) -> list[str]:
        with self._lock:
            if block["number"] != self.block_store.height:
                raise ChainBrokenError(
                    f"expected block {self.block_store.height}, got {block['number']}"
                )
            if block["prevHash"] != self.block_store.tip_hash():
                raise ChainBrokenError("prevHash does not match local chain tip")
            if block.get("config") is not None and block["number"] == 0:
                self._commit_genesis(block)
                return []
            if ledger.data_hash(block["txs"]) != block["dataHash"]:
                raise ChainBrokenError("dataHash does not recompute")

            codes: list[str] = []
            for tx_idx, envelope in enumerate(block["txs"]):
                code = self._validate_tx(envelope)
                if code == ledger.VALID:
                    self._apply_writes(envelope, (block["number"], tx_idx))
                codes.append(code)
                self._tx_codes[ledger.envelope_tx_id(envelope)] = (block["number"], code)
            self.block_store.append(block, codes)
            self._commit_cond.notify_all()
            listeners = list(self._commit_listeners)
        for listener in listeners:
            listener(block, codes)
        return codes

    def _validate_tx(self, envelope: dict) -> str:
        try:
            proposal = envelope["proposal"]
            endorsements = envelope["endorsements"]
        except (KeyError, TypeError):
            return ledger.BAD_SIGNATURE

        # Proposal-level signatures: certificate chains to the CA root and the
        # request signature verifies. Pure checks only, so every peer agrees.
        try:
            cert = proposal["certificate"]
            sig = Signature.from_wire(proposal["requestSignature"])
            ca_sig = Signature.from_wire(cert["caSignature"])
            cert_key = RsaPublicKey.from_wire(cert["publicKey"])
        except Exception:
            return ledger.BAD_SIGNATURE
        if not self.ca_root_key.verify(membership.cert_signing_payload(cert), ca_sig):
            return ledger.BAD_SIGNATURE
        payload = ledger.request_auth_payload(
            proposal["operation"], proposal["args"], proposal.get("nonce", "")
        )
        if not cert_key.verify(payload, sig):
            return ledger.BAD_SIGNATURE

        digest = ledger.proposal_digest(proposal)
        reference = None
        valid_endorsers = set()
        for endorsement in endorsements:
            if not self._endorsement_ok(endorsement, digest):
                continue
            rw = endorsement_rw_digest(endorsement)
            if reference is None:
                reference = rw
            elif rw != reference:
                continue
            valid_endorsers.add(endorsement["peerId"])
        if len(valid_endorsers) < self.endorsement_policy_k:
            return ledger.INVALID_ENDORSEMENT
        first = next(e for e in endorsements if self._endorsement_ok(e, digest))
        if "error" in first["result"]:
            return ledger.INVALID_ENDORSEMENT

        for key, version in first["readSet"]:
            current = self.world_state.get(key)
            current_version = list(current[1]) if current else None
            if current_version != version:
                return ledger.MVCC_CONFLICT
        return ledger.VALID

    def _endorsement_ok(self, endorsement: dict, digest: str) -> bool:
        try:
            if endorsement["proposalDigest"] != digest:
                return False
            key = self.peer_keys.get(endorsement["peerId"])
            if key is None:
                return False
            sig = Signature.from_wire(endorsement["signature"])
            return key.verify(endorsement_signing_payload(endorsement), sig)
        except Exception:
            return False

    def _apply_writes(self, envelope: dict, version: tuple[int, int]) -> None:
        endorsement = envelope["endorsements"][0]
        for key, value in endorsement["writeSet"]:
            self.world_state.apply(key, value, version)
            if (
                self.pin_callback is not None
                and isinstance(value, dict)
                and value.get("ipfsHash")
            ):
                try:
                    self.pin_callback(value["ipfsHash"])
                except Exception:
                    pass  # evidence pinning is best-effort at commit time

    # -------------------------------------------------------------------- reads

    def get_state(self, key: str) -> Optional[tuple[Any, tuple[int, int]]]:
        return self.world_state.get(key)

    def get_block(self, number: int) -> Optional[dict]:
        return self.block_store.get(number)

    def tx_code(self, tx_id: str) -> Optional[tuple[int, str]]:
        with self._lock:
            return self._tx_codes.get(tx_id)

    def wait_tx(self, tx_id: str, timeout: float = 30.0) -> Optional[tuple[int, str]]:
        deadline = time.monotonic() + timeout
        with self._commit_cond:
            while tx_id not in self._tx_codes:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._commit_cond.wait(remaining)
            return self._tx_codes[tx_id]

    def add_commit_listener(self, listener: Callable[[dict, list[str]], None]) -> None:
        with self._lock:
            self._commit_listeners.append(listener)

    def close(self) -> None:
        self.world_state.close()
        self.block_store.close()
