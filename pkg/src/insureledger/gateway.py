"""HTTP/JSON front door: authenticates signed client requests, drives the
endorse -> submit -> await-commit pipeline, and serves reads from the local
peer snapshot. Also proxies blob-store routes under /storage/*.

Write responses return only after the local peer has committed the block
containing the transaction, echoing its validation code.
"""
from __future__ import annotations

import asyncio
import base64
import json
from typing import Any, Optional

from . import ledger, wire
from .chaincode import READ_ONLY_OPERATIONS
from .httpd import HttpServer, Request, Response, http_request
from .membership import verify_credential
from .model import RsaPublicKey, Signature, utc_now_rfc3339

CHAIN_ERROR_STATUS = {
    "AUTH_DENIED": 403,
    "NOT_FOUND": 404,
    "ALREADY_EXISTS": 409,
    "SIG_INVALID": 422,
    "INVALID_TRANSITION": 422,
    "INVALID_FIELD": 422,
    "CONTRACT_NOT_VALID": 422,
}

COMMIT_CODE_STATUS = {
    ledger.MVCC_CONFLICT: 409,
    ledger.INVALID_ENDORSEMENT: 422,
    ledger.BAD_SIGNATURE: 422,
}

SUBMIT_RETRY_DELAY = 0.2
COMMIT_TIMEOUT = 120.0
# An accepted entry can still be dropped by an ordering leader change, so
# re-submit if the commit event does not arrive promptly. Re-submission is
# idempotent: a duplicate instance of the same transaction fails MVCC.
RESUBMIT_INTERVAL = 20.0


class GatewayService:
    def __init__(
        self,
        host: str,
        port: int,
        peer_addr: str,
        orderer_addrs: list[str],
        ca_root_key: RsaPublicKey,
        storage_addr: Optional[str] = None,
        max_in_flight: int = 4096,
    ):
        self.peer_addr = peer_addr
        self.orderer_addrs = list(orderer_addrs)
        self.ca_root_key = ca_root_key
        self.storage_addr = storage_addr
        self.server = HttpServer(host, port, max_in_flight=max_in_flight)
        self._commit_task: Optional[asyncio.Task] = None
        self._commit_waiters: dict[str, list[asyncio.Future]] = {}
        self._commit_seen: dict[str, dict] = {}

        route = self.server.route
        route("POST", "/dids", self._op("createDidDocument", 201))
        route("GET", "/dids/<did>", self._op("getDidDocument"))
        route("POST", "/contracts", self._op("createInsuranceContract", 201))
        route("PATCH", "/contracts/<id>", self._op("updateInsuranceContract"))
        route("POST", "/contracts/<id>/client-signature", self._op("updateClientSignature"))
        route("GET", "/contracts", self._op("getContracts"))
        route("POST", "/claims", self._op("createClaim", 201))
        route("PATCH", "/claims/<id>/state", self._op("updateClaimState"))
        route("PATCH", "/claims/<id>/auditor", self._op("assignAuditor"))
        route("GET", "/claims", self._op("getClaims"))
        for method in ("GET", "POST", "DELETE"):
            route(method, "/storage/<rest>", self._storage_proxy)
            route(method, "/storage/<rest>/<rest2>", self._storage_proxy)

    async def start(self) -> None:
        await self.server.start()
        self._commit_task = asyncio.ensure_future(self._commit_events_loop())

    async def stop(self) -> None:
        if self._commit_task is not None:
            self._commit_task.cancel()
        await self.server.stop()

    # ------------------------------------------------------------ commit events

    async def _commit_events_loop(self) -> None:
        host, port = wire.parse_addr(self.peer_addr)
        while True:
            try:
                reader, writer = await asyncio.open_connection(host, port)
                try:
                    await wire.write_message(writer, {"type": "CommitEvents"})
                    while True:
                        event = await wire.read_message(reader)
                        if event is None:
                            break
                        # First commit wins: a re-submitted duplicate of the
                        # same tx later fails MVCC, and that code must not
                        # shadow the authoritative first outcome.
                        event = self._commit_seen.setdefault(event["txId"], event)
                        if len(self._commit_seen) > 200_000:
                            self._commit_seen.clear()
                        for future in self._commit_waiters.pop(event["txId"], []):
                            if not future.done():
                                future.set_result(event)
                finally:
                    writer.close()
            except asyncio.CancelledError:
                raise
            except Exception:
                await asyncio.sleep(0.2)

    async def _await_commit(self, tx_id: str, timeout: float = COMMIT_TIMEOUT) -> dict:
        if tx_id in self._commit_seen:
            return self._commit_seen[tx_id]
        future: asyncio.Future = asyncio.get_event_loop().create_future()
        self._commit_waiters.setdefault(tx_id, []).append(future)
        try:
            return await asyncio.wait_for(future, timeout)
        finally:
            waiters = self._commit_waiters.get(tx_id)
            if waiters and future in waiters:
                waiters.remove(future)
                if not waiters:
                    del self._commit_waiters[tx_id]

    # ---------------------------------------------------------------- operations

    def _op(self, operation: str, ok_status: int = 200):
        async def handler(request: Request) -> Response:
            try:
                args = build_args(operation, request)
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                return Response.json({"error": "BAD_REQUEST", "message": str(exc)}, 400)
            auth_error = self._authenticate(request, operation, args)
            if auth_error is not None:
                return auth_error
            proposal = {
                "operation": operation,
                "args": args,
                "certificate": json.loads(
                    base64.b64decode(request.headers["x-certificate"])
                ),
                "nonce": request.headers["x-nonce"],
                "requestSignature": {
                    "sigBytes": request.headers["x-signature"],
                    "algorithm": "RS256",
                },
            }
            return await self._execute(operation, proposal, ok_status)

        return handler

    def _authenticate(
        self, request: Request, operation: str, args: Any
    ) -> Optional[Response]:
        cert_b64 = request.headers.get("x-certificate")
        sig_b64 = request.headers.get("x-signature")
        nonce = request.headers.get("x-nonce")
        if not cert_b64 or not sig_b64 or not nonce:
            return Response.json(
                {"error": "UNAUTHENTICATED", "message": "missing auth headers"}, 401
            )
        try:
            cert = json.loads(base64.b64decode(cert_b64))
        except Exception:
            return Response.json(
                {"error": "UNAUTHENTICATED", "message": "malformed certificate"}, 401
            )
        identity = verify_credential(cert, utc_now_rfc3339(), self.ca_root_key)
        if identity is None:
            return Response.json(
                {"error": "UNAUTHENTICATED", "message": "certificate rejected"}, 401
            )
        payload = ledger.request_auth_payload(operation, args, nonce)
        if not identity["publicKey"].verify(payload, Signature(bytes_b64=sig_b64)):
            return Response.json(
                {"error": "UNAUTHENTICATED", "message": "request signature invalid"}, 401
            )
        return None

    async def _execute(self, operation: str, proposal: dict, ok_status: int) -> Response:
        try:
            reply = await wire.call_async(
                self.peer_addr, {"type": "Endorse", "proposal": proposal}
            )
        except (OSError, wire.WireError) as exc:
            return Response.json({"error": "PEER_UNREACHABLE", "message": str(exc)}, 503)
        if "error" in reply:
            # BAD_CREDENTIAL and REPLAY are authentication failures.
            return Response.json(reply, 401)
        endorsement = reply["ok"]
        result = endorsement["result"]
        if "error" in result:
            status = CHAIN_ERROR_STATUS.get(result["error"], 422)
            return Response.json(result, status)
        if operation in READ_ONLY_OPERATIONS:
            return Response.json(result["ok"], ok_status)

        envelope = {"proposal": proposal, "endorsements": [endorsement]}
        tx_id = ledger.envelope_tx_id(envelope)
        event = None
        deadline = asyncio.get_event_loop().time() + COMMIT_TIMEOUT
        while event is None:
            submit_error = await self._submit(envelope, deadline)
            if submit_error is not None:
                return submit_error
            remaining = deadline - asyncio.get_event_loop().time()
            if remaining <= 0:
                return Response.json({"error": "COMMIT_TIMEOUT"}, 503)
            try:
                event = await self._await_commit(
                    tx_id, timeout=min(RESUBMIT_INTERVAL, remaining)
                )
            except asyncio.TimeoutError:
                continue
        if event["code"] != ledger.VALID:
            return Response.json(
                {"error": event["code"], "blockNum": event["blockNum"]},
                COMMIT_CODE_STATUS.get(event["code"], 500),
            )
        body = dict(result["ok"]) if isinstance(result["ok"], dict) else result["ok"]
        return Response.json(
            {"result": body, "blockNum": event["blockNum"], "code": event["code"]},
            ok_status,
        )

    async def _submit(self, envelope: dict, deadline: float) -> Optional[Response]:
        """Keep trying orderers until one accepts or the deadline passes.

        Leadership can churn for a while when the cluster is saturated, so
        patience is bounded by wall-clock time, not a retry count.
        """
        addr = self.orderer_addrs[0]
        loop = asyncio.get_event_loop()
        while loop.time() < deadline:
            try:
                reply = await wire.call_async(addr, {"type": "Submit", "envelope": envelope})
            except (OSError, wire.WireError):
                addr = self._next_addr(addr)
                await asyncio.sleep(SUBMIT_RETRY_DELAY)
                continue
            if "ok" in reply:
                return None
            if "redirect" in reply and reply["redirect"].get("addr"):
                addr = reply["redirect"]["addr"]
                await asyncio.sleep(0.02)  # stale hints can form redirect cycles
                continue
            await asyncio.sleep(SUBMIT_RETRY_DELAY)
        return Response.json({"error": "UNAVAILABLE", "message": "no orderer leader"}, 503)

    def _next_addr(self, addr: str) -> str:
        try:
            index = self.orderer_addrs.index(addr)
        except ValueError:
            return self.orderer_addrs[0]
        return self.orderer_addrs[(index + 1) % len(self.orderer_addrs)]

    # ------------------------------------------------------------------- storage

    async def _storage_proxy(self, request: Request) -> Response:
        if self.storage_addr is None:
            return Response.json({"error": "NO_STORAGE"}, 503)
        target = request.path[len("/storage") :]
        url = f"http://{self.storage_addr}{target}"
        try:
            status, headers, body = await http_request(
                url, request.method, request.body,
                {"Content-Type": request.headers.get("content-type", "application/octet-stream")},
            )
        except OSError as exc:
            return Response.json({"error": "STORAGE_UNREACHABLE", "message": str(exc)}, 502)
        passthrough = {
            k.title(): v
            for k, v in headers.items()
            if k in ("content-type", "x-content-kind")
        }
        return Response(status, body, passthrough)


def build_args(operation: str, request: Request) -> Any:
    """Map an HTTP request onto chaincode arguments. Clients sign the exact
    same structure, so this mapping is part of the wire contract."""
    body = request.json()
    if operation == "createDidDocument":
        return {"document": body}
    if operation == "getDidDocument":
        return {"did": request.params["did"]}
    if operation == "createInsuranceContract":
        return {"contract": body}
    if operation == "updateInsuranceContract":
        return {"contractId": request.params["id"], **body}
    if operation == "updateClientSignature":
        return {"contractId": request.params["id"], "clientSignature": body["clientSignature"]}
    if operation == "getContracts":
        return {"did": request.query["did"]}
    if operation == "createClaim":
        return {"claim": body}
    if operation == "updateClaimState":
        return {"claimId": request.params["id"], **body}
    if operation == "assignAuditor":
        return {"claimId": request.params["id"], **body}
    if operation == "getClaims":
        return {"selector": request.query["selector"]}
    raise ValueError(f"unknown operation {operation}")
