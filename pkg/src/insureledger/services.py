"""Network services wrapping the core nodes: peer and orderer TCP APIs,
plus HTTP front ends for the certificate authority and the blob store.

Each service runs on an asyncio event loop; peers pull ordered blocks from
the orderers and commit them as they arrive.
"""
from __future__ import annotations

import asyncio
import random
import time
from typing import Optional

from . import wire
from .blobstore import BlobError, BlobErrorCode, BlobStore, DirectoryManifest
from .config import BlockCutPolicy, RaftTiming
from .httpd import HttpServer, Request, Response
from .membership import CertificateAuthority, MembershipError, MembershipErrorCode
from .model import EntityType, RsaPublicKey
from .ordering import ACCEPTED, Orderer, OutOfRangeError
from .peer import EndorseError, Peer


def now_ms() -> int:
    return int(time.monotonic() * 1000)


class PeerService:
    """TCP API over a Peer: Endorse, GetState, GetBlock, WaitTx, StateHash,
    and a CommitEvents stream; pulls blocks from the ordering service."""

    def __init__(self, peer: Peer, host: str, port: int, orderer_addrs: list[str]):
        self.peer = peer
        self.host = host
        self.port = port
        self.orderer_addrs = orderer_addrs
        self._server: Optional[asyncio.AbstractServer] = None
        self._deliver_task: Optional[asyncio.Task] = None
        self._commit_queues: list[asyncio.Queue] = []
        self._tx_waiters: dict[str, list[asyncio.Future]] = {}
        peer.add_commit_listener(self._on_commit)

    def _on_commit(self, block: dict, codes: list[str]) -> None:
        # Runs on this service's loop (the deliver task drives commits).
        from .ledger import envelope_tx_id

        for env, code in zip(block["txs"], codes):
            event = {
                "txId": envelope_tx_id(env),
                "code": code,
                "blockNum": block["number"],
            }
            for queue in self._commit_queues:
                queue.put_nowait(event)
            for future in self._tx_waiters.pop(event["txId"], []):
                if not future.done():
                    future.set_result(event)

    async def start(self) -> None:
        self._server = await asyncio.start_server(self._handle, self.host, self.port)
        if self.orderer_addrs:
            self._deliver_task = asyncio.ensure_future(self._deliver_loop())

    async def stop(self) -> None:
        if self._deliver_task is not None:
            self._deliver_task.cancel()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        self.peer.close()

    async def _deliver_loop(self) -> None:
        while True:
            for addr in self.orderer_addrs:
                try:
                    await self._follow(addr)
                except asyncio.CancelledError:
                    raise
                except Exception:
                    await asyncio.sleep(0.2)

    async def _follow(self, addr: str) -> None:
        host, port = wire.parse_addr(addr)
        reader, writer = await asyncio.open_connection(host, port)
        try:
            await wire.write_message(
                writer, {"type": "Deliver", "from": self.peer.block_store.height}
            )
            while True:
                msg = await wire.read_message(reader)
                if msg is None:
                    return
                if "error" in msg:
                    return
                block = msg["block"]
                if block["number"] == self.peer.block_store.height:
                    self.peer.validate_and_commit(block)
        finally:
            writer.close()

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                msg = await wire.read_message(reader)
                if msg is None:
                    return
                if msg["type"] == "CommitEvents":
                    await self._stream_commits(writer)
                    return
                reply = await self._answer(msg)
                await wire.write_message(writer, reply)
        except (ConnectionError, wire.WireError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except Exception:
                pass

    async def _stream_commits(self, writer: asyncio.StreamWriter) -> None:
        queue: asyncio.Queue = asyncio.Queue()
        self._commit_queues.append(queue)
        try:
            while True:
                event = await queue.get()
                await wire.write_message(writer, event)
        finally:
            self._commit_queues.remove(queue)

    async def _answer(self, msg: dict) -> dict:
        kind = msg["type"]
        if kind == "Endorse":
            try:
                return {"ok": self.peer.endorse(msg["proposal"])}
            except EndorseError as exc:
                return {"error": exc.code.value, "message": str(exc)}
        if kind == "GetState":
            found = self.peer.get_state(msg["key"])
            if found is None:
                return {"ok": None}
            value, version = found
            return {"ok": {"value": value, "version": list(version)}}
        if kind == "GetBlock":
            record = self.peer.get_block(msg["number"])
            if record is None:
                return {"error": "NOT_FOUND"}
            return {"ok": record}
        if kind == "WaitTx":
            return await self._wait_tx(msg["txId"], float(msg.get("timeout", 30.0)))
        if kind == "StateHash":
            return {
                "ok": {
                    "stateHash": self.peer.world_state.state_hash(),
                    "chainHash": self.peer.block_store.chain_hash(),
                    "height": self.peer.block_store.height,
                }
            }
        return {"error": "BAD_REQUEST", "message": f"unknown type {kind}"}

    async def _wait_tx(self, tx_id: str, timeout: float) -> dict:
        code = self.peer.tx_code(tx_id)
        if code is not None:
            return {"ok": {"blockNum": code[0], "code": code[1]}}
        future: asyncio.Future = asyncio.get_event_loop().create_future()
        self._tx_waiters.setdefault(tx_id, []).append(future)
        try:
            event = await asyncio.wait_for(future, timeout)
            return {"ok": {"blockNum": event["blockNum"], "code": event["code"]}}
        except asyncio.TimeoutError:
            return {"error": "TIMEOUT"}


class OrdererService:
    """TCP API over an Orderer: Submit, Deliver, and inter-orderer Raft."""

    def __init__(
        self,
        node_id: str,
        addr: str,
        cluster: dict[str, str],
        genesis_block: dict,
        policy: BlockCutPolicy = BlockCutPolicy(),
        timing: RaftTiming = RaftTiming(),
        seed: Optional[int] = None,
    ):
        self.node_id = node_id
        self.addr = addr
        self.cluster = cluster  # node id -> addr, including self
        peer_ids = [n for n in cluster if n != node_id]
        self.orderer = Orderer(
            node_id,
            peer_ids,
            genesis_block,
            policy=policy,
            timing=timing,
            rng=random.Random(seed),
        )
        self.timing = timing
        self._server: Optional[asyncio.AbstractServer] = None
        self._tick_task: Optional[asyncio.Task] = None
        self._out_queues: dict[str, asyncio.Queue] = {}
        self._out_tasks: list[asyncio.Task] = []
        self._block_queues: list[asyncio.Queue] = []
        self.orderer.block_listeners.append(self._on_block)

    def _on_block(self, block: dict) -> None:
        for queue in self._block_queues:
            queue.put_nowait(block)

    async def start(self) -> None:
        host, port = wire.parse_addr(self.addr)
        self._server = await asyncio.start_server(self._handle, host, port)
        for node, addr in self.cluster.items():
            if node == self.node_id:
                continue
            queue: asyncio.Queue = asyncio.Queue()
            self._out_queues[node] = queue
            self._out_tasks.append(asyncio.ensure_future(self._sender(addr, queue)))
        self._tick_task = asyncio.ensure_future(self._tick_loop())

    async def stop(self) -> None:
        for task in [self._tick_task, *self._out_tasks]:
            if task is not None:
                task.cancel()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def _tick_loop(self) -> None:
        while True:
            self._send_all(self.orderer.tick(now_ms()))
            await asyncio.sleep(self.timing.tick_ms / 1000)

    def _send_all(self, outbound: list[tuple[str, dict]]) -> None:
        for dest, msg in outbound:
            queue = self._out_queues.get(dest)
            if queue is not None:
                queue.put_nowait(msg)

    async def _sender(self, addr: str, queue: asyncio.Queue) -> None:
        host, port = wire.parse_addr(addr)
        writer = None
        while True:
            msg = await queue.get()
            for _ in range(2):
                try:
                    if writer is None:
                        _, writer = await asyncio.open_connection(host, port)
                    await wire.write_message(writer, {"type": "Raft", "msg": msg})
                    break
                except Exception:
                    if writer is not None:
                        writer.close()
                        writer = None
                    await asyncio.sleep(0.05)

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                msg = await wire.read_message(reader)
                if msg is None:
                    return
                kind = msg["type"]
                if kind == "Raft":
                    self._send_all(self.orderer.receive(msg["msg"], now_ms()))
                    continue
                if kind == "Submit":
                    result, outbound = self.orderer.submit(msg["envelope"], now_ms())
                    self._send_all(outbound)
                    if result == ACCEPTED:
                        await wire.write_message(writer, {"ok": "accepted"})
                    elif result == "unavailable":
                        await wire.write_message(writer, {"error": "UNAVAILABLE"})
                    else:
                        _, leader = result
                        await wire.write_message(
                            writer,
                            {"redirect": {"id": leader, "addr": self.cluster.get(leader)}},
                        )
                    continue
                if kind == "Deliver":
                    await self._serve_deliver(writer, int(msg["from"]))
                    return
                await wire.write_message(writer, {"error": "BAD_REQUEST"})
        except (ConnectionError, wire.WireError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except Exception:
                pass

    async def _serve_deliver(self, writer: asyncio.StreamWriter, start: int) -> None:
        queue: asyncio.Queue = asyncio.Queue()
        self._block_queues.append(queue)
        try:
            backlog = self.orderer.deliver(start)
        except OutOfRangeError as exc:
            self._block_queues.remove(queue)
            await wire.write_message(writer, {"error": "OUT_OF_RANGE", "message": str(exc)})
            return
        try:
            sent = start - 1
            for block in backlog:
                await wire.write_message(writer, {"block": block})
                sent = block["number"]
            while True:
                block = await queue.get()
                if block["number"] <= sent:
                    continue
                await wire.write_message(writer, {"block": block})
                sent = block["number"]
        finally:
            self._block_queues.remove(queue)


class CaService:
    """HTTP endpoints for registration and enrollment."""

    def __init__(self, ca: CertificateAuthority, host: str, port: int):
        self.ca = ca
        self.server = HttpServer(host, port)
        self.server.route("POST", "/register", self._register)
        self.server.route("POST", "/enroll", self._enroll)
        self.server.route("GET", "/root", self._root)

    async def start(self) -> None:
        await self.server.start()

    async def stop(self) -> None:
        await self.server.stop()

    async def _register(self, request: Request) -> Response:
        body = request.json()
        try:
            secret = self.ca.register(
                body["adminCert"],
                body["participantId"],
                EntityType(body["entityType"]),
                body["boundDid"],
            )
            return Response.json(secret, 201)
        except MembershipError as exc:
            status = 403 if exc.code is MembershipErrorCode.AUTH_DENIED else 409
            return Response.json({"error": exc.code.value, "message": str(exc)}, status)
        except (KeyError, ValueError) as exc:
            return Response.json({"error": "BAD_REQUEST", "message": str(exc)}, 400)

    async def _enroll(self, request: Request) -> Response:
        body = request.json()
        try:
            cert = self.ca.enroll(
                body["participantId"],
                body["secret"],
                RsaPublicKey.from_wire(body["publicKey"]),
            )
            return Response.json(cert, 201)
        except MembershipError as exc:
            return Response.json({"error": exc.code.value, "message": str(exc)}, 403)
        except (KeyError, ValueError) as exc:
            return Response.json({"error": "BAD_REQUEST", "message": str(exc)}, 400)

    async def _root(self, request: Request) -> Response:
        return Response.json({"publicKey": self.ca.root_public_key.to_wire()})


BLOB_STATUS = {
    BlobErrorCode.NOT_FOUND: 404,
    BlobErrorCode.TOO_LARGE: 413,
    BlobErrorCode.CORRUPT: 502,
    BlobErrorCode.MISSING_CHILD: 422,
    BlobErrorCode.BAD_NAME: 422,
    BlobErrorCode.BAD_CID: 422,
}


class BlobService:
    """HTTP endpoints over a local BlobStore."""

    def __init__(self, store: BlobStore, host: str, port: int):
        self.store = store
        self.server = HttpServer(host, port)
        self.server.route("POST", "/blob", self._put_blob)
        self.server.route("POST", "/dir", self._put_dir)
        self.server.route("GET", "/cat/<cid>", self._cat)
        self.server.route("POST", "/pin/<cid>", self._pin)
        self.server.route("DELETE", "/pin/<cid>", self._unpin)
        self.server.route("POST", "/gc", self._gc)

    async def start(self) -> None:
        await self.server.start()

    async def stop(self) -> None:
        await self.server.stop()

    async def _put_blob(self, request: Request) -> Response:
        try:
            return Response.json({"cid": self.store.put_blob(request.body)}, 201)
        except BlobError as exc:
            return Response.json(
                {"error": exc.code.value, "message": str(exc)}, BLOB_STATUS[exc.code]
            )

    async def _put_dir(self, request: Request) -> Response:
        body = request.json()
        try:
            entries = [(name, cid) for name, cid in body["entries"]]
            return Response.json({"cid": self.store.put_directory(entries)}, 201)
        except BlobError as exc:
            return Response.json(
                {"error": exc.code.value, "message": str(exc)}, BLOB_STATUS[exc.code]
            )
        except (KeyError, TypeError, ValueError) as exc:
            return Response.json({"error": "BAD_REQUEST", "message": str(exc)}, 400)

    async def _cat(self, request: Request) -> Response:
        try:
            content = self.store.get(request.params["cid"])
        except BlobError as exc:
            return Response.json(
                {"error": exc.code.value, "message": str(exc)}, BLOB_STATUS[exc.code]
            )
        if isinstance(content, DirectoryManifest):
            return Response.json(
                {"entries": [list(e) for e in content.entries]},
                headers={"X-Content-Kind": "directory"},
            )
        return Response(
            200,
            content,
            {"Content-Type": "application/octet-stream", "X-Content-Kind": "blob"},
        )

    async def _pin(self, request: Request) -> Response:
        try:
            self.store.pin(request.params["cid"])
            return Response.json({"pinned": request.params["cid"]})
        except BlobError as exc:
            return Response.json(
                {"error": exc.code.value, "message": str(exc)}, BLOB_STATUS[exc.code]
            )

    async def _unpin(self, request: Request) -> Response:
        try:
            self.store.unpin(request.params["cid"])
            return Response.json({"unpinned": request.params["cid"]})
        except BlobError as exc:
            return Response.json(
                {"error": exc.code.value, "message": str(exc)}, BLOB_STATUS[exc.code]
            )

    async def _gc(self, request: Request) -> Response:
        return Response.json({"removed": self.store.gc()})
