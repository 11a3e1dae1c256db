"""In-process local network: CA, blob store, Raft orderers, peers, gateway.

Each node runs its own asyncio loop on a daemon thread and talks to the
others over real TCP/HTTP on localhost, so tests and the bench harness
exercise the same wire paths as a multi-host deployment.
"""
from __future__ import annotations

import asyncio
import socket
import threading
import uuid
from pathlib import Path
from typing import Optional

import httpx

from . import client, config, crypto, wire
from .blobstore import BlobStore
from .gateway import GatewayService
from .membership import CertificateAuthority
from .model import EntityType, RsaPublicKey
from .peer import Peer
from .services import BlobService, CaService, OrdererService, PeerService
from .ledger import make_genesis_block


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class NodeRuntime:
    """One event loop on one daemon thread."""

    def __init__(self, name: str):
        self.loop = asyncio.new_event_loop()
        self.thread = threading.Thread(target=self._run, name=name, daemon=True)
        self._started = threading.Event()

    def _run(self) -> None:
        asyncio.set_event_loop(self.loop)
        self._started.set()
        self.loop.run_forever()

    def start(self) -> None:
        self.thread.start()
        self._started.wait()

    def call(self, coro, timeout: float = 30.0):
        return asyncio.run_coroutine_threadsafe(coro, self.loop).result(timeout)

    def stop(self) -> None:
        async def drain() -> None:
            tasks = [t for t in asyncio.all_tasks() if t is not asyncio.current_task()]
            for task in tasks:
                task.cancel()
            await asyncio.gather(*tasks, return_exceptions=True)

        try:
            asyncio.run_coroutine_threadsafe(drain(), self.loop).result(timeout=5)
        except Exception:
            pass
        self.loop.call_soon_threadsafe(self.loop.stop)
        self.thread.join(timeout=5)
        if not self.loop.is_running():
            self.loop.close()


class LocalNetwork:
    def __init__(
        self,
        workdir: str | Path,
        n_peers: int = 2,
        n_orderers: int = 3,
        endorsement_k: int = 1,
        cut_policy: config.BlockCutPolicy = config.BlockCutPolicy(),
        max_in_flight: int = 4096,
    ):
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.n_peers = n_peers
        self.n_orderers = n_orderers
        self.cut_policy = cut_policy
        self.max_in_flight = max_in_flight

        # Trust anchors and the pre-assigned Higher Authority.
        self.ca_root_key = crypto.generate_private_key()
        self.ca = CertificateAuthority(self.ca_root_key)
        self.ha_did = "did:insure:higher-authority-0001"
        self.ha_did_key = crypto.generate_private_key()
        self.ha_msp_key = crypto.generate_private_key()
        ha_doc = client.build_did_document(
            self.ha_did,
            RsaPublicKey.of_private(self.ha_did_key),
            EntityType.HIGHER_AUTHORITY,
            self.ha_did_key,
        )
        ha_cert = self.ca.issue_certificate(
            "ha-admin",
            EntityType.HIGHER_AUTHORITY,
            self.ha_did,
            RsaPublicKey.of_private(self.ha_msp_key),
        )
        self.ha_credential = client.Credential(ha_cert, self.ha_msp_key)

        self.peer_keys = [crypto.generate_private_key() for _ in range(n_peers)]
        self.peer_addrs = [f"127.0.0.1:{free_port()}" for _ in range(n_peers)]
        self.orderer_addrs = [f"127.0.0.1:{free_port()}" for _ in range(n_orderers)]
        self.ca_addr = f"127.0.0.1:{free_port()}"
        self.blob_addr = f"127.0.0.1:{free_port()}"
        self.gateway_addr = f"127.0.0.1:{free_port()}"

        self.genesis_config = config.make_genesis_config(
            ca_root_cert={"publicKey": self.ca.root_public_key.to_wire()},
            ha_did_document=ha_doc,
            peers=[
                {
                    "id": f"peer{i}",
                    "addr": self.peer_addrs[i],
                    "publicKey": RsaPublicKey.of_private(self.peer_keys[i]).to_wire(),
                }
                for i in range(n_peers)
            ],
            orderers=[
                {"id": f"orderer{i}", "addr": self.orderer_addrs[i]}
                for i in range(n_orderers)
            ],
            endorsement_k=endorsement_k,
        )
        self.genesis_block = make_genesis_block(self.genesis_config)

        self._runtimes: list[NodeRuntime] = []
        self._services: list[tuple[NodeRuntime, object]] = []
        self.peers: list[Peer] = []
        self.blob_store = BlobStore(self.workdir / "blobstore")

    # ------------------------------------------------------------------ lifecycle

    def start(self) -> None:
        cluster = {
            f"orderer{i}": self.orderer_addrs[i] for i in range(self.n_orderers)
        }
        for i in range(self.n_orderers):
            runtime = NodeRuntime(f"orderer{i}")
            runtime.start()
            service = OrdererService(
                f"orderer{i}",
                self.orderer_addrs[i],
                cluster,
                self.genesis_block,
                policy=self.cut_policy,
                seed=1000 + i,
            )
            runtime.call(service.start())
            self._runtimes.append(runtime)
            self._services.append((runtime, service))

        for i in range(self.n_peers):
            runtime = NodeRuntime(f"peer{i}")
            runtime.start()
            peer = Peer(
                f"peer{i}",
                self.peer_keys[i],
                self.genesis_block,
                data_dir=self.workdir / f"peer{i}",
            )
            if i == 0:
                peer.pin_callback = self._pin_if_present
            self.peers.append(peer)
            host, port = wire.parse_addr(self.peer_addrs[i])
            service = PeerService(peer, host, port, self.orderer_addrs)
            runtime.call(service.start())
            self._runtimes.append(runtime)
            self._services.append((runtime, service))

        runtime = NodeRuntime("ca")
        runtime.start()
        ca_host, ca_port = wire.parse_addr(self.ca_addr)
        ca_service = CaService(self.ca, ca_host, ca_port)
        runtime.call(ca_service.start())
        self._runtimes.append(runtime)
        self._services.append((runtime, ca_service))

        runtime = NodeRuntime("blob")
        runtime.start()
        blob_host, blob_port = wire.parse_addr(self.blob_addr)
        blob_service = BlobService(self.blob_store, blob_host, blob_port)
        runtime.call(blob_service.start())
        self._runtimes.append(runtime)
        self._services.append((runtime, blob_service))

        runtime = NodeRuntime("gateway")
        runtime.start()
        gw_host, gw_port = wire.parse_addr(self.gateway_addr)
        gateway = GatewayService(
            gw_host,
            gw_port,
            peer_addr=self.peer_addrs[0],
            orderer_addrs=self.orderer_addrs,
            ca_root_key=self.ca.root_public_key,
            storage_addr=self.blob_addr,
            max_in_flight=self.max_in_flight,
        )
        runtime.call(gateway.start())
        self._runtimes.append(runtime)
        self._services.append((runtime, gateway))
        self.gateway = gateway

    def _pin_if_present(self, cid: str) -> None:
        if self.blob_store.has(cid):
            self.blob_store.pin(cid)

    def stop(self) -> None:
        for runtime, service in reversed(self._services):
            try:
                runtime.call(service.stop(), timeout=5)
            except Exception:
                pass
        for runtime in reversed(self._runtimes):
            runtime.stop()

    def __enter__(self) -> "LocalNetwork":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    # ------------------------------------------------------------------- helpers

    @property
    def gateway_url(self) -> str:
        return f"http://{self.gateway_addr}"

    @property
    def ca_url(self) -> str:
        return f"http://{self.ca_addr}"

    def peer_state_hashes(self) -> list[dict]:
        return [
            wire.call(addr, {"type": "StateHash"})["ok"] for addr in self.peer_addrs
        ]

    def new_gateway_client(self, credential=None) -> client.GatewayClient:
        return client.GatewayClient(self.gateway_url, credential)


class Participant:
    """A provisioned participant: DID identity plus MSP credential."""

    def __init__(self, did: str, did_key, credential: client.Credential, entity_type: EntityType):
        self.did = did
        self.did_key = did_key
        self.credential = credential
        self.entity_type = entity_type


def provision_participant(
    ca_url: str,
    gateway_url: str,
    admin: Participant,
    participant_id: str,
    entity_type: EntityType,
    did: Optional[str] = None,
    did_key=None,
    msp_key=None,
) -> Participant:
    """Register + enroll at the CA, then store the DID document on-ledger.

    Key material may be supplied so fixtures can reuse keys and skip the
    expensive RSA generation.
    """
    did = did or f"did:insure:{uuid.uuid4().hex[:16]}"
    did_key = did_key or crypto.generate_private_key()
    msp_key = msp_key or crypto.generate_private_key()
    with httpx.Client(timeout=30.0) as http:
        reg = http.post(
            f"{ca_url}/register",
            json={
                "adminCert": admin.credential.certificate,
                "participantId": participant_id,
                "entityType": entity_type.value,
                "boundDid": did,
            },
        )
        reg.raise_for_status()
        secret = reg.json()["secret"]
        enrolled = http.post(
            f"{ca_url}/enroll",
            json={
                "participantId": participant_id,
                "secret": secret,
                "publicKey": RsaPublicKey.of_private(msp_key).to_wire(),
            },
        )
        enrolled.raise_for_status()
        cert = enrolled.json()

    doc = client.build_did_document(
        did, RsaPublicKey.of_private(did_key), entity_type, admin.did_key
    )
    # Commit waits can stretch well past a minute right after a load burst,
    # so allow the full gateway commit window before giving up.
    admin_client = client.GatewayClient(gateway_url, admin.credential, timeout=150.0)
    try:
        admin_client.invoke_ok("createDidDocument", {"document": doc})
    finally:
        admin_client.close()
    return Participant(did, did_key, client.Credential(cert, msp_key), entity_type)
