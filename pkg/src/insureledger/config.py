"""Dataclass configs for nodes and the gateway, plus genesis helpers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class BlockCutPolicy:
    max_tx_count: int = 10
    max_wait_millis: int = 500


@dataclass(frozen=True)
class RaftTiming:
    election_timeout_ms: tuple[int, int] = (150, 300)
    heartbeat_ms: int = 50
    tick_ms: int = 10


@dataclass
class GatewayConfig:
    listen_addr: str
    peer_addr: str
    orderer_addrs: list[str]
    ca_root: dict
    max_in_flight: int = 4096

    @classmethod
    def from_file(cls, path: str | Path) -> "GatewayConfig":
        raw = json.loads(Path(path).read_text())
        return cls(
            listen_addr=raw["listenAddr"],
            peer_addr=raw["peerAddr"],
            orderer_addrs=list(raw["ordererAddrs"]),
            ca_root=raw["caRoot"],
            max_in_flight=int(raw.get("maxInFlight", 4096)),
        )

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "listenAddr": self.listen_addr,
                    "peerAddr": self.peer_addr,
                    "ordererAddrs": self.orderer_addrs,
                    "caRoot": self.ca_root,
                    "maxInFlight": self.max_in_flight,
                },
                indent=2,
            )
        )


def make_genesis_config(
    ca_root_cert: dict,
    ha_did_document: dict,
    peers: list[dict],
    orderers: list[dict],
    endorsement_k: int = 1,
) -> dict:
    """Genesis config: trust anchors plus static cluster membership."""
    return {
        "caRootCert": ca_root_cert,
        "haDidDocument": ha_did_document,
        "endorsementPolicy": {"k": endorsement_k},
        "orderers": orderers,
        "peers": peers,
    }


def load_genesis(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def save_genesis(config: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config, indent=2))
