"""Ordering service logic: Raft-replicated log of transaction envelopes,
deterministically folded into blocks by every orderer.

The replicated log holds two entry kinds: submitted tx envelopes and cut
markers the leader appends when the batch timer expires. Block boundaries
are therefore a pure function of the committed log, so all orderers emit
identical block sequences.
"""
from __future__ import annotations

import random
from typing import Callable, Optional

from . import ledger
from .config import BlockCutPolicy, RaftTiming
from .raft import LEADER, MemoryStorage, RaftNode

ACCEPTED = "accepted"
UNAVAILABLE = "unavailable"


class OutOfRangeError(Exception):
    """Deliver request beyond tip+1."""


class BlockAssembler:
    """Folds the committed entry sequence into blocks; deterministic."""

    def __init__(self, genesis_block: dict, policy: BlockCutPolicy):
        self.policy = policy
        self.chain: list[dict] = [genesis_block]
        self.pending: list[dict] = []

    def apply(self, entry: dict) -> list[dict]:
        """Apply one committed log entry; returns any blocks cut by it."""
        cut: list[dict] = []
        if entry["kind"] == "tx":
            self.pending.append(entry["envelope"])
            if len(self.pending) >= self.policy.max_tx_count:
                cut.append(self._cut())
        elif entry["kind"] == "cut" and self.pending:
            cut.append(self._cut())
        return cut

    def _cut(self) -> dict:
        batch = self.pending[: self.policy.max_tx_count]
        self.pending = self.pending[self.policy.max_tx_count :]
        prev_hash = ledger.block_header_hash(self.chain[-1])
        block = ledger.make_block(len(self.chain), prev_hash, batch)
        self.chain.append(block)
        return block

    @property
    def tip(self) -> int:
        return len(self.chain) - 1

    def deliver(self, start: int) -> list[dict]:
        if start > self.tip + 1:
            raise OutOfRangeError(f"from={start}, tip={self.tip}")
        return self.chain[start:]


class Orderer:
    """One ordering node: Raft core plus the block assembler.

    Drive it with tick(now)/receive(msg, now); outbound Raft messages are
    returned as (dest, msg) pairs for the caller's transport.
    """

    def __init__(
        self,
        node_id: str,
        peer_ids: list[str],
        genesis_block: dict,
        policy: BlockCutPolicy = BlockCutPolicy(),
        timing: RaftTiming = RaftTiming(),
        rng: Optional[random.Random] = None,
        storage: Optional[MemoryStorage] = None,
    ):
        self.node_id = node_id
        self.raft = RaftNode(
            node_id=node_id,
            peer_ids=peer_ids,
            rng=rng or random.Random(),
            storage=storage,
            election_timeout_ms=timing.election_timeout_ms,
            heartbeat_ms=timing.heartbeat_ms,
        )
        self.assembler = BlockAssembler(genesis_block, policy)
        self.policy = policy
        self._cut_deadline: Optional[int] = None
        self.block_listeners: list[Callable[[dict], None]] = []

    # ----------------------------------------------------------------- intake

    def submit(self, envelope: dict, now: int):
        """accepted | ('redirect', leaderId) | unavailable, plus outbound."""
        if self.raft.role == LEADER:
            self.raft.propose({"kind": "tx", "envelope": envelope})
            if self._cut_deadline is None:
                self._cut_deadline = now + self.policy.max_wait_millis
            outbound = self.raft.broadcast_now(now)
            outbound.extend(self._drain(now))
            return ACCEPTED, outbound
        if self.raft.leader_hint and self.raft.leader_hint != self.node_id:
            return ("redirect", self.raft.leader_hint), []
        return UNAVAILABLE, []

    # ---------------------------------------------------------------- driving

    def tick(self, now: int) -> list[tuple[str, dict]]:
        outbound = self.raft.tick(now)
        if (
            self.raft.role == LEADER
            and self._cut_deadline is not None
            and now >= self._cut_deadline
        ):
            self.raft.propose({"kind": "cut"})
            self._cut_deadline = None
            outbound.extend(self.raft.broadcast_now(now))
        outbound.extend(self._drain(now))
        return outbound

    def receive(self, msg: dict, now: int) -> list[tuple[str, dict]]:
        outbound = self.raft.receive(msg, now)
        outbound.extend(self._drain(now))
        return outbound

    def _drain(self, now: int) -> list[tuple[str, dict]]:
        new_blocks = []
        for entry in self.raft.take_committed():
            new_blocks.extend(self.assembler.apply(entry))
        if new_blocks:
            if self.assembler.pending:
                if self.raft.role == LEADER and self._cut_deadline is None:
                    self._cut_deadline = now + self.policy.max_wait_millis
            else:
                self._cut_deadline = None
            for block in new_blocks:
                for listener in self.block_listeners:
                    listener(block)
        return []

    def deliver(self, start: int) -> list[dict]:
        return self.assembler.deliver(start)
