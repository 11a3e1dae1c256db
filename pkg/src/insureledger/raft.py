"""Raft consensus core for the ordering service.

Pure message-driven state machine: callers feed it timer ticks and
messages and send the outbound messages it returns. Randomized election
timeouts come from an injected RNG and time is an integer millisecond
clock, so whole clusters can run deterministically in-process.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Optional

FOLLOWER = "FOLLOWER"
CANDIDATE = "CANDIDATE"
LEADER = "LEADER"

ELECTION_TIMEOUT_MS = (150, 300)
HEARTBEAT_MS = 50
# Replication chunk size. Without a cap, a lagging follower makes every
# AppendEntries carry the whole outstanding suffix, and the repeated
# re-serialization of a growing message can wedge a saturated cluster.
MAX_APPEND_ENTRIES = 32


@dataclass
class LogEntry:
    term: int
    data: Any

    def to_wire(self) -> dict:
        return {"term": self.term, "data": self.data}

    @classmethod
    def from_wire(cls, wire: dict) -> "LogEntry":
        return cls(term=wire["term"], data=wire["data"])


class MemoryStorage:
    """Stable storage stand-in: survives a simulated crash/restart."""

    def __init__(self):
        self.term = 0
        self.voted_for: Optional[str] = None
        self.log: list[dict] = []

    def save_state(self, term: int, voted_for: Optional[str]) -> None:
        self.term = term
        self.voted_for = voted_for

    def save_log(self, log: list[LogEntry]) -> None:
        self.log = [e.to_wire() for e in log]

    def load(self) -> tuple[int, Optional[str], list[LogEntry]]:
        return self.term, self.voted_for, [LogEntry.from_wire(e) for e in self.log]


@dataclass
class RaftNode:
    node_id: str
    peer_ids: list[str]
    rng: random.Random = field(default_factory=random.Random)
    storage: Optional[MemoryStorage] = None
    election_timeout_ms: tuple[int, int] = ELECTION_TIMEOUT_MS
    heartbeat_ms: int = HEARTBEAT_MS

    def __post_init__(self):
        self.current_term = 0
        self.voted_for: Optional[str] = None
        self.log: list[LogEntry] = []
        if self.storage is not None:
            self.current_term, self.voted_for, self.log = self.storage.load()
        self.commit_index = 0
        self.last_applied = 0
        self.role = FOLLOWER
        self.leader_hint: Optional[str] = None
        self.next_index: dict[str, int] = {}
        self.match_index: dict[str, int] = {}
        self._votes: set[str] = set()
        self._election_deadline = 0
        self._next_heartbeat = 0
        self._started = False

    # 1-based log indexing per the usual formulation.
    def _last_log_index(self) -> int:
        return len(self.log)

    def _last_log_term(self) -> int:
        return self.log[-1].term if self.log else 0

    def _term_at(self, index: int) -> int:
        return self.log[index - 1].term if 1 <= index <= len(self.log) else 0

    def _persist_state(self) -> None:
        if self.storage is not None:
            self.storage.save_state(self.current_term, self.voted_for)

    def _persist_log(self) -> None:
        if self.storage is not None:
            self.storage.save_log(self.log)

    def _reset_election_deadline(self, now: int) -> None:
        lo, hi = self.election_timeout_ms
        self._election_deadline = now + self.rng.randint(lo, hi)

    def _become_follower(self, term: int, now: int) -> None:
        if term > self.current_term:
            self.current_term = term
            self.voted_for = None
            self._persist_state()
        self.role = FOLLOWER
        self._votes = set()
        self._reset_election_deadline(now)

    def _become_candidate(self, now: int) -> list[tuple[str, dict]]:
        self.current_term += 1
        self.role = CANDIDATE
        self.voted_for = self.node_id
        self._persist_state()
        self._votes = {self.node_id}
        self.leader_hint = None
        self._reset_election_deadline(now)
        msg = {
            "type": "RequestVote",
            "term": self.current_term,
            "candidateId": self.node_id,
            "lastLogIndex": self._last_log_index(),
            "lastLogTerm": self._last_log_term(),
        }
        if self._quorum(len(self._votes)):
            return self._become_leader(now)
        return [(peer, dict(msg)) for peer in self.peer_ids]

    def _become_leader(self, now: int) -> list[tuple[str, dict]]:
        self.role = LEADER
        self.leader_hint = self.node_id
        self.next_index = {p: self._last_log_index() + 1 for p in self.peer_ids}
        self.match_index = {p: 0 for p in self.peer_ids}
        self._next_heartbeat = now  # heartbeat immediately
        return self._broadcast_append(now)

    def _quorum(self, count: int) -> bool:
        return count * 2 > len(self.peer_ids) + 1

    # ------------------------------------------------------------------ driving

    def tick(self, now: int) -> list[tuple[str, dict]]:
        if not self._started:
            self._started = True
            self._reset_election_deadline(now)
        if self.role == LEADER:
            if now >= self._next_heartbeat:
                return self._broadcast_append(now)
            return []
        if now >= self._election_deadline:
            return self._become_candidate(now)
        return []

    def propose(self, data: Any) -> bool:
        """Leader-only append; returns False when not the leader."""
        if self.role != LEADER:
            return False
        self.log.append(LogEntry(term=self.current_term, data=data))
        self._persist_log()
        if self._quorum(1):  # single-node cluster commits immediately
            self._advance_commit()
        return True

    def take_committed(self) -> list[Any]:
        """Entries newly committed since the previous call, in log order."""
        out = []
        while self.last_applied < self.commit_index:
            self.last_applied += 1
            out.append(self.log[self.last_applied - 1].data)
        return out

    def receive(self, msg: dict, now: int) -> list[tuple[str, dict]]:
        handler = {
            "RequestVote": self._on_request_vote,
            "RequestVoteReply": self._on_request_vote_reply,
            "AppendEntries": self._on_append_entries,
            "AppendEntriesReply": self._on_append_entries_reply,
        }.get(msg["type"])
        if handler is None:
            return []
        return handler(msg, now)

    # ----------------------------------------------------------------- messages

    def _on_request_vote(self, msg: dict, now: int) -> list[tuple[str, dict]]:
        if msg["term"] > self.current_term:
            self._become_follower(msg["term"], now)
        granted = False
        if msg["term"] == self.current_term and self.voted_for in (None, msg["candidateId"]):
            up_to_date = (msg["lastLogTerm"], msg["lastLogIndex"]) >= (
                self._last_log_term(),
                self._last_log_index(),
            )
            if up_to_date:
                granted = True
                self.voted_for = msg["candidateId"]
                self._persist_state()
                self._reset_election_deadline(now)
        reply = {
            "type": "RequestVoteReply",
            "term": self.current_term,
            "voteGranted": granted,
            "from": self.node_id,
        }
        return [(msg["candidateId"], reply)]

    def _on_request_vote_reply(self, msg: dict, now: int) -> list[tuple[str, dict]]:
        if msg["term"] > self.current_term:
            self._become_follower(msg["term"], now)
            return []
        if self.role != CANDIDATE or msg["term"] != self.current_term:
            return []
        if msg["voteGranted"]:
            self._votes.add(msg["from"])
            if self._quorum(len(self._votes)):
                return self._become_leader(now)
        return []

    def _on_append_entries(self, msg: dict, now: int) -> list[tuple[str, dict]]:
        if msg["term"] > self.current_term:
            self._become_follower(msg["term"], now)
        if msg["term"] < self.current_term:
            reply = {
                "type": "AppendEntriesReply",
                "term": self.current_term,
                "success": False,
                "from": self.node_id,
                "matchIndex": 0,
            }
            return [(msg["leaderId"], reply)]
        # Current leader for this term.
        if self.role != FOLLOWER:
            self._become_follower(msg["term"], now)
        self.leader_hint = msg["leaderId"]
        self._reset_election_deadline(now)

        prev_index = msg["prevLogIndex"]
        if prev_index > self._last_log_index() or self._term_at(prev_index) != msg["prevLogTerm"]:
            reply = {
                "type": "AppendEntriesReply",
                "term": self.current_term,
                "success": False,
                "from": self.node_id,
                "matchIndex": 0,
            }
            return [(msg["leaderId"], reply)]

        entries = [LogEntry.from_wire(e) for e in msg["entries"]]
        changed = False
        for offset, entry in enumerate(entries):
            index = prev_index + offset + 1
            if index <= self._last_log_index():
                if self._term_at(index) != entry.term:
                    del self.log[index - 1 :]
                    self.log.append(entry)
                    changed = True
            else:
                self.log.append(entry)
                changed = True
        if changed:
            self._persist_log()
        if msg["leaderCommit"] > self.commit_index:
            self.commit_index = min(msg["leaderCommit"], self._last_log_index())
        reply = {
            "type": "AppendEntriesReply",
            "term": self.current_term,
            "success": True,
            "from": self.node_id,
            "matchIndex": prev_index + len(entries),
        }
        return [(msg["leaderId"], reply)]

    def _on_append_entries_reply(self, msg: dict, now: int) -> list[tuple[str, dict]]:
        if msg["term"] > self.current_term:
            self._become_follower(msg["term"], now)
            return []
        if self.role != LEADER or msg["term"] != self.current_term:
            return []
        follower = msg["from"]
        if msg["success"]:
            self.match_index[follower] = max(self.match_index.get(follower, 0), msg["matchIndex"])
            self.next_index[follower] = self.match_index[follower] + 1
            self._advance_commit()
            if self.next_index[follower] <= self._last_log_index():
                return [(follower, self._append_for(follower))]
            return []
        self.next_index[follower] = max(1, self.next_index.get(follower, 1) - 1)
        return [(follower, self._append_for(follower))]

    def _advance_commit(self) -> None:
        for candidate in range(self._last_log_index(), self.commit_index, -1):
            if self._term_at(candidate) != self.current_term:
                break
            replicated = 1 + sum(
                1 for p in self.peer_ids if self.match_index.get(p, 0) >= candidate
            )
            if self._quorum(replicated):
                self.commit_index = candidate
                break

    def _append_for(self, follower: str) -> dict:
        next_idx = self.next_index.get(follower, self._last_log_index() + 1)
        prev_index = next_idx - 1
        entries = [e.to_wire() for e in self.log[next_idx - 1 : next_idx - 1 + MAX_APPEND_ENTRIES]]
        return {
            "type": "AppendEntries",
            "term": self.current_term,
            "leaderId": self.node_id,
            "prevLogIndex": prev_index,
            "prevLogTerm": self._term_at(prev_index),
            "entries": entries,
            "leaderCommit": self.commit_index,
        }

    def _broadcast_append(self, now: int) -> list[tuple[str, dict]]:
        self._next_heartbeat = now + self.heartbeat_ms
        return [(peer, self._append_for(peer)) for peer in self.peer_ids]

    def broadcast_now(self, now: int) -> list[tuple[str, dict]]:
        """Immediate replication push, used right after propose()."""
        if self.role != LEADER:
            return []
        return self._broadcast_append(now)
