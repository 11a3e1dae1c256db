"""Length-prefixed message framing for the peer and orderer TCP APIs.

Frame layout: 1-byte schema tag, 4-byte big-endian payload length, then a
canonical-JSON payload. Tag 1 is the only schema in this version.
"""
from __future__ import annotations

import asyncio
import json
import socket
import struct
from typing import Any, Optional

SCHEMA_TAG = 1
MAX_FRAME_BYTES = 64 * 1024 * 1024


class WireError(Exception):
    pass


def encode_frame(message: Any) -> bytes:
    payload = json.dumps(message, separators=(",", ":")).encode("utf-8")
    if len(payload) > MAX_FRAME_BYTES:
        raise WireError(f"frame too large: {len(payload)}")
    return struct.pack(">BI", SCHEMA_TAG, len(payload)) + payload


async def read_message(reader: asyncio.StreamReader) -> Optional[Any]:
    try:
        header = await reader.readexactly(5)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None
    tag, length = struct.unpack(">BI", header)
    if tag != SCHEMA_TAG:
        raise WireError(f"unknown schema tag {tag}")
    if length > MAX_FRAME_BYTES:
        raise WireError(f"frame too large: {length}")
    try:
        payload = await reader.readexactly(length)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None
    return json.loads(payload.decode("utf-8"))


async def write_message(writer: asyncio.StreamWriter, message: Any) -> None:
    writer.write(encode_frame(message))
    await writer.drain()


async def call_async(addr: str, message: Any, timeout: float = 30.0) -> Any:
    """One-shot request/response against a node's TCP API."""
    host, port = parse_addr(addr)
    reader, writer = await asyncio.open_connection(host, port)
    try:
        await write_message(writer, message)
        reply = await asyncio.wait_for(read_message(reader), timeout)
        if reply is None:
            raise WireError("connection closed before reply")
        return reply
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except Exception:
            pass


def call(addr: str, message: Any, timeout: float = 30.0) -> Any:
    """Blocking variant of call_async for CLI and tests."""
    host, port = parse_addr(addr)
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall(encode_frame(message))
        sock.settimeout(timeout)
        header = _recv_exact(sock, 5)
        tag, length = struct.unpack(">BI", header)
        if tag != SCHEMA_TAG:
            raise WireError(f"unknown schema tag {tag}")
        payload = _recv_exact(sock, length)
        return json.loads(payload.decode("utf-8"))


def _recv_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise WireError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)
