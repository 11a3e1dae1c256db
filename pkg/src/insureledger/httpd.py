"""Minimal asyncio HTTP/1.1 server and client.

Just enough HTTP for the gateway, CA, and blob services: one request per
connection, Content-Length bodies, permissive CORS so the browser client
can talk to the gateway directly. A bounded in-flight limit aborts excess
connections, which is the measurable dropped-connection condition.
"""
from __future__ import annotations

import asyncio
import json
import re
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable, Optional
from urllib.parse import parse_qsl, unquote, urlsplit

STATUS_TEXT = {
    200: "OK",
    201: "Created",
    204: "No Content",
    400: "Bad Request",
    401: "Unauthorized",
    403: "Forbidden",
    404: "Not Found",
    409: "Conflict",
    413: "Payload Too Large",
    422: "Unprocessable Entity",
    500: "Internal Server Error",
    502: "Bad Gateway",
    503: "Service Unavailable",
}

CORS_HEADERS = {
    "Access-Control-Allow-Origin": "*",
    "Access-Control-Allow-Methods": "GET, POST, PATCH, DELETE, OPTIONS",
    "Access-Control-Allow-Headers": "*",
}

MAX_BODY_BYTES = 64 * 1024 * 1024


@dataclass
class Request:
    method: str
    path: str
    query: dict[str, str]
    headers: dict[str, str]
    body: bytes
    params: dict[str, str] = field(default_factory=dict)

    def json(self) -> Any:
        return json.loads(self.body.decode("utf-8")) if self.body else None


@dataclass
class Response:
    status: int
    body: bytes = b""
    headers: dict[str, str] = field(default_factory=dict)

    @classmethod
    def json(
        cls, payload: Any, status: int = 200, headers: Optional[dict[str, str]] = None
    ) -> "Response":
        return cls(
            status=status,
            body=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json", **(headers or {})},
        )


Handler = Callable[[Request], Awaitable[Response]]


class HttpServer:
    def __init__(self, host: str, port: int, max_in_flight: Optional[int] = None):
        self.host = host
        self.port = port
        self.max_in_flight = max_in_flight
        self._routes: list[tuple[str, re.Pattern, Handler]] = []
        self._in_flight = 0
        self._server: Optional[asyncio.AbstractServer] = None

    def route(self, method: str, pattern: str, handler: Handler) -> None:
        """Pattern segments like <name> capture path parameters."""
        regex = re.compile(
            "^" + re.sub(r"<([a-zA-Z_][a-zA-Z0-9_]*)>", r"(?P<\1>[^/]+)", pattern) + "$"
        )
        self._routes.append((method.upper(), regex, handler))

    async def start(self) -> None:
        self._server = await asyncio.start_server(
            self._handle_connection, self.host, self.port
        )

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def _handle_connection(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        if self.max_in_flight is not None and self._in_flight >= self.max_in_flight:
            transport = writer.transport
            if transport is not None:
                transport.abort()  # reset before any response: a dropped connection
            return
        self._in_flight += 1
        try:
            request = await self._read_request(reader)
            if request is None:
                return
            response = await self._dispatch(request)
            await self._write_response(writer, response)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        except Exception as exc:
            try:
                await self._write_response(
                    writer, Response.json({"error": "INTERNAL", "message": str(exc)}, 500)
                )
            except Exception:
                pass
        finally:
            self._in_flight -= 1
            writer.close()
            try:
                await writer.wait_closed()
            except Exception:
                pass

    async def _read_request(self, reader: asyncio.StreamReader) -> Optional[Request]:
        try:
            raw_head = await reader.readuntil(b"\r\n\r\n")
        except (asyncio.IncompleteReadError, asyncio.LimitOverrunError, ConnectionError):
            return None
        head = raw_head.decode("latin-1")
        lines = head.split("\r\n")
        parts = lines[0].split(" ")
        if len(parts) < 3:
            return None
        method, target = parts[0], parts[1]
        headers = {}
        for line in lines[1:]:
            if ":" in line:
                name, _, value = line.partition(":")
                headers[name.strip().lower()] = value.strip()
        length = int(headers.get("content-length", "0") or "0")
        if length > MAX_BODY_BYTES:
            return None
        body = await reader.readexactly(length) if length else b""
        split = urlsplit(target)
        query = dict(parse_qsl(split.query))
        return Request(
            method=method.upper(),
            path=unquote(split.path),
            query=query,
            headers=headers,
            body=body,
        )

    async def _dispatch(self, request: Request) -> Response:
        if request.method == "OPTIONS":
            return Response(204)
        for method, regex, handler in self._routes:
            match = regex.match(request.path)
            if match and method == request.method:
                request.params = match.groupdict()
                return await handler(request)
        return Response.json({"error": "NOT_FOUND", "message": request.path}, 404)

    async def _write_response(self, writer: asyncio.StreamWriter, response: Response) -> None:
        headers = {
            "Content-Length": str(len(response.body)),
            "Connection": "close",
            **CORS_HEADERS,
            **response.headers,
        }
        head = f"HTTP/1.1 {response.status} {STATUS_TEXT.get(response.status, '')}\r\n"
        head += "".join(f"{k}: {v}\r\n" for k, v in headers.items())
        writer.write(head.encode("latin-1") + b"\r\n" + response.body)
        await writer.drain()


async def http_request(
    url: str,
    method: str = "GET",
    body: bytes = b"",
    headers: Optional[dict[str, str]] = None,
    timeout: float = 60.0,
) -> tuple[int, dict[str, str], bytes]:
    """Tiny one-shot HTTP client; one connection per request."""
    split = urlsplit(url)
    host = split.hostname or "127.0.0.1"
    port = split.port or 80
    target = split.path or "/"
    if split.query:
        target += "?" + split.query
    reader, writer = await asyncio.open_connection(host, port)
    try:
        head = f"{method} {target} HTTP/1.1\r\nHost: {host}\r\nConnection: close\r\n"
        head += f"Content-Length: {len(body)}\r\n"
        for name, value in (headers or {}).items():
            head += f"{name}: {value}\r\n"
        writer.write(head.encode("latin-1") + b"\r\n" + body)
        await writer.drain()
        raw = await asyncio.wait_for(reader.read(-1), timeout)
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except Exception:
            pass
    if not raw:
        raise ConnectionResetError("empty response")
    head_raw, _, payload = raw.partition(b"\r\n\r\n")
    lines = head_raw.decode("latin-1").split("\r\n")
    status = int(lines[0].split(" ")[1])
    resp_headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, _, value = line.partition(":")
            resp_headers[name.strip().lower()] = value.strip()
    return status, resp_headers, payload
