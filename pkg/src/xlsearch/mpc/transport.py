"""Length-prefixed framing and the pluggable CP <-> CSP transports.

Wire layout of one frame::

    u32 body_length | u32 session_id | u16 protocol_id | u16 step | payload

All integers are big-endian.  ``payload`` is UTF-8 JSON whose integer
fields are canonical lowercase hex strings.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable

from ..errors import ProtocolError

log = logging.getLogger(__name__)

LENGTH = struct.Struct(">I")
HEADER = struct.Struct(">IHH")
MAX_FRAME = 64 * 1024 * 1024


class ProtocolId(IntEnum):
    PING = 0
    REKEY = 1
    SMD = 2
    ZERO_TEST = 3
    SIGN_TEST = 4
    REVEAL = 5
    ERROR = 0xFFFF


@dataclass(frozen=True)
class Frame:
    session: int
    protocol: ProtocolId
    step: int
    payload: dict = field(default_factory=dict)


def encode_frame(frame: Frame) -> bytes:
    body = json.dumps(frame.payload, separators=(",", ":"), sort_keys=True).encode("utf-8")
    head = HEADER.pack(frame.session, int(frame.protocol), frame.step)
    return LENGTH.pack(len(head) + len(body)) + head + body


def decode_frame(data: bytes) -> Frame:
    if len(data) < LENGTH.size + HEADER.size:
        raise ProtocolError("truncated frame")
    (length,) = LENGTH.unpack_from(data)
    if length != len(data) - LENGTH.size:
        raise ProtocolError(f"frame length {length} does not match {len(data) - LENGTH.size} bytes")
    session, protocol, step = HEADER.unpack_from(data, LENGTH.size)
    try:
        payload = json.loads(data[LENGTH.size + HEADER.size :].decode("utf-8"))
        protocol = ProtocolId(protocol)
    except ValueError as exc:
        raise ProtocolError(f"malformed frame: {exc}") from None
    if not isinstance(payload, dict):
        raise ProtocolError("frame payload must be a JSON object")
    return Frame(session, protocol, step, payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            raise ProtocolError("peer closed the connection")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> bytes:
    head = _recv_exact(sock, LENGTH.size)
    (length,) = LENGTH.unpack(head)
    if length > MAX_FRAME:
        raise ProtocolError(f"frame of {length} bytes is too large")
    return head + _recv_exact(sock, length)


def error_frame(request: Frame, exc: Exception) -> Frame:
    return Frame(
        request.session,
        ProtocolId.ERROR,
        request.step + 1,
        {"error": getattr(exc, "code", "error"), "message": str(exc)},
    )


# -- transports ---------------------------------------------------------------


class Transport:
    """Request/response channel from CP to CSP."""

    def exchange(self, request: Frame) -> Frame:
        raise NotImplementedError

    def close(self) -> None:
        pass


class InProcessTransport(Transport):
    """Byte-level loopback: frames are fully encoded and decoded both ways."""

    def __init__(self, handler: Callable[[bytes], bytes]):
        self._handler = handler
        self.bytes_sent = 0
        self.bytes_received = 0
        self._closed = False

    def exchange(self, request: Frame) -> Frame:
        if self._closed:
            raise ProtocolError("transport closed")
        raw = encode_frame(request)
        self.bytes_sent += len(raw)
        reply = self._handler(raw)
        self.bytes_received += len(reply)
        return decode_frame(reply)

    def close(self) -> None:
        self._closed = True


class SocketTransport(Transport):
    """One persistent TCP connection; concurrent callers are serialized."""

    def __init__(self, host: str, port: int, timeout: float = 60.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ProtocolError(f"cannot reach CSP at {host}:{port}: {exc}") from None
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._lock = threading.Lock()

    def exchange(self, request: Frame) -> Frame:
        with self._lock:
            try:
                self._sock.sendall(encode_frame(request))
                return decode_frame(read_frame(self._sock))
            except OSError as exc:
                raise ProtocolError(f"transport failure: {exc}") from None

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class _FrameHandler(socketserver.BaseRequestHandler):
    def setup(self) -> None:
        self.server.connections.add(self.request)

    def finish(self) -> None:
        self.server.connections.discard(self.request)

    def handle(self) -> None:
        self.request.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        while not self.server.stopping.is_set():
            try:
                raw = read_frame(self.request)
            except (ProtocolError, OSError):
                return
            reply = self.server.frame_handler(raw)
            try:
                self.request.sendall(reply)
            except OSError:
                return


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class FrameServer:
    """Serves a ``bytes -> bytes`` frame handler over TCP in a background thread."""

    def __init__(self, frame_handler: Callable[[bytes], bytes], host: str = "127.0.0.1", port: int = 0):
        try:
            self._server = _Server((host, port), _FrameHandler)
        except OSError as exc:
            raise ProtocolError(f"cannot bind {host}:{port}: {exc}") from None
        self._server.frame_handler = frame_handler
        self._server.stopping = threading.Event()
        self._server.connections = set()
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> "FrameServer":
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.stopping.set()
        if self._thread.is_alive():
            self._server.shutdown()
        for conn in list(self._server.connections):
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        self._server.server_close()


def wire_ints(values) -> Any:
    """Hex-encode ints inside nested lists for a payload."""
    if isinstance(values, (list, tuple)):
        return [wire_ints(v) for v in values]
    return format(values, "x")


def unwire_ints(values) -> Any:
    if isinstance(values, list):
        return [unwire_ints(v) for v in values]
    if not isinstance(values, str):
        raise ProtocolError(f"expected hex integer, got {type(values).__name__}")
    try:
        return int(values, 16)
    except ValueError:
        raise ProtocolError(f"bad hex integer {values!r}") from None
