"""Version-1 renderer wire protocol: newline-delimited JSON messages.

One message per line. The peer greets with ``hello``, the client sends
``render`` requests with strictly increasing ids and finally ``shutdown``:

    peer   -> client  {"type":"hello","version":1,"feature_dim":D}
    client -> peer    {"type":"render","id":k,"samples":[[...],...]}
    peer   -> client  {"type":"features","id":k,"data":[[...],...]}
    peer   -> client  {"type":"error","id":k,"message":"..."}
    client -> peer    {"type":"shutdown"}

The transport is the peer's stdin/stdout when spawned as a subprocess, or
a TCP stream (`tcp:host:port`); the grammar is identical either way.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import socket
import subprocess
import threading

import numpy as np

from .attributes import SampleBatch
from .errors import PeerError, ProtocolError

__all__ = [
    "PROTOCOL_VERSION",
    "encode_message",
    "decode_message",
    "PeerSession",
    "open_external",
    "ExternalRenderer",
]

PROTOCOL_VERSION = 1

DEFAULT_TIMEOUT = 300.0  # seconds per request

_FIELD_ORDER = {
    "hello": ("version", "feature_dim"),
    "render": ("id", "samples"),
    "features": ("id", "data"),
    "error": ("id", "message"),
    "shutdown": (),
}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check_id(v):
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise ProtocolError(f"malformed message: id must be a non-negative integer, got {v!r}")


def _check_rows(rows, field: str):
    if not isinstance(rows, list) or not rows:
        raise ProtocolError(f"malformed message: {field} must be a non-empty list of rows")
    width = None
    for row in rows:
        if not isinstance(row, list) or not row:
            raise ProtocolError(f"malformed message: {field} rows must be non-empty lists")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ProtocolError(f"malformed message: ragged {field} rows")
        for v in row:
            if not _is_number(v):
                raise ProtocolError(f"malformed message: non-finite or non-numeric {field} value")


def decode_message(line: str) -> dict:
    """Parse and validate one protocol line into a message dict."""
    try:
        msg = json.loads(line, parse_constant=lambda c: math.nan)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message: not valid JSON ({exc})") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("malformed message: not an object")
    mtype = msg.get("type")
    if mtype not in _FIELD_ORDER:
        raise ProtocolError(f"malformed message: unknown type {mtype!r}")
    expected = set(_FIELD_ORDER[mtype]) | {"type"}
    if set(msg) != expected:
        raise ProtocolError(
            f"malformed message: {mtype} must have exactly fields {sorted(expected)}"
        )
    if mtype == "hello":
        if not isinstance(msg["version"], int) or isinstance(msg["version"], bool):
            raise ProtocolError("malformed message: hello version must be an integer")
        fd = msg["feature_dim"]
        if not isinstance(fd, int) or isinstance(fd, bool) or fd < 1:
            raise ProtocolError("malformed message: feature_dim must be a positive integer")
    elif mtype == "render":
        _check_id(msg["id"])
        _check_rows(msg["samples"], "samples")
    elif mtype == "features":
        _check_id(msg["id"])
        _check_rows(msg["data"], "data")
    elif mtype == "error":
        _check_id(msg["id"])
        if not isinstance(msg["message"], str):
            raise ProtocolError("malformed message: error message must be a string")
    return msg


def encode_message(msg: dict) -> str:
    """Serialize a message dict to its canonical single-line form."""
    mtype = msg.get("type")
    if mtype not in _FIELD_ORDER:
        raise ProtocolError(f"cannot encode message of type {mtype!r}")
    ordered = {"type": mtype}
    for key in _FIELD_ORDER[mtype]:
        if key not in msg:
            raise ProtocolError(f"cannot encode {mtype}: missing field {key!r}")
        ordered[key] = msg[key]
    line = json.dumps(ordered, separators=(",", ":"), allow_nan=False)
    return line + "\n"


# ---------------------------------------------------------------------------
# transports


class _PipeChannel:
    """Line transport over a spawned subprocess with a reader thread."""

    def __init__(self, command: list[str]):
        self.proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=None,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def send_line(self, line: str):
        try:
            self.proc.stdin.write(line)
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ProtocolError(f"peer pipe closed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise ProtocolError(f"timeout after {timeout:.0f} s waiting for peer") from None
        if line is None:
            raise ProtocolError("peer closed the stream")
        return line

    def close(self):
        try:
            if self.proc.stdin and not self.proc.stdin.closed:
                self.proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass
        try:
            self.proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class _SocketChannel:
    """Line transport over a TCP stream."""

    def __init__(self, host: str, port: int, timeout: float):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.file = self.sock.makefile("rw", encoding="utf-8", newline="\n")

    def send_line(self, line: str):
        try:
            self.file.write(line)
            self.file.flush()
        except OSError as exc:
            raise ProtocolError(f"peer socket closed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        self.sock.settimeout(timeout)
        try:
            line = self.file.readline()
        except socket.timeout:
            raise ProtocolError(f"timeout after {timeout:.0f} s waiting for peer") from None
        if not line:
            raise ProtocolError("peer closed the stream")
        return line

    def close(self):
        try:
            self.file.close()
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class PeerSession:
    """One live renderer peer; render calls must be serialized per session."""

    def __init__(self, channel, timeout: float = DEFAULT_TIMEOUT):
        self._channel = channel
        self.timeout = timeout
        self._next_id = 0
        self._closed = False
        hello = decode_message(self._channel.recv_line(timeout))
        if hello["type"] != "hello":
            self._abort()
            raise ProtocolError(f"expected hello, got {hello['type']!r}")
        if hello["version"] != PROTOCOL_VERSION:
            self._abort()
            raise ProtocolError(
                f"handshake version mismatch: peer speaks {hello['version']}, "
                f"client speaks {PROTOCOL_VERSION}"
            )
        self.feature_dim = hello["feature_dim"]

    def _abort(self):
        self._closed = True
        self._channel.close()

    def render(self, samples) -> np.ndarray:
        """Send one render request and return its features as an array."""
        if self._closed:
            raise ProtocolError("session is closed")
        rows = np.asarray(samples, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ProtocolError("render needs a non-empty 2-d sample array")
        request_id = self._next_id
        self._next_id += 1
        self._channel.send_line(
            encode_message({"type": "render", "id": request_id, "samples": rows.tolist()})
        )
        reply = decode_message(self._channel.recv_line(self.timeout))
        if reply["type"] == "error":
            if reply["id"] != request_id:
                raise ProtocolError(
                    f"protocol desync: reply id {reply['id']} != request id {request_id}"
                )
            raise PeerError(reply["message"])
        if reply["type"] != "features":
            raise ProtocolError(f"expected features, got {reply['type']!r}")
        if reply["id"] != request_id:
            raise ProtocolError(
                f"protocol desync: reply id {reply['id']} != request id {request_id}"
            )
        data = np.asarray(reply["data"], dtype=np.float64)
        if data.shape[0] != rows.shape[0]:
            raise ProtocolError(
                f"peer returned {data.shape[0]} feature rows for {rows.shape[0]} samples"
            )
        if data.shape[1] != self.feature_dim:
            raise ProtocolError(
                f"peer returned dim {data.shape[1]}, handshake declared {self.feature_dim}"
            )
        return data

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            self._channel.send_line(encode_message({"type": "shutdown"}))
        except ProtocolError:
            pass
        self._channel.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_external(spec: str, timeout: float = DEFAULT_TIMEOUT) -> PeerSession:
    """Open a session from a renderer spec.

    ``tcp:host:port`` connects over TCP; anything else is treated as a
    command line to spawn with the protocol on its stdin/stdout.
    """
    if spec.startswith("tcp:"):
        rest = spec[len("tcp:") :]
        host, sep, port = rest.rpartition(":")
        if not sep or not host or not port.isdigit():
            raise ProtocolError(f"bad tcp address {spec!r}, expected tcp:host:port")
        return PeerSession(_SocketChannel(host, int(port), timeout), timeout=timeout)
    command = shlex.split(spec)
    if not command:
        raise ProtocolError("empty renderer command")
    return PeerSession(_PipeChannel(command), timeout=timeout)


class ExternalRenderer:
    """Renderer adapter over a live peer session."""

    def __init__(self, session: PeerSession):
        self.session = session

    @property
    def feature_dim(self) -> int:
        return self.session.feature_dim

    def render(self, batch: SampleBatch) -> np.ndarray:
        return self.session.render(batch.values)

    def close(self):
        self.session.close()
