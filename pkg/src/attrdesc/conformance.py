"""Conformance checks for third-party renderer peers.

    python -m attrdesc.conformance --schema schema.cfg [--seed N] -- <peer command...>

Exercises a peer with the handshake, malformed lines (which must draw an
error reply, not kill the peer), an oversized batch, and a final valid
render plus shutdown. Exit status 0 means every check passed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from .attributes import AttributeSchema, uniform_batch
from .configfile import load_schema_file
from .errors import ProtocolError
from .protocol import PROTOCOL_VERSION, _PipeChannel, decode_message, encode_message

__all__ = ["FuzzReport", "fuzz_peer", "main"]

MALFORMED_LINES = (
    "this is not json\n",
    "[1, 2, 3]\n",
    '{"type":"launch"}\n',
    '{"type":"render"}\n',
    '{"type":"render","id":-4,"samples":[[1.0]]}\n',
    '{"type":"render","id":7,"samples":[]}\n',
    '{"type":"render","id":8,"samples":[[1.0,2.0],[3.0]]}\n',
    '{"type":"render","id":9,"samples":[[1e999]]}\n',
)


@dataclass
class FuzzReport:
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    def add(self, name: str, ok: bool, detail: str = ""):
        self.checks.append((name, ok, detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def summary(self) -> str:
        return "\n".join(
            f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
            for name, ok, detail in self.checks
        )


def _expect_error_reply(channel, report: FuzzReport, name: str, timeout: float):
    try:
        reply = decode_message(channel.recv_line(timeout))
    except ProtocolError as exc:
        report.add(name, False, f"no decodable reply: {exc}")
        return
    report.add(name, reply["type"] == "error", f"reply type {reply['type']!r}")


def fuzz_peer(command: list[str], schema: AttributeSchema, seed: int = 0, timeout: float = 60.0) -> FuzzReport:
    """Drive one peer process through the conformance checklist."""
    report = FuzzReport()
    channel = _PipeChannel(command)
    try:
        try:
            hello = decode_message(channel.recv_line(timeout))
            ok = hello["type"] == "hello" and hello["version"] == PROTOCOL_VERSION
            report.add("handshake", ok, f"{hello!r}")
            feature_dim = hello.get("feature_dim", 0)
        except ProtocolError as exc:
            report.add("handshake", False, str(exc))
            return report

        for i, line in enumerate(MALFORMED_LINES):
            channel.send_line(line)
            _expect_error_reply(channel, report, f"malformed line {i} draws error reply", timeout)

        n = len(schema.attributes)
        wrong = {"type": "render", "id": 50, "samples": [[0.0] * (n + 1)]}
        channel.send_line(encode_message(wrong))
        _expect_error_reply(channel, report, "wrong attribute count draws error reply", timeout)

        big = uniform_batch(schema, 512, seed).values.tolist()
        channel.send_line(encode_message({"type": "render", "id": 60, "samples": big}))
        try:
            reply = decode_message(channel.recv_line(timeout))
            ok = reply["type"] in ("features", "error") and reply["id"] == 60
            if reply["type"] == "features":
                data = np.asarray(reply["data"], dtype=float)
                ok = ok and data.shape == (512, feature_dim)
            report.add("oversized batch answered", ok, f"reply type {reply['type']!r}")
        except ProtocolError as exc:
            report.add("oversized batch answered", False, str(exc))

        # id skips are legal: ids only have to increase
        batch = uniform_batch(schema, 3, seed + 1).values.tolist()
        channel.send_line(encode_message({"type": "render", "id": 1000, "samples": batch}))
        try:
            reply = decode_message(channel.recv_line(timeout))
            ok = reply["type"] == "features" and reply["id"] == 1000
            if ok:
                data = np.asarray(reply["data"], dtype=float)
                ok = data.shape == (3, feature_dim) and np.all(np.isfinite(data))
            report.add("valid render after abuse", ok, f"reply type {reply['type']!r}")
        except ProtocolError as exc:
            report.add("valid render after abuse", False, str(exc))

        channel.send_line(encode_message({"type": "shutdown"}))
    finally:
        channel.close()
    rc = channel.proc.returncode
    report.add("clean shutdown", rc == 0, f"exit status {rc}")
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="attrdesc.conformance", description="renderer peer conformance checks"
    )
    parser.add_argument("--schema", required=True, help="schema config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--timeout", type=float, default=60.0)
    parser.add_argument("command", nargs=argparse.REMAINDER, help="peer command (after --)")
    args = parser.parse_args(argv)
    command = [c for c in args.command if c != "--"]
    if not command:
        parser.error("missing peer command")
    schema = load_schema_file(args.schema)
    report = fuzz_peer(command, schema, seed=args.seed, timeout=args.timeout)
    print(report.summary())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
