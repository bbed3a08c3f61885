"""Reference protocol peer serving the oracle renderer over stdin/stdout.

    python -m attrdesc.loopback --config oracle.cfg [--seed N]

Answers version-1 render requests with oracle features. The noise stream
of request k is keyed by (seed, k); `noise_entropy` exposes that
derivation so an in-process render can reproduce the served features
exactly. Malformed input lines get an error reply, never a crash.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .attributes import SampleBatch
from .configfile import load_oracle_file
from .errors import AttrDescError, ProtocolError
from .oracle import OracleConfig, oracle_render
from .protocol import PROTOCOL_VERSION, decode_message, encode_message

__all__ = ["noise_entropy", "serve", "main"]


def noise_entropy(seed: int, request_id: int) -> tuple[int, int]:
    """Seed path of the noise stream the loopback peer uses for one request."""
    return (int(seed), int(request_id))


def _reply(out, msg: dict) -> None:
    out.write(encode_message(msg))
    out.flush()


def serve(config: OracleConfig, seed: int, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    _reply(
        stdout,
        {"type": "hello", "version": PROTOCOL_VERSION, "feature_dim": config.feature_dim},
    )
    n_attrs = len(config.schema.attributes)
    for line in stdin:
        if not line.strip():
            continue
        try:
            msg = decode_message(line)
        except ProtocolError as exc:
            _reply(stdout, {"type": "error", "id": 0, "message": str(exc)})
            continue
        if msg["type"] == "shutdown":
            return 0
        if msg["type"] != "render":
            _reply(
                stdout,
                {"type": "error", "id": 0, "message": f"unexpected message type {msg['type']!r}"},
            )
            continue
        request_id = msg["id"]
        samples = np.asarray(msg["samples"], dtype=np.float64)
        if samples.shape[1] != n_attrs:
            _reply(
                stdout,
                {
                    "type": "error",
                    "id": request_id,
                    "message": f"expected {n_attrs} attributes per sample, got {samples.shape[1]}",
                },
            )
            continue
        try:
            batch = SampleBatch(values=samples, seed=request_id)
            features = oracle_render(config, batch, noise_entropy(seed, request_id))
        except AttrDescError as exc:
            _reply(stdout, {"type": "error", "id": request_id, "message": str(exc)})
            continue
        _reply(
            stdout,
            {"type": "features", "id": request_id, "data": features.tolist()},
        )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="attrdesc.loopback", description="oracle renderer protocol peer"
    )
    parser.add_argument("--config", required=True, help="config file with schema + [oracle]")
    parser.add_argument("--seed", type=int, default=0, help="base seed for render noise")
    args = parser.parse_args(argv)
    config = load_oracle_file(args.config)
    return serve(config, args.seed)


if __name__ == "__main__":
    sys.exit(main())
