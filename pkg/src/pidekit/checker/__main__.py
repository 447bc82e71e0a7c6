"""Checker executable: speaks the wire protocol on a dedicated channel.

The channel file descriptor is passed by the session that spawned us;
stdin/stdout/stderr stay open for diagnostics only.
"""
import argparse
import os
import socket
import sys

from .engine import Checker


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pidekit-checker")
    parser.add_argument("--fd", type=int, required=True,
                        help="file descriptor of the protocol socket")
    parser.add_argument("--workers", type=int,
                        default=int(os.environ.get("PIDE_WORKERS", "0")) or None)
    args = parser.parse_args(argv)

    conn = socket.socket(fileno=args.fd)
    stream_in = conn.makefile("rb")
    stream_out = conn.makefile("wb")
    checker = Checker(stream_in, stream_out, workers=args.workers)
    try:
        checker.run()
    except BrokenPipeError:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
