#!/usr/bin/env python3
# Writes reference frames with an encoder independent of the C++ one.
import struct
import zlib
from pathlib import Path

TYPES = {"hello": 1, "provisioned": 2, "global_model": 3, "local_update": 4,
         "round_complete": 5, "shutdown": 6, "error": 7}


def s(text):
    b = text.encode()
    return struct.pack("<I", len(b)) + b


def params(items):
    out = struct.pack("<I", len(items))
    for name, shape, values in items:
        n = name.encode()
        out += struct.pack("<H", len(n)) + n + struct.pack("<B", len(shape))
        out += b"".join(struct.pack("<I", d) for d in shape)
        out += b"".join(struct.pack("<f", v) for v in values)
    return out


def frame(kind, payload):
    head = b"FLNP" + struct.pack("<HBI", 1, TYPES[kind], len(payload))
    return head + payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


FRAMES = {
    "hello": s("site-0") + s("fednlp-demo-token"),
    "provisioned": struct.pack("<IQII", 3, 0x0123456789ABCDEF, 10, 1),
    "global_model": struct.pack("<IIdBQ", 2, 1, 0.01, 1, 0xDEADBEEFCAFEF00D)
    + params([("w", [2, 3], [0.5, -1.25, 3.0, 0.0, 0.125, -2.0]), ("b", [3], [1.0, 2.0, 3.0])]),
    "local_update": struct.pack("<IIQddddQ", 1, 2, 290, 0.5, 0.75, 0.625, 0.8125, 42)
    + params([("b", [2], [0.25, -0.25])]),
    "round_complete": struct.pack("<IddddQ", 3, 1.5, 0.5, 2.25, 0.25, 7),
    "shutdown": s(""),
    "error": struct.pack("<H", 5) + s("round 3 expected"),
}

if __name__ == "__main__":
    here = Path(__file__).parent
    for kind, payload in FRAMES.items():
        data = frame(kind, payload)
        (here / f"{kind}.hex").write_text(" ".join(f"{b:02x}" for b in data) + "\n")
