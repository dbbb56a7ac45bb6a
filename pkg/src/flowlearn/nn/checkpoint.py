"""Model checkpoint container: JSON header + raw little-endian parameters.

Layout:
    bytes 0..7    magic "FLOWCKPT"
    bytes 8..11   uint32 LE header length H
    bytes 12..    UTF-8 JSON header; must carry "format_version", "dtype"
                  and "param_shapes" describing the parameter block
    then          parameters concatenated in header order, little-endian
"""

import json
import struct

import numpy as np

MAGIC = b"FLOWCKPT"
FORMAT_VERSION = 1


def save_checkpoint(path, header: dict, params):
    params = list(params)
    header = dict(header)
    header["format_version"] = FORMAT_VERSION
    header["param_shapes"] = [list(p.shape) for p in params]
    dtype = header.setdefault("dtype", "<f4")
    blob = json.dumps(header, separators=(",", ":"),
                      sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for p in params:
            f.write(np.ascontiguousarray(p, dtype=dtype).tobytes())


def load_checkpoint(path):
    """Returns (header, list of parameter arrays)."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MAGIC:
            raise ValueError(f"not a checkpoint file: magic {magic!r}")
        header_len, = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(header_len).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError("unsupported checkpoint format version "
                             f"{header.get('format_version')!r}")
        dtype = np.dtype(header["dtype"])
        params = []
        for shape in header["param_shapes"]:
            count = int(np.prod(shape)) if shape else 1
            data = f.read(count * dtype.itemsize)
            params.append(np.frombuffer(data, dtype=dtype)
                          .reshape(shape).copy())
    return header, params
