"""Deterministic binary container for run state and series arrays.

Layout: magic, format version, SHA-256 of the payload, then the payload: a
length-prefixed JSON header followed by raw little-endian array blobs in
traversal order.  Arrays inside the tree are replaced by reference stubs
carrying dtype and shape.  Because the JSON preserves key order and the blobs
are written in encounter order, packing the tree produced by unpacking a file
reproduces that file byte for byte; saving, loading, and saving again is
idempotent at the byte level.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

__all__ = ["CheckpointError", "pack_tree", "unpack_tree", "save_tree", "load_tree"]

MAGIC = b"PTC\x01"
FORMAT_VERSION = 1
_STUB_KEY = "__array__"


class CheckpointError(ValueError):
    """Corrupt, truncated, or incompatible container data."""


def _encode(node, blobs: list[bytes]):
    if isinstance(node, dict):
        if _STUB_KEY in node:
            raise CheckpointError(f"reserved key {_STUB_KEY!r} in tree")
        out = {}
        for key, value in node.items():
            if not isinstance(key, str):
                raise CheckpointError(f"tree keys must be strings; got {key!r}")
            out[key] = _encode(value, blobs)
        return out
    if isinstance(node, (list, tuple)):
        return [_encode(v, blobs) for v in node]
    if isinstance(node, np.ndarray):
        arr = np.ascontiguousarray(node)
        dtype = arr.dtype.newbyteorder("<")
        stub = {
            _STUB_KEY: len(blobs),
            "dtype": dtype.str,
            "shape": list(arr.shape),
        }
        blobs.append(arr.astype(dtype, copy=False).tobytes())
        return stub
    if isinstance(node, (np.integer, np.floating, np.bool_)):
        raise CheckpointError(f"numpy scalar {type(node).__name__} in tree; convert to python")
    if node is None or isinstance(node, (bool, int, str)):
        return node
    if isinstance(node, float):
        if node != node or node in (float("inf"), float("-inf")):
            raise CheckpointError("non-finite float in tree")
        return node
    raise CheckpointError(f"unsupported tree value of type {type(node).__name__}")


def _decode(node, blobs: list[np.ndarray]):
    if isinstance(node, dict):
        if _STUB_KEY in node:
            return blobs[node[_STUB_KEY]]
        return {k: _decode(v, blobs) for k, v in node.items()}
    if isinstance(node, list):
        return [_decode(v, blobs) for v in node]
    return node


def pack_tree(tree: dict) -> bytes:
    """Serialize a tree of JSON-native values and numpy arrays."""
    blobs: list[bytes] = []
    header_obj = _encode(tree, blobs)
    header = json.dumps(header_obj, separators=(",", ":"), ensure_ascii=True).encode()
    parts = [len(header).to_bytes(8, "little"), header]
    for blob in blobs:
        parts.append(len(blob).to_bytes(8, "little"))
        parts.append(blob)
    payload = b"".join(parts)
    digest = hashlib.sha256(payload).digest()
    return MAGIC + FORMAT_VERSION.to_bytes(2, "little") + digest + payload


def unpack_tree(data: bytes) -> dict:
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a container file (bad magic)")
    offset = len(MAGIC)
    version = int.from_bytes(data[offset : offset + 2], "little")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported container format version {version}")
    offset += 2
    digest = data[offset : offset + 32]
    offset += 32
    payload = data[offset:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError("checksum mismatch; file is corrupt or truncated")
    header_len = int.from_bytes(payload[:8], "little")
    header = json.loads(payload[8 : 8 + header_len].decode())
    pos = 8 + header_len
    raw_blobs: list[bytes] = []
    while pos < len(payload):
        blob_len = int.from_bytes(payload[pos : pos + 8], "little")
        pos += 8
        raw_blobs.append(payload[pos : pos + blob_len])
        pos += blob_len

    stubs: list[dict] = []

    def collect(node):
        if isinstance(node, dict):
            if _STUB_KEY in node:
                stubs.append(node)
            else:
                for v in node.values():
                    collect(v)
        elif isinstance(node, list):
            for v in node:
                collect(v)

    collect(header)
    arrays: dict[int, np.ndarray] = {}
    for stub in stubs:
        idx = stub[_STUB_KEY]
        arr = np.frombuffer(raw_blobs[idx], dtype=np.dtype(stub["dtype"])).reshape(
            stub["shape"]
        )
        arrays[idx] = arr.copy()  # writable, owned memory
    ordered = [arrays[i] for i in sorted(arrays)]
    return _decode(header, ordered)


def save_tree(path, tree: dict) -> None:
    data = pack_tree(tree)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def load_tree(path) -> dict:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"no container file at {path}") from None
    return unpack_tree(data)
