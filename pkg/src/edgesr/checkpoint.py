"""Binary checkpoint format.

Layout (little endian)::

    b"EATSR" | u16 version | u32 tensor count
    per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 dims | f32 payload
    then zero or more sections until EOF:
    4-byte tag | u16 section version | u32 byte length | payload

Sections used by the trainer: ``CONF`` (config text), ``STAT`` (JSON
train state) and ``OPTM`` (optimizer moments, itself a tensor block).
"""

from __future__ import annotations

import io
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"EATSR"
VERSION = 1
SECTION_VERSIONS = {b"CONF": 1, b"STAT": 1, b"OPTM": 1}


class CheckpointError(ValueError):
    pass


def _write_tensor_block(buf: io.BytesIO, tensors: Mapping[str, np.ndarray]) -> None:
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        raw_name = name.encode("utf-8")
        if len(raw_name) > 0xFFFF or arr.ndim > 0xFF:
            raise CheckpointError(f"tensor {name!r} cannot be encoded")
        buf.write(struct.pack("<H", len(raw_name)))
        buf.write(raw_name)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_exact(buf: io.BytesIO, n: int, what: str) -> bytes:
    data = buf.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def _read_tensor_block(buf: io.BytesIO) -> "OrderedDict[str, np.ndarray]":
    (count,) = struct.unpack("<I", _read_exact(buf, 4, "tensor count"))
    out: OrderedDict[str, np.ndarray] = OrderedDict()
    for _ in range(count):
        (nlen,) = struct.unpack("<H", _read_exact(buf, 2, "name length"))
        name = _read_exact(buf, nlen, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<B", _read_exact(buf, 1, f"rank of {name}"))
        dims = struct.unpack(f"<{rank}I", _read_exact(buf, 4 * rank, f"dims of {name}"))
        size = int(np.prod(dims, dtype=np.int64))
        payload = _read_exact(buf, 4 * size, f"payload of {name}")
        out[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)
    return out


def encode(tensors: Mapping[str, np.ndarray], sections: Mapping[bytes, bytes] | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    _write_tensor_block(buf, tensors)
    for tag, payload in (sections or {}).items():
        if len(tag) != 4:
            raise CheckpointError(f"section tag must be 4 bytes, got {tag!r}")
        buf.write(tag)
        buf.write(struct.pack("<HI", SECTION_VERSIONS.get(tag, 1), len(payload)))
        buf.write(payload)
    return buf.getvalue()


def decode(data: bytes) -> tuple["OrderedDict[str, np.ndarray]", dict[bytes, bytes]]:
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}: not a checkpoint")
    buf = io.BytesIO(data)
    buf.seek(len(MAGIC))
    (version,) = struct.unpack("<H", _read_exact(buf, 2, "format version"))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version} (this build reads {VERSION})")
    tensors = _read_tensor_block(buf)
    sections: dict[bytes, bytes] = {}
    while True:
        tag = buf.read(4)
        if not tag:
            break
        if len(tag) != 4:
            raise CheckpointError("truncated section header")
        sver, length = struct.unpack("<HI", _read_exact(buf, 6, "section header"))
        expected = SECTION_VERSIONS.get(tag)
        if expected is not None and sver != expected:
            raise CheckpointError(f"section {tag.decode(errors='replace')} has version {sver}, expected {expected}")
        sections[tag] = _read_exact(buf, length, f"section {tag!r}")
    return tensors, sections


def encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    _write_tensor_block(buf, tensors)
    return buf.getvalue()


def decode_tensors(data: bytes) -> "OrderedDict[str, np.ndarray]":
    buf = io.BytesIO(data)
    out = _read_tensor_block(buf)
    if buf.read(1):
        raise CheckpointError("trailing bytes after tensor block")
    return out


def save(path, tensors: Mapping[str, np.ndarray], sections: Mapping[bytes, bytes] | None = None) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(tensors, sections))
    tmp.replace(path)


def load(path) -> tuple["OrderedDict[str, np.ndarray]", dict[bytes, bytes]]:
    return decode(Path(path).read_bytes())
