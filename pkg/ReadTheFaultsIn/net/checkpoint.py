"""Versioned binary checkpoints.

Layout: 8-byte magic, u32 version, u32 header length, UTF-8 JSON header
(sorted keys), then every tensor as little-endian float32 in header order.
"""
from typing import Optional
from pathlib import Path
import json
import numpy as np
from ..errors import ShapeError, ValidationError
from ..log import log_info
from .embedding import EmbeddingParams

MAGIC = b"RTFI\x00CKP"
VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")
EXTRA_PREFIX = "extra/"

def checkpoint_bytes(
    params: EmbeddingParams,
    extras: Optional[dict[str, np.ndarray]] = None,
    meta: Optional[dict] = None,
) -> bytes:
    tensors = dict(params.tensors)
    for name, tensor in (extras or {}).items():
        tensors[EXTRA_PREFIX + name] = np.asarray(tensor)

    entries = []
    payload = []
    offset = 0
    for name, tensor in tensors.items():
        data = np.ascontiguousarray(tensor, dtype=PAYLOAD_DTYPE).tobytes()
        entries.append({"name": name, "shape": list(np.shape(tensor)), "offset": offset})
        payload.append(data)
        offset += len(data)

    header = json.dumps(
        {
            "architecture": {
                "image_size": params.image_size,
                "channels": params.channels,
                "blocks": params.blocks,
            },
            "meta": meta or {},
            "tensors": entries,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode()

    prefix = MAGIC + np.array([VERSION, len(header)], dtype="<u4").tobytes()
    return prefix + header + b"".join(payload)

def save_checkpoint(
    path,
    params: EmbeddingParams,
    extras: Optional[dict[str, np.ndarray]] = None,
    meta: Optional[dict] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(params, extras, meta))
    log_info(f"Saved checkpoint {path}", "checkpoint::save_checkpoint")
    return path

def parse_checkpoint(data: bytes) -> tuple[EmbeddingParams, dict[str, np.ndarray], dict]:
    if data[:len(MAGIC)] != MAGIC:
        raise ValidationError("Not a checkpoint file")

    version, header_len = np.frombuffer(data, dtype="<u4", count=2, offset=len(MAGIC))
    if version != VERSION:
        raise ValidationError(f"Unsupported checkpoint version {version}")

    start = len(MAGIC) + 8
    header = json.loads(data[start:start + header_len].decode())
    payload = memoryview(data)[start + header_len:]

    tensors = {}
    extras = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        if entry["offset"] + count * PAYLOAD_DTYPE.itemsize > len(payload):
            raise ShapeError(f"Checkpoint is truncated at {entry['name']}")

        tensor = np.frombuffer(payload, dtype=PAYLOAD_DTYPE, count=count, offset=entry["offset"])
        tensor = tensor.astype(np.float32).reshape(shape)
        if entry["name"].startswith(EXTRA_PREFIX):
            extras[entry["name"][len(EXTRA_PREFIX):]] = tensor
        else:
            tensors[entry["name"]] = tensor

    arch = header["architecture"]
    params = EmbeddingParams(tensors, arch["image_size"], arch["channels"], arch["blocks"])
    return params, extras, header["meta"]

def load_checkpoint(path) -> tuple[EmbeddingParams, dict[str, np.ndarray], dict]:
    return parse_checkpoint(Path(path).read_bytes())
