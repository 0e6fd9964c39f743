"""Binary model file.

Layout (all integers unsigned 32-bit little-endian)::

    magic          8 bytes   b"CNNBIGRU"
    version        u32       FORMAT_VERSION
    header_len     u32       byte length of the header
    header         JSON, UTF-8, keys sorted, no whitespace:
                   {"class_names": [...], "format_version": 1,
                    "spec": {...ModelSpec fields, activation as its lowercase name...},
                    "tensors": [[name, [dims...]], ...]}
    tensors        for each entry of header["tensors"], in order:
                   ndim u32, dims u32 * ndim, then prod(dims) float32 LE values

Tensor order is ``param_layout(spec)``.  Values are stored as float32, so a
model whose parameters are float32-representable (see ``Model.quantize``)
round-trips bit-exactly.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from .model import Model, ModelSpec, check_params, param_layout

MAGIC = b"CNNBIGRU"
FORMAT_VERSION = 1


def _header_bytes(model: Model) -> bytes:
    header = {
        "class_names": list(model.class_names),
        "format_version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "tensors": [[name, list(shape)] for name, shape in param_layout(model.spec)],
    }
    return json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def dumps(model: Model) -> bytes:
    check_params(model.spec, model.params)
    header = _header_bytes(model)
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header]
    for name, shape in param_layout(model.spec):
        parts.append(struct.pack(f"<I{len(shape)}I", len(shape), *shape))
        parts.append(np.asarray(model.params[name], dtype="<f4").tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> Model:
    if blob[:8] != MAGIC:
        raise DataError("not a model file (bad magic)")
    version, header_len = struct.unpack_from("<II", blob, 8)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version}")
    pos = 16
    header = json.loads(blob[pos:pos + header_len].decode("utf-8"))
    pos += header_len
    spec = ModelSpec.from_dict(header["spec"])
    params = {}
    for name, dims in header["tensors"]:
        (ndim,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        if list(shape) != list(dims):
            raise DataError(f"tensor {name}: stored shape {shape} disagrees with header {dims}")
        count = int(np.prod(shape))
        params[name] = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).astype(np.float64).reshape(shape)
        pos += 4 * count
    if pos != len(blob):
        raise DataError(f"{len(blob) - pos} trailing bytes in model file")
    check_params(spec, params)
    return Model(spec, params, header.get("class_names", []))


def save_model(model: Model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(model))
    return path


def load_model(path) -> Model:
    return loads(Path(path).read_bytes())
