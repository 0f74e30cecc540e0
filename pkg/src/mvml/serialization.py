"""Binary model container.

Layout (all integers little-endian)::

    offset   size  content
    0        8     magic  b"MVMLMDL\\x00"
    8        4     format version (uint32), currently 1
    12       8     header length H (uint64)
    20       H     header: UTF-8 JSON with scalar fields and an array table
    20+H     P     array payload, arrays stored back to back as raw bytes
    20+H+P   32    SHA-256 of every preceding byte

Each array-table entry is ``{"name", "dtype", "shape", "offset", "nbytes",
"crc32"}`` with ``offset`` relative to the payload start. Floating-point
arrays are stored as ``<f8`` so a round trip is bit exact; JSON floats use
Python's shortest round-trip repr.
"""
import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .exceptions import DeserializationError
from .kernels import KernelConfig
from .model import ModelState

MAGIC = b"MVMLMDL\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_DIGEST = 32


def _arrays(model):
    arrays = {"weights": model.weights, "coefs": model.coefs}
    for l, P in enumerate(model.points):
        arrays[f"points/{l}"] = P
    if model.W_pinv_sqrt is not None:
        for l, R in enumerate(model.W_pinv_sqrt):
            arrays[f"W_pinv_sqrt/{l}"] = R
    if model.classes is not None:
        arrays["classes"] = model.classes
    return arrays


def dumps(model):
    table, chunks, offset = [], [], 0
    for name, arr in _arrays(model).items():
        arr = np.asarray(arr)
        dtype = "<f8" if arr.dtype.kind == "f" else ("<i8" if arr.dtype.kind in "iub" else None)
        if dtype is None:
            raise TypeError(f"array {name!r} has unsupported dtype {arr.dtype}")
        raw = np.ascontiguousarray(arr, dtype=dtype).tobytes()
        table.append({"name": name, "dtype": dtype, "shape": list(arr.shape),
                      "offset": offset, "nbytes": len(raw), "crc32": zlib.crc32(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "mode": model.mode,
        "task": model.task,
        "n_views": model.n_views,
        "kernel_configs": [{"family": c.family, "sigma": c.sigma} for c in model.kernel_configs],
        "metadata": model.metadata,
        "arrays": table,
    }
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(hdr)) + hdr + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def save(model, path):
    Path(path).write_bytes(dumps(model))


def loads(data):
    if len(data) < _PREFIX.size + _DIGEST:
        raise DeserializationError("file is truncated", field="prefix")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise DeserializationError("not an mvml model file (bad magic)", field="magic")
    if version != FORMAT_VERSION:
        raise DeserializationError(
            f"unsupported format version {version} (expected {FORMAT_VERSION})", field="version")
    body_end = len(data) - _DIGEST
    start = _PREFIX.size
    if start + hlen > body_end:
        raise DeserializationError("file is truncated", field="header")
    try:
        header = json.loads(data[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DeserializationError(f"header is corrupted ({exc})", field="header") from None

    payload = memoryview(data)[start + hlen:body_end]
    arrays = {}
    for entry in header.get("arrays", []):
        name = entry.get("name", "?")
        try:
            lo, nb = int(entry["offset"]), int(entry["nbytes"])
            dtype, shape, crc = np.dtype(entry["dtype"]), tuple(entry["shape"]), int(entry["crc32"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DeserializationError(f"malformed array entry ({exc})", field=name) from None
        if lo < 0 or lo + nb > len(payload):
            raise DeserializationError("array data is truncated", field=name)
        raw = bytes(payload[lo:lo + nb])
        if zlib.crc32(raw) != crc:
            raise DeserializationError("checksum mismatch", field=name)
        arr = np.frombuffer(raw, dtype=dtype)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise DeserializationError("size does not match shape", field=name)
        arrays[name] = arr.reshape(shape).astype(dtype.newbyteorder("="))
    if hashlib.sha256(data[:body_end]).digest() != data[body_end:]:
        raise DeserializationError("file checksum mismatch", field="sha256")

    try:
        v = int(header["n_views"])
        configs = tuple(KernelConfig(c["family"], float(c["sigma"])) for c in header["kernel_configs"])
        points = tuple(arrays[f"points/{l}"] for l in range(v))
        R = None
        if header["mode"] == "nystrom":
            R = tuple(arrays[f"W_pinv_sqrt/{l}"] for l in range(v))
        return ModelState(
            mode=header["mode"],
            kernel_configs=configs,
            weights=arrays["weights"],
            coefs=arrays["coefs"],
            points=points,
            W_pinv_sqrt=R,
            task=header["task"],
            classes=arrays.get("classes"),
            metadata=header.get("metadata", {}),
        )
    except KeyError as exc:
        raise DeserializationError("required field is missing", field=str(exc.args[0])) from None


def load(path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DeserializationError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(data)
