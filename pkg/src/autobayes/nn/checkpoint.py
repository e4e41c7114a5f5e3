"""JSON tensor checkpoints: named arrays with dtype/shape headers and base64 raw bytes.

Raw little-endian bytes make the round trip bit-exact.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

FORMAT = "autobayes-tensors/1"


def encode_tensors(tensors: dict[str, np.ndarray]) -> list[dict]:
    out = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        out.append({
            "name": name,
            "dtype": arr.dtype.str.lstrip("<>|="),
            "shape": list(arr.shape),
            "data": base64.b64encode(le.tobytes()).decode("ascii"),
        })
    return out


def decode_tensors(entries: list[dict]) -> dict[str, np.ndarray]:
    out = {}
    for e in entries:
        dtype = np.dtype("<" + e["dtype"]) if e["dtype"][0] in "fiuc" else np.dtype(e["dtype"])
        raw = base64.b64decode(e["data"])
        out[e["name"]] = np.frombuffer(raw, dtype=dtype).reshape(e["shape"]).astype(dtype.newbyteorder("="))
    return out


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    doc = {"format": FORMAT, "meta": meta or {}, "tensors": encode_tensors(tensors)}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not an autobayes tensor checkpoint")
    return decode_tensors(doc["tensors"]), doc.get("meta", {})
