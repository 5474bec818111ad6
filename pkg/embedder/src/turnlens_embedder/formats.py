"""Writers for the FSET/FRMX binary formats and their sidecars.

Layouts match the analytics toolkit byte for byte (little-endian):

* FSET: magic ``FSET``, u32 version=1, u32 set-name length + UTF-8 set name,
  u32 D, u64 N, then N records of (u32 id length + UTF-8 id + D x f32).
  Feature names go to a sidecar JSON ``<path>.names.json`` (ordered array).
* FRMX: magic ``FRMX``, u32 version=1, u32 D, u32 frame period in ms, u64 T,
  u32 id length + UTF-8 id, then T x D f32 row-major.

Writers reject non-finite values so every emitted file is loadable. Run
settings that have no slot in the binary layout (pooling choice, resampling,
chunking) go to a second sidecar, ``<path>.meta.json``.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmbedError

FSET_MAGIC = b"FSET"
FRMX_MAGIC = b"FRMX"
FORMAT_VERSION = 1


def _as_f32_matrix(values, what: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float32)
    if array.ndim != 2:
        raise EmbedError(f"{what} must be a 2-D array, got shape {array.shape}")
    if array.size and not np.isfinite(array).all():
        raise EmbedError(f"{what} contains non-finite values")
    return array


def fset_payload(set_name: str, ids: Sequence[str], values) -> bytes:
    """Serialize a feature set (names travel in the sidecar, not here)."""
    array = _as_f32_matrix(values, f"feature set {set_name!r}")
    if array.shape[0] != len(ids):
        raise EmbedError(
            f"feature set {set_name!r} has {array.shape[0]} rows but {len(ids)} ids"
        )
    if len(set(ids)) != len(ids):
        raise EmbedError(f"feature set {set_name!r} ids must be unique")
    name_bytes = set_name.encode("utf-8")
    parts = [
        FSET_MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", len(name_bytes)),
        name_bytes,
        struct.pack("<I", array.shape[1]),
        struct.pack("<Q", len(ids)),
    ]
    for conv_id, row in zip(ids, array):
        id_bytes = conv_id.encode("utf-8")
        parts.append(struct.pack("<I", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(np.ascontiguousarray(row, dtype="<f4").tobytes())
    return b"".join(parts)


def write_fset(
    path: str | Path,
    set_name: str,
    feature_names: Sequence[str],
    ids: Sequence[str],
    values,
) -> Path:
    """Write a feature set and its ``<path>.names.json`` sidecar."""
    payload = fset_payload(set_name, ids, values)
    width = np.asarray(values).shape[1]
    if len(feature_names) != width:
        raise EmbedError(
            f"feature set {set_name!r} has width {width} but {len(feature_names)} names"
        )
    path = Path(path)
    path.write_bytes(payload)
    sidecar = Path(str(path) + ".names.json")
    sidecar.write_text(json.dumps([str(n) for n in feature_names]) + "\n", encoding="utf-8")
    return path


def frmx_payload(conversation_id: str, frame_period_ms: int, frames) -> bytes:
    """Serialize one conversation's frame matrix."""
    array = _as_f32_matrix(frames, f"frame matrix {conversation_id!r}")
    if array.shape[0] < 1 or array.shape[1] < 1:
        raise EmbedError(
            f"frame matrix {conversation_id!r} must be T x D with T >= 1 and D >= 1"
        )
    if int(frame_period_ms) < 1:
        raise EmbedError(f"frame period must be >= 1 ms, got {frame_period_ms}")
    id_bytes = conversation_id.encode("utf-8")
    t, d = array.shape
    return b"".join(
        [
            FRMX_MAGIC,
            struct.pack("<I", FORMAT_VERSION),
            struct.pack("<I", d),
            struct.pack("<I", int(frame_period_ms)),
            struct.pack("<Q", t),
            struct.pack("<I", len(id_bytes)),
            id_bytes,
            np.ascontiguousarray(array, dtype="<f4").tobytes(),
        ]
    )


def write_frmx(path: str | Path, conversation_id: str, frame_period_ms: int, frames) -> Path:
    path = Path(path)
    path.write_bytes(frmx_payload(conversation_id, frame_period_ms, frames))
    return path


def write_metadata(out_path: str | Path, payload: dict) -> Path:
    """Record run settings in ``<out_path>.meta.json``; content is
    deterministic so repeated runs stay byte-identical."""
    meta = Path(str(out_path) + ".meta.json")
    meta.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return meta
