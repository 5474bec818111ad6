"""Feature-set containers, file formats, pooling, truncation, standardization.

Two little-endian binary formats bridge this package and external feature
extractors:

* FSET: magic ``FSET``, u32 version=1, u32 set-name length + UTF-8 set name,
  u32 D, u64 N, then N records of (u32 id length + UTF-8 id + D x f32).
  Feature names live in a sidecar JSON ``<path>.names.json`` (ordered array).
* FRMX: magic ``FRMX``, u32 version=1, u32 D, u32 frame period in ms, u64 T,
  u32 id length + UTF-8 id, then T x D f32 row-major.

Writers reject non-finite values; readers reject bad magic, unsupported
versions, truncated payloads, and absurd declared dimensions.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from ._stats import population_stats
from .errors import DataError, FormatError

FSET_MAGIC = b"FSET"
FRMX_MAGIC = b"FRMX"
FORMAT_VERSION = 1
_MAX_DIM = 1 << 31  # declared-dimension sanity bound


@dataclass(eq=False)
class FeatureMatrix:
    """A named feature set: conversation ids x feature names x f32 values."""

    set_name: str
    feature_names: tuple[str, ...]
    ids: tuple[str, ...]
    values: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.feature_names = tuple(self.feature_names)
        self.ids = tuple(self.ids)
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            self.values = self.values.reshape(len(self.ids), -1)
        n, d = self.values.shape
        if n != len(self.ids):
            raise DataError(f"feature matrix has {n} rows but {len(self.ids)} ids")
        if d != len(self.feature_names):
            raise DataError(
                f"feature matrix width {d} does not match {len(self.feature_names)} feature names"
            )
        if len(set(self.ids)) != len(self.ids):
            raise DataError("feature matrix ids must be unique")
        if self.values.size and not np.isfinite(self.values).all():
            raise DataError(f"feature set {self.set_name!r} contains non-finite values")
        self._index = {conv_id: i for i, conv_id in enumerate(self.ids)}

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def row(self, conv_id: str) -> np.ndarray:
        try:
            return self.values[self._index[conv_id]]
        except KeyError:
            raise DataError(f"feature set {self.set_name!r} has no row for id {conv_id!r}") from None

    def subset(self, ids: Sequence[str]) -> "FeatureMatrix":
        """Rows for the given ids, in the given order."""
        rows = np.stack([self.row(i) for i in ids]) if ids else np.empty((0, self.width), np.float32)
        return FeatureMatrix(self.set_name, self.feature_names, tuple(ids), rows)

    def select(self, names: Sequence[str], set_name: str | None = None) -> "FeatureMatrix":
        """Column subset in the requested order (first match per name)."""
        col_index: dict[str, int] = {}
        for i, n in enumerate(self.feature_names):
            col_index.setdefault(n, i)
        try:
            cols = [col_index[n] for n in names]
        except KeyError as exc:
            raise DataError(f"unknown feature name {exc.args[0]!r}") from None
        values = self.values[:, cols] if cols else np.empty((len(self.ids), 0), np.float32)
        return FeatureMatrix(set_name or self.set_name, tuple(names), self.ids, values)


@dataclass(eq=False)
class FrameMatrix:
    """A frame-level feature sequence for one conversation."""

    conversation_id: str
    frame_period_ms: int
    frames: np.ndarray

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim == 1:
            self.frames = self.frames.reshape(-1, 1)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1 or self.frames.shape[1] < 1:
            raise DataError("frame matrix must be T x D with T >= 1 and D >= 1")
        if int(self.frame_period_ms) < 1:
            raise DataError(f"frame period must be >= 1 ms, got {self.frame_period_ms}")
        self.frame_period_ms = int(self.frame_period_ms)
        if not np.isfinite(self.frames).all():
            raise DataError(f"frame matrix {self.conversation_id!r} contains non-finite values")


@dataclass(frozen=True, eq=False)
class StandardizerParams:
    """Per-feature z-score parameters fitted on the training split."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=np.float64))
        if self.mean.shape != self.scale.shape or self.mean.ndim != 1:
            raise DataError("standardizer mean/scale must be 1-D and equally sized")
        if not (self.scale > 0).all():
            raise DataError("standardizer scale must be positive")

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, obj: dict) -> "StandardizerParams":
        return cls(mean=np.asarray(obj["mean"], float), scale=np.asarray(obj["scale"], float))


def pool_functionals(fm: FrameMatrix) -> np.ndarray:
    """Pool a frame matrix to one vector of length 4*D.

    Output blocks in order [Mean | Sd | Kurtosis | Skewness], each of length
    D, computed per dimension over frames with population moments. Dimensions
    with zero variance yield Sd = Kurtosis = Skewness = 0.
    """
    if fm.frames.shape[0] < 1:
        raise DataError("cannot pool an empty frame matrix")
    mean, sd, skew, kurt = population_stats(fm.frames.astype(np.float64))
    return np.concatenate([mean, sd, kurt, skew])


def pooled_feature_names(d: int) -> tuple[str, ...]:
    """Names for pool_functionals output, block order [Mean|Sd|Kurtosis|Skewness]."""
    return tuple(
        f"{stat}{i:04d}" for stat in ("Mean", "Sd", "Kurtosis", "Skewness") for i in range(d)
    )


def truncate_head(tokens: Sequence, n: int) -> list:
    """Keep the first min(n, len) tokens."""
    if n < 0:
        raise DataError(f"truncation length must be >= 0, got {n}")
    return list(tokens[:n])


def truncate_tail(tokens: Sequence, n: int) -> list:
    """Keep the last min(n, len) tokens."""
    if n < 0:
        raise DataError(f"truncation length must be >= 0, got {n}")
    return list(tokens[max(len(tokens) - n, 0) :]) if n else []


def concat_feature_sets(sets: Sequence[FeatureMatrix]) -> FeatureMatrix:
    """Concatenate feature sets sharing one id set.

    A single input is returned unchanged. With several inputs, feature names
    are prefixed with their source set name, widths add up, and the result's
    set name joins the inputs with "+". Row order follows the first set.
    """
    if not sets:
        raise DataError("concat requires at least one feature set")
    if len(sets) == 1:
        return sets[0]
    first = sets[0]
    base_ids = set(first.ids)
    for other in sets[1:]:
        if set(other.ids) != base_ids:
            missing = sorted(base_ids.symmetric_difference(other.ids))[:5]
            raise DataError(
                f"id mismatch between feature sets {first.set_name!r} and {other.set_name!r} "
                f"(e.g. {missing})"
            )
    names = tuple(f"{m.set_name}.{n}" for m in sets for n in m.feature_names)
    blocks = [m.subset(first.ids).values for m in sets]
    values = np.hstack(blocks) if blocks else np.empty((len(first.ids), 0), np.float32)
    return FeatureMatrix("+".join(m.set_name for m in sets), names, first.ids, values)


def fit_standardizer(train: FeatureMatrix) -> StandardizerParams:
    """Fit z-score parameters on the training split only.

    Scale is the population standard deviation; zero-variance features get
    scale 1 so they pass through centered.
    """
    if len(train) == 0:
        raise DataError("cannot fit a standardizer on an empty feature matrix")
    x = train.values.astype(np.float64)
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    scale = np.where(sd > 0, sd, 1.0)
    return StandardizerParams(mean=mean, scale=scale)


def apply_standardizer(params: StandardizerParams, m: FeatureMatrix) -> FeatureMatrix:
    if params.mean.shape[0] != m.width:
        raise DataError(
            f"standardizer width {params.mean.shape[0]} does not match feature set width {m.width}"
        )
    values = (m.values.astype(np.float64) - params.mean) / params.scale
    return FeatureMatrix(m.set_name, m.feature_names, m.ids, values.astype(np.float32))


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated payload while reading {what}")
    return data


def _read_u32(fh: BinaryIO, what: str) -> int:
    return struct.unpack("<I", _read_exact(fh, 4, what))[0]


def _read_u64(fh: BinaryIO, what: str) -> int:
    return struct.unpack("<Q", _read_exact(fh, 8, what))[0]


def _decode_utf8(data: bytes, what: str) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"invalid UTF-8 in {what}") from exc


def _check_header(fh: BinaryIO, magic: bytes) -> None:
    found = _read_exact(fh, 4, "magic")
    if found != magic:
        raise FormatError(f"bad magic: expected {magic!r}, found {found!r}")
    version = _read_u32(fh, "version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version} (expected {FORMAT_VERSION})")


def _check_dim(d: int) -> int:
    if d >= _MAX_DIM:
        raise FormatError(f"dimension overflow: declared width {d}")
    return d


def fset_bytes(m: FeatureMatrix) -> bytes:
    """Serialize a feature set (names travel in the sidecar, not here)."""
    if m.values.size and not np.isfinite(m.values).all():
        raise DataError(f"feature set {m.set_name!r} contains non-finite values")
    name_bytes = m.set_name.encode("utf-8")
    parts = [
        FSET_MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<I", len(name_bytes)),
        name_bytes,
        struct.pack("<I", m.width),
        struct.pack("<Q", len(m.ids)),
    ]
    for conv_id, row in zip(m.ids, m.values):
        id_bytes = conv_id.encode("utf-8")
        parts.append(struct.pack("<I", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(np.ascontiguousarray(row, dtype="<f4").tobytes())
    return b"".join(parts)


def write_fset(path: str | Path, m: FeatureMatrix) -> None:
    """Write a feature set and its ``<path>.names.json`` sidecar."""
    path = Path(path)
    path.write_bytes(fset_bytes(m))
    sidecar = Path(str(path) + ".names.json")
    sidecar.write_text(json.dumps(list(m.feature_names)) + "\n", encoding="utf-8")


def read_fset(path: str | Path) -> FeatureMatrix:
    """Read a feature set; loads the names sidecar when present."""
    path = Path(path)
    with open(path, "rb") as fh:
        _check_header(fh, FSET_MAGIC)
        name_len = _check_dim(_read_u32(fh, "set-name length"))
        set_name = _decode_utf8(_read_exact(fh, name_len, "set name"), "set name")
        width = _check_dim(_read_u32(fh, "feature dimension"))
        count = _read_u64(fh, "row count")
        if count >= _MAX_DIM:
            raise FormatError(f"dimension overflow: declared row count {count}")
        # each row needs at least its id-length word plus the value block
        remaining = path.stat().st_size - fh.tell()
        if count * (4 + 4 * width) > remaining:
            raise FormatError("truncated payload: declared rows exceed file size")
        ids = []
        rows = np.empty((count, width), dtype=np.float32)
        for i in range(count):
            id_len = _check_dim(_read_u32(fh, f"id length of row {i}"))
            ids.append(_decode_utf8(_read_exact(fh, id_len, f"id of row {i}"), f"id of row {i}"))
            raw = _read_exact(fh, 4 * width, f"values of row {i}")
            rows[i] = np.frombuffer(raw, dtype="<f4")
        if fh.read(1):
            raise FormatError("trailing bytes after final row")
    if rows.size and not np.isfinite(rows).all():
        raise FormatError(f"feature set {set_name!r} contains non-finite values")
    names: tuple[str, ...]
    sidecar = Path(str(path) + ".names.json")
    if sidecar.is_file():
        loaded = json.loads(sidecar.read_text(encoding="utf-8"))
        if not isinstance(loaded, list) or len(loaded) != width:
            raise FormatError(
                f"names sidecar {sidecar} does not list exactly {width} feature names"
            )
        names = tuple(str(n) for n in loaded)
    else:
        names = tuple(f"f{i:04d}" for i in range(width))
    return FeatureMatrix(set_name=set_name, feature_names=names, ids=tuple(ids), values=rows)


def frmx_bytes(fm: FrameMatrix) -> bytes:
    """Serialize a frame matrix."""
    if not np.isfinite(fm.frames).all():
        raise DataError(f"frame matrix {fm.conversation_id!r} contains non-finite values")
    id_bytes = fm.conversation_id.encode("utf-8")
    t, d = fm.frames.shape
    return b"".join(
        [
            FRMX_MAGIC,
            struct.pack("<I", FORMAT_VERSION),
            struct.pack("<I", d),
            struct.pack("<I", fm.frame_period_ms),
            struct.pack("<Q", t),
            struct.pack("<I", len(id_bytes)),
            id_bytes,
            np.ascontiguousarray(fm.frames, dtype="<f4").tobytes(),
        ]
    )


def write_frmx(path: str | Path, fm: FrameMatrix) -> None:
    """Write a frame matrix."""
    Path(path).write_bytes(frmx_bytes(fm))


def read_frmx(path: str | Path) -> FrameMatrix:
    """Read a frame matrix."""
    path = Path(path)
    with open(path, "rb") as fh:
        _check_header(fh, FRMX_MAGIC)
        width = _check_dim(_read_u32(fh, "frame dimension"))
        period = _read_u32(fh, "frame period")
        count = _read_u64(fh, "frame count")
        if count >= _MAX_DIM:
            raise FormatError(f"dimension overflow: declared frame count {count}")
        id_len = _check_dim(_read_u32(fh, "id length"))
        conv_id = _decode_utf8(_read_exact(fh, id_len, "conversation id"), "conversation id")
        if 4 * width * count > path.stat().st_size - fh.tell():
            raise FormatError("truncated payload: declared frames exceed file size")
        raw = _read_exact(fh, 4 * width * count, "frame values")
        frames = np.frombuffer(raw, dtype="<f4").reshape(count, width).copy()
        if fh.read(1):
            raise FormatError("trailing bytes after frame values")
    if not np.isfinite(frames).all():
        raise FormatError(f"frame matrix {conv_id!r} contains non-finite values")
    return FrameMatrix(conversation_id=conv_id, frame_period_ms=period, frames=frames)


def matrix_from_rows(pairs: Iterable[tuple[str, np.ndarray]], names: Sequence[str], set_name: str) -> FeatureMatrix:
    """Assemble a FeatureMatrix from (id, vector) pairs."""
    ids = []
    rows = []
    for conv_id, vec in pairs:
        ids.append(conv_id)
        rows.append(np.asarray(vec, dtype=np.float32))
    values = np.stack(rows) if rows else np.empty((0, len(names)), np.float32)
    return FeatureMatrix(set_name=set_name, feature_names=tuple(names), ids=tuple(ids), values=values)
