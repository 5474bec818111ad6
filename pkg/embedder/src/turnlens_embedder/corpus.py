"""Manifest and conversation documents, as this package reads them.

The corpus layout is shared with the analytics toolkit: a manifest is a
JSON array of ``{"id", "path", "split"}`` objects whose paths resolve
relative to the manifest file, and each conversation document lists
per-channel talkspurts under ``channels.customer`` / ``channels.agent``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import EmbedError

_CHANNELS = ("customer", "agent")


@dataclass(frozen=True)
class ManifestEntry:
    conversation_id: str
    path: Path
    split: str


def _load_json(path: Path, what: str):
    if not path.is_file():
        raise EmbedError(f"{what} not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EmbedError(f"{what} {path}: malformed JSON ({exc})") from exc


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Read a manifest; entry paths come back resolved and ids checked unique."""
    path = Path(path)
    doc = _load_json(path, "manifest")
    if not isinstance(doc, list):
        raise EmbedError(f"manifest {path}: expected a JSON array of entries")
    base = path.resolve().parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for i, row in enumerate(doc):
        if not isinstance(row, dict):
            raise EmbedError(f"manifest {path}: entry {i} is not an object")
        for key in ("id", "path", "split"):
            if not isinstance(row.get(key), str):
                raise EmbedError(f"manifest {path}: entry {i} needs a string {key!r}")
        cid = row["id"]
        if cid in seen:
            raise EmbedError(f"manifest {path}: duplicate conversation id {cid!r}")
        seen.add(cid)
        rel = Path(row["path"])
        entries.append(ManifestEntry(cid, rel if rel.is_absolute() else base / rel, row["split"]))
    if not entries:
        raise EmbedError(f"manifest {path}: no conversations listed")
    return entries


def read_conversation(path: str | Path) -> dict:
    """Read one conversation document and check the parts this package uses."""
    path = Path(path)
    doc = _load_json(path, "conversation")
    if not isinstance(doc, dict) or not isinstance(doc.get("id"), str):
        raise EmbedError(f"conversation {path}: expected an object with a string 'id'")
    channels = doc.get("channels")
    if not isinstance(channels, dict):
        raise EmbedError(f"conversation {path}: missing 'channels' object")
    for name in _CHANNELS:
        segments = channels.get(name)
        if not isinstance(segments, list):
            raise EmbedError(f"conversation {path}: channels.{name} must be a list")
        for j, seg in enumerate(segments):
            if (
                not isinstance(seg, dict)
                or not isinstance(seg.get("start"), (int, float))
                or isinstance(seg.get("start"), bool)
                or not isinstance(seg.get("text"), str)
            ):
                raise EmbedError(
                    f"conversation {path}: channels.{name}[{j}] needs a numeric "
                    "'start' and a string 'text'"
                )
    return doc


def scoped_text(doc: dict, scope: str) -> str:
    """The transcript for one scope, talkspurts joined in onset order.

    Scope c/a takes one channel; w and j interleave both channels by start
    time, customer first when onsets tie. Empty talkspurts are dropped.
    """
    names = _CHANNELS if scope in ("w", "j") else (("customer",) if scope == "c" else ("agent",))
    pieces: list[tuple[float, int, str]] = []
    for rank, name in enumerate(names):
        for seg in doc["channels"][name]:
            text = seg["text"].strip()
            if text:
                pieces.append((float(seg["start"]), rank, text))
    pieces.sort(key=lambda item: (item[0], item[1]))
    return " ".join(text for _, _, text in pieces)
