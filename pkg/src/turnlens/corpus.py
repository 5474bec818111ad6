"""Data model and ingestion for dual-channel labeled conversations.

A conversation document is UTF-8 JSON of the form::

    {"id": str,
     "labels": {"request": "process"|"member"|null, "complaint": true|false|null},
     "split": "train"|"devel",
     "channels": {"customer": [{"start": number, "end": number, "text": str}, ...],
                  "agent": [...]}}

A dataset manifest is a JSON array of ``{"id", "path", "split"}`` entries.
Manifest paths are resolved relative to the manifest file's directory.
Anonymization placeholders such as ``<NAME>`` are ordinary single tokens.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import CorpusError

CHANNELS = ("customer", "agent")
SPLITS = ("train", "devel")
TASKS = ("request", "complaint")
REQUEST_LABELS = ("process", "member")
COMPLAINT_LABELS = ("yes", "no")


@dataclass(frozen=True)
class Utterance:
    """One timestamped utterance on a single channel. Times are seconds."""

    start: float
    end: float
    text: str

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise CorpusError("utterance times must be finite")
        if self.start < 0:
            raise CorpusError("utterance start must be >= 0")
        if self.end <= self.start:
            raise CorpusError("utterance end must exceed start")
        if not self.text:
            raise CorpusError("utterance text must be non-empty")


@dataclass(frozen=True)
class Conversation:
    """A validated dual-channel conversation with optional task labels."""

    id: str
    customer: tuple[Utterance, ...]
    agent: tuple[Utterance, ...]
    request_label: str | None = None
    complaint_label: str | None = None
    split: str = "train"

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("conversation id must be non-empty")
        if self.split not in SPLITS:
            raise CorpusError(f"conversation {self.id!r}: unknown split {self.split!r}")
        if self.request_label is not None and self.request_label not in REQUEST_LABELS:
            raise CorpusError(
                f"conversation {self.id!r}: unknown label {self.request_label!r} for labels.request"
            )
        if self.complaint_label is not None and self.complaint_label not in COMPLAINT_LABELS:
            raise CorpusError(
                f"conversation {self.id!r}: unknown label {self.complaint_label!r} for labels.complaint"
            )
        if not self.customer and not self.agent:
            raise CorpusError(f"conversation {self.id!r}: no utterances in either channel")
        for channel, utts in (("customer", self.customer), ("agent", self.agent)):
            for prev, cur in zip(utts, utts[1:]):
                if cur.start < prev.start:
                    raise CorpusError(
                        f"conversation {self.id!r}: channels.{channel} not sorted by start"
                    )
                if cur.start < prev.end:
                    raise CorpusError(
                        f"conversation {self.id!r}: overlapping utterances within channel "
                        f"{channel} at {prev.end} > {cur.start}"
                    )

    def label_for(self, task: str) -> str | None:
        if task == "request":
            return self.request_label
        if task == "complaint":
            return self.complaint_label
        raise CorpusError(f"unknown task {task!r}")


def _require_number(value: object, where: str, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CorpusError(f"{where}: field {name!r} must be a number")
    return float(value)


def _parse_channel(obj: object, channel: str, conv_id: str) -> tuple[Utterance, ...]:
    if obj is None:
        return ()
    if not isinstance(obj, list):
        raise CorpusError(f"conversation {conv_id!r}: channels.{channel} must be an array")
    utts = []
    for i, item in enumerate(obj):
        where = f"conversation {conv_id!r}: channels.{channel}[{i}]"
        if not isinstance(item, dict):
            raise CorpusError(f"{where}: utterance must be an object")
        start = _require_number(item.get("start"), where, "start")
        end = _require_number(item.get("end"), where, "end")
        text = item.get("text")
        if not isinstance(text, str) or not text:
            raise CorpusError(f"{where}: field 'text' must be a non-empty string")
        if end <= start:
            raise CorpusError(f"{where}: end ({end}) must exceed start ({start})")
        utts.append(Utterance(start=start, end=end, text=text))
    utts.sort(key=lambda u: (u.start, u.end))
    return tuple(utts)


def _parse_labels(obj: object, conv_id: str) -> tuple[str | None, str | None]:
    if obj is None:
        return None, None
    if not isinstance(obj, dict):
        raise CorpusError(f"conversation {conv_id!r}: labels must be an object")
    request = obj.get("request")
    if request is not None and request not in REQUEST_LABELS:
        raise CorpusError(
            f"conversation {conv_id!r}: unknown label {request!r} for labels.request"
        )
    complaint_raw = obj.get("complaint")
    if complaint_raw is None:
        complaint = None
    elif complaint_raw is True:
        complaint = "yes"
    elif complaint_raw is False:
        complaint = "no"
    else:
        raise CorpusError(
            f"conversation {conv_id!r}: unknown label {complaint_raw!r} for labels.complaint"
        )
    return request, complaint


def parse_conversation(document: bytes | str) -> Conversation:
    """Parse and validate one conversation document.

    Args:
        document: UTF-8 JSON bytes or text in the schema above.

    Returns:
        A validated :class:`Conversation` with utterances sorted by start.

    Raises:
        CorpusError: malformed JSON, missing fields, end <= start,
            overlapping utterances within a channel, or unknown labels.
            Messages carry the conversation id and the offending field.
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(f"malformed document: not valid UTF-8 ({exc})") from exc
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorpusError("malformed document: top level must be an object")
    conv_id = doc.get("id")
    if not isinstance(conv_id, str) or not conv_id:
        raise CorpusError("malformed document: field 'id' must be a non-empty string")
    split = doc.get("split", "train")
    if split not in SPLITS:
        raise CorpusError(f"conversation {conv_id!r}: unknown split {split!r}")
    request, complaint = _parse_labels(doc.get("labels"), conv_id)
    channels = doc.get("channels")
    if not isinstance(channels, dict):
        raise CorpusError(f"conversation {conv_id!r}: field 'channels' must be an object")
    customer = _parse_channel(channels.get("customer"), "customer", conv_id)
    agent = _parse_channel(channels.get("agent"), "agent", conv_id)
    return Conversation(
        id=conv_id,
        customer=customer,
        agent=agent,
        request_label=request,
        complaint_label=complaint,
        split=split,
    )


def serialize_conversation(conv: Conversation) -> str:
    """Serialize a conversation back to schema JSON (parse round-trips it)."""
    complaint: bool | None
    if conv.complaint_label is None:
        complaint = None
    else:
        complaint = conv.complaint_label == "yes"
    doc = {
        "id": conv.id,
        "labels": {"request": conv.request_label, "complaint": complaint},
        "split": conv.split,
        "channels": {
            "customer": [{"start": u.start, "end": u.end, "text": u.text} for u in conv.customer],
            "agent": [{"start": u.start, "end": u.end, "text": u.text} for u in conv.agent],
        },
    }
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def channel_tokens(conv: Conversation, scope: str) -> list[str]:
    """Tokens of one channel, or of the whole conversation, in temporal order.

    For ``whole``, utterances from both channels are interleaved by start
    time; on a start-time tie the customer utterance comes first. Tokens are
    whitespace-split, so placeholders like ``<NAME>`` stay single tokens.
    """
    if scope == "customer":
        utts: list[Utterance] = list(conv.customer)
    elif scope == "agent":
        utts = list(conv.agent)
    elif scope == "whole":
        tagged = [(u.start, 0, u) for u in conv.customer] + [(u.start, 1, u) for u in conv.agent]
        tagged.sort(key=lambda t: (t[0], t[1]))
        utts = [u for _, _, u in tagged]
    else:
        raise CorpusError(f"unknown scope {scope!r} (expected customer, agent, or whole)")
    return [tok for u in utts for tok in u.text.split()]


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: Path
    split: str
    request_label: str | None = None
    complaint_label: str | None = None

    def label_for(self, task: str) -> str | None:
        if task == "request":
            return self.request_label
        if task == "complaint":
            return self.complaint_label
        raise CorpusError(f"unknown task {task!r}")


@dataclass
class Manifest:
    """A loaded dataset manifest with per-split label bookkeeping.

    Conversations are loaded lazily through :meth:`load_conversation`;
    only ids, paths, splits, and labels are read eagerly.
    """

    path: Path
    entries: tuple[ManifestEntry, ...]
    split_counts: dict[str, int] = field(default_factory=dict)
    label_counts: dict[str, dict[str, Counter]] = field(default_factory=dict)
    _by_id: dict[str, ManifestEntry] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._by_id = {e.id: e for e in self.entries}

    def ids(self, split: str | None = None) -> list[str]:
        return [e.id for e in self.entries if split is None or e.split == split]

    def entry(self, conv_id: str) -> ManifestEntry:
        try:
            return self._by_id[conv_id]
        except KeyError:
            raise CorpusError(f"manifest {self.path}: unknown conversation id {conv_id!r}") from None

    def load_conversation(self, conv_id: str) -> Conversation:
        entry = self.entry(conv_id)
        return parse_conversation(entry.path.read_bytes())

    def conversations(self, split: str | None = None) -> Iterator[Conversation]:
        for conv_id in self.ids(split):
            yield self.load_conversation(conv_id)

    def labels_for_task(self, task: str, split: str | None = None) -> dict[str, str]:
        """Map id -> label for a task; every selected entry must be labeled."""
        if task not in TASKS:
            raise CorpusError(f"unknown task {task!r} (expected one of {TASKS})")
        out: dict[str, str] = {}
        for entry in self.entries:
            if split is not None and entry.split != split:
                continue
            label = entry.label_for(task)
            if label is None:
                raise CorpusError(
                    f"manifest {self.path}: conversation {entry.id!r} has no {task} label"
                )
            out[entry.id] = label
        return out


def load_manifest(path: str | Path) -> Manifest:
    """Load a manifest, resolve paths, and compute per-split label counts.

    Raises:
        CorpusError: missing manifest or conversation file, duplicate id,
            invalid split, or an id mismatch between manifest and document.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"manifest file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"manifest {path}: malformed JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise CorpusError(f"manifest {path}: top level must be an array")
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    split_counts: dict[str, int] = {}
    label_counts: dict[str, dict[str, Counter]] = {}
    for i, item in enumerate(raw):
        where = f"manifest {path}[{i}]"
        if not isinstance(item, dict):
            raise CorpusError(f"{where}: entry must be an object")
        conv_id = item.get("id")
        if not isinstance(conv_id, str) or not conv_id:
            raise CorpusError(f"{where}: field 'id' must be a non-empty string")
        if conv_id in seen:
            raise CorpusError(f"{where}: duplicate id {conv_id!r}")
        seen.add(conv_id)
        rel = item.get("path")
        if not isinstance(rel, str) or not rel:
            raise CorpusError(f"{where}: field 'path' must be a non-empty string")
        split = item.get("split")
        if split not in SPLITS:
            raise CorpusError(f"{where}: unknown split {split!r}")
        file_path = (base / rel).resolve()
        if not file_path.is_file():
            raise CorpusError(f"{where}: missing file {file_path} for id {conv_id!r}")
        try:
            doc = json.loads(file_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{where}: malformed JSON in {file_path} ({exc})") from exc
        doc_id = doc.get("id") if isinstance(doc, dict) else None
        if doc_id != conv_id:
            raise CorpusError(f"{where}: document id {doc_id!r} does not match entry id {conv_id!r}")
        labels_obj = doc.get("labels") if isinstance(doc, dict) else None
        request, complaint = _parse_labels(labels_obj, conv_id)
        entries.append(
            ManifestEntry(
                id=conv_id, path=file_path, split=split, request_label=request, complaint_label=complaint
            )
        )
        split_counts[split] = split_counts.get(split, 0) + 1
        per_split = label_counts.setdefault(split, {"request": Counter(), "complaint": Counter()})
        if request is not None:
            per_split["request"][request] += 1
        if complaint is not None:
            per_split["complaint"][complaint] += 1
    return Manifest(path=path, entries=tuple(entries), split_counts=split_counts, label_counts=label_counts)
