"""Text embeddings: one frozen-encoder vector per conversation.

The scoped transcript is tokenized without special tokens, truncated on the
head or tail side so the finished sequence (special tokens included) fits
the token budget, then encoded. Head keeps the first k content tokens, tail
the last k, matching list slicing exactly.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ._version import __version__
from .corpus import read_conversation, read_manifest, scoped_text
from .encoders import DEFAULT_TEXT_MODEL, encode_text_batch, load_text_encoder
from .errors import EmbedError
from .formats import write_fset, write_metadata
from .job import EmbedJob

log = logging.getLogger("turnlens_embedder")

# Tokenizers report a huge sentinel when they carry no length limit.
_SANE_LIMIT = 1_000_000


def token_budget(tokenizer, max_tokens: int) -> tuple[int, int]:
    """(sequence budget incl. special tokens, special-token count).

    The finished sequence never exceeds ``max_tokens`` or the tokenizer's
    own declared limit, whichever is smaller.
    """
    specials = tokenizer.num_special_tokens_to_add(pair=False)
    limit = getattr(tokenizer, "model_max_length", None)
    total = max_tokens
    if isinstance(limit, int) and 0 < limit < _SANE_LIMIT:
        total = min(total, limit)
    if total - specials < 1:
        raise EmbedError(
            f"token budget {total} leaves no room beside {specials} special tokens"
        )
    return total, specials


def encode_ids(tokenizer, text: str, side: str, total: int) -> list[int]:
    """Token ids for one document, truncated to ``total`` on the given side.

    The tokenizer's truncation keeps the first (head) or last (tail) content
    tokens and then adds its special tokens, so the content kept matches
    plain list slicing of the untruncated token-id sequence.
    """
    tokenizer.truncation_side = "right" if side == "head" else "left"
    return tokenizer(text, add_special_tokens=True, truncation=True, max_length=total)[
        "input_ids"
    ]


def text_embed(job: EmbedJob) -> Path:
    """Write one FSET row per manifest entry; returns the output path."""
    if job.kind != "text":
        raise EmbedError(f"variant {job.variant!r} is not a text variant")
    entries = read_manifest(job.manifest)
    model_id = job.model or DEFAULT_TEXT_MODEL
    tokenizer, encoder = load_text_encoder(model_id)
    total, specials = token_budget(tokenizer, job.max_tokens)
    width = int(encoder.config.hidden_size)
    pad_id = tokenizer.pad_token_id if tokenizer.pad_token_id is not None else 0

    rows = np.zeros((len(entries), width), dtype=np.float32)
    pending: list[tuple[int, list[int]]] = []
    empty_ids: list[str] = []
    for i, entry in enumerate(entries):
        doc = read_conversation(entry.path)
        if doc["id"] != entry.conversation_id:
            raise EmbedError(
                f"conversation {entry.path} carries id {doc['id']!r} but the "
                f"manifest lists {entry.conversation_id!r}"
            )
        text = scoped_text(doc, job.scope)
        if not text:
            log.warning(
                "conversation %s: empty %s text, emitting a zero vector",
                entry.conversation_id,
                job.scope_word,
            )
            empty_ids.append(entry.conversation_id)
            continue
        pending.append((i, encode_ids(tokenizer, text, job.side, total)))

    for start in range(0, len(pending), job.batch_size):
        batch = pending[start : start + job.batch_size]
        vectors = encode_text_batch(encoder, pad_id, [seq for _, seq in batch], job.text_pooling)
        for (row, _), vec in zip(batch, vectors):
            rows[row] = vec

    ids = [entry.conversation_id for entry in entries]
    names = [f"e{i:04d}" for i in range(width)]
    write_fset(job.out, job.variant, names, ids, rows)
    write_metadata(
        job.out,
        {
            "tool": "turnlens-embedder",
            "version": __version__,
            "mode": "text",
            "variant": job.variant,
            "scope": job.scope_word,
            "model": model_id,
            "pooling": job.text_pooling,
            "truncation": {
                "side": job.side,
                "sequence_budget": total,
                "special_tokens": specials,
            },
            "empty_scope": empty_ids,
            "rows": len(ids),
            "width": width,
        },
    )
    log.info("wrote %d x %d text features to %s", len(ids), width, job.out)
    return Path(job.out)
