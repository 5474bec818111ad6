"""Embedding job description and the variant grammar.

A variant name is two letters. The first picks the extractor and, for text,
the truncation side: H = text with head truncation, T = text with tail
truncation, W = self-supervised speech frames, C = acoustic functionals.
The second picks the channel scope: c = customer, a = agent, and w (text)
or j (audio) for both channels together.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import EmbedError

TEXT_VARIANTS = ("Hc", "Ha", "Hw", "Tc", "Ta", "Tw")
AUDIO_VARIANTS = ("Wc", "Wa", "Wj")
SMILE_VARIANTS = ("Cc", "Ca", "Cj")

_ALL_VARIANTS = TEXT_VARIANTS + AUDIO_VARIANTS + SMILE_VARIANTS
_KIND_BY_PREFIX = {"H": "text", "T": "text", "W": "audio", "C": "smile"}
_SCOPE_WORDS = {"c": "customer", "a": "agent", "w": "whole", "j": "joint"}

TEXT_POOLINGS = ("cls", "mean")

# Encoded text sequences are capped at this many tokens, special tokens
# included, unless the tokenizer declares a smaller limit.
DEFAULT_MAX_TOKENS = 512


@dataclass(frozen=True)
class EmbedJob:
    """One extraction run: a manifest in, one feature file out."""

    manifest: Path
    variant: str
    out: Path
    model: str = ""
    text_pooling: str = "cls"
    audio_dir: Path | None = None
    frames_dir: Path | None = None
    batch_size: int = 8
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        object.__setattr__(self, "manifest", Path(self.manifest))
        object.__setattr__(self, "out", Path(self.out))
        if self.audio_dir is not None:
            object.__setattr__(self, "audio_dir", Path(self.audio_dir))
        if self.frames_dir is not None:
            object.__setattr__(self, "frames_dir", Path(self.frames_dir))
        if self.variant not in _ALL_VARIANTS:
            raise EmbedError(
                f"unknown variant {self.variant!r} (expected one of {', '.join(_ALL_VARIANTS)})"
            )
        if self.text_pooling not in TEXT_POOLINGS:
            raise EmbedError(
                f"unknown text pooling {self.text_pooling!r} (expected cls or mean)"
            )
        if self.batch_size < 1:
            raise EmbedError(f"batch size must be >= 1, got {self.batch_size}")
        if self.max_tokens < 3:
            # two special tokens plus at least one content token
            raise EmbedError(f"max tokens must be >= 3, got {self.max_tokens}")

    @property
    def kind(self) -> str:
        return _KIND_BY_PREFIX[self.variant[0]]

    @property
    def scope(self) -> str:
        """Channel scope letter: c, a, w, or j."""
        return self.variant[1]

    @property
    def scope_word(self) -> str:
        return _SCOPE_WORDS[self.scope]

    @property
    def side(self) -> str:
        """Truncation side for text variants: head or tail."""
        return "head" if self.variant[0] == "H" else "tail"

    @property
    def audio_root(self) -> Path:
        """Directory holding per-conversation WAV files; defaults next to the manifest."""
        return self.audio_dir if self.audio_dir is not None else self.manifest.parent
