"""Pretrained text/audio encoders emitting FSET/FRMX feature files.

A companion to the turnlens analytics toolkit: this package reads the same
manifest/conversation corpus layout and writes the same binary feature
formats, so its outputs drop straight into that pipeline. Extraction comes
in three modes: text vectors from a frozen masked-language-model encoder,
frame-level and pooled features from a self-supervised speech encoder, and
static acoustic functionals through an optional external extractor.
"""
from ._version import __version__
from .audio import audio_embed
from .errors import EmbedError
from .job import AUDIO_VARIANTS, SMILE_VARIANTS, TEXT_VARIANTS, EmbedJob
from .smile import smile_embed
from .text import text_embed

__all__ = [
    "__version__",
    "AUDIO_VARIANTS",
    "SMILE_VARIANTS",
    "TEXT_VARIANTS",
    "EmbedError",
    "EmbedJob",
    "audio_embed",
    "smile_embed",
    "text_embed",
]
