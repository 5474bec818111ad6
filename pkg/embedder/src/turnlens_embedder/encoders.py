"""Frozen pretrained encoders behind small loading and inference helpers.

torch and transformers import slowly, so they load lazily inside these
functions; everything else in the package stays importable in milliseconds.
Models always run in evaluation mode under ``no_grad``: the encoders are
frozen, and repeated runs on the same inputs produce identical bytes.
"""
from __future__ import annotations

import numpy as np

from .errors import EmbedError

DEFAULT_TEXT_MODEL = "camembert-base"
DEFAULT_AUDIO_MODEL = "facebook/wav2vec2-base"


def _quiet_transformers() -> None:
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()


def load_text_encoder(model: str):
    """Load a tokenizer and masked-language-model encoder, frozen."""
    _quiet_transformers()
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model)
        encoder = AutoModel.from_pretrained(model)
    except (OSError, ValueError) as exc:
        raise EmbedError(f"cannot load text encoder {model!r}: {exc}") from exc
    encoder.eval()
    return tokenizer, encoder


def load_speech_encoder(model: str):
    """Load a feature extractor and self-supervised speech encoder, frozen.

    A model directory without a preprocessor config falls back to the stock
    16 kHz extractor settings.
    """
    _quiet_transformers()
    from transformers import AutoFeatureExtractor, AutoModel, Wav2Vec2FeatureExtractor

    try:
        encoder = AutoModel.from_pretrained(model)
    except (OSError, ValueError) as exc:
        raise EmbedError(f"cannot load speech encoder {model!r}: {exc}") from exc
    try:
        extractor = AutoFeatureExtractor.from_pretrained(model)
    except (OSError, ValueError):
        extractor = Wav2Vec2FeatureExtractor()
    encoder.eval()
    return extractor, encoder


def encode_text_batch(encoder, pad_id: int, sequences: list[list[int]], pooling: str) -> np.ndarray:
    """Run one padded batch of token-id sequences; one vector per sequence.

    cls pooling takes the final-layer state of the sequence-start token;
    mean pooling averages final-layer states over non-pad positions.
    """
    import torch

    longest = max(len(seq) for seq in sequences)
    input_ids = torch.full((len(sequences), longest), pad_id, dtype=torch.long)
    mask = torch.zeros((len(sequences), longest), dtype=torch.long)
    for i, seq in enumerate(sequences):
        input_ids[i, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        mask[i, : len(seq)] = 1
    with torch.no_grad():
        out = encoder(input_ids=input_ids, attention_mask=mask)
    hidden = out.last_hidden_state
    if pooling == "cls":
        pooled = hidden[:, 0, :]
    else:
        weights = mask.unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * weights).sum(dim=1) / weights.sum(dim=1)
    return pooled.to(torch.float32).numpy()


def speech_frames(encoder, extractor, waveform: np.ndarray, rate: int) -> np.ndarray:
    """Penultimate-layer frame features for one waveform, as a T x D array."""
    import torch

    inputs = extractor(waveform, sampling_rate=rate, return_tensors="pt")
    with torch.no_grad():
        out = encoder(**inputs, output_hidden_states=True)
    return out.hidden_states[-2][0].to(torch.float32).numpy()
