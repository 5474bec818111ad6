"""Speech-encoder frame features and their pooled functionals.

Each conversation is one dual-channel WAV file, ``<id>.wav``, with the
customer on channel 0 and the agent on channel 1. Scope c/a takes one
channel; scope j mixes both to mono by averaging. Waveforms are resampled
to the encoder's rate when they differ, with a warning.

Frames come from the penultimate encoder layer; the pooled vector stacks
the blocks [Mean | Sd | Kurtosis | Skewness] per dimension, the same order
and population moments the analytics toolkit uses.
"""
from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from ._version import __version__
from .corpus import read_manifest
from .encoders import DEFAULT_AUDIO_MODEL, load_speech_encoder, speech_frames
from .errors import EmbedError
from .formats import write_frmx, write_fset, write_metadata
from .job import EmbedJob

log = logging.getLogger("turnlens_embedder")

_CHANNEL_INDEX = {"c": 0, "a": 1}

_PCM_SCALE = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
}


def load_waveform(path: Path) -> tuple[int, np.ndarray]:
    """Read a dual-channel WAV as (rate, float32 samples x 2)."""
    if not path.is_file():
        raise EmbedError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise EmbedError(f"unreadable audio {path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 2:
        raise EmbedError(
            f"{path}: expected 2-channel audio (customer, agent), got shape {data.shape}"
        )
    if data.dtype in _PCM_SCALE:
        samples = data.astype(np.float32) / _PCM_SCALE[data.dtype]
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float32) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float32)
    else:
        raise EmbedError(f"{path}: unsupported sample type {data.dtype}")
    return int(rate), samples


def scope_signal(samples: np.ndarray, scope: str) -> np.ndarray:
    """One channel, or the mono mix for the joint scope."""
    if scope == "j":
        return samples.mean(axis=1).astype(np.float32)
    return np.ascontiguousarray(samples[:, _CHANNEL_INDEX[scope]])


def resample(x: np.ndarray, rate: int, target: int, conversation_id: str) -> np.ndarray:
    log.warning(
        "conversation %s: resampling audio from %d Hz to %d Hz",
        conversation_id,
        rate,
        target,
    )
    g = math.gcd(rate, target)
    return resample_poly(x, target // g, rate // g).astype(np.float32)


def receptive_field(config) -> tuple[int, int]:
    """(samples needed for one frame, hop in samples) of the conv front end."""
    field, hop = 1, 1
    for kernel, stride in zip(config.conv_kernel, config.conv_stride):
        field += (kernel - 1) * hop
        hop *= stride
    return field, hop


def functionals(frames: np.ndarray) -> np.ndarray:
    """Pool a T x D frame matrix to 4*D values, blocks [Mean|Sd|Kurtosis|Skewness].

    Population moments; dimensions with zero variance get Sd = K = Sk = 0.
    Kurtosis is excess kurtosis.
    """
    x = np.asarray(frames, dtype=np.float64)
    n = x.shape[0]
    mean = x.mean(axis=0)
    d = x - mean
    d2 = d * d
    m2 = d2.mean(axis=0)
    m3 = (d2 * d).mean(axis=0)
    m4 = (d2 * d2).mean(axis=0)
    sd = np.sqrt(m2)
    ok = (m2 > 0.0) & (n >= 2)
    zero = np.zeros_like(mean)
    skew = np.divide(m3, m2**1.5, out=zero.copy(), where=ok)
    kurt = np.divide(m4, m2 * m2, out=zero.copy(), where=ok)
    kurt = kurt - np.where(ok, 3.0, 0.0)
    return np.concatenate([mean, sd, kurt, skew])


def pooled_names(d: int) -> list[str]:
    return [f"{stat}{i:04d}" for stat in ("Mean", "Sd", "Kurtosis", "Skewness") for i in range(d)]


def audio_embed(job: EmbedJob) -> Path:
    """Write the pooled FSET (and per-conversation FRMX files when asked).

    ``job.out`` receives one 4*D row per manifest entry; ``job.frames_dir``,
    when set, receives ``<id>.frmx`` with the raw frame sequences.
    """
    if job.kind != "audio":
        raise EmbedError(f"variant {job.variant!r} is not an audio variant")
    entries = read_manifest(job.manifest)
    model_id = job.model or DEFAULT_AUDIO_MODEL
    extractor, encoder = load_speech_encoder(model_id)
    target = int(extractor.sampling_rate)
    min_samples, hop = receptive_field(encoder.config)
    period_ms = max(int(round(1000.0 * hop / target)), 1)
    if job.frames_dir is not None:
        job.frames_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    resampled: dict[str, list[int]] = {}
    for entry in entries:
        cid = entry.conversation_id
        rate, samples = load_waveform(job.audio_root / f"{cid}.wav")
        x = scope_signal(samples, job.scope)
        if rate != target:
            x = resample(x, rate, target, cid)
            resampled[cid] = [rate, target]
        if x.shape[0] < min_samples:
            raise EmbedError(
                f"conversation {cid}: audio too short for one frame "
                f"({x.shape[0]} samples, need >= {min_samples} at {target} Hz)"
            )
        frames = speech_frames(encoder, extractor, x, target)
        if job.frames_dir is not None:
            write_frmx(job.frames_dir / f"{cid}.frmx", cid, period_ms, frames)
        rows.append(functionals(frames))

    width = int(encoder.config.hidden_size)
    ids = [entry.conversation_id for entry in entries]
    write_fset(job.out, job.variant, pooled_names(width), ids, np.stack(rows))
    write_metadata(
        job.out,
        {
            "tool": "turnlens-embedder",
            "version": __version__,
            "mode": "audio",
            "variant": job.variant,
            "scope": job.scope_word,
            "model": model_id,
            "sample_rate": target,
            "frame_period_ms": period_ms,
            "frame_hop_samples": hop,
            "chunking": "none",
            "block_order": "Mean|Sd|Kurtosis|Skewness",
            "resampled": resampled,
            "frames_dir": str(job.frames_dir) if job.frames_dir is not None else None,
            "rows": len(ids),
            "width": 4 * width,
        },
    )
    log.info("wrote %d x %d pooled audio features to %s", len(ids), 4 * width, job.out)
    return Path(job.out)
