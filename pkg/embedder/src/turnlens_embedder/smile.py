"""Static acoustic functionals through an optional external extractor.

The extractor (the openSMILE toolkit with its ComParE 2016 configuration)
is not a hard dependency: loading it is isolated here so everything else
works without it, and a missing install fails with a clear message.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from ._version import __version__
from .audio import load_waveform, scope_signal
from .corpus import read_manifest
from .errors import EmbedError
from .formats import write_fset, write_metadata
from .job import EmbedJob

log = logging.getLogger("turnlens_embedder")


class _OpenSmileExtractor:
    """Thin adapter over an opensmile.Smile instance."""

    name = "ComParE_2016"

    def __init__(self, smile) -> None:
        self._smile = smile

    @property
    def feature_names(self) -> list[str]:
        return [str(n) for n in self._smile.feature_names]

    def process(self, signal: np.ndarray, rate: int) -> np.ndarray:
        frame = self._smile.process_signal(signal, rate)
        return np.asarray(frame.to_numpy()[0], dtype=np.float64)


def _load_extractor():
    try:
        import opensmile
    except ImportError as exc:
        raise EmbedError(
            "acoustic functionals need the optional opensmile package; "
            "install it with: pip install 'turnlens-embedder[smile]'"
        ) from exc
    smile = opensmile.Smile(
        feature_set=opensmile.FeatureSet.ComParE_2016,
        feature_level=opensmile.FeatureLevel.Functionals,
    )
    return _OpenSmileExtractor(smile)


def smile_embed(job: EmbedJob) -> Path:
    """Write one functionals row per manifest entry; returns the output path."""
    if job.kind != "smile":
        raise EmbedError(f"variant {job.variant!r} is not an acoustic-functionals variant")
    entries = read_manifest(job.manifest)
    extractor = _load_extractor()
    names = list(extractor.feature_names)
    if not names:
        raise EmbedError("extractor reported no feature names")

    rows = []
    for entry in entries:
        cid = entry.conversation_id
        rate, samples = load_waveform(job.audio_root / f"{cid}.wav")
        vec = np.asarray(extractor.process(scope_signal(samples, job.scope), rate), dtype=np.float64)
        vec = vec.reshape(-1)
        if vec.shape[0] != len(names):
            raise EmbedError(
                f"extractor returned {vec.shape[0]} values for conversation {cid!r} "
                f"(expected {len(names)})"
            )
        rows.append(vec)

    ids = [entry.conversation_id for entry in entries]
    write_fset(job.out, job.variant, names, ids, np.stack(rows))
    write_metadata(
        job.out,
        {
            "tool": "turnlens-embedder",
            "version": __version__,
            "mode": "smile",
            "variant": job.variant,
            "scope": job.scope_word,
            "extractor": getattr(extractor, "name", type(extractor).__name__),
            "rows": len(ids),
            "width": len(names),
        },
    )
    log.info("wrote %d x %d acoustic functionals to %s", len(ids), len(names), job.out)
    return Path(job.out)
