"""Session fixtures: tiny offline encoders, a small dual-channel corpus,
and the acceptance summary hook."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
import torch
from scipy.io import wavfile
from transformers import BertConfig, BertModel, Wav2Vec2Config, Wav2Vec2FeatureExtractor, Wav2Vec2Model

_VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "hello", "my", "line", "is", "slow", "yes", "please", "help",
    "can", "you", "see", "the", "billing", "now", "it", "works",
    "thanks", "we", "no", "alpha", "beta", "gamma", "delta", ".",
]

# Long enough that a 512-token budget forces real truncation.
LONG_TEXT = "alpha beta gamma delta " * 160


@pytest.fixture(scope="session")
def text_model_dir(tmp_path_factory) -> Path:
    """A one-layer 768-wide masked-LM encoder with a word-piece vocabulary."""
    out = tmp_path_factory.mktemp("models") / "text"
    torch.manual_seed(867)
    config = BertConfig(
        vocab_size=len(_VOCAB),
        hidden_size=768,
        num_hidden_layers=1,
        num_attention_heads=4,
        intermediate_size=128,
        max_position_embeddings=512,
    )
    BertModel(config).save_pretrained(out)
    (out / "vocab.txt").write_text("\n".join(_VOCAB) + "\n", encoding="utf-8")
    (out / "tokenizer_config.json").write_text(
        json.dumps(
            {"tokenizer_class": "BertTokenizer", "do_lower_case": True, "model_max_length": 512}
        )
        + "\n",
        encoding="utf-8",
    )
    return out


@pytest.fixture(scope="session")
def audio_model_dir(tmp_path_factory) -> Path:
    """A two-layer 768-wide speech encoder with the stock 16 kHz front end."""
    out = tmp_path_factory.mktemp("models") / "audio"
    torch.manual_seed(868)
    config = Wav2Vec2Config(
        vocab_size=32,
        hidden_size=768,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=128,
        conv_dim=(32, 32, 32, 32, 32, 32, 32),
        num_conv_pos_embeddings=16,
        num_conv_pos_embedding_groups=16,
        layerdrop=0.0,
        apply_spec_augment=False,
    )
    Wav2Vec2Model(config).save_pretrained(out)
    Wav2Vec2FeatureExtractor().save_pretrained(out)
    return out


@dataclass(frozen=True)
class Corpus:
    root: Path
    manifest: Path
    ids: tuple[str, ...]


def _segment(start: float, end: float, text: str) -> dict:
    return {"start": start, "end": end, "text": text}


# (request label, complaint label, split, audio rate, audio seconds)
_CONVERSATIONS = {
    "call-001": ("process", False, "train", 16000, 1.0),
    "call-002": ("member", True, "devel", 8000, 2.0),
    "call-003": ("process", True, "train", 16000, 10.0),
    "call-004": ("member", False, "devel", 16000, 1.0),
}


def _channels(cid: str) -> dict:
    if cid == "call-001":
        return {
            "customer": [
                _segment(0.0, 0.8, "hello my line is slow"),
                _segment(2.4, 3.0, "yes please help"),
            ],
            "agent": [_segment(1.0, 2.2, "can you see the billing now")],
        }
    if cid == "call-002":
        return {"customer": [_segment(0.0, 9.5, LONG_TEXT)], "agent": []}
    if cid == "call-003":
        return {
            "customer": [_segment(0.0, 4.0, "it works thanks")],
            "agent": [_segment(4.5, 9.0, "we can help you now")],
        }
    return {"customer": [_segment(0.0, 0.4, "no")], "agent": [_segment(0.5, 0.9, "thanks")]}


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> Corpus:
    """Four labeled conversations with transcripts and dual-channel WAVs.

    Audio layout: call-002 is 8 kHz (exercises resampling), call-003 is
    10 s with identical channels (joint mix equals either channel), and
    call-004 has a silent agent channel.
    """
    root = tmp_path_factory.mktemp("corpus")
    (root / "conversations").mkdir()
    rng = np.random.default_rng(4242)
    manifest = []
    for cid, (request, complaint, split, rate, seconds) in _CONVERSATIONS.items():
        doc = {
            "id": cid,
            "labels": {"request": request, "complaint": complaint},
            "split": split,
            "channels": _channels(cid),
        }
        (root / "conversations" / f"{cid}.json").write_text(json.dumps(doc), encoding="utf-8")
        manifest.append({"id": cid, "path": f"conversations/{cid}.json", "split": split})

        n = int(rate * seconds)
        pcm = (rng.standard_normal((n, 2)) * 2500.0).astype(np.int16)
        if cid == "call-003":
            pcm[:, 1] = pcm[:, 0]
        if cid == "call-004":
            pcm[:, 1] = 0
        wavfile.write(root / f"{cid}.wav", rate, pcm)
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
    return Corpus(root=root, manifest=manifest_path, ids=tuple(_CONVERSATIONS))


_CRITERION_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")

_CRITERION_LABELS = {
    10: "embedder FSET/FRMX outputs pass the analytics readers, id-aligned",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[int, str] = {}
    for status, verdict in (("failed", "FAIL"), ("error", "FAIL"), ("passed", "PASS")):
        for report in terminalreporter.stats.get(status, []):
            match = _CRITERION_PATTERN.search(getattr(report, "nodeid", ""))
            if match:
                num = int(match.group(1))
                if verdict == "FAIL" or num not in outcomes:
                    outcomes[num] = verdict
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(outcomes):
        label = _CRITERION_LABELS.get(num, "")
        terminalreporter.write_line(f"criterion {num}: {outcomes[num]} - {label}")
