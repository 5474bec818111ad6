"""Markov-chain synthetic conversation generator.

Walks a segment-type chain (speaking states S1-S4, silences S5-S8), samples
log-normal durations, and reconstructs the two channels' talkspurts so that
``label_segments`` on the output recovers the generated sequence exactly.
That round trip makes the generator the segmentation module's test dual.

Generated datasets are written in the corpus schema with a manifest, so the
whole pipeline runs on synthetic data end to end.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    COMPLAINT_LABELS,
    REQUEST_LABELS,
    Conversation,
    Utterance,
    serialize_conversation,
)
from .errors import ConfigError, DataError
from .turntaking import (
    DEFAULT_MERGE_GAP,
    SPEAKING_TYPES,
    Segment,
    SegmentSequence,
    SegmentType,
    Talkspurt,
)

_S = SegmentType

# Transitions the generator may realize. Subset of SUCCESSORS: after an
# overlap ends with a simultaneous stop, the floor-holder tie rules award the
# silence to the channel that started the overlap (customer for S3, agent for
# S4), so S3->S5/S8 and S4->S6/S7, while present in the normative table,
# cannot occur in labeled output and are excluded here to keep the round
# trip exact.
GENERATOR_SUCCESSORS: dict[SegmentType, tuple[SegmentType, ...]] = {
    _S.S1: (_S.S3, _S.S6, _S.S7),
    _S.S2: (_S.S4, _S.S5, _S.S8),
    _S.S3: (_S.S1, _S.S2, _S.S6, _S.S7),
    _S.S4: (_S.S1, _S.S2, _S.S5, _S.S8),
    _S.S5: (_S.S1, _S.S3),
    _S.S6: (_S.S2,),
    _S.S7: (_S.S1, _S.S3),
    _S.S8: (_S.S2,),
}

# A conversation opens with its first talkspurt, so the first segment is a
# speaking state; S4 needs a preceding S2 and cannot open.
_START_STATES = (_S.S1, _S.S2, _S.S3)
_START_PROBS = (0.45, 0.45, 0.10)

_DEFAULT_TRANSITIONS: dict[str, dict[str, float]] = {
    "S1": {"S3": 0.10, "S6": 0.50, "S7": 0.40},
    "S2": {"S4": 0.10, "S5": 0.50, "S8": 0.40},
    "S3": {"S1": 0.45, "S2": 0.45, "S6": 0.05, "S7": 0.05},
    "S4": {"S1": 0.45, "S2": 0.45, "S5": 0.05, "S8": 0.05},
    "S5": {"S1": 0.95, "S3": 0.05},
    "S6": {"S2": 1.0},
    "S7": {"S1": 0.95, "S3": 0.05},
    "S8": {"S2": 1.0},
}

# (mu, sigma) in log-seconds: speech ~4 s, overlaps ~0.6 s, pauses ~0.5 s
_DEFAULT_DURATIONS: dict[str, tuple[float, float]] = {
    "S1": (1.261, 0.50),
    "S2": (1.261, 0.50),
    "S3": (-0.636, 0.50),
    "S4": (-0.636, 0.50),
    "S5": (-0.754, 0.35),
    "S6": (-0.754, 0.35),
    "S7": (-0.754, 0.35),
    "S8": (-0.754, 0.35),
}

_WORDS = (
    "yes", "so", "the", "account", "please", "right", "well", "okay",
    "thanks", "billing", "card", "help", "number", "monday", "send", "update",
)


@dataclass(frozen=True, eq=False)
class Profile:
    """Generator parameters for one conversation population."""

    name: str
    transitions: dict[SegmentType, dict[SegmentType, float]]
    durations: dict[SegmentType, tuple[float, float]]
    target_duration: float = 60.0
    words_per_second: float = 2.5
    merge_gap: float = DEFAULT_MERGE_GAP
    request_label: str | None = None
    complaint_label: str | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("profile name must be non-empty")
        if self.target_duration <= 0:
            raise ConfigError(f"profile {self.name!r}: target_duration must be > 0")
        if self.words_per_second <= 0:
            raise ConfigError(f"profile {self.name!r}: words_per_second must be > 0")
        if self.merge_gap < 0:
            raise ConfigError(f"profile {self.name!r}: merge_gap must be >= 0")
        if self.request_label is not None and self.request_label not in REQUEST_LABELS:
            raise ConfigError(f"profile {self.name!r}: unknown request label {self.request_label!r}")
        if self.complaint_label is not None and self.complaint_label not in COMPLAINT_LABELS:
            raise ConfigError(f"profile {self.name!r}: unknown complaint label {self.complaint_label!r}")
        for t in SegmentType:
            row = self.transitions.get(t)
            if not row:
                raise ConfigError(f"profile {self.name!r}: missing transition row for {t.value}")
            allowed = set(GENERATOR_SUCCESSORS[t])
            extra = set(row) - allowed
            if extra:
                names = ", ".join(sorted(s.value for s in extra))
                raise ConfigError(
                    f"profile {self.name!r}: {t.value} row names unreachable successors: {names}"
                )
            total = 0.0
            for succ, p in row.items():
                if not (math.isfinite(p) and p >= 0):
                    raise ConfigError(
                        f"profile {self.name!r}: bad probability {p} for {t.value}->{succ.value}"
                    )
                total += p
            if abs(total - 1.0) > 1e-6:
                raise ConfigError(
                    f"profile {self.name!r}: {t.value} row sums to {total}, expected 1"
                )
            mu, sigma = self.durations.get(t, (None, None))
            if mu is None or not (math.isfinite(mu) and math.isfinite(sigma)):
                raise ConfigError(f"profile {self.name!r}: missing duration parameters for {t.value}")
            if sigma <= 0:
                raise ConfigError(f"profile {self.name!r}: sigma must be > 0 for {t.value}")

    @classmethod
    def default(
        cls,
        name: str = "default",
        request_label: str | None = None,
        complaint_label: str | None = None,
        **overrides,
    ) -> "Profile":
        return cls(
            name=name,
            transitions={
                _S(t): {_S(s): p for s, p in row.items()}
                for t, row in _DEFAULT_TRANSITIONS.items()
            },
            durations={_S(t): ms for t, ms in _DEFAULT_DURATIONS.items()},
            request_label=request_label,
            complaint_label=complaint_label,
            **overrides,
        )

    def scale_durations(self, types, factor: float) -> "Profile":
        """New profile whose mean duration for the given types is multiplied.

        Log-normal mean is exp(mu + sigma^2/2), so shifting mu by ln(factor)
        scales the mean while leaving sigma (hence shape) untouched.
        """
        if factor <= 0:
            raise ConfigError(f"duration scale factor must be > 0, got {factor}")
        shift = math.log(factor)
        wanted = {SegmentType(t) for t in types}
        durations = {
            t: ((mu + shift, sigma) if t in wanted else (mu, sigma))
            for t, (mu, sigma) in self.durations.items()
        }
        return dataclasses.replace(self, durations=durations)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "transitions": {
                t.value: {s.value: p for s, p in sorted(row.items(), key=lambda kv: kv[0].value)}
                for t, row in sorted(self.transitions.items(), key=lambda kv: kv[0].value)
            },
            "durations": {
                t.value: [mu, sigma]
                for t, (mu, sigma) in sorted(self.durations.items(), key=lambda kv: kv[0].value)
            },
            "target_duration": self.target_duration,
            "words_per_second": self.words_per_second,
            "merge_gap": self.merge_gap,
            "labels": {
                "request": self.request_label,
                "complaint": self.complaint_label,
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Profile":
        try:
            labels = obj.get("labels") or {}
            return cls(
                name=str(obj["name"]),
                transitions={
                    _S(t): {_S(s): float(p) for s, p in row.items()}
                    for t, row in obj["transitions"].items()
                },
                durations={
                    _S(t): (float(ms[0]), float(ms[1])) for t, ms in obj["durations"].items()
                },
                target_duration=float(obj.get("target_duration", 60.0)),
                words_per_second=float(obj.get("words_per_second", 2.5)),
                merge_gap=float(obj.get("merge_gap", DEFAULT_MERGE_GAP)),
                request_label=labels.get("request"),
                complaint_label=labels.get("complaint"),
            )
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise ConfigError(f"invalid profile config: {exc}") from exc


@dataclass(frozen=True, eq=False)
class GeneratedConversation:
    """One synthetic conversation plus the chain that produced it."""

    conversation_id: str
    profile_name: str
    customer: tuple[Talkspurt, ...]
    agent: tuple[Talkspurt, ...]
    segments: SegmentSequence
    request_label: str | None
    complaint_label: str | None

    @property
    def labels(self) -> dict[str, str | None]:
        return {"request": self.request_label, "complaint": self.complaint_label}

    def to_conversation(self, words_per_second: float = 2.5, split: str = "train") -> Conversation:
        ordinal = 0

        def utterances(spurts: tuple[Talkspurt, ...]) -> tuple[Utterance, ...]:
            nonlocal ordinal
            out = []
            for sp in spurts:
                n_words = max(1, round(sp.duration * words_per_second))
                text = " ".join(_WORDS[(ordinal + k) % len(_WORDS)] for k in range(n_words))
                out.append(Utterance(start=sp.start, end=sp.end, text=text))
                ordinal += 1
            return tuple(out)

        return Conversation(
            id=self.conversation_id,
            customer=utterances(self.customer),
            agent=utterances(self.agent),
            request_label=self.request_label,
            complaint_label=self.complaint_label,
            split=split,
        )


def _channel_talkspurts(segments: tuple[Segment, ...], channel: str) -> tuple[Talkspurt, ...]:
    on_types = {_S.S1, _S.S3, _S.S4} if channel == "customer" else {_S.S2, _S.S3, _S.S4}
    spurts: list[Talkspurt] = []
    open_start: float | None = None
    for seg in segments:
        if seg.type in on_types:
            if open_start is None:
                open_start = seg.start
        elif open_start is not None:
            spurts.append(Talkspurt(start=open_start, end=seg.start, channel=channel))
            open_start = None
    if open_start is not None:
        spurts.append(Talkspurt(start=open_start, end=segments[-1].end, channel=channel))
    return tuple(spurts)


def generate_conversation(
    profile: Profile,
    seed,
    conversation_id: str = "synth-00000",
) -> GeneratedConversation:
    """Generate one conversation; same profile and seed give identical output.

    Durations are floored at merge_gap so that every same-channel silence run
    (one or more consecutive segments) is at least merge_gap long; generated
    talkspurts therefore survive build_talkspurts unchanged.
    """
    rng = np.random.default_rng(seed)
    floor = max(profile.merge_gap, 1e-3)

    rows: dict[SegmentType, tuple[tuple[SegmentType, ...], np.ndarray]] = {}
    for t, row in profile.transitions.items():
        succs = tuple(sorted(row, key=lambda s: s.value))
        probs = np.array([row[s] for s in succs], dtype=np.float64)
        rows[t] = (succs, probs / probs.sum())

    start_p = np.array(_START_PROBS)
    state = _START_STATES[int(rng.choice(len(_START_STATES), p=start_p / start_p.sum()))]

    t_now = 0.0
    segments: list[Segment] = []
    while True:
        mu, sigma = profile.durations[state]
        dur = max(float(rng.lognormal(mu, sigma)), floor)
        segments.append(Segment(type=state, start=t_now, end=t_now + dur))
        t_now = t_now + dur
        if t_now >= profile.target_duration and state in SPEAKING_TYPES:
            break
        succs, probs = rows[state]
        state = succs[int(rng.choice(len(succs), p=probs))]

    seg_tuple = tuple(segments)
    return GeneratedConversation(
        conversation_id=conversation_id,
        profile_name=profile.name,
        customer=_channel_talkspurts(seg_tuple, "customer"),
        agent=_channel_talkspurts(seg_tuple, "agent"),
        segments=SegmentSequence(conversation_id=conversation_id, segments=seg_tuple),
        request_label=profile.request_label,
        complaint_label=profile.complaint_label,
    )


def _apportion(weights: list[float], n: int) -> list[int]:
    """Largest-remainder apportionment of n among weights."""
    exact = [w * n for w in weights]
    base = [int(math.floor(e)) for e in exact]
    short = n - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def generate_dataset(
    profiles: list[Profile],
    weights: list[float],
    n: int,
    seed: int,
    out_dir: str | Path,
) -> Path:
    """Write n conversations and a manifest under out_dir; returns the manifest path.

    Conversations are apportioned to profiles by largest remainder and split
    train/devel by alternation within each profile block, which keeps the
    split stratified (exact 50/50 per profile for even block sizes). Each
    conversation gets an independent stream seeded by (seed, global index),
    so generation order (or a parallel run) cannot change the output.
    """
    if n < 2:
        raise DataError(f"dataset size must be >= 2, got {n}")
    if not profiles:
        raise DataError("at least one profile is required")
    if len(weights) != len(profiles):
        raise DataError("profiles and weights must have the same length")
    if any(not (math.isfinite(w) and w >= 0) for w in weights):
        raise DataError("weights must be finite and >= 0")
    total = sum(weights)
    if abs(total - 1.0) > 1e-6:
        raise DataError(f"weights must sum to 1, got {total}")
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise DataError("profile names must be unique")

    out_dir = Path(out_dir)
    conv_dir = out_dir / "conversations"
    conv_dir.mkdir(parents=True, exist_ok=True)

    counts = _apportion([w / total for w in weights], n)
    entries: list[dict] = []
    index = 0
    for profile, count in zip(profiles, counts):
        for local in range(count):
            conv_id = f"synth-{index:05d}"
            split = "train" if local % 2 == 0 else "devel"
            gen = generate_conversation(
                profile, np.random.SeedSequence((seed, index)), conversation_id=conv_id
            )
            conv = gen.to_conversation(words_per_second=profile.words_per_second, split=split)
            rel = f"conversations/{conv_id}.json"
            (out_dir / rel).write_text(serialize_conversation(conv), encoding="utf-8")
            entries.append({"id": conv_id, "path": rel, "split": split})
            index += 1

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    return manifest_path
