"""Talkspurt construction, timeline labeling (S1-S8), and interaction features.

The conversation timeline is tiled with eight segment types:

* S1 customer speaking alone, S2 agent speaking alone;
* S3 overlap where the agent started while the customer was speaking,
  S4 overlap where the customer started while the agent was speaking;
* S5 switching pause agent -> customer, S6 switching pause customer -> agent;
* S7 customer pause (customer -> customer), S8 agent pause (agent -> agent).

Silence before the first talkspurt and after the last one is dropped.
Tie rules make labeling deterministic: when both channels stop at the same
instant, the speaker whose talkspurt started earlier is deemed last to stop;
when both start at the same instant, the customer is deemed to start first.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._stats import population_stats
from .errors import DataError

DEFAULT_MERGE_GAP = 0.2


class SegmentType(str, enum.Enum):
    S1 = "S1"  # customer alone
    S2 = "S2"  # agent alone
    S3 = "S3"  # overlap, agent began while customer was speaking
    S4 = "S4"  # overlap, customer began while agent was speaking
    S5 = "S5"  # switching pause, agent -> customer
    S6 = "S6"  # switching pause, customer -> agent
    S7 = "S7"  # customer pause
    S8 = "S8"  # agent pause


_S = SegmentType

#: Allowed successors of each segment type under the tie rules above.
SUCCESSORS: dict[SegmentType, frozenset[SegmentType]] = {
    _S.S1: frozenset({_S.S3, _S.S6, _S.S7}),
    _S.S2: frozenset({_S.S4, _S.S5, _S.S8}),
    _S.S3: frozenset({_S.S1, _S.S2, _S.S5, _S.S6, _S.S7, _S.S8}),
    _S.S4: frozenset({_S.S1, _S.S2, _S.S5, _S.S6, _S.S7, _S.S8}),
    _S.S5: frozenset({_S.S1, _S.S3}),
    _S.S6: frozenset({_S.S2}),
    _S.S7: frozenset({_S.S1, _S.S3}),
    _S.S8: frozenset({_S.S2}),
}

SPEAKING_TYPES = (_S.S1, _S.S2, _S.S3, _S.S4)
SILENCE_TYPES = (_S.S5, _S.S6, _S.S7, _S.S8)


@dataclass(frozen=True)
class Talkspurt:
    """A maximal contiguous speech interval of one channel."""

    start: float
    end: float
    channel: str = "customer"

    def __post_init__(self) -> None:
        if not (self.end > self.start):
            raise DataError(f"talkspurt end ({self.end}) must exceed start ({self.start})")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Segment:
    type: SegmentType
    start: float
    end: float

    def __post_init__(self) -> None:
        if not (self.end > self.start):
            raise DataError(f"segment end ({self.end}) must exceed start ({self.start})")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True, eq=False)
class SegmentSequence:
    """Contiguous labeled tiling of one conversation's timeline."""

    conversation_id: str
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        for prev, cur in zip(self.segments, self.segments[1:]):
            if cur.start != prev.end:
                raise DataError(
                    f"segments not contiguous: {prev.end} followed by {cur.start}"
                )

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    @property
    def total_duration(self) -> float:
        if not self.segments:
            return 0.0
        return self.segments[-1].end - self.segments[0].start

    def to_dicts(self) -> list[dict]:
        return [{"type": s.type.value, "start": s.start, "end": s.end} for s in self.segments]

    def validate_successors(self) -> None:
        """Check first/last are speaking segments and adjacencies obey SUCCESSORS.

        Kept out of construction: a zero-length switching pause (one channel
        stopping at the exact instant the other starts) legally produces an
        S1/S2 adjacency outside the table, and such inputs must still label.
        """
        if not self.segments:
            return
        for edge in (self.segments[0], self.segments[-1]):
            if edge.type not in SPEAKING_TYPES:
                raise DataError(f"sequence must start/end in a speaking segment, got {edge.type.value}")
        for prev, cur in zip(self.segments, self.segments[1:]):
            if cur.type not in SUCCESSORS[prev.type]:
                raise DataError(f"illegal transition {prev.type.value} -> {cur.type.value}")


def _spans(items: Iterable) -> list[tuple[float, float]]:
    """Normalize talkspurts/utterances/(start, end) pairs to float pairs."""
    out: list[tuple[float, float]] = []
    for item in items:
        if hasattr(item, "start") and hasattr(item, "end"):
            s, e = float(item.start), float(item.end)
        else:
            s, e = item
            s, e = float(s), float(e)
        if not (e > s):
            raise DataError(f"interval end ({e}) must exceed start ({s})")
        out.append((s, e))
    return out


def _check_disjoint_sorted(spans: Sequence[tuple[float, float]], what: str) -> None:
    for (s0, e0), (s1, _e1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise DataError(f"{what} intervals overlap or are unsorted: ({s0}, {e0}) then start {s1}")


def build_talkspurts(
    intervals: Iterable,
    merge_gap: float = DEFAULT_MERGE_GAP,
    channel: str = "customer",
) -> list[Talkspurt]:
    """Merge one channel's utterance intervals into talkspurts.

    Consecutive intervals separated by a gap strictly smaller than
    ``merge_gap`` are absorbed into one talkspurt; gaps >= merge_gap
    survive and later become S7/S8 pauses.
    """
    if merge_gap < 0:
        raise DataError(f"merge_gap must be >= 0, got {merge_gap}")
    spans = sorted(_spans(intervals))
    _check_disjoint_sorted(spans, channel)
    merged: list[list[float]] = []
    for s, e in spans:
        if merged and s - merged[-1][1] < merge_gap:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [Talkspurt(start=s, end=e, channel=channel) for s, e in merged]


def label_segments(
    customer: Iterable,
    agent: Iterable,
    conversation_id: str = "",
) -> SegmentSequence:
    """Label the timeline between boundary events with segment types.

    A sweep over talkspurt boundary events classifies each maximal interval
    of constant speaking state; adjacent intervals with the same label are
    coalesced. Leading/trailing silence is dropped and zero-length intervals
    are skipped.

    Raises:
        DataError: no talkspurt on either channel, or overlapping/unsorted
            talkspurts within one channel.
    """
    cust = sorted(_spans(customer))
    agnt = sorted(_spans(agent))
    _check_disjoint_sorted(cust, "customer")
    _check_disjoint_sorted(agnt, "agent")
    if not cust and not agnt:
        raise DataError("no talkspurts on either channel")

    events = sorted({t for s, e in cust for t in (s, e)} | {t for s, e in agnt for t in (s, e)})
    ci = ai = 0
    last_c: tuple[float, float] | None = None  # most recently ended customer spurt
    last_a: tuple[float, float] | None = None
    raw: list[tuple[SegmentType, float, float]] = []

    for a, b in zip(events, events[1:]):
        while ci < len(cust) and cust[ci][1] <= a:
            last_c = cust[ci]
            ci += 1
        while ai < len(agnt) and agnt[ai][1] <= a:
            last_a = agnt[ai]
            ai += 1
        c_active = ci < len(cust) and cust[ci][0] <= a
        a_active = ai < len(agnt) and agnt[ai][0] <= a

        if c_active and a_active:
            # simultaneous starts: customer deemed first, hence S3
            label = _S.S4 if cust[ci][0] > agnt[ai][0] else _S.S3
        elif c_active:
            label = _S.S1
        elif a_active:
            label = _S.S2
        else:
            label = _silence_label(cust, agnt, ci, ai, last_c, last_a)
        raw.append((label, a, b))

    coalesced: list[Segment] = []
    for label, a, b in raw:
        if coalesced and coalesced[-1].type is label:
            coalesced[-1] = Segment(type=label, start=coalesced[-1].start, end=b)
        else:
            coalesced.append(Segment(type=label, start=a, end=b))
    return SegmentSequence(conversation_id=conversation_id, segments=tuple(coalesced))


def _silence_label(
    cust: Sequence[tuple[float, float]],
    agnt: Sequence[tuple[float, float]],
    ci: int,
    ai: int,
    last_c: tuple[float, float] | None,
    last_a: tuple[float, float] | None,
) -> SegmentType:
    """Classify an interior silence by previous floor-holder and next starter."""
    if last_c is not None and last_a is not None:
        if last_c[1] > last_a[1]:
            prev_customer = True
        elif last_a[1] > last_c[1]:
            prev_customer = False
        else:
            # simultaneous stop: the earlier-started spurt is last to stop
            prev_customer = last_c[0] <= last_a[0]
    elif last_c is not None:
        prev_customer = True
    elif last_a is not None:
        prev_customer = False
    else:  # pragma: no cover - interior silence always has a predecessor
        raise DataError("silence interval with no preceding talkspurt")

    next_c = cust[ci][0] if ci < len(cust) else None
    next_a = agnt[ai][0] if ai < len(agnt) else None
    if next_c is None and next_a is None:  # pragma: no cover - see above
        raise DataError("silence interval with no following talkspurt")
    if next_a is None or (next_c is not None and next_c <= next_a):
        next_customer = True  # start tie: customer deemed first
    else:
        next_customer = False

    if prev_customer:
        return _S.S7 if next_customer else _S.S6
    return _S.S5 if next_customer else _S.S8


_DURATION_STATS = ("Min", "Max", "Mean", "Sd", "K", "Sk")

#: The 64 interaction feature names: Min1..Sk8, then T1..T8, then N1..N8.
TT_FEATURE_NAMES: tuple[str, ...] = tuple(
    [f"{stat}{t}" for t in range(1, 9) for stat in _DURATION_STATS]
    + [f"T{t}" for t in range(1, 9)]
    + [f"N{t}" for t in range(1, 9)]
)

#: Default reduced set: pause-centric features (switching + customer pauses).
TTC_NAMES: tuple[str, ...] = ("T7", "Max7", "Sk5", "K5", "Mean7", "Mean5")


@dataclass(frozen=True, eq=False)
class TTFeatureVector:
    """The 64 named interaction features of one conversation."""

    names: tuple[str, ...]
    values: np.ndarray

    def value(self, name: str) -> float:
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            raise DataError(f"unknown feature name {name!r}") from None

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


def tt_features(seq: SegmentSequence) -> TTFeatureVector:
    """Duration statistics, duration shares, and count shares per segment type.

    Per type t: Min, Max, Mean, Sd (population), K (excess kurtosis),
    Sk (skewness) over that type's segment durations, plus T_t (share of
    total duration) and N_t (share of segment count). Types with zero
    occurrences contribute zeros; single-occurrence types get Sd=K=Sk=0.
    """
    if not seq.segments:
        raise DataError("cannot compute features of an empty segment sequence")
    durations: dict[SegmentType, list[float]] = {t: [] for t in SegmentType}
    for seg in seq.segments:
        durations[seg.type].append(seg.duration)
    total_duration = sum(seg.duration for seg in seq.segments)
    total_count = len(seq.segments)

    by_name: dict[str, float] = {}
    for t_index, seg_type in enumerate(SegmentType, start=1):
        durs = np.asarray(durations[seg_type], dtype=np.float64)
        if durs.size == 0:
            stats = dict.fromkeys(_DURATION_STATS, 0.0)
            t_share = 0.0
            n_share = 0.0
        else:
            mean, sd, skew, kurt = population_stats(durs)
            stats = {
                "Min": float(durs.min()),
                "Max": float(durs.max()),
                "Mean": float(mean),
                "Sd": float(sd),
                "K": float(kurt),
                "Sk": float(skew),
            }
            t_share = float(durs.sum() / total_duration)
            n_share = durs.size / total_count
        for stat, value in stats.items():
            by_name[f"{stat}{t_index}"] = value
        by_name[f"T{t_index}"] = t_share
        by_name[f"N{t_index}"] = n_share

    values = np.array([by_name[name] for name in TT_FEATURE_NAMES], dtype=np.float64)
    return TTFeatureVector(names=TT_FEATURE_NAMES, values=values)


def select_named(vec: TTFeatureVector, names: Sequence[str] = TTC_NAMES) -> np.ndarray:
    """Values of the requested features, in the requested order."""
    index = {n: i for i, n in enumerate(vec.names)}
    try:
        cols = [index[n] for n in names]
    except KeyError as exc:
        raise DataError(f"unknown feature name {exc.args[0]!r}") from None
    return vec.values[cols] if cols else np.empty(0, dtype=np.float64)


def conversation_segments(conv, merge_gap: float = DEFAULT_MERGE_GAP) -> SegmentSequence:
    """Talkspurt construction and labeling for a parsed conversation."""
    customer = build_talkspurts(conv.customer, merge_gap, channel="customer")
    agent = build_talkspurts(conv.agent, merge_gap, channel="agent")
    return label_segments(customer, agent, conversation_id=conv.id)
