"""Shared dataset recipes used by fixtures and tests."""
from __future__ import annotations

import dataclasses
import math

from turnlens.synth import Profile
from turnlens.turntaking import SegmentType as S


def pause_gap_profiles() -> tuple[Profile, Profile]:
    """Two dialog profiles that differ only in S5/S7 duration means (x3)."""
    control = Profile.default("control", request_label="process", complaint_label="no")
    signal = Profile.default("signal", request_label="member", complaint_label="yes")
    signal = signal.scale_durations((S.S5, S.S7), 3.0)
    return control, signal


def shape_signal_profiles(
    mean_pause: float = 1.2, signal_sigma: float = 1.0, target: float = 20.0
) -> tuple[Profile, Profile]:
    """Profiles whose S5/S7 pause distributions differ in shape, not mean.

    Both draw pauses with the same log-normal mean, so duration shares and
    averages carry no class signal; only the S5/S7 spread (hence Min/Max/Sd
    and friends) separates the classes. The transition rows avoid overlap
    states entirely to keep every other feature family label-free.
    """
    mu_control = math.log(mean_pause) - 0.35**2 / 2
    mu_signal = math.log(mean_pause) - signal_sigma**2 / 2
    transitions = {
        S.S1: {S.S6: 0.55, S.S7: 0.45},
        S.S2: {S.S5: 0.55, S.S8: 0.45},
        S.S3: {S.S1: 0.5, S.S2: 0.5},
        S.S4: {S.S1: 0.5, S.S2: 0.5},
        S.S5: {S.S1: 1.0},
        S.S6: {S.S2: 1.0},
        S.S7: {S.S1: 1.0},
        S.S8: {S.S2: 1.0},
    }
    base = Profile.default(
        "control",
        request_label="process",
        complaint_label="no",
        target_duration=target,
    )
    control_durations = dict(base.durations)
    for t in (S.S5, S.S6, S.S7, S.S8):
        control_durations[t] = (mu_control, 0.35)
    control = dataclasses.replace(
        base, transitions=transitions, durations=control_durations
    )
    signal_durations = dict(control_durations)
    for t in (S.S5, S.S7):
        signal_durations[t] = (mu_signal, signal_sigma)
    signal = dataclasses.replace(
        control,
        name="signal",
        request_label="member",
        complaint_label="yes",
        durations=signal_durations,
    )
    return control, signal
