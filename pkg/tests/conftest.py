"""Session fixtures and the acceptance summary hook."""
from __future__ import annotations

import re

import pytest

from helpers import pause_gap_profiles, shape_signal_profiles
from turnlens.corpus import Manifest, load_manifest
from turnlens.experiment import tt_matrix
from turnlens.features import FeatureMatrix
from turnlens.synth import generate_dataset


@pytest.fixture(scope="session")
def pause_gap_manifest(tmp_path_factory) -> Manifest:
    """1,200 conversations, S5/S7 pause means differ x3 between classes."""
    out = tmp_path_factory.mktemp("pause_gap")
    control, signal = pause_gap_profiles()
    path = generate_dataset([control, signal], [0.5, 0.5], 1200, 42, out)
    return load_manifest(path)


@pytest.fixture(scope="session")
def shape_signal_manifest(tmp_path_factory) -> Manifest:
    """4,000 conversations where only the S5/S7 pause shape carries label."""
    out = tmp_path_factory.mktemp("shape_signal")
    control, signal = shape_signal_profiles()
    path = generate_dataset([control, signal], [0.5, 0.5], 4000, 7, out)
    return load_manifest(path)


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory) -> Manifest:
    """60 conversations from the pause-gap profiles, for cheap pipeline tests."""
    out = tmp_path_factory.mktemp("small")
    control, signal = pause_gap_profiles()
    path = generate_dataset([control, signal], [0.5, 0.5], 60, 3, out)
    return load_manifest(path)


@pytest.fixture(scope="session")
def pause_gap_tt(pause_gap_manifest) -> FeatureMatrix:
    """TT features of the pause-gap dataset, computed once per session."""
    return tt_matrix(pause_gap_manifest)


_CRITERION_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")

_CRITERION_LABELS = {
    1: "segmentation matches per-ms brute force on 1,000 random configs",
    2: "turn-taking vector: 64 named values, share sums, worked example",
    3: "entropy/information gain values, bounds, MDLP accept and reject",
    4: "relevance selection recovers injected S5/S7 signal, shuffle control",
    5: "isotonic fit equals exhaustive monotone least-squares oracle",
    6: "SVM training: separable UAR, dual ascent, determinism, grid",
    7: "functional pooling matches moment oracle, width contract",
    8: "end-to-end synthetic experiment: devel UAR, runtime, reproducibility",
    9: "FSET/FRMX round-trip bit-exact, corrupt inputs rejected",
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
