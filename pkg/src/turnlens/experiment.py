"""Config-driven classification experiments with reproducible reports.

A run takes a manifest, a task, and a list of feature-set specs; for each
set it fits a standardizer on Train, grid-searches C against Devel UAR,
calibrates on out-of-fold Train scores, and writes ``report.json`` plus an
aligned ``report.txt``. Reports carry a config hash and no timestamps, so
re-running the same config yields byte-identical files.
"""
from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .corpus import TASKS, Manifest, load_manifest, parse_conversation
from .errors import ConfigError, DataError
from .features import (
    FeatureMatrix,
    apply_standardizer,
    concat_feature_sets,
    fit_standardizer,
    matrix_from_rows,
    read_fset,
)
from .learn import (
    DEFAULT_C_GRID,
    TrainedModel,
    cross_val_calibrator,
    evaluate,
    grid_search_C,
    predict_signs,
)
from .selection import rank_relevant
from .turntaking import (
    DEFAULT_MERGE_GAP,
    TT_FEATURE_NAMES,
    conversation_segments,
    tt_features,
)

BOOTSTRAP_RESAMPLES = 1_000


def _tt_row(args: tuple[str, float]) -> tuple[str, np.ndarray]:
    """Worker: one conversation file -> (id, 64 TT values). Top level so it pickles."""
    path, merge_gap = args
    conv = parse_conversation(Path(path).read_bytes())
    vec = tt_features(conversation_segments(conv, merge_gap))
    return conv.id, vec.values.astype(np.float32)


def tt_matrix(manifest: Manifest, merge_gap: float = DEFAULT_MERGE_GAP, jobs: int = 1) -> FeatureMatrix:
    """TT features for every manifest conversation, in manifest order."""
    args = [(str(e.path), merge_gap) for e in manifest.entries]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunk = max(1, len(args) // (4 * jobs))
            pairs = list(pool.map(_tt_row, args, chunksize=chunk))
    else:
        pairs = [_tt_row(a) for a in args]
    return matrix_from_rows(pairs, TT_FEATURE_NAMES, "TT")


def derive_ttc(
    manifest: Manifest,
    task: str,
    merge_gap: float = DEFAULT_MERGE_GAP,
    tt: FeatureMatrix | None = None,
    jobs: int = 1,
) -> tuple[str, ...]:
    """Feature names relevant for the task, ranked, derived on Train only.

    May be empty: with no accepted discretization cut no feature carries
    positive gain, and the caller is expected to keep the full TT set.
    """
    if task not in TASKS:
        raise DataError(f"unknown task {task!r} (expected one of {TASKS})")
    train_ids = manifest.ids("train")
    if not train_ids:
        raise DataError(f"manifest {manifest.path} has no train split")
    if tt is None:
        tt = tt_matrix(manifest, merge_gap, jobs=jobs)
    labels = manifest.labels_for_task(task, "train")
    ranking = rank_relevant(tt.subset(train_ids), labels)
    return ranking.names()


@dataclass(frozen=True)
class FeatureSetSpec:
    """One entry of the config's feature_sets list."""

    name: str
    kind: str  # "tt" | "ttc" | "file" | "concat"
    path: str | None = None
    parts: tuple[str, ...] = ()

    @classmethod
    def parse(cls, obj) -> "FeatureSetSpec":
        if isinstance(obj, str):
            if obj == "TT":
                return cls(name="TT", kind="tt")
            if obj == "TTc":
                return cls(name="TTc", kind="ttc")
            raise ConfigError(
                f"unknown feature set {obj!r}: use \"TT\", \"TTc\", or an object with path/concat"
            )
        if not isinstance(obj, dict):
            raise ConfigError("feature set spec must be a string or an object")
        name = obj.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError("feature set spec needs a non-empty 'name'")
        has_path = "path" in obj
        has_concat = "concat" in obj
        if has_path and has_concat:
            raise ConfigError(f"feature set {name!r}: 'path' and 'concat' are mutually exclusive")
        if has_path:
            path = obj["path"]
            if not isinstance(path, str) or not path:
                raise ConfigError(f"feature set {name!r}: 'path' must be a non-empty string")
            return cls(name=name, kind="file", path=path)
        if has_concat:
            parts = obj["concat"]
            if not isinstance(parts, list) or len(parts) < 2 or not all(
                isinstance(p, str) for p in parts
            ):
                raise ConfigError(f"feature set {name!r}: 'concat' must list two or more set names")
            return cls(name=name, kind="concat", parts=tuple(parts))
        if name == "TT":
            return cls(name="TT", kind="tt")
        if name == "TTc":
            return cls(name="TTc", kind="ttc")
        raise ConfigError(f"feature set {name!r} needs either 'path' or 'concat'")

    def echo(self) -> dict:
        out: dict = {"name": self.name, "kind": self.kind}
        if self.path is not None:
            out["path"] = self.path
        if self.parts:
            out["concat"] = list(self.parts)
        return out


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """A fully resolved experiment description."""

    manifest: Path
    task: str
    feature_sets: tuple[FeatureSetSpec, ...]
    out_dir: Path
    merge_gap: float = DEFAULT_MERGE_GAP
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    class_weights: bool = False
    seed: int = 0
    bootstrap_ci: bool = False
    # directory feature-file paths resolve against (the config file's home)
    base_dir: Path = Path(".")
    # path strings as written in the config, echoed into the report
    manifest_raw: str = ""
    out_dir_raw: str = ""

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r} (expected one of {TASKS})")
        if not self.feature_sets:
            raise ConfigError("config needs at least one feature set")
        names = [s.name for s in self.feature_sets]
        if len(set(names)) != len(names):
            raise ConfigError("feature set names must be unique")
        defined: set[str] = set()
        for spec in self.feature_sets:
            for part in spec.parts:
                if part not in defined:
                    raise ConfigError(
                        f"feature set {spec.name!r} concatenates {part!r}, "
                        "which is not defined earlier in the list"
                    )
            defined.add(spec.name)
        if self.merge_gap < 0:
            raise ConfigError(f"merge_gap must be >= 0, got {self.merge_gap}")
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise ConfigError("c_grid must be non-empty with positive values")

    @classmethod
    def from_dict(cls, obj: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("experiment config must be a JSON object")
        base = Path(base_dir)
        try:
            manifest_raw = obj["manifest"]
            task = obj["task"]
            sets_raw = obj["feature_sets"]
            out_raw = obj["out_dir"]
        except KeyError as exc:
            raise ConfigError(f"experiment config missing field {exc.args[0]!r}") from None
        if not isinstance(sets_raw, list):
            raise ConfigError("'feature_sets' must be a list")
        specs = tuple(FeatureSetSpec.parse(s) for s in sets_raw)
        grid = obj.get("c_grid")
        if grid is None:
            grid_t = DEFAULT_C_GRID
        else:
            if not isinstance(grid, list):
                raise ConfigError("'c_grid' must be a list of numbers")
            grid_t = tuple(float(c) for c in grid)
        return cls(
            manifest=(base / str(manifest_raw)).resolve(),
            task=str(task),
            feature_sets=specs,
            out_dir=(base / str(out_raw)).resolve(),
            merge_gap=float(obj.get("merge_gap", DEFAULT_MERGE_GAP)),
            c_grid=grid_t,
            class_weights=bool(obj.get("class_weights", False)),
            seed=int(obj.get("seed", 0)),
            bootstrap_ci=bool(obj.get("bootstrap_ci", False)),
            base_dir=base,
            manifest_raw=str(manifest_raw),
            out_dir_raw=str(out_raw),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"experiment config not found: {path}")
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"experiment config {path}: malformed JSON ({exc})") from exc
        return cls.from_dict(obj, base_dir=path.parent)

    def echo(self) -> dict:
        """Canonical config image embedded in the report and hashed."""
        return {
            "manifest": self.manifest_raw or str(self.manifest),
            "task": self.task,
            "feature_sets": [s.echo() for s in self.feature_sets],
            "out_dir": self.out_dir_raw or str(self.out_dir),
            "merge_gap": self.merge_gap,
            "c_grid": list(self.c_grid),
            "class_weights": self.class_weights,
            "seed": self.seed,
            "bootstrap_ci": self.bootstrap_ci,
        }


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.echo(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True, eq=False)
class SetResult:
    """Outcome for one feature set."""

    name: str
    dim: int
    best_c: float
    uar: float
    classes: tuple[str, ...]
    confusion: tuple[tuple[int, ...], ...]
    train_count: int
    devel_count: int
    model_file: str
    selected: tuple[str, ...] | None = None
    fallback: str | None = None
    ci95: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "name": self.name,
            "dim": self.dim,
            "best_c": self.best_c,
            "uar": self.uar,
            "classes": list(self.classes),
            "confusion": [list(row) for row in self.confusion],
            "train_count": self.train_count,
            "devel_count": self.devel_count,
            "model_file": self.model_file,
        }
        if self.selected is not None:
            out["selected"] = list(self.selected)
        if self.fallback is not None:
            out["fallback"] = self.fallback
        if self.ci95 is not None:
            out["uar_ci95"] = [self.ci95[0], self.ci95[1]]
        return out


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: dict
    config_hash: str
    task: str
    results: tuple[SetResult, ...]

    def to_dict(self) -> dict:
        return {
            "tool": {"name": "turnlens", "version": __version__},
            "config": self.config,
            "config_hash": self.config_hash,
            "task": self.task,
            "results": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        """Aligned table: feature set | dim | best C | UAR%."""
        header = ("feature set", "dim", "best C", "UAR%")
        rows = [
            (r.name, str(r.dim), _format_c(r.best_c), f"{100.0 * r.uar:.1f}")
            for r in self.results
        ]
        widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(header)]
        lines = [_format_row(header, widths)]
        lines += [_format_row(row, widths) for row in rows]
        return "\n".join(lines) + "\n"


def _format_c(c: float) -> str:
    k = np.log2(c)
    if np.isfinite(k) and k == round(k):
        return f"2^{int(round(k))}"
    return f"{c:g}"


def _format_row(cells, widths) -> str:
    name = cells[0].ljust(widths[0])
    rest = [cells[i].rjust(widths[i]) for i in range(1, len(cells))]
    return " | ".join([name, *rest])


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", name)


def _bootstrap_ci(
    y_true: np.ndarray, y_pred: np.ndarray, seed_seq, n_resamples: int = BOOTSTRAP_RESAMPLES
) -> tuple[float, float]:
    """Percentile 95% CI of UAR under class-stratified resampling of devel."""
    rng = np.random.default_rng(seed_seq)
    class_idx = [np.nonzero(y_true == c)[0] for c in np.unique(y_true)]
    uars = np.empty(n_resamples)
    for b in range(n_resamples):
        take = np.concatenate([idx[rng.integers(0, len(idx), len(idx))] for idx in class_idx])
        uars[b] = evaluate(list(y_true[take]), list(y_pred[take])).uar
    lo, hi = np.percentile(uars, [2.5, 97.5])
    return float(lo), float(hi)


def _build_matrices(
    config: ExperimentConfig, manifest: Manifest, jobs: int
) -> tuple[dict[str, FeatureMatrix], dict[str, tuple[tuple[str, ...], str | None]]]:
    """Materialize every spec as a matrix over the manifest's ids, in order.

    Returns the matrices keyed by spec name plus, for TTc, the selected
    names and the fallback set name (when selection came back empty).
    """
    all_ids = manifest.ids()
    built: dict[str, FeatureMatrix] = {}
    ttc_info: dict[str, tuple[tuple[str, ...], str | None]] = {}
    tt_cache: FeatureMatrix | None = None

    def tt() -> FeatureMatrix:
        nonlocal tt_cache
        if tt_cache is None:
            tt_cache = tt_matrix(manifest, config.merge_gap, jobs=jobs)
        return tt_cache

    for spec in config.feature_sets:
        if spec.kind == "tt":
            built[spec.name] = tt()
        elif spec.kind == "ttc":
            names = derive_ttc(manifest, config.task, config.merge_gap, tt=tt())
            if names:
                built[spec.name] = tt().select(names, set_name=spec.name)
                ttc_info[spec.name] = (names, None)
            else:
                # nothing relevant: keep the full TT set for this entry
                built[spec.name] = FeatureMatrix(
                    spec.name, tt().feature_names, tt().ids, tt().values
                )
                ttc_info[spec.name] = ((), "TT")
        elif spec.kind == "file":
            path = Path(spec.path)
            if not path.is_absolute():
                path = config.base_dir / path
            if not path.is_file():
                raise ConfigError(f"feature set {spec.name!r}: file not found: {path}")
            loaded = read_fset(path)
            built[spec.name] = FeatureMatrix(
                spec.name, loaded.feature_names, loaded.ids, loaded.values
            ).subset(all_ids)
        else:
            built[spec.name] = concat_feature_sets([built[p] for p in spec.parts])
    return built, ttc_info


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Execute the config and write report.json / report.txt / model files."""
    manifest = load_manifest(config.manifest)
    train_ids = manifest.ids("train")
    devel_ids = manifest.ids("devel")
    if not train_ids or not devel_ids:
        raise DataError(f"manifest {manifest.path} needs both train and devel splits")

    train_labels = manifest.labels_for_task(config.task, "train")
    devel_labels = manifest.labels_for_task(config.task, "devel")
    classes = tuple(sorted(set(train_labels.values()) | set(devel_labels.values())))
    if len(classes) != 2:
        raise DataError(
            f"task {config.task!r} needs exactly two classes, got {list(classes)}"
        )
    positive = classes[-1]
    y_train = np.array([1 if train_labels[i] == positive else -1 for i in train_ids])
    y_devel_str = np.array([devel_labels[i] for i in devel_ids])

    built, ttc_info = _build_matrices(config, manifest, jobs)
    config.out_dir.mkdir(parents=True, exist_ok=True)

    results: list[SetResult] = []
    for set_index, spec in enumerate(config.feature_sets):
        matrix = built[spec.name]
        std = fit_standardizer(matrix.subset(train_ids))
        x_train = apply_standardizer(std, matrix.subset(train_ids)).values.astype(np.float64)
        x_devel = apply_standardizer(std, matrix.subset(devel_ids)).values.astype(np.float64)

        best = grid_search_C(
            (x_train, y_train),
            (x_devel, np.where(y_devel_str == positive, 1, -1)),
            grid=config.c_grid,
            class_weights=config.class_weights,
            seed=config.seed,
        )
        calibrator = cross_val_calibrator(
            x_train, y_train, best.c, class_weights=config.class_weights, seed=config.seed
        )
        model = TrainedModel(
            weights=best.model.weights,
            bias=best.model.bias,
            C=best.c,
            standardizer=std,
            calibrator=calibrator,
            positive_label=positive,
        )
        model_file = f"model_{set_index:02d}_{_slug(spec.name)}.json"
        model.save(config.out_dir / model_file)

        pred_signs = predict_signs(best.model, x_devel)
        pred_labels = np.where(pred_signs == 1, positive, classes[0])
        outcome = evaluate(list(y_devel_str), list(pred_labels))

        ci: tuple[float, float] | None = None
        if config.bootstrap_ci:
            ci = _bootstrap_ci(
                y_devel_str, pred_labels, np.random.SeedSequence((config.seed, set_index))
            )

        selected, fallback = ttc_info.get(spec.name, (None, None))
        results.append(
            SetResult(
                name=spec.name,
                dim=matrix.width,
                best_c=best.c,
                uar=outcome.uar,
                classes=tuple(str(c) for c in outcome.classes),
                confusion=tuple(tuple(int(v) for v in row) for row in outcome.confusion),
                train_count=len(train_ids),
                devel_count=len(devel_ids),
                model_file=model_file,
                selected=selected,
                fallback=fallback,
                ci95=ci,
            )
        )

    report = ExperimentReport(
        config=config.echo(),
        config_hash=config_hash(config),
        task=config.task,
        results=tuple(results),
    )
    (config.out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (config.out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    return report
