"""Command-line front end for the full pipeline.

Exit codes: 0 success, 1 usage, 2 invalid data, 3 runtime failure.
Data goes to standard output unless ``--out`` names a file; diagnostics go
to standard error. ``TURNLENS_LOG`` (error|warn|info|debug) sets verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .corpus import Manifest, load_manifest, parse_conversation
from .errors import DataError
from .experiment import ExperimentConfig, derive_ttc, run_experiment, tt_matrix
from .features import (
    FeatureMatrix,
    apply_standardizer,
    concat_feature_sets,
    fit_standardizer,
    fset_bytes,
    matrix_from_rows,
    pool_functionals,
    pooled_feature_names,
    read_frmx,
    read_fset,
    write_fset,
)
from .learn import (
    DEFAULT_C_GRID,
    TrainedModel,
    cross_val_calibrator,
    evaluate,
    grid_search_C,
    train_svm,
)
from .selection import rank_relevant
from .synth import Profile, generate_dataset
from .turntaking import DEFAULT_MERGE_GAP, conversation_segments

log = logging.getLogger("turnlens")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging() -> None:
    raw = os.environ.get("TURNLENS_LOG", "warn").lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        print(
            f"turnlens: ignoring invalid TURNLENS_LOG={raw!r} "
            "(expected error|warn|info|debug)",
            file=sys.stderr,
        )
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def _read_bytes(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {p}")
    return p.read_bytes()


def _read_json(path: str, what: str):
    try:
        return json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise DataError(f"{what} {path}: malformed JSON ({exc})") from exc


def _emit_text(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_fset(matrix: FeatureMatrix, out: str | None) -> None:
    if out:
        write_fset(out, matrix)
        log.info("wrote %s rows x %s features to %s", len(matrix), matrix.width, out)
    else:
        sys.stdout.buffer.write(fset_bytes(matrix))
        sys.stdout.buffer.flush()
        log.info("feature names sidecar is only written alongside --out files")


def _resolve_features(
    spec: str, manifest: Manifest, task: str, merge_gap: float, jobs: int
) -> FeatureMatrix:
    """Materialize --features: "TT", "TTc", or an FSET file path."""
    if spec == "TT":
        return tt_matrix(manifest, merge_gap, jobs=jobs)
    if spec == "TTc":
        tt = tt_matrix(manifest, merge_gap, jobs=jobs)
        names = derive_ttc(manifest, task, merge_gap, tt=tt)
        if not names:
            log.warning("no relevant feature found for task %r; keeping the full TT set", task)
            return tt
        return tt.select(names, set_name="TTc")
    loaded = read_fset(spec)
    return loaded.subset(manifest.ids())


def _binary_labels(labels: dict[str, str], ids: list[str]) -> tuple[np.ndarray, str, str]:
    classes = sorted(set(labels[i] for i in ids))
    if len(classes) != 2:
        raise DataError(f"need exactly two classes, got {classes}")
    positive = classes[-1]
    y = np.array([1 if labels[i] == positive else -1 for i in ids])
    return y, positive, classes[0]


def cmd_segment(args) -> int:
    conv = parse_conversation(_read_bytes(args.infile))
    seq = conversation_segments(conv, args.merge_gap)
    _emit_text(json.dumps(seq.to_dicts(), indent=2) + "\n", args.out)
    return 0


def cmd_tt(args) -> int:
    manifest = load_manifest(args.manifest)
    matrix = tt_matrix(manifest, args.merge_gap, jobs=args.jobs)
    _emit_fset(matrix, args.out)
    return 0


def cmd_select(args) -> int:
    manifest = load_manifest(args.manifest)
    train_ids = manifest.ids("train")
    if not train_ids:
        raise DataError(f"manifest {manifest.path} has no train split")
    matrix = tt_matrix(manifest, args.merge_gap, jobs=args.jobs).subset(train_ids)
    ranking = rank_relevant(matrix, manifest.labels_for_task(args.task, "train"))
    _emit_text(json.dumps(ranking.to_dicts(), indent=2) + "\n", args.out)
    return 0


def cmd_pool(args) -> int:
    frame_dir = Path(args.frames)
    if not frame_dir.is_dir():
        raise DataError(f"frame directory not found: {frame_dir}")
    files = sorted(frame_dir.glob("*.frmx"))
    if not files:
        raise DataError(f"no .frmx files in {frame_dir}")
    pairs = []
    width: int | None = None
    for f in files:
        fm = read_frmx(f)
        if width is None:
            width = fm.frames.shape[1]
        elif fm.frames.shape[1] != width:
            raise DataError(
                f"{f}: frame dimension {fm.frames.shape[1]} differs from {width}"
            )
        pairs.append((fm.conversation_id, pool_functionals(fm)))
    matrix = matrix_from_rows(pairs, pooled_feature_names(width), args.set_name)
    _emit_fset(matrix, args.out)
    return 0


def cmd_concat(args) -> int:
    sets = [read_fset(p) for p in args.inputs]
    result = concat_feature_sets(sets)
    if args.set_name:
        result = FeatureMatrix(args.set_name, result.feature_names, result.ids, result.values)
    _emit_fset(result, args.out)
    return 0


def cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    train_ids = manifest.ids("train")
    if not train_ids:
        raise DataError(f"manifest {manifest.path} has no train split")
    matrix = _resolve_features(args.features, manifest, args.task, args.merge_gap, args.jobs)

    train_labels = manifest.labels_for_task(args.task, "train")
    y_train, positive, _negative = _binary_labels(train_labels, train_ids)
    std = fit_standardizer(matrix.subset(train_ids))
    x_train = apply_standardizer(std, matrix.subset(train_ids)).values.astype(np.float64)

    if args.c is not None:
        best_c = args.c
        model = train_svm(
            x_train, y_train, best_c, class_weights=args.class_weights, seed=args.seed
        )
    else:
        devel_ids = manifest.ids("devel")
        if not devel_ids:
            raise DataError("C grid search needs a devel split; pass --c to skip it")
        devel_labels = manifest.labels_for_task(args.task, "devel")
        y_devel = np.array([1 if devel_labels[i] == positive else -1 for i in devel_ids])
        x_devel = apply_standardizer(std, matrix.subset(devel_ids)).values.astype(np.float64)
        best = grid_search_C(
            (x_train, y_train),
            (x_devel, y_devel),
            grid=DEFAULT_C_GRID,
            class_weights=args.class_weights,
            seed=args.seed,
        )
        best_c, model = best.c, best.model
        log.info("grid search selected C=%g (devel UAR %.4f)", best.c, best.uar)

    calibrator = cross_val_calibrator(
        x_train, y_train, best_c, class_weights=args.class_weights, seed=args.seed
    )
    trained = TrainedModel(
        weights=model.weights,
        bias=model.bias,
        C=best_c,
        standardizer=std,
        calibrator=calibrator,
        positive_label=positive,
    )
    if args.out:
        trained.save(args.out)
        log.info("wrote model to %s", args.out)
    else:
        sys.stdout.write(json.dumps(trained.to_dict(), sort_keys=True, indent=2) + "\n")
    return 0


def cmd_eval(args) -> int:
    trained = TrainedModel.load(args.model)
    manifest = load_manifest(args.manifest)
    ids = manifest.ids(args.split)
    if not ids:
        raise DataError(f"manifest {manifest.path} has no {args.split} split")
    matrix = _resolve_features(args.features, manifest, args.task, args.merge_gap, args.jobs)
    labels = manifest.labels_for_task(args.task, args.split)

    x = matrix.subset(ids).values.astype(np.float64)
    if x.shape[1] != trained.standardizer.mean.shape[0]:
        raise DataError(
            f"feature width {x.shape[1]} does not match the model's "
            f"{trained.standardizer.mean.shape[0]}"
        )
    classes = sorted(set(labels[i] for i in ids) | {trained.positive_label})
    negatives = [c for c in classes if c != trained.positive_label]
    if len(negatives) != 1:
        raise DataError(f"cannot infer the negative class from {classes}")
    scores = trained.raw_scores(x)
    y_pred = [trained.positive_label if s > 0 else negatives[0] for s in scores]
    y_true = [labels[i] for i in ids]
    outcome = evaluate(y_true, y_pred)
    payload = {
        "split": args.split,
        "n": len(ids),
        "uar": outcome.uar,
        "classes": [str(c) for c in outcome.classes],
        "confusion": [[int(v) for v in row] for row in outcome.confusion],
        "per_class_recall": {str(k): v for k, v in outcome.per_class_recall.items()},
    }
    _emit_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def cmd_experiment(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    report = run_experiment(config, jobs=args.jobs)
    sys.stdout.write(report.to_text())
    log.info("report written to %s", config.out_dir)
    return 0


def cmd_synth(args) -> int:
    cfg = _read_json(args.config, "profile config")
    if not isinstance(cfg, dict) or "profiles" not in cfg:
        raise DataError(f"profile config {args.config} must be an object with 'profiles'")
    profiles = [Profile.from_dict(p) for p in cfg["profiles"]]
    weights = cfg.get("weights")
    if weights is None:
        weights = [1.0 / len(profiles)] * len(profiles)
    n = args.n if args.n is not None else cfg.get("n")
    if n is None:
        raise DataError("dataset size missing: pass --n or put 'n' in the config")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    manifest_path = generate_dataset(profiles, list(weights), int(n), seed, args.out_dir)
    print(manifest_path)
    return 0


def _add_common(sp, jobs: bool = True, merge_gap: bool = True) -> None:
    if merge_gap:
        sp.add_argument(
            "--merge-gap",
            type=float,
            default=DEFAULT_MERGE_GAP,
            help=f"pause length (s) below which talkspurts merge (default {DEFAULT_MERGE_GAP})",
        )
    if jobs:
        sp.add_argument(
            "--jobs",
            type=int,
            default=os.cpu_count() or 1,
            help="worker processes for per-conversation stages (default: logical cores)",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turnlens",
        description="Turn-taking analytics and calibrated linear classification "
        "for dual-channel call transcripts.",
    )
    parser.add_argument("--version", action="version", version=f"turnlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("segment", help="label one conversation's timeline")
    sp.add_argument("--in", dest="infile", required=True, metavar="CONV_JSON")
    _add_common(sp, jobs=False)
    sp.add_argument("--out", help="output path (default: standard output)")
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("tt", help="turn-taking feature set for a whole manifest")
    sp.add_argument("--manifest", required=True)
    _add_common(sp)
    sp.add_argument("--out", help="FSET path (default: standard output, no names sidecar)")
    sp.set_defaults(func=cmd_tt)

    sp = sub.add_parser("select", help="rank features by information gain on the train split")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--task", required=True, choices=("request", "complaint"))
    _add_common(sp)
    sp.add_argument("--out", help="ranking JSON path (default: standard output)")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("pool", help="pool a directory of frame matrices into a feature set")
    sp.add_argument("--frames", required=True, metavar="DIR", help="directory of .frmx files")
    sp.add_argument("--set-name", default="pooled")
    sp.add_argument("--out", help="FSET path (default: standard output)")
    sp.set_defaults(func=cmd_pool)

    sp = sub.add_parser("concat", help="concatenate feature sets over one id set")
    sp.add_argument("--in", dest="inputs", required=True, nargs="+", metavar="FSET")
    sp.add_argument("--set-name", default=None)
    sp.add_argument("--out", help="FSET path (default: standard output)")
    sp.set_defaults(func=cmd_concat)

    sp = sub.add_parser("train", help="train a calibrated linear classifier")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--task", required=True, choices=("request", "complaint"))
    sp.add_argument("--features", default="TT", help='"TT", "TTc", or an FSET file path')
    sp.add_argument("--c", type=float, default=None, help="fixed C (default: grid search on devel)")
    sp.add_argument("--class-weights", action="store_true")
    sp.add_argument("--seed", type=int, default=0)
    _add_common(sp)
    sp.add_argument("--out", help="model JSON path (default: standard output)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a trained model on a split")
    sp.add_argument("--model", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--task", required=True, choices=("request", "complaint"))
    sp.add_argument("--features", default="TT", help='"TT", "TTc", or an FSET file path')
    sp.add_argument("--split", default="devel", choices=("train", "devel"))
    _add_common(sp)
    sp.add_argument("--out", help="metrics JSON path (default: standard output)")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("experiment", help="run a config-driven experiment")
    sp.add_argument("--config", required=True, metavar="CONFIG_JSON")
    _add_common(sp, merge_gap=False)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    sp.add_argument("--config", required=True, metavar="PROFILES_JSON")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--n", type=int, default=None, help="dataset size (overrides config)")
    sp.add_argument("--seed", type=int, default=None, help="generator seed (overrides config)")
    sp.set_defaults(func=cmd_synth)

    return parser


def dispatch(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        rc = args.func(args)
        return 0 if rc is None else rc
    except DataError as exc:
        log.error("%s", exc)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 3
    except Exception as exc:  # noqa: BLE001 - last-resort barrier for exit code 3
        log.error("unexpected failure: %s", exc, exc_info=log.isEnabledFor(logging.DEBUG))
        return 3


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
