"""Command-line front end: pretrained-encoder features to FSET/FRMX files.

Exit codes: 0 success, 1 usage, 2 invalid data or missing optional
dependency, 3 runtime failure. Diagnostics go to standard error;
``TURNLENS_LOG`` (error|warn|info|debug) sets verbosity, as in the
companion analytics CLI.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from ._version import __version__
from .audio import audio_embed
from .encoders import DEFAULT_AUDIO_MODEL, DEFAULT_TEXT_MODEL
from .errors import EmbedError
from .job import AUDIO_VARIANTS, SMILE_VARIANTS, TEXT_VARIANTS, EmbedJob
from .smile import smile_embed
from .text import text_embed

log = logging.getLogger("turnlens_embedder")

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
            f"embed: ignoring invalid TURNLENS_LOG={raw!r} "
            "(expected error|warn|info|debug)",
            file=sys.stderr,
        )
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def cmd_text(args) -> int:
    text_embed(
        EmbedJob(
            manifest=args.manifest,
            variant=args.variant,
            out=args.out,
            model=args.model,
            text_pooling=args.text_pooling,
            batch_size=args.batch_size,
        )
    )
    return 0


def cmd_audio(args) -> int:
    audio_embed(
        EmbedJob(
            manifest=args.manifest,
            variant=args.variant,
            out=args.out,
            model=args.model,
            audio_dir=args.audio_dir,
            frames_dir=args.frames_dir,
        )
    )
    return 0


def cmd_smile(args) -> int:
    smile_embed(
        EmbedJob(
            manifest=args.manifest,
            variant=args.variant,
            out=args.out,
            audio_dir=args.audio_dir,
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed",
        description="Extract pretrained-encoder feature sets from a conversation corpus.",
    )
    parser.add_argument(
        "--version", action="version", version=f"turnlens-embedder {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("text", help="one frozen-encoder vector per conversation")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--variant", required=True, choices=TEXT_VARIANTS)
    sp.add_argument("--out", required=True, help="FSET path")
    sp.add_argument("--model", default=DEFAULT_TEXT_MODEL, help="encoder id or local directory")
    sp.add_argument("--text-pooling", default="cls", choices=("cls", "mean"))
    sp.add_argument("--batch-size", type=int, default=8)
    sp.set_defaults(func=cmd_text)

    sp = sub.add_parser("audio", help="speech-encoder frames and pooled functionals")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--variant", required=True, choices=AUDIO_VARIANTS)
    sp.add_argument("--out", required=True, help="pooled FSET path")
    sp.add_argument("--model", default=DEFAULT_AUDIO_MODEL, help="encoder id or local directory")
    sp.add_argument("--audio-dir", help="directory of <id>.wav files (default: manifest directory)")
    sp.add_argument("--frames-dir", help="also write per-conversation FRMX files here")
    sp.set_defaults(func=cmd_audio)

    sp = sub.add_parser("smile", help="static acoustic functionals (optional extractor)")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--variant", required=True, choices=SMILE_VARIANTS)
    sp.add_argument("--out", required=True, help="FSET path")
    sp.add_argument("--audio-dir", help="directory of <id>.wav files (default: manifest directory)")
    sp.set_defaults(func=cmd_smile)

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
    except EmbedError as exc:
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
