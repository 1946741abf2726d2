"""Command line: align-tool <audio...> --out <dir> [--reference <file>].

Writes one alignment JSON per input audio file. The reference transcript
file holds one line per input, in input order (a one-line file for a
single input). Exit codes: 0 success, 1 usage error, 2 alignment failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .aligner import AlignError, align, write_export
from .audio_io import AudioReadError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="align-tool",
        description="Produce harness alignment JSON files from audio")
    p.add_argument("audio", nargs="+", help="input WAV files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--reference",
                   help="transcript file, one line per input audio")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0

    references = [None] * len(args.audio)
    if args.reference:
        lines = Path(args.reference).read_text(encoding="utf-8").splitlines()
        if len(lines) != len(args.audio):
            print(f"error: {args.reference} has {len(lines)} lines for "
                  f"{len(args.audio)} audio inputs", file=sys.stderr)
            return 1
        references = lines

    failed = 0
    for audio_path, reference in zip(args.audio, references):
        try:
            export = align(audio_path, reference_text=reference)
        except (AlignError, AudioReadError, OSError) as exc:
            print(f"FAIL {audio_path}: {exc}", file=sys.stderr)
            failed += 1
            continue
        dest = write_export(export, args.out)
        print(f"OK {audio_path} -> {dest} ({len(export.tokens)} tokens, "
              f"{export.mode})")
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
