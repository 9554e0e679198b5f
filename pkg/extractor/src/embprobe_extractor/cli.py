"""Extraction command-line entry point.

``embprobe-extract extract --manifest audio.json --model-id ID --out DIR``
reads an audio manifest, runs every file through the model and writes a
corpus manifest next to the embedding files.  Exit codes match the main
pipeline: 0 ok, 2 missing input, 3 validation failure, 4 computation
failure (including partial extraction).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .extract import (DEFAULT_MODEL_ID, ExtractionError, extract_corpus,
                      load_extractor)

EXIT_OK = 0
EXIT_MISSING_INPUT = 2
EXIT_VALIDATION = 3
EXIT_COMPUTATION = 4


def cmd_extract(args) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        print(f"error: missing input: {manifest_path}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    extractor = load_extractor(args.model_id, seed=args.seed)
    manifest, report = extract_corpus(manifest_path, args.out, extractor)
    print(f"extracted {report.n_done} utterance(s) with {extractor.model_id} "
          f"into {args.out}/{manifest.corpus_id}")
    if not report.ok:
        for utt, err in report.failures.items():
            print(f"  failed {utt}: {err}", file=sys.stderr)
        print(f"error: partial extraction, {len(report.failures)} failure(s)",
              file=sys.stderr)
        return EXIT_COMPUTATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embprobe-extract",
        description="layer-wise wav2vec 2.0 embedding extraction")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="extract a whole audio manifest")
    p.add_argument("--manifest", required=True,
                   help="JSON audio manifest (corpus_id + utterances)")
    p.add_argument("--model-id", default=DEFAULT_MODEL_ID)
    p.add_argument("--seed", type=int, default=0,
                   help="initialization seed for the random-init fallback")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.set_defaults(func=cmd_extract)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT


if __name__ == "__main__":
    sys.exit(main())
