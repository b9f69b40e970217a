"""Command-line entry for exporting CrisisMMD embeddings.

Usage:
    crisis-extract --task 2 \
        --train annotations/task_humanitarian_train.tsv \
        --validation annotations/task_humanitarian_dev.tsv \
        --test annotations/task_humanitarian_test.tsv \
        --images data_image/ --out out/task2 --cache caches/captions

The default backend runs LLaVA + CLIP via transformers (first run
downloads the checkpoints). `--backend stub` swaps in deterministic
hash-based doubles so the pipeline can be exercised without weights.
"""

from __future__ import annotations

import argparse
import sys

from .captioning import CaptionCache, LlavaCaptioner, StubCaptioner
from .encoding import ClipPairEncoder, StubPairEncoder
from .crisismmd import read_annotations
from .errors import ExtractorError
from .export import describe_counts, export_dataset


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crisis-extract", description=__doc__.split("\n\n")[0])
    parser.add_argument("--task", type=int, choices=(1, 2, 3), required=True)
    parser.add_argument("--train", required=True, help="train annotation TSV")
    parser.add_argument("--validation", required=True, help="validation annotation TSV")
    parser.add_argument("--test", required=True, help="test annotation TSV")
    parser.add_argument("--images", required=True, help="root directory of image files")
    parser.add_argument("--out", required=True, help="output directory for the three .mmeb files")
    parser.add_argument("--cache", required=True, help="caption cache directory")
    parser.add_argument("--backend", choices=("transformers", "stub"), default="transformers")
    parser.add_argument("--workers", type=int, default=1, help="caption workers (default 1)")
    parser.add_argument("--caption-model", default="llava-hf/llava-1.5-7b-hf")
    parser.add_argument("--encoder-model", default="openai/clip-vit-base-patch32")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.backend == "stub":
        captioner, encoder = StubCaptioner(), StubPairEncoder()
    else:
        captioner = LlavaCaptioner(model_id=args.caption_model)
        encoder = ClipPairEncoder(model_id=args.encoder_model)
    try:
        splits = {
            "train": read_annotations(args.train, args.images),
            "validation": read_annotations(args.validation, args.images),
            "test": read_annotations(args.test, args.images),
        }
        summaries = export_dataset(
            splits,
            args.task,
            args.out,
            captioner,
            encoder,
            CaptionCache(args.cache),
            workers=max(1, args.workers),
        )
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(describe_counts(args.task, summaries))
    return 0


if __name__ == "__main__":
    sys.exit(main())
