"""Command line for embedding extraction.

    mpr-extract list
    mpr-extract card --checkpoint ViT-B-32
    mpr-extract run --checkpoint ViT-B-32 --kind texts --input catalog.jsonl \
        --output gallery.ompr [--side gallery] [--resolution 224] \
        [--batch-size 16] [--weights weights.pt] [--pretrained tag] [--bf16]
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .extract import ExtractionSpec, UnreadableInput, extract_embeddings, model_card
from .ompr import WriteFailure
from .registry import CheckpointNotFound, available, parameter_count_millions


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mpr-extract", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list known checkpoints")

    p_card = sub.add_parser("card", help="print a checkpoint's model card")
    p_card.add_argument("--checkpoint", required=True)
    p_card.add_argument("--pretrained")

    p_run = sub.add_parser("run", help="extract embeddings into an OMPR store")
    p_run.add_argument("--checkpoint", required=True)
    p_run.add_argument("--kind", required=True, choices=("images", "texts"))
    p_run.add_argument("--input", required=True)
    p_run.add_argument("--output", required=True)
    p_run.add_argument("--side", choices=("probe", "gallery"))
    p_run.add_argument("--resolution", type=int)
    p_run.add_argument("--batch-size", type=int, default=16)
    p_run.add_argument("--weights")
    p_run.add_argument("--pretrained")
    p_run.add_argument("--bf16", action="store_true")
    p_run.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            for name in available():
                print(f"{name}  ({parameter_count_millions(name):.1f}M params)")
            return 0
        if args.command == "card":
            card = model_card(args.checkpoint, args.pretrained)
            print(json.dumps(dataclasses.asdict(card), indent=2, sort_keys=True))
            return 0
        spec = ExtractionSpec(
            checkpoint=args.checkpoint,
            input_kind=args.kind,
            input_path=args.input,
            output=args.output,
            pretrained=args.pretrained,
            weights_path=args.weights,
            side=args.side,
            resolution=args.resolution,
            batch_size=args.batch_size,
            bfloat16=args.bf16,
            seed=args.seed,
        )
        path = extract_embeddings(spec)
        print(f"wrote {path}")
        return 0
    except (CheckpointNotFound, UnreadableInput, WriteFailure, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
