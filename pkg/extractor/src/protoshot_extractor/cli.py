"""Command line entry: extract --root DIR --backbone NAME --out FILE."""

from __future__ import annotations

import argparse
import sys

from .backbones import UnknownBackbone, WeightDownloadFailure
from .extract import EmptyImageTree, UndecodableImage, extract


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="protoshot-extract",
        description="Export frozen-backbone image features as a PFEB file",
    )
    parser.add_argument("--root", required=True, help="class-per-subdirectory image tree")
    parser.add_argument(
        "--backbone", required=True, choices=["vgg16", "resnet18", "resnet50"]
    )
    parser.add_argument("--out", required=True, help="output PFEB path")
    parser.add_argument(
        "--imagenet-norm",
        action="store_true",
        help="apply ImageNet mean/std after the 1/255 scaling (default: 1/255 only)",
    )
    parser.add_argument(
        "--no-pretrained",
        action="store_true",
        help="use randomly initialized weights (shape checks / offline runs)",
    )
    parser.add_argument("--batch-size", type=int, default=16)
    args = parser.parse_args(argv)
    try:
        count = extract(
            args.root,
            args.backbone,
            args.out,
            imagenet_norm=args.imagenet_norm,
            pretrained=not args.no_pretrained,
            batch_size=args.batch_size,
        )
    except UnknownBackbone as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EmptyImageTree, UndecodableImage) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except WeightDownloadFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(f"wrote {args.out}: {count} images")
    return 0


if __name__ == "__main__":
    sys.exit(main())
