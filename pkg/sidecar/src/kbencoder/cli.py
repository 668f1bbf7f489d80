"""Sidecar CLI: encode raw datasets and single observations.

Exit codes mirror the engine: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backbone import backbone_names
from .encode import ENCODE_ERRORS, EncodeJob, encode_dataset, encode_observation
from .wire import WireError


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="kbencoder", description=__doc__)
    parser.add_argument(
        "--backbone", default="spectral-v1", choices=backbone_names(),
        help="encoder choice (default spectral-v1)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("encode-dataset", help="dataset directory to manifest + tensors")
    ds.add_argument("--input", required=True, metavar="DIR", help="directory with dataset.jsonl")
    ds.add_argument("--output", required=True, metavar="DIR", help="tensor + manifest destination")
    ds.add_argument("--jobs", type=int, default=1, help="parallel image workers (default 1)")

    obs = sub.add_parser("encode-observation", help="single image to a query observation dir")
    obs.add_argument("--image", required=True, metavar="PATH")
    obs.add_argument("--out-dir", required=True, metavar="DIR")
    obs.add_argument("--mask", metavar="PATH", help="instance mask image (nonzero = instance)")
    obs.add_argument("--depth", metavar="PATH", help="grayscale depth image")
    obs.add_argument("--depth-scale", type=float, default=1.0, help="meters at full gray level")
    obs.add_argument("--camera", metavar="PATH", help="intrinsics JSON to copy alongside")
    obs.add_argument("--instruction", help="also write an instruction embedding")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "encode-dataset":
            manifest = encode_dataset(EncodeJob(
                input_dir=Path(args.input),
                output_dir=Path(args.output),
                backbone=args.backbone,
                jobs=args.jobs,
            ))
            print(f"wrote {manifest}")
            return 0
        camera = None
        if args.camera:
            camera = json.loads(Path(args.camera).read_text(encoding="utf-8"))
        out = encode_observation(
            args.image,
            args.out_dir,
            backbone=args.backbone,
            mask_path=args.mask,
            depth_path=args.depth,
            depth_scale=args.depth_scale,
            camera=camera,
            instruction=args.instruction,
        )
        print(f"wrote {out}")
        return 0
    except (*ENCODE_ERRORS, WireError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
