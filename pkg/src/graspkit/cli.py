"""Command-line surface: KB tooling, queries, rendering, metrics, fixtures.

Exit codes: 0 success, 1 usage error, 2 data error (bad manifests, broken
tensors, failed pipeline stages).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .knowledge_base import (
    KnowledgeBaseError,
    build,
    embedding_from_file,
    validate,
)
from .metrics import PoseLossConfig, pose_loss
from .pipeline import (
    PipelineConfig,
    StageError,
    load_observation,
    result_to_json_text,
    run_query,
)
from .refinement import FEATURES_EXTERNAL, FEATURES_SYNTHETIC
from .retrieval import Instruction, RetrievalConfig
from .splats import Camera, gaussian_set_from_array, render, write_ppm
from .rotations import axis_angle_matrix
from .tensor_store import ManifestError, TensorFormatError, load_tensor

_DATA_ERRORS = (
    StageError,
    ManifestError,
    TensorFormatError,
    KnowledgeBaseError,
    ValueError,
    OSError,
    json.JSONDecodeError,
)


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_manifest_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--manifest", action="append", required=True, metavar="PATH",
        help="manifest file; repeat to merge several",
    )


def build_parser() -> _Parser:
    parser = _Parser(prog="graspkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    kb = sub.add_parser("kb", help="knowledge base tooling")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)
    kb_build = kb_sub.add_parser("build", help="build and summarize a knowledge base")
    _add_manifest_arg(kb_build)
    kb_build.add_argument("--json", action="store_true", help="machine-readable summary")
    kb_validate = kb_sub.add_parser("validate", help="eagerly check every referenced tensor")
    _add_manifest_arg(kb_validate)
    kb_validate.add_argument("--json", action="store_true", help="machine-readable report")

    query = sub.add_parser("query", help="run the full retrieval + matching pipeline")
    _add_manifest_arg(query)
    query.add_argument("--instruction", required=True, help="task instruction text")
    query.add_argument("--obs-dir", required=True, help="observation tensor directory")
    query.add_argument("--top-n", type=int, default=5, help="visual filter size (default 5)")
    query.add_argument("--tau-den", type=float, default=0.75, help="dense retrieval threshold")
    query.add_argument("--tau-imd", type=float, default=0.25, help="matching accept threshold")
    query.add_argument(
        "--refine-angle-deg", type=float, default=10.0, help="sweep angle magnitude"
    )
    query.add_argument(
        "--feature-source", choices=[FEATURES_SYNTHETIC, FEATURES_EXTERNAL],
        default=FEATURES_SYNTHETIC, help="candidate features during refinement",
    )
    query.add_argument(
        "--instruction-embedding", metavar="PATH",
        help="tensor overriding the observation directory's instruction embedding",
    )
    query.add_argument("--trace", metavar="PATH", help="also write the result JSON here")
    query.add_argument("--json", action="store_true", help="accepted for symmetry; query always emits JSON")

    rend = sub.add_parser("render", help="rasterize a splat asset to a PPM image")
    rend.add_argument("--gaussians", required=True, metavar="PATH", help="splat asset tensor [N,14]")
    rend.add_argument("--out", required=True, metavar="PATH", help="output PPM (P6) path")
    rend.add_argument("--width", type=int, default=128)
    rend.add_argument("--height", type=int, default=96)
    rend.add_argument("--fx", type=float, default=100.0)
    rend.add_argument("--fy", type=float, default=100.0)
    rend.add_argument("--cx", type=float, default=None, help="default: width / 2")
    rend.add_argument("--cy", type=float, default=None, help="default: height / 2")
    rend.add_argument("--rotate-axis", choices=["x", "y", "z"], default=None)
    rend.add_argument("--rotate-deg", type=float, default=0.0)
    rend.add_argument("--background", default=None, metavar="R,G,B", help="e.g. 0.1,0.1,0.1")

    metrics = sub.add_parser("metrics", help="standalone evaluators")
    metrics_sub = metrics.add_subparsers(dest="metrics_command", required=True)
    ploss = metrics_sub.add_parser("pose-loss", help="pose regression loss between two poses")
    ploss.add_argument("--pred", required=True, metavar="PATH", help="JSON pose file")
    ploss.add_argument("--gt", required=True, metavar="PATH", help="JSON pose file")
    ploss.add_argument("--lambda1", type=float, default=1.0)
    ploss.add_argument("--lambda2", type=float, default=1.0)

    fixtures = sub.add_parser("fixtures", help="synthetic test fixtures")
    fixtures_sub = fixtures.add_subparsers(dest="fixtures_command", required=True)
    gen = fixtures_sub.add_parser("gen", help="write the fixture families to a directory")
    gen.add_argument("--dest", required=True, metavar="DIR")
    gen.add_argument(
        "--only",
        choices=["self_consistency", "planted_rotation", "retrieval_priority", "visual_top_n"],
        help="generate a single family",
    )
    return parser


def _cmd_kb_build(args) -> int:
    kb = build(args.manifest)
    summary = {
        "records": len(kb),
        "by_source": {source: len(ids) for source, ids in sorted(kb.by_source.items())},
        "object_names": len(kb.object_index),
        "root": str(kb.root),
    }
    if args.json:
        print(json.dumps(summary, sort_keys=True, indent=2))
    else:
        print(f"records: {summary['records']}")
        for source, count in summary["by_source"].items():
            print(f"  {source}: {count}")
        print(f"object names: {summary['object_names']}")
    return 0


def _cmd_kb_validate(args) -> int:
    kb = build(args.manifest)
    report = validate(kb)
    if args.json:
        print(json.dumps(report.to_json_dict(), sort_keys=True, indent=2))
    else:
        for entry in report.entries:
            if entry.ok:
                print(f"ok   {entry.id}")
            else:
                print(f"FAIL {entry.id}: {entry.reason}")
        for note in report.notes:
            print(f"note: {note}")
        print(f"{len(report.entries)} records, {len(report.failures)} failures")
    return 0 if report.ok else 2


def _cmd_query(args) -> int:
    kb = build(args.manifest)
    obs = load_observation(args.obs_dir, normalize_features=kb.normalize_features)
    embedding = obs.instruction_embedding
    if args.instruction_embedding:
        embedding = embedding_from_file(Path(args.instruction_embedding))
    instr = Instruction(args.instruction, embedding=embedding)
    cfg = PipelineConfig(
        retrieval=RetrievalConfig(top_n=args.top_n, tau_den=args.tau_den),
        tau_imd=args.tau_imd,
        refine_angle_deg=args.refine_angle_deg,
        feature_source=args.feature_source,
    )
    result = run_query(kb, instr, obs, cfg)
    text = result_to_json_text(result.to_json_dict())
    sys.stdout.write(text)
    if args.trace:
        Path(args.trace).write_text(text, encoding="utf-8")
    return 0


def _cmd_render(args) -> int:
    gaussians = gaussian_set_from_array(load_tensor(args.gaussians))
    cx = args.width / 2 if args.cx is None else args.cx
    cy = args.height / 2 if args.cy is None else args.cy
    cam = Camera(fx=args.fx, fy=args.fy, cx=cx, cy=cy, width=args.width, height=args.height)
    rotation = None
    if args.rotate_axis is not None and args.rotate_deg != 0.0:
        axis = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}[args.rotate_axis]
        rotation = axis_angle_matrix(np.array(axis, dtype=float), args.rotate_deg)
    background = None
    if args.background is not None:
        background = [float(c) for c in args.background.split(",")]
        if len(background) != 3:
            raise ValueError("background must be three comma-separated numbers")
    out = render(gaussians, cam, rotation, None, background)
    write_ppm(args.out, out.color)
    print(f"wrote {args.out} ({cam.width}x{cam.height}, {gaussians.count} splats)")
    return 0


def _load_pose_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: pose file must hold a JSON object")
    return obj


def _cmd_pose_loss(args) -> int:
    cfg = PoseLossConfig(lambda1=args.lambda1, lambda2=args.lambda2)
    value = pose_loss(_load_pose_json(args.pred), _load_pose_json(args.gt), cfg)
    print(f"{value:.12g}")
    return 0


def _cmd_fixtures_gen(args) -> int:
    from . import fixtures

    if args.only:
        gen_fn = {
            "self_consistency": fixtures.gen_self_consistency,
            "planted_rotation": fixtures.gen_planted_rotation,
            "retrieval_priority": fixtures.gen_priority_kb,
            "visual_top_n": fixtures.gen_visual_kb,
        }[args.only]
        info = gen_fn(Path(args.dest) / args.only)
        print(json.dumps(info, sort_keys=True, indent=2))
    else:
        fixtures.generate_all(args.dest)
        print(f"wrote fixture index to {Path(args.dest) / 'fixtures.json'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "kb" and args.kb_command == "build":
            return _cmd_kb_build(args)
        if args.command == "kb" and args.kb_command == "validate":
            return _cmd_kb_validate(args)
        if args.command == "query":
            return _cmd_query(args)
        if args.command == "render":
            return _cmd_render(args)
        if args.command == "metrics" and args.metrics_command == "pose-loss":
            return _cmd_pose_loss(args)
        if args.command == "fixtures" and args.fixtures_command == "gen":
            return _cmd_fixtures_gen(args)
        parser.error(f"unknown command {args.command}")
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
