"""End-to-end query pipeline: retrieve, filter, match, refine, emit.

A query takes an instruction plus an observation bundle (dense features,
image embedding, instance mask, optional depth and camera) and produces the
final grasp pose with a complete decision trace. Failures are wrapped with
the name of the stage that raised them.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .knowledge_base import (
    KnowledgeBase,
    depth_from_file,
    embedding_from_file,
    features_from_file,
    mask_from_file,
)
from .matching import (
    GATE_ACCEPT,
    DenseFeatureMap,
    ImdResult,
    InstanceMask,
    resize_mask_nearest,
    select_min_imd,
)
from .refinement import (
    DEFAULT_ANGLE_DEG,
    FEATURES_EXTERNAL,
    FEATURES_SYNTHETIC,
    DepthMap,
    GraspPose,
    RefinementResult,
    make_rotation_candidates,
    normalized_to_pixel,
    refine,
)
from .retrieval import Instruction, RetrievalConfig, RetrievalTrace, hybrid_retrieve, rank_visual
from .splats import Camera

OBS_FEATURES = "features.tensor"
OBS_EMBEDDING = "embedding.tensor"
OBS_MASK = "mask.tensor"
OBS_DEPTH = "depth.tensor"
OBS_CAMERA = "camera.json"
OBS_INSTRUCTION_EMBEDDING = "instruction_embedding.tensor"


class StageError(RuntimeError):
    """A pipeline stage failed; the message carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, str(exc)) from exc


@dataclass
class Observation:
    """Everything the pipeline knows about the current scene."""

    features: DenseFeatureMap
    embedding: np.ndarray
    mask: InstanceMask
    depth: DepthMap | None = None
    camera: Camera | None = None
    instruction_embedding: np.ndarray | None = None


def load_camera_json(path: str | Path) -> Camera:
    with Path(path).open(encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        return Camera(
            fx=float(obj["fx"]), fy=float(obj["fy"]),
            cx=float(obj["cx"]), cy=float(obj["cy"]),
            width=int(obj["width"]), height=int(obj["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: camera json must carry fx/fy/cx/cy/width/height") from exc


def save_camera_json(path: str | Path, cam: Camera) -> None:
    Path(path).write_text(json.dumps(cam.to_json_dict(), sort_keys=True) + "\n", encoding="utf-8")


def load_observation(obs_dir: str | Path, *, normalize_features: bool = True) -> Observation:
    """Read an observation directory of tensor files.

    Required: features.tensor (H x W x C), embedding.tensor (unit vector),
    mask.tensor (H x W). Optional: depth.tensor, camera.json,
    instruction_embedding.tensor. A mask on a different grid than the
    features is resampled nearest-neighbour.
    """
    root = Path(obs_dir)
    if not root.is_dir():
        raise ValueError(f"observation directory not found: {root}")
    for required in (OBS_FEATURES, OBS_EMBEDDING, OBS_MASK):
        if not (root / required).is_file():
            raise ValueError(f"{root / required}: missing observation file")

    features = features_from_file(root / OBS_FEATURES, normalize_features)
    embedding = embedding_from_file(root / OBS_EMBEDDING)
    mask = mask_from_file(root / OBS_MASK)
    mask = resize_mask_nearest(mask, features.height, features.width)

    depth = depth_from_file(root / OBS_DEPTH) if (root / OBS_DEPTH).is_file() else None
    camera = load_camera_json(root / OBS_CAMERA) if (root / OBS_CAMERA).is_file() else None
    instr_emb = None
    if (root / OBS_INSTRUCTION_EMBEDDING).is_file():
        instr_emb = embedding_from_file(root / OBS_INSTRUCTION_EMBEDDING)
    return Observation(
        features=features, embedding=embedding, mask=mask,
        depth=depth, camera=camera, instruction_embedding=instr_emb,
    )


@dataclass(frozen=True)
class PipelineConfig:
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    tau_imd: float = 0.25
    refine_angle_deg: float = DEFAULT_ANGLE_DEG
    feature_source: str = FEATURES_SYNTHETIC
    include_alpha: bool = False
    camera: Camera | None = None

    def __post_init__(self) -> None:
        if self.tau_imd < 0:
            raise ValueError("tau_imd must be non-negative")
        if self.feature_source not in (FEATURES_SYNTHETIC, FEATURES_EXTERNAL):
            raise ValueError(f"unknown feature source '{self.feature_source}'")


@dataclass
class QueryResult:
    """Full pipeline outcome plus every score that shaped it."""

    instruction: str
    trace: RetrievalTrace
    visual_scores: tuple[tuple[str, float], ...]
    visual_top: tuple[str, ...]
    matched_id: str
    matched_imd: ImdResult
    gate: str
    output_pose: GraspPose
    refined: RefinementResult | None = None
    prompt_payload: str = ""

    def to_json_dict(self) -> dict:
        return {
            "instruction": self.instruction,
            "retrieval": self.trace.to_json_dict(),
            "visual": {
                "scores": [[i, s] for i, s in self.visual_scores],
                "top": list(self.visual_top),
            },
            "match": {
                "id": self.matched_id,
                "gate": self.gate,
                **self.matched_imd.to_json_dict(),
            },
            "refinement": None if self.refined is None else self.refined.trace.to_json_dict(),
            "output_pose": self.output_pose.to_json_dict(),
            "prompt": self.prompt_payload,
        }


def result_to_json_text(result_dict: dict) -> str:
    """Canonical serialization: stable key order, fixed separators."""
    return json.dumps(result_dict, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def _fmt4(value: float) -> str:
    text = f"{float(value):.4f}"
    return "0.0000" if text == "-0.0000" else text


def _tuple4(values) -> str:
    return "(" + ", ".join(_fmt4(v) for v in values) + ")"


def emit_prompt(result: QueryResult) -> str:
    """Deterministic text block handed to a downstream generator."""
    evidence = result.refined.best.imd_k if result.refined is not None else result.matched_imd
    lines = [
        f"instruction: {result.instruction}",
        f"reference: {result.matched_id}",
        f"gate: {result.gate}",
        f"imd: {evidence.imd:.6f}",
        f"imd_normalized: {evidence.imd_normalized:.6f}",
    ]
    if result.refined is not None:
        best = result.refined.best.candidate
        lines.append(f"refined: candidate {best.index} ({best.label})")
    pose = result.output_pose
    lines.append(f"contact: {_tuple4(pose.contact_2d)}")
    if pose.contact_3d is not None:
        lines.append(f"contact_3d: {_tuple4(pose.contact_3d)}")
    lines.append(f"dir_up: {_tuple4(pose.dir_up)}")
    lines.append(f"dir_forward: {_tuple4(pose.dir_forward)}")
    return "\n".join(lines)


def _fill_contact_3d(pose: GraspPose, obs: Observation) -> GraspPose:
    """Backproject the final 2D contact through the observation depth map."""
    if obs.depth is None or obs.camera is None:
        return replace(pose, contact_3d=None)
    from .refinement import backproject

    x, y = normalized_to_pixel(obs.camera, pose.contact_2d)
    try:
        depth = obs.depth.at(x, y)
    except ValueError:
        return replace(pose, contact_3d=None)
    return replace(pose, contact_3d=backproject(obs.camera, (x, y), depth))


def run_query(
    kb: KnowledgeBase,
    instr: Instruction,
    obs: Observation,
    cfg: PipelineConfig | None = None,
) -> QueryResult:
    """Retrieve, visually filter, geometry-match, optionally refine, emit."""
    if cfg is None:
        cfg = PipelineConfig()

    with _stage("retrieval"):
        candidates, trace = hybrid_retrieve(kb, instr, cfg.retrieval)

    with _stage("visual_filter"):
        ranked = rank_visual(obs.embedding, candidates, kb)
        visual_top = tuple(i for i, _ in ranked[: cfg.retrieval.top_n])

    with _stage("matching"):
        matched_id, matched_imd, gate = select_min_imd(
            obs.features, obs.mask, list(visual_top), kb, cfg.tau_imd
        )
        example = kb.get_example(matched_id)

    refined: RefinementResult | None = None
    if gate != GATE_ACCEPT:
        with _stage("refinement"):
            cam = cfg.camera or obs.camera or example.camera()
            if cam is None:
                raise ValueError(
                    "refinement requires camera intrinsics (config, observation, or example)"
                )
            rotations = make_rotation_candidates(angle_deg=cfg.refine_angle_deg)
            refined = refine(
                example,
                obs.features,
                obs.mask,
                cam,
                rotations,
                cfg.feature_source,
                normalize=kb.normalize_features,
                include_alpha=cfg.include_alpha,
            )

    with _stage("output"):
        if gate == GATE_ACCEPT:
            pose = example.pose()
            if pose is None:
                raise ValueError(f"matched example '{matched_id}' has no stored pose")
        else:
            assert refined is not None
            pose = refined.best.pose
        pose = _fill_contact_3d(pose, obs)

        result = QueryResult(
            instruction=instr.text,
            trace=trace,
            visual_scores=tuple((i, float(s)) for i, s in ranked),
            visual_top=visual_top,
            matched_id=matched_id,
            matched_imd=matched_imd,
            gate=gate,
            output_pose=pose,
            refined=refined,
        )
        result.prompt_payload = emit_prompt(result)
    return result
