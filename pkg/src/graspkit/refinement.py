"""Grasp-pose refinement by small-angle rotation sweep.

The reference contact point is lifted to 3D through the reference depth map,
then a predefined set of small rotations is applied about an object pivot.
Each candidate pose is re-rendered (or its precomputed features are loaded),
scored against the observation by the instance matching distance, and the
lowest-scoring candidate wins. The identity is always part of the sweep, so
refinement never does worse than no refinement under the matching objective.

Conventions, also recorded in the trace: the object rotates about the pivot
while the camera stays fixed (the translation t = pivot - R pivot keeps the
pivot in place), and directions rotate by quaternion conjugation q v q*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .matching import DenseFeatureMap, ImdResult, InstanceMask, imd, normalize_features
from .rotations import axis_angle_matrix, axis_angle_quat, is_rotation_matrix, quat_rotate, quat_to_matrix
from .splats import Camera, RenderOutput, project_point, render

if TYPE_CHECKING:  # pragma: no cover
    from .knowledge_base import ManipulationExample

FEATURES_SYNTHETIC = "synthetic_render"
FEATURES_EXTERNAL = "external_files"
DEFAULT_ANGLE_DEG = 10.0

_UNIT_TOL = 1e-6
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class DepthMap:
    """H x W depth in meters; 0 marks a missing measurement."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"depth map must be H x W, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("depth map contains non-finite values")
        if (arr < 0).any():
            raise ValueError("depth values must be >= 0")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def at(self, x_pix: float, y_pix: float) -> float:
        """Depth at the pixel containing (x, y); right/bottom edges clamp in."""
        ix = min(max(int(math.floor(x_pix)), 0), self.width - 1)
        iy = min(max(int(math.floor(y_pix)), 0), self.height - 1)
        if not (-_EDGE_TOL <= x_pix <= self.width + _EDGE_TOL
                and -_EDGE_TOL <= y_pix <= self.height + _EDGE_TOL):
            raise ValueError(f"pixel ({x_pix}, {y_pix}) outside {self.width}x{self.height} image")
        value = float(self.values[iy, ix])
        if value <= 0.0:
            raise ValueError(f"no depth measurement at pixel ({x_pix:.1f}, {y_pix:.1f})")
        return value


@dataclass(frozen=True)
class RotationCandidate:
    """One rotation of the sweep, held as matrix and quaternion in lockstep."""

    index: int
    rot_matrix: np.ndarray
    rot_quat: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        m = np.asarray(self.rot_matrix, dtype=np.float64)
        q = np.asarray(self.rot_quat, dtype=np.float64)
        if not is_rotation_matrix(m, tol=_UNIT_TOL):
            raise ValueError(f"candidate {self.index}: matrix is not a rotation")
        if q.shape != (4,) or abs(np.linalg.norm(q) - 1.0) > _UNIT_TOL:
            raise ValueError(f"candidate {self.index}: quaternion must be unit length")
        if np.abs(quat_to_matrix(q) - m).max() > _UNIT_TOL:
            raise ValueError(f"candidate {self.index}: quaternion and matrix disagree")
        object.__setattr__(self, "rot_matrix", m)
        object.__setattr__(self, "rot_quat", q)


def _unit_or_raise(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise ValueError(f"{name} must be unit length, norm={norm:.8f}")
    return arr


def _unit_interval(value: float, name: str) -> float:
    # tolerate float jitter exactly at the frame edge, reject real escapes
    if -_EDGE_TOL <= value < 0.0:
        return 0.0
    if 1.0 < value <= 1.0 + _EDGE_TOL:
        return 1.0
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return float(value)


@dataclass(frozen=True)
class GraspPose:
    """Normalized 2D contact point plus unit gripper up/forward directions."""

    contact_2d: tuple[float, float]
    dir_up: np.ndarray
    dir_forward: np.ndarray
    contact_3d: np.ndarray | None = None

    def __post_init__(self) -> None:
        u, v = (float(c) for c in self.contact_2d)
        object.__setattr__(
            self, "contact_2d", (_unit_interval(u, "contact x"), _unit_interval(v, "contact y"))
        )
        object.__setattr__(self, "dir_up", _unit_or_raise(self.dir_up, "dir_up"))
        object.__setattr__(self, "dir_forward", _unit_or_raise(self.dir_forward, "dir_forward"))
        if self.contact_3d is not None:
            p = np.asarray(self.contact_3d, dtype=np.float64)
            if p.shape != (3,) or not np.isfinite(p).all():
                raise ValueError("contact_3d must be a finite 3-vector")
            object.__setattr__(self, "contact_3d", p)

    def to_json_dict(self) -> dict:
        return {
            "contact_2d": [self.contact_2d[0], self.contact_2d[1]],
            "contact_3d": None if self.contact_3d is None else [float(c) for c in self.contact_3d],
            "dir_up": [float(c) for c in self.dir_up],
            "dir_forward": [float(c) for c in self.dir_forward],
        }


@dataclass(frozen=True)
class RefinedPose:
    """One sweep entry: the candidate, its posed grasp, and its match score."""

    candidate: RotationCandidate
    pose: GraspPose
    imd_k: ImdResult
    rendered: RenderOutput | None = None


@dataclass(frozen=True)
class RefinementTrace:
    feature_source: str
    pivot: tuple[float, float, float]
    pivot_kind: str
    entries: tuple[dict, ...]
    best_index: int
    direction_convention: str = "vector_conjugation"
    motion_convention: str = "object_rotates_camera_fixed"

    def to_json_dict(self) -> dict:
        return {
            "feature_source": self.feature_source,
            "pivot": list(self.pivot),
            "pivot_kind": self.pivot_kind,
            "direction_convention": self.direction_convention,
            "motion_convention": self.motion_convention,
            "entries": [dict(e) for e in self.entries],
            "best_index": self.best_index,
        }


@dataclass(frozen=True)
class RefinementResult:
    best: RefinedPose
    poses: tuple[RefinedPose, ...]
    trace: RefinementTrace


def backproject(cam: Camera, pixel, depth: float) -> np.ndarray:
    """Lift a pixel to camera 3D: ((x-cx) d/fx, (y-cy) d/fy, d)."""
    x, y = (float(c) for c in pixel)
    if depth <= 0.0:
        raise ValueError(f"missing depth ({depth}) at pixel ({x}, {y})")
    if not (-_EDGE_TOL <= x <= cam.width + _EDGE_TOL and -_EDGE_TOL <= y <= cam.height + _EDGE_TOL):
        raise ValueError(f"pixel ({x}, {y}) outside {cam.width}x{cam.height} image")
    return np.array([(x - cam.cx) * depth / cam.fx, (y - cam.cy) * depth / cam.fy, depth])


def normalized_to_pixel(cam: Camera, point) -> tuple[float, float]:
    u, v = (float(c) for c in point)
    return (u * cam.width, v * cam.height)


def pixel_to_normalized(cam: Camera, pixel) -> tuple[float, float]:
    x, y = (float(c) for c in pixel)
    return (x / cam.width, y / cam.height)


def _axis_label(axis) -> str:
    arr = np.asarray(axis, dtype=np.float64)
    for name, unit in (("x", (1, 0, 0)), ("y", (0, 1, 0)), ("z", (0, 0, 1))):
        if np.allclose(arr / np.linalg.norm(arr), unit, atol=1e-12):
            return name
    return "(" + ",".join(f"{c:g}" for c in arr) + ")"


def default_rotation_spec(angle_deg: float = DEFAULT_ANGLE_DEG) -> list[tuple[np.ndarray, float]]:
    """Plus/minus ``angle_deg`` about each camera axis (6 rotations)."""
    spec: list[tuple[np.ndarray, float]] = []
    for axis in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])):
        spec.append((axis, angle_deg))
        spec.append((axis, -angle_deg))
    return spec


def make_rotation_candidates(
    spec: Sequence[tuple] | None = None, *, angle_deg: float = DEFAULT_ANGLE_DEG
) -> list[RotationCandidate]:
    """Identity (candidate 0) followed by one candidate per (axis, degrees) entry."""
    if spec is None:
        spec = default_rotation_spec(angle_deg)
    candidates = [
        RotationCandidate(0, np.eye(3), np.array([1.0, 0.0, 0.0, 0.0]), label="identity")
    ]
    for k, (axis, degrees) in enumerate(spec, start=1):
        candidates.append(
            RotationCandidate(
                k,
                axis_angle_matrix(axis, degrees),
                axis_angle_quat(axis, degrees),
                label=f"{degrees:+g}deg@{_axis_label(axis)}",
            )
        )
    return candidates


def transform_pose(ref: GraspPose, cand: RotationCandidate, pivot) -> GraspPose:
    """Rotate the 3D contact about ``pivot`` and both directions by the candidate."""
    if ref.contact_3d is None:
        raise ValueError("pose has no 3D contact point to transform")
    piv = np.asarray(pivot, dtype=np.float64)
    moved = piv + cand.rot_matrix @ (ref.contact_3d - piv)
    d_up = quat_rotate(cand.rot_quat, ref.dir_up)
    d_fwd = quat_rotate(cand.rot_quat, ref.dir_forward)
    d_up = d_up / np.linalg.norm(d_up)
    d_fwd = d_fwd / np.linalg.norm(d_fwd)
    return GraspPose(
        contact_2d=ref.contact_2d, dir_up=d_up, dir_forward=d_fwd, contact_3d=moved
    )


def _has_identity(candidates: Sequence[RotationCandidate]) -> bool:
    return any(np.abs(c.rot_matrix - np.eye(3)).max() <= 1e-9 for c in candidates)


def render_candidate(gaussians, cam: Camera, cand: RotationCandidate, pivot, background=None) -> RenderOutput:
    """Render a splat set rotated about ``pivot`` by the candidate, camera fixed."""
    piv = np.asarray(pivot, dtype=np.float64)
    shift = piv - cand.rot_matrix @ piv
    return render(gaussians, cam, cand.rot_matrix, shift, background)


def refine(
    ref: "ManipulationExample",
    obs_features: DenseFeatureMap,
    obs_mask: InstanceMask,
    cam: Camera,
    candidates: Sequence[RotationCandidate] | None = None,
    feature_source: str = FEATURES_SYNTHETIC,
    *,
    background=None,
    normalize: bool = False,
    include_alpha: bool = False,
) -> RefinementResult:
    """Sweep rotation candidates, score each against the observation, keep the argmin.

    Synthetic mode re-renders the reference splat set under each candidate
    (pivot = splat centroid); external mode loads precomputed per-candidate
    feature maps named ``<id>.cand<k>.feat`` beside the manifest (pivot = the
    backprojected reference contact). Ties resolve to the smallest index.
    """
    if feature_source not in (FEATURES_SYNTHETIC, FEATURES_EXTERNAL):
        raise ValueError(f"unknown feature source '{feature_source}'")
    if candidates is None:
        candidates = make_rotation_candidates()
    elif not candidates:
        raise ValueError("empty candidate list")
    elif not _has_identity(candidates):
        candidates = [
            RotationCandidate(0, np.eye(3), np.array([1.0, 0.0, 0.0, 0.0]), label="identity"),
            *candidates,
        ]

    if ref.contact_point is None or ref.dir_up is None or ref.dir_forward is None:
        raise ValueError(f"example '{ref.id}' has no stored grasp pose")
    depth_map = ref.depth_map()
    if depth_map is None:
        raise ValueError(f"example '{ref.id}' has no depth map")
    pixel = normalized_to_pixel(cam, ref.contact_point)
    contact_3d = backproject(cam, pixel, depth_map.at(*pixel))

    gaussians = None
    if feature_source == FEATURES_SYNTHETIC:
        gaussians = ref.gaussian_set()
        if gaussians is None:
            raise ValueError(f"example '{ref.id}' has no splat asset for synthetic rendering")
        pivot = gaussians.centroid()
        pivot_kind = "gaussian_centroid"
    else:
        pivot = contact_3d
        pivot_kind = "reference_contact"

    base_pose = GraspPose(
        contact_2d=ref.contact_point,
        dir_up=ref.dir_up,
        dir_forward=ref.dir_forward,
        contact_3d=contact_3d,
    )

    poses: list[RefinedPose] = []
    entries: list[dict] = []
    for cand in candidates:
        posed = transform_pose(base_pose, cand, pivot)
        reprojected = project_point(cam, posed.contact_3d)
        posed = replace(posed, contact_2d=pixel_to_normalized(cam, reprojected))

        rendered: RenderOutput | None = None
        if feature_source == FEATURES_SYNTHETIC:
            rendered = render_candidate(gaussians, cam, cand, pivot, background)
            values = rendered.color
            if include_alpha:
                values = np.concatenate([values, rendered.alpha[:, :, None]], axis=2)
        else:
            path = ref.base / f"{ref.id}.cand{cand.index}.feat"
            if not path.is_file():
                raise ValueError(f"candidate feature file missing: {path}")
            from .tensor_store import load_tensor

            values = load_tensor(path)
            if values.ndim != 3:
                raise ValueError(f"{path}: candidate features must be H x W x C")
            values = np.asarray(values, dtype=np.float64)
        if normalize:
            values = normalize_features(values)
        score = imd(obs_features, DenseFeatureMap(values), obs_mask, keep_matches=False)

        poses.append(RefinedPose(candidate=cand, pose=posed, imd_k=score, rendered=rendered))
        entries.append(
            {
                "k": cand.index,
                "label": cand.label,
                "imd": score.imd,
                "imd_normalized": score.imd_normalized,
                "contact_2d": [posed.contact_2d[0], posed.contact_2d[1]],
            }
        )

    best = min(poses, key=lambda rp: (rp.imd_k.imd_normalized, rp.candidate.index))
    trace = RefinementTrace(
        feature_source=feature_source,
        pivot=(float(pivot[0]), float(pivot[1]), float(pivot[2])),
        pivot_kind=pivot_kind,
        entries=tuple(entries),
        best_index=best.candidate.index,
    )
    return RefinementResult(best=best, poses=tuple(poses), trace=trace)
