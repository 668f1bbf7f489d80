"""Deterministic synthetic fixtures.

Everything here is reproducible from a clean checkout with no external data:
splat-blob scenes, rendered observation directories, planted-embedding
knowledge bases, and planted-rotation sweeps. The test suite builds its
fixtures through these functions; the ``fixtures gen`` subcommand writes the
same artifacts to disk for manual runs.
"""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

import numpy as np

from .knowledge_base import KnowledgeBase, build
from .matching import imd
from .pipeline import (
    OBS_DEPTH,
    OBS_EMBEDDING,
    OBS_FEATURES,
    OBS_INSTRUCTION_EMBEDDING,
    OBS_MASK,
    load_observation,
    save_camera_json,
)
from .refinement import make_rotation_candidates, render_candidate
from .splats import Camera, GaussianSet, RenderOutput, gaussian_set_to_array, render
from .tensor_store import dump_manifest, parse_record, save_tensor


def unit(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return arr / norm


def embedding_with_cosine(anchor, cos_value: float, helper) -> np.ndarray:
    """Unit vector at exactly ``cos_value`` cosine from unit ``anchor``.

    Built in span(anchor, helper); helper must not be parallel to anchor.
    """
    a = unit(anchor)
    h = np.asarray(helper, dtype=np.float64)
    w = h - (h @ a) * a
    if float(np.linalg.norm(w)) < 1e-9:
        raise ValueError("helper vector is parallel to the anchor")
    w = unit(w)
    return cos_value * a + math.sqrt(max(0.0, 1.0 - cos_value * cos_value)) * w


def default_camera(width: int = 64, height: int = 48, focal: float = 60.0) -> Camera:
    return Camera(fx=focal, fy=focal, cx=width / 2, cy=height / 2, width=width, height=height)


def make_blob_scene(
    seed: int,
    count: int = 6,
    center=(0.0, 0.0, 1.0),
    spread: float = 0.12,
    scale_range=(0.02, 0.05),
) -> GaussianSet:
    """An irregular colored splat blob; the first splat sits exactly at center.

    The irregular placement breaks rotational symmetry, so renders under
    different small rotations never coincide.
    """
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=np.float64)
    mu = center + rng.uniform(-spread, spread, size=(count, 3))
    mu[0] = center
    scale = rng.uniform(scale_range[0], scale_range[1], size=(count, 3))
    rot = rng.normal(size=(count, 4))
    rot /= np.linalg.norm(rot, axis=1, keepdims=True)
    opacity = rng.uniform(0.75, 0.98, size=count)
    color = rng.uniform(0.15, 0.95, size=(count, 3))
    return GaussianSet(mu=mu, scale=scale, rot=rot, opacity=opacity, color=color)


def _write_render_artifacts(dest: Path, stem: str, out: RenderOutput) -> dict[str, str]:
    """Save color/mask/depth tensors for one rendered view; returns path map."""
    paths = {
        "features": f"{stem}.feat.tensor",
        "mask": f"{stem}.mask.tensor",
        "depth": f"{stem}.depth.tensor",
    }
    save_tensor(dest / paths["features"], out.color)
    save_tensor(dest / paths["mask"], (out.alpha > 0).astype(np.float32))
    save_tensor(dest / paths["depth"], out.depth)
    return paths


def write_example(
    dest: Path,
    example_id: str,
    *,
    source: str,
    instruction: str,
    object_name: str,
    contact_embedding: np.ndarray,
    instruction_embedding: np.ndarray | None = None,
    scene: GaussianSet | None = None,
    cam: Camera | None = None,
    features: np.ndarray | None = None,
    contact_point: tuple[float, float] | None = None,
    dir_up: tuple[float, float, float] | None = None,
    dir_forward: tuple[float, float, float] | None = None,
) -> dict:
    """Write one example's tensors into ``dest``; returns its manifest dict.

    With a scene and camera, features/mask/depth come from a render and the
    splat asset is saved too; otherwise ``features`` must be given directly.
    """
    obj: dict = {
        "id": example_id,
        "source": source,
        "instruction": instruction,
        "object_name": object_name,
        "contact_frame_features": f"{example_id}.feat.tensor",
        "contact_frame_embedding": f"{example_id}.emb.tensor",
    }
    save_tensor(dest / obj["contact_frame_embedding"], unit(contact_embedding))
    if instruction_embedding is not None:
        obj["instruction_embedding"] = f"{example_id}.instr.tensor"
        save_tensor(dest / obj["instruction_embedding"], unit(instruction_embedding))

    if scene is not None:
        if cam is None:
            raise ValueError("a scene needs a camera to render")
        out = render(scene, cam)
        paths = _write_render_artifacts(dest, example_id, out)
        obj["contact_frame_features"] = paths["features"]
        obj["mask"] = paths["mask"]
        obj["depth"] = paths["depth"]
        obj["gaussians"] = f"{example_id}.gauss.tensor"
        save_tensor(dest / obj["gaussians"], gaussian_set_to_array(scene))
        obj["intrinsics"] = {
            "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
            "width": cam.width, "height": cam.height,
        }
    elif features is not None:
        save_tensor(dest / obj["contact_frame_features"], np.asarray(features))
    else:
        raise ValueError("write_example needs a scene or explicit features")

    if contact_point is not None:
        obj["contact_point"] = list(contact_point)
    if dir_up is not None:
        obj["dir_up"] = list(dir_up)
    if dir_forward is not None:
        obj["dir_forward"] = list(dir_forward)
    return obj


def _write_observation(
    dest: Path,
    out: RenderOutput,
    cam: Camera,
    embedding: np.ndarray,
    instruction_embedding: np.ndarray | None = None,
    mask_alpha: float = 0.0,
) -> Path:
    dest.mkdir(parents=True, exist_ok=True)
    save_tensor(dest / OBS_FEATURES, out.color)
    save_tensor(dest / OBS_MASK, (out.alpha > mask_alpha).astype(np.float32))
    save_tensor(dest / OBS_DEPTH, out.depth)
    save_tensor(dest / OBS_EMBEDDING, unit(embedding))
    if instruction_embedding is not None:
        save_tensor(dest / OBS_INSTRUCTION_EMBEDDING, unit(instruction_embedding))
    save_camera_json(dest / "camera.json", cam)
    return dest


def _write_manifest(dest: Path, objs: list[dict]) -> Path:
    records = [parse_record(obj, line=i + 1) for i, obj in enumerate(objs)]
    path = dest / "manifest.jsonl"
    dump_manifest(records, path)
    return path


def _write_info(dest: Path, info: dict) -> dict:
    (dest / "fixture.json").write_text(
        json.dumps(info, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return info


def gen_self_consistency(dest: str | Path) -> dict:
    """A KB whose first example IS the observation: the accept-gate path.

    The observation tensors are byte-for-byte copies of the reference
    example's, so the matching distance is exactly zero.
    """
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    dest = dest.resolve()
    cam = default_camera(64, 48, focal=60.0)

    drawer_emb = unit(np.arange(1.0, 9.0))
    drawer_instr_emb = unit(np.array([1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]))
    faucet_emb = embedding_with_cosine(drawer_emb, 0.2, np.arange(8.0, 0.0, -1.0))
    faucet_instr_emb = embedding_with_cosine(drawer_instr_emb, 0.1, np.arange(1.0, 9.0) ** 2)

    drawer_scene = make_blob_scene(seed=11)
    faucet_scene = make_blob_scene(seed=12, count=5, spread=0.1)

    objs = [
        write_example(
            dest, "sim_drawer", source="simulation",
            instruction="pull the drawer open by its handle", object_name="drawer",
            contact_embedding=drawer_emb, instruction_embedding=drawer_instr_emb,
            scene=drawer_scene, cam=cam,
            contact_point=(0.5, 0.5), dir_up=(0.0, 0.0, 1.0), dir_forward=(1.0, 0.0, 0.0),
        ),
        write_example(
            dest, "sim_faucet", source="simulation",
            instruction="rotate the faucet handle", object_name="faucet",
            contact_embedding=faucet_emb, instruction_embedding=faucet_instr_emb,
            scene=faucet_scene, cam=cam,
            contact_point=(0.5, 0.5), dir_up=(0.0, 1.0, 0.0), dir_forward=(0.0, 0.0, 1.0),
        ),
    ]
    manifest = _write_manifest(dest, objs)

    obs_dir = _write_observation(
        dest / "obs", render(drawer_scene, cam), cam, drawer_emb, drawer_instr_emb
    )
    return _write_info(
        dest,
        {
            "kind": "self_consistency",
            "manifest": str(manifest),
            "obs_dir": str(obs_dir),
            "instruction": "open the drawer",
            "expected_id": "sim_drawer",
            "expected_pose": {
                "contact_2d": [0.5, 0.5],
                "dir_up": [0.0, 0.0, 1.0],
                "dir_forward": [1.0, 0.0, 0.0],
            },
        },
    )


def gen_planted_rotation(dest: str | Path) -> dict:
    """One reference example plus one observation per rotation candidate.

    Observation k is the reference splat set re-rendered under candidate k
    about the set's centroid, through the exact same code path refinement
    uses, so the matching distance at the planted index is minimal.
    """
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    dest = dest.resolve()
    cam = Camera(fx=110.0, fy=110.0, cx=64.0, cy=48.0, width=128, height=96)
    scene = make_blob_scene(seed=23, count=7, spread=0.2, scale_range=(0.025, 0.06))

    valve_emb = unit(np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0]))
    valve_instr_emb = unit(np.array([2.0, 7.0, 1.0, 8.0, 2.0, 8.0]))
    objs = [
        write_example(
            dest, "sim_valve", source="simulation",
            instruction="rotate the valve wheel clockwise", object_name="valve",
            contact_embedding=valve_emb, instruction_embedding=valve_instr_emb,
            scene=scene, cam=cam,
            contact_point=(0.5, 0.5), dir_up=(0.0, 0.0, 1.0), dir_forward=(1.0, 0.0, 0.0),
        )
    ]
    manifest = _write_manifest(dest, objs)

    # re-render from the DISK asset so observation and refinement share the
    # float32-rounded splat parameters bit for bit
    kb = build([manifest])
    example = kb.get_example("sim_valve")
    gaussians = example.gaussian_set()
    pivot = gaussians.centroid()
    candidates = make_rotation_candidates()

    obs_dirs = []
    for cand in candidates:
        out = render_candidate(gaussians, cam, cand, pivot)
        # mask only the near-opaque core: the sweep's argmin is unchanged and
        # the nearest-neighbour search stays well inside its time budget
        obs_dir = _write_observation(
            dest / f"obs_k{cand.index}", out, cam, valve_emb, valve_instr_emb,
            mask_alpha=0.6,
        )
        obs_dirs.append({"k": cand.index, "obs_dir": str(obs_dir), "label": cand.label})

    # a usable gate threshold for this scene: half the smallest normalized
    # distance any non-identity observation achieves against the reference
    ref_features = example.contact_features()
    worst_case = []
    for entry in obs_dirs[1:]:
        obs = load_observation(entry["obs_dir"], normalize_features=kb.normalize_features)
        worst_case.append(imd(obs.features, ref_features, obs.mask, keep_matches=False).imd_normalized)
    suggested_tau = 0.5 * min(worst_case)

    return _write_info(
        dest,
        {
            "kind": "planted_rotation",
            "manifest": str(manifest),
            "reference_id": "sim_valve",
            "instruction": "rotate the valve wheel clockwise",
            "observations": obs_dirs,
            "suggested_tau_imd": suggested_tau,
        },
    )


def gen_priority_kb(dest: str | Path) -> dict:
    """Embeddings planted so three queries drive exactly P1, P2, P3.

    The P2 query's best simulation cosine is 0.91 (above the 0.75 default
    threshold); the P3 query's best simulation cosine is 0.40 (below it),
    with higher scores waiting in the expanded sources.
    """
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    dest = dest.resolve()
    e = np.eye(4)
    q2 = e[1]
    q3 = e[3]

    rng = np.random.default_rng(7)

    def toy_features() -> np.ndarray:
        return rng.uniform(0.1, 1.0, size=(4, 4, 2)).astype(np.float32)

    objs = [
        write_example(
            dest, "sim_drawer", source="simulation",
            instruction="pull the drawer open", object_name="drawer",
            contact_embedding=rng.normal(size=8),
            instruction_embedding=embedding_with_cosine(q3, 0.40, e[0]),
            features=toy_features(),
            contact_point=(0.4, 0.6), dir_up=(0.0, 0.0, 1.0), dir_forward=(1.0, 0.0, 0.0),
        ),
        write_example(
            dest, "sim_shears", source="simulation",
            instruction="cut with the shears", object_name="shears",
            contact_embedding=rng.normal(size=8),
            instruction_embedding=embedding_with_cosine(q2, 0.91, e[2]),
            features=toy_features(),
            contact_point=(0.5, 0.5), dir_up=(0.0, 1.0, 0.0), dir_forward=(0.0, 0.0, 1.0),
        ),
        write_example(
            dest, "rob_kettle", source="robotic",
            instruction="lift the kettle off the stove", object_name="kettle",
            contact_embedding=rng.normal(size=8),
            instruction_embedding=embedding_with_cosine(q3, 0.95, e[2]),
            features=toy_features(),
        ),
        write_example(
            dest, "int_lamp", source="internet",
            instruction="switch on the desk lamp", object_name="lamp",
            contact_embedding=rng.normal(size=8),
            instruction_embedding=embedding_with_cosine(q3, 0.85, e[0]),
            features=toy_features(),
        ),
    ]
    manifest = _write_manifest(dest, objs)
    save_tensor(dest / "query_p2.embedding.tensor", q2)
    save_tensor(dest / "query_p3.embedding.tensor", q3)

    return _write_info(
        dest,
        {
            "kind": "retrieval_priority",
            "manifest": str(manifest),
            "queries": {
                "p1": {"instruction": "open the drawer"},
                "p2": {
                    "instruction": "trim the hedge",
                    "embedding": str(dest / "query_p2.embedding.tensor"),
                    "expected_best": "sim_shears",
                    "expected_best_cosine": 0.91,
                },
                "p3": {
                    "instruction": "fill the cup with water",
                    "embedding": str(dest / "query_p3.embedding.tensor"),
                    "expected_best": "rob_kettle",
                    "best_simulation_cosine": 0.40,
                },
            },
        },
    )


def gen_visual_kb(dest: str | Path) -> dict:
    """Eight same-name candidates with planted contact-embedding cosines."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    dest = dest.resolve()
    obs_emb = np.array([1.0, 0.0, 0.0, 0.0])
    helper = np.array([0.0, 1.0, 1.0, 0.0])
    planted = {
        "v0": 0.55, "v1": 0.95, "v2": 0.25, "v3": 0.85,
        "v4": 0.40, "v5": 0.70, "v6": 0.10, "v7": 0.90,
    }
    rng = np.random.default_rng(13)
    objs = [
        write_example(
            dest, example_id, source="simulation",
            instruction="lift the mug by the rim", object_name="mug",
            contact_embedding=embedding_with_cosine(obs_emb, cos_value, helper),
            features=rng.uniform(0.1, 1.0, size=(4, 4, 2)).astype(np.float32),
            contact_point=(0.5, 0.5), dir_up=(0.0, 0.0, 1.0), dir_forward=(1.0, 0.0, 0.0),
        )
        for example_id, cos_value in sorted(planted.items())
    ]
    manifest = _write_manifest(dest, objs)
    save_tensor(dest / "obs.embedding.tensor", obs_emb)

    expected = [i for i, _ in sorted(planted.items(), key=lambda kv: (-kv[1], kv[0]))]
    return _write_info(
        dest,
        {
            "kind": "visual_top_n",
            "manifest": str(manifest),
            "obs_embedding": str(dest / "obs.embedding.tensor"),
            "instruction": "lift the mug by the rim",
            "planted_cosines": planted,
            "expected_order": expected,
        },
    )


def random_pose_text(rng: random.Random) -> str:
    """A structured grasp-pose string with random numeric content."""

    def unit3() -> list[float]:
        v = [rng.gauss(0.0, 1.0) for _ in range(3)]
        norm = math.sqrt(sum(c * c for c in v)) or 1.0
        return [c / norm for c in v]

    u, v = rng.random(), rng.random()
    d_up = unit3()
    d_fwd = unit3()
    return (
        f"contact: ({u:.4f}, {v:.4f})\n"
        f"dir_up: ({d_up[0]:.4f}, {d_up[1]:.4f}, {d_up[2]:.4f})\n"
        f"dir_forward: ({d_fwd[0]:.4f}, {d_fwd[1]:.4f}, {d_fwd[2]:.4f})"
    )


def generate_all(dest: str | Path) -> dict:
    """Write every fixture family under ``dest``; returns the index dict."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    dest = dest.resolve()
    index = {
        "self_consistency": gen_self_consistency(dest / "self_consistency"),
        "planted_rotation": gen_planted_rotation(dest / "planted_rotation"),
        "retrieval_priority": gen_priority_kb(dest / "retrieval_priority"),
        "visual_top_n": gen_visual_kb(dest / "visual_top_n"),
    }
    (dest / "fixtures.json").write_text(
        json.dumps(index, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return index


def build_kb_from_fixture(info: dict, **kwargs) -> KnowledgeBase:
    """Convenience: build the knowledge base a fixture info dict points at."""
    return build([info["manifest"]], **kwargs)
