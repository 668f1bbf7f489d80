"""Dataset and observation encoding: raw inputs to engine-ready files.

``encode_dataset`` reads a dataset directory (``dataset.jsonl`` plus the
images it references), runs the backbone over every example, and writes
one tensor set per example plus a ``manifest.jsonl`` the engine can build
a knowledge base from. ``encode_observation`` produces a single
observation directory consumable by the engine's ``query --obs-dir``.

All files are written atomically (temp + rename) and the manifest is
written only after every record has succeeded, so a failing example
never leaves a partial manifest behind.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backbone import BackboneError, get_backbone
from .images import ImageError, load_depth, load_mask, load_rgb
from .wire import atomic_write_text, write_tensor

DATASET_FILE = "dataset.jsonl"
SOURCES = ("simulation", "robotic", "internet")


class EncodeError(ValueError):
    """A dataset record is malformed or an input file is unusable."""


@dataclass(frozen=True)
class EncodeJob:
    """One batch encoding run; fields mirror the CLI flags."""

    input_dir: Path
    output_dir: Path
    backbone: str = "spectral-v1"
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise EncodeError("jobs must be >= 1")


@dataclass(frozen=True)
class DatasetRecord:
    """One parsed line of dataset.jsonl, paths resolved against the dataset dir."""

    id: str
    instruction: str
    object_name: str
    source: str
    image: Path
    mask: Path | None
    depth: Path | None
    depth_scale: float
    intrinsics: dict | None
    contact_point: tuple[float, float] | None
    dir_up: tuple[float, ...] | None
    dir_forward: tuple[float, ...] | None


def _field(obj: dict, key: str, where: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise EncodeError(f"{where}: field '{key}' must be a non-empty string")
    return value


def _vector(obj: dict, key: str, size: int, where: str) -> tuple[float, ...] | None:
    value = obj.get(key)
    if value is None:
        return None
    try:
        vec = tuple(float(c) for c in value)
    except (TypeError, ValueError) as exc:
        raise EncodeError(f"{where}: field '{key}' must be a {size}-vector") from exc
    if len(vec) != size:
        raise EncodeError(f"{where}: field '{key}' must be a {size}-vector")
    return vec


def parse_dataset(input_dir: str | Path) -> list[DatasetRecord]:
    """Read and validate dataset.jsonl; duplicate ids and bad fields fail fast."""
    root = Path(input_dir)
    listing = root / DATASET_FILE
    if not listing.is_file():
        raise EncodeError(f"{listing}: dataset listing not found")

    records: list[DatasetRecord] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(listing.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        where = f"{listing.name} line {line_no}"
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise EncodeError(f"{where}: invalid JSON ({exc})") from exc
        if not isinstance(obj, dict):
            raise EncodeError(f"{where}: record must be a JSON object")

        rec_id = _field(obj, "id", where)
        where = f"{where} (id={rec_id})"
        if rec_id in seen:
            raise EncodeError(f"{where}: duplicate id")
        seen.add(rec_id)

        source = obj.get("source", "internet")
        if source not in SOURCES:
            raise EncodeError(f"{where}: source must be one of {', '.join(SOURCES)}")

        depth_scale = float(obj.get("depth_scale", 1.0))
        intrinsics = obj.get("intrinsics")
        if intrinsics is not None and not isinstance(intrinsics, dict):
            raise EncodeError(f"{where}: intrinsics must be an object")

        records.append(DatasetRecord(
            id=rec_id,
            instruction=_field(obj, "instruction", where),
            object_name=_field(obj, "object_name", where),
            source=source,
            image=root / _field(obj, "image", where),
            mask=root / obj["mask"] if obj.get("mask") else None,
            depth=root / obj["depth"] if obj.get("depth") else None,
            depth_scale=depth_scale,
            intrinsics=intrinsics,
            contact_point=_vector(obj, "contact_point", 2, where),
            dir_up=_vector(obj, "dir_up", 3, where),
            dir_forward=_vector(obj, "dir_forward", 3, where),
        ))
    if not records:
        raise EncodeError(f"{listing}: dataset listing holds no records")
    return records


def _encode_record(record: DatasetRecord, backbone, out_dir: Path) -> dict:
    """Write one example's tensors; returns its manifest object."""
    image = load_rgb(record.image)
    h, w = image.shape[:2]

    write_tensor(out_dir / f"{record.id}.features.tensor", backbone.dense_features(image))
    write_tensor(out_dir / f"{record.id}.embedding.tensor", backbone.embed_image(image))
    write_tensor(
        out_dir / f"{record.id}.instruction.tensor", backbone.embed_text(record.instruction)
    )

    obj: dict = {
        "id": record.id,
        "source": record.source,
        "instruction": record.instruction,
        "object_name": record.object_name,
        "contact_frame_features": f"{record.id}.features.tensor",
        "contact_frame_embedding": f"{record.id}.embedding.tensor",
        "instruction_embedding": f"{record.id}.instruction.tensor",
    }
    if record.mask is not None:
        mask = load_mask(record.mask, (h, w))
        write_tensor(out_dir / f"{record.id}.mask.tensor", mask.astype(np.float32))
        obj["mask"] = f"{record.id}.mask.tensor"
    if record.depth is not None:
        depth = load_depth(record.depth, (h, w), record.depth_scale)
        write_tensor(out_dir / f"{record.id}.depth.tensor", depth)
        obj["depth"] = f"{record.id}.depth.tensor"
    if record.intrinsics is not None:
        obj["intrinsics"] = record.intrinsics
    for key, value in (
        ("contact_point", record.contact_point),
        ("dir_up", record.dir_up),
        ("dir_forward", record.dir_forward),
    ):
        if value is not None:
            obj[key] = list(value)
    return obj


def encode_dataset(job: EncodeJob) -> Path:
    """Encode every dataset example; returns the manifest path.

    Records are processed in listing order (optionally in a thread pool)
    and the manifest is a single atomic write at the very end.
    """
    records = parse_dataset(job.input_dir)
    backbone = get_backbone(job.backbone)
    out_dir = Path(job.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if job.jobs == 1:
        objs = [_encode_record(r, backbone, out_dir) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=job.jobs) as pool:
            objs = list(pool.map(lambda r: _encode_record(r, backbone, out_dir), records))

    manifest = out_dir / "manifest.jsonl"
    lines = "".join(json.dumps(obj, sort_keys=True) + "\n" for obj in objs)
    atomic_write_text(manifest, lines)
    return manifest


def encode_observation(
    image_path: str | Path,
    out_dir: str | Path,
    *,
    backbone: str = "spectral-v1",
    mask_path: str | Path | None = None,
    depth_path: str | Path | None = None,
    depth_scale: float = 1.0,
    camera: dict | None = None,
    instruction: str | None = None,
) -> Path:
    """Encode a single observation directory for the engine's query CLI.

    Without a mask the full image counts as the instance, with a warning:
    matching quality degrades but the pipeline stays runnable.
    """
    enc = get_backbone(backbone)
    image = load_rgb(image_path)
    h, w = image.shape[:2]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    features = enc.dense_features(image)
    write_tensor(out / "features.tensor", features)
    write_tensor(out / "embedding.tensor", enc.embed_image(image))

    if mask_path is None:
        warnings.warn(
            f"{image_path}: no instance mask given, writing a full-image mask",
            stacklevel=2,
        )
        mask = np.ones((h, w), dtype=np.float32)
    else:
        mask = load_mask(mask_path, (h, w)).astype(np.float32)
    write_tensor(out / "mask.tensor", mask)

    if depth_path is not None:
        write_tensor(out / "depth.tensor", load_depth(depth_path, (h, w), depth_scale))
    if camera is not None:
        atomic_write_text(out / "camera.json", json.dumps(camera, sort_keys=True) + "\n")
    if instruction is not None:
        write_tensor(out / "instruction_embedding.tensor", enc.embed_text(instruction))
    return out


ENCODE_ERRORS = (EncodeError, ImageError, BackboneError)
