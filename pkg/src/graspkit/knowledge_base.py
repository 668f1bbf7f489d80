"""In-memory manipulation knowledge base.

Builds from one or more JSON-lines manifests into an id-keyed store with a
source partition and an object-name index. Tensor artifacts (feature maps,
embeddings, masks, depth, splat sets) load lazily on first access, each file
at most once even under concurrent readers; ``validate`` eagerly re-reads
everything from disk and reports per-record failures without touching the
lazy caches.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .matching import DenseFeatureMap, InstanceMask, normalize_features
from .refinement import DepthMap, GraspPose
from .splats import Camera, GaussianSet, gaussian_set_from_array
from .tensor_store import (
    SOURCES,
    CameraIntrinsics,
    ManifestError,
    ManifestRecord,
    load_manifest,
    load_tensor,
)

_EMBED_NORM_TOL = 1e-6


class KnowledgeBaseError(ValueError):
    """Raised for unknown ids and artifact files that fail validation."""


def normalize_object_name(name: str) -> str:
    """Canonical index key: lowercase, trimmed, inner whitespace collapsed."""
    return " ".join(name.lower().split())


def features_from_file(path: Path, normalize: bool) -> DenseFeatureMap:
    arr = load_tensor(path)
    if arr.ndim != 3:
        raise ValueError(f"feature map must be H x W x C, got {arr.ndim}-D")
    values = normalize_features(arr) if normalize else np.asarray(arr, dtype=np.float64)
    return DenseFeatureMap(values)


def embedding_from_file(path: Path) -> np.ndarray:
    arr = np.asarray(load_tensor(path), dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got {arr.ndim}-D")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > _EMBED_NORM_TOL:
        raise ValueError(f"embedding norm {norm:.6f}, expected 1 (stored pre-normalized)")
    return arr


def depth_from_file(path: Path) -> DepthMap:
    arr = load_tensor(path)
    if arr.ndim != 2:
        raise ValueError(f"depth map must be H x W, got {arr.ndim}-D")
    return DepthMap(arr)


def mask_from_file(path: Path) -> InstanceMask:
    arr = load_tensor(path)
    if arr.ndim != 2:
        raise ValueError(f"mask must be H x W, got {arr.ndim}-D")
    return InstanceMask(arr != 0)


def gaussians_from_file(path: Path) -> GaussianSet:
    return gaussian_set_from_array(load_tensor(path))


class ManipulationExample:
    """One knowledge-base entry: manifest fields plus lazy artifact handles."""

    def __init__(self, record: ManifestRecord, base: Path, normalize_features: bool = True):
        self.record = record
        self.base = Path(base)
        self._normalize = bool(normalize_features)
        self._cache: dict[str, object] = {}
        self._lock = threading.Lock()

    # manifest field passthroughs
    @property
    def id(self) -> str:
        return self.record.id

    @property
    def source(self) -> str:
        return self.record.source

    @property
    def instruction(self) -> str:
        return self.record.instruction

    @property
    def object_name(self) -> str:
        return self.record.object_name

    @property
    def contact_point(self) -> tuple[float, float] | None:
        return self.record.contact_point

    @property
    def dir_up(self) -> tuple[float, float, float] | None:
        return self.record.dir_up

    @property
    def dir_forward(self) -> tuple[float, float, float] | None:
        return self.record.dir_forward

    @property
    def intrinsics(self) -> CameraIntrinsics | None:
        return self.record.intrinsics

    def camera(self) -> Camera | None:
        i = self.record.intrinsics
        if i is None:
            return None
        return Camera(fx=i.fx, fy=i.fy, cx=i.cx, cy=i.cy, width=i.width, height=i.height)

    def pose(self) -> GraspPose | None:
        """Stored grasp pose, present on simulation records."""
        rec = self.record
        if rec.contact_point is None or rec.dir_up is None or rec.dir_forward is None:
            return None
        return GraspPose(
            contact_2d=rec.contact_point, dir_up=rec.dir_up, dir_forward=rec.dir_forward
        )

    def _path(self, relpath: str) -> Path:
        return self.base / relpath

    def _resolve(self, key: str, relpath: str | None, loader: Callable[[Path], object]):
        if relpath is None:
            return None
        if key in self._cache:
            return self._cache[key]
        with self._lock:
            if key in self._cache:
                return self._cache[key]
            path = self._path(relpath)
            try:
                value = loader(path)
            except (OSError, ValueError) as exc:
                raise KnowledgeBaseError(f"example '{self.id}': {path}: {exc}") from exc
            self._cache[key] = value
            return value

    # lazy artifact handles (each file read at most once)
    def contact_features(self) -> DenseFeatureMap:
        return self._resolve(
            "contact_features",
            self.record.contact_frame_features,
            lambda p: features_from_file(p, self._normalize),
        )

    def contact_embedding(self) -> np.ndarray:
        return self._resolve(
            "contact_embedding", self.record.contact_frame_embedding, embedding_from_file
        )

    def instruction_embedding(self) -> np.ndarray | None:
        return self._resolve(
            "instruction_embedding", self.record.instruction_embedding, embedding_from_file
        )

    def success_embedding(self) -> np.ndarray | None:
        return self._resolve(
            "success_embedding", self.record.success_frame_embedding, embedding_from_file
        )

    def depth_map(self) -> DepthMap | None:
        return self._resolve("depth_map", self.record.depth, depth_from_file)

    def instance_mask(self) -> InstanceMask | None:
        return self._resolve("instance_mask", self.record.mask, mask_from_file)

    def gaussian_set(self) -> GaussianSet | None:
        return self._resolve("gaussians", self.record.gaussians, gaussians_from_file)


@dataclass
class KnowledgeBase:
    """Immutable-after-build store: records, source partition, object index."""

    records: dict[str, ManipulationExample]
    by_source: dict[str, list[str]]
    object_index: dict[str, list[str]]
    root: Path
    normalize_features: bool = True

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return sorted(self.records)

    def get_example(self, example_id: str) -> ManipulationExample:
        try:
            return self.records[example_id]
        except KeyError:
            raise KnowledgeBaseError(f"unknown example id '{example_id}'") from None


def build(
    manifests: Sequence[str | Path], *, normalize_features: bool = True
) -> KnowledgeBase:
    """Load manifests into a KnowledgeBase; artifact paths stay lazy.

    Relative tensor paths resolve against each manifest's own directory.
    Object names index under their canonical (lowercased, space-collapsed)
    form; bucket ids sort lexicographically so builds are order-independent.
    """
    examples: dict[str, ManipulationExample] = {}
    origin: dict[str, Path] = {}
    root: Path | None = None
    for manifest in manifests:
        manifest = Path(manifest)
        try:
            records = load_manifest(manifest)
        except OSError as exc:
            raise ManifestError(f"cannot read manifest {manifest}: {exc}") from exc
        base = manifest.resolve().parent
        if root is None:
            root = base
        for record in records:
            if record.id in examples:
                raise ManifestError(
                    f"duplicate id '{record.id}' in {origin[record.id]} and {manifest}"
                )
            examples[record.id] = ManipulationExample(record, base, normalize_features)
            origin[record.id] = manifest

    by_source: dict[str, list[str]] = {source: [] for source in sorted(SOURCES)}
    object_index: dict[str, list[str]] = {}
    for example in examples.values():
        by_source[example.source].append(example.id)
        object_index.setdefault(normalize_object_name(example.object_name), []).append(example.id)
    for bucket in by_source.values():
        bucket.sort()
    for bucket in object_index.values():
        bucket.sort()

    return KnowledgeBase(
        records=examples,
        by_source=by_source,
        object_index=object_index,
        root=root if root is not None else Path("."),
        normalize_features=normalize_features,
    )


def get_example(kb: KnowledgeBase, example_id: str) -> ManipulationExample:
    return kb.get_example(example_id)


@dataclass(frozen=True)
class ValidationEntry:
    id: str
    ok: bool
    reason: str = ""

    def to_json_dict(self) -> dict:
        return {"id": self.id, "ok": self.ok, "reason": self.reason}


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[ValidationEntry, ...]
    notes: tuple[str, ...] = ()

    @property
    def failures(self) -> list[ValidationEntry]:
        return [e for e in self.entries if not e.ok]

    @property
    def ok(self) -> bool:
        return not self.failures and not self.notes

    def to_json_dict(self) -> dict:
        return {
            "total": len(self.entries),
            "failures": len(self.failures),
            "entries": [e.to_json_dict() for e in self.entries],
            "notes": list(self.notes),
        }


def validate(kb: KnowledgeBase) -> ValidationReport:
    """Eagerly load every referenced tensor, reporting per-record pass/fail.

    Reads straight from disk (no caches are consulted or filled) so the call
    is pure. Cross-record embedding-dimension mismatches surface as notes.
    """
    entries: list[ValidationEntry] = []
    embed_dims: dict[str, set[int]] = {"contact": set(), "instruction": set()}
    for example_id in kb.ids():
        example = kb.records[example_id]
        rec = example.record
        reasons: list[str] = []
        checks: list[tuple[str, str | None, Callable[[Path], object]]] = [
            ("contact_frame_features", rec.contact_frame_features,
             lambda p: features_from_file(p, kb.normalize_features)),
            ("contact_frame_embedding", rec.contact_frame_embedding, embedding_from_file),
            ("instruction_embedding", rec.instruction_embedding, embedding_from_file),
            ("success_frame_embedding", rec.success_frame_embedding, embedding_from_file),
            ("mask", rec.mask, mask_from_file),
            ("depth", rec.depth, depth_from_file),
            ("gaussians", rec.gaussians, gaussians_from_file),
        ]
        for field_name, relpath, loader in checks:
            if relpath is None:
                continue
            path = example.base / relpath
            try:
                value = loader(path)
            except (OSError, ValueError) as exc:
                reasons.append(f"{field_name}: {path}: {exc}")
                continue
            if field_name == "contact_frame_embedding":
                embed_dims["contact"].add(np.asarray(value).shape[0])
            elif field_name == "instruction_embedding":
                embed_dims["instruction"].add(np.asarray(value).shape[0])
        entries.append(
            ValidationEntry(id=example_id, ok=not reasons, reason="; ".join(reasons))
        )

    notes = tuple(
        f"inconsistent {kind} embedding dimensions across records: {sorted(dims)}"
        for kind, dims in embed_dims.items()
        if len(dims) > 1
    )
    return ValidationReport(entries=tuple(entries), notes=notes)
