"""Binary tensor container and JSON-lines manifest I/O.

Every array artifact (feature maps, embeddings, masks, depth maps, splat
sets) travels through one bit-exact file format:

    magic ``MRAGTENS`` | u32 version | u32 dtype | u32 ndim | ndim x u64 dims | payload

All integers little-endian; payload is row-major little-endian float32.
Version 1 supports float32 only (dtype code 1).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence, TextIO

import numpy as np

MAGIC = b"MRAGTENS"
VERSION = 1
DTYPE_F32 = 1

SOURCES = frozenset({"simulation", "robotic", "internet"})

_HEADER_FIXED = struct.Struct("<III")  # version, dtype, ndim
_UNIT_NORM_TOL = 1e-6


class TensorFormatError(ValueError):
    """Raised when tensor bytes violate the container format."""


class ManifestError(ValueError):
    """Raised when a manifest line fails parsing or validation."""


@dataclass(frozen=True)
class TensorFile:
    """A validated in-memory tensor: float32 data shaped by ``dims``."""

    dims: tuple[int, ...]
    data: np.ndarray
    dtype: int = DTYPE_F32


def _product(dims: Sequence[int]) -> int:
    return math.prod(dims)


def write_tensor(dims: Sequence[int], data, dest: str | Path | BinaryIO) -> int:
    """Serialize a float32 tensor; returns the number of bytes written.

    ``data`` may be any flat sequence or ndarray whose element count equals
    ``product(dims)``; values are cast to float32 and must stay finite.
    """
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise TensorFormatError("dims must be non-empty")
    if any(d < 1 for d in dims):
        raise TensorFormatError(f"every extent must be >= 1, got {dims}")
    arr = np.asarray(data, dtype="<f4").reshape(-1)
    if arr.size != _product(dims):
        raise TensorFormatError(
            f"dims {dims} imply {_product(dims)} values, got {arr.size}"
        )
    if not np.isfinite(arr).all():
        raise TensorFormatError("payload contains non-finite values")

    blob = (
        MAGIC
        + _HEADER_FIXED.pack(VERSION, DTYPE_F32, len(dims))
        + struct.pack(f"<{len(dims)}Q", *dims)
        + arr.tobytes(order="C")
    )
    if hasattr(dest, "write"):
        dest.write(blob)
    else:
        Path(dest).write_bytes(blob)
    return len(blob)


def _read_exact(buf: BinaryIO, n: int, what: str) -> bytes:
    chunk = buf.read(n)
    if len(chunk) != n:
        raise TensorFormatError(f"truncated tensor: short read of {what}")
    return chunk


def read_tensor(src: str | Path | BinaryIO) -> TensorFile:
    """Parse and validate a tensor; rejects bad magic, truncation, non-finite."""
    if hasattr(src, "read"):
        return _read_tensor_stream(src)
    path = Path(src)
    with path.open("rb") as fh:
        tensor = _read_tensor_stream(fh)
        if fh.read(1):
            raise TensorFormatError(f"{path}: trailing bytes after payload")
    return tensor


def _read_tensor_stream(buf: BinaryIO) -> TensorFile:
    magic = _read_exact(buf, len(MAGIC), "magic")
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    version, dtype, ndim = _HEADER_FIXED.unpack(_read_exact(buf, _HEADER_FIXED.size, "header"))
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise TensorFormatError(f"unsupported dtype code {dtype}")
    if ndim < 1:
        raise TensorFormatError("ndim must be >= 1")
    dims = struct.unpack(f"<{ndim}Q", _read_exact(buf, 8 * ndim, "dims"))
    if any(d < 1 for d in dims):
        raise TensorFormatError(f"every extent must be >= 1, got {dims}")
    count = _product(dims)
    payload = _read_exact(buf, 4 * count, "payload")
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if not np.isfinite(arr).all():
        raise TensorFormatError("payload contains non-finite values")
    return TensorFile(dims=tuple(int(d) for d in dims), data=arr)


def save_tensor(path: str | Path, array) -> int:
    """Convenience wrapper: write ``array`` (any shape) to ``path``."""
    arr = np.asarray(array)
    return write_tensor(arr.shape, arr.reshape(-1), path)


def load_tensor(path: str | Path) -> np.ndarray:
    """Convenience wrapper: read a tensor from ``path`` as a float32 ndarray."""
    return read_tensor(path).data


# ---------------------------------------------------------------------------
# Manifest records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics bundled with the image size they apply to."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int


@dataclass(frozen=True)
class ManifestRecord:
    """One knowledge-base entry as stored on disk.

    Tensor fields hold relative path strings; resolution against the
    manifest's directory happens at knowledge-base build time.
    """

    id: str
    source: str
    instruction: str
    object_name: str
    contact_frame_features: str
    contact_frame_embedding: str
    instruction_embedding: str | None = None
    success_frame_embedding: str | None = None
    mask: str | None = None
    depth: str | None = None
    intrinsics: CameraIntrinsics | None = None
    contact_point: tuple[float, float] | None = None
    dir_up: tuple[float, float, float] | None = None
    dir_forward: tuple[float, float, float] | None = None
    gaussians: str | None = None
    line: int = field(default=0, compare=False)


def _require_str(obj: dict, key: str, where: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise ManifestError(f"{where}: field '{key}' must be a non-empty string")
    return value


def _optional_str(obj: dict, key: str, where: str) -> str | None:
    value = obj.get(key)
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ManifestError(f"{where}: field '{key}' must be a non-empty string")
    return value


def _unit3(obj: dict, key: str, where: str) -> tuple[float, float, float] | None:
    value = obj.get(key)
    if value is None:
        return None
    try:
        vec = tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: field '{key}' must be a 3-vector") from exc
    if len(vec) != 3 or not all(math.isfinite(v) for v in vec):
        raise ManifestError(f"{where}: field '{key}' must be a finite 3-vector")
    norm = math.sqrt(sum(v * v for v in vec))
    if abs(norm - 1.0) > _UNIT_NORM_TOL:
        raise ManifestError(f"{where}: field '{key}' must be unit length, norm={norm:.8f}")
    return vec  # type: ignore[return-value]


def _contact_point(obj: dict, where: str) -> tuple[float, float] | None:
    value = obj.get("contact_point")
    if value is None:
        return None
    try:
        x, y = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: contact_point must be a 2-vector") from exc
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ManifestError(f"{where}: contact_point components must lie in [0, 1]")
    return (x, y)


def _intrinsics(obj: dict, where: str) -> CameraIntrinsics | None:
    value = obj.get("intrinsics")
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ManifestError(f"{where}: intrinsics must be an object with fx/fy/cx/cy/width/height")
    try:
        cam = CameraIntrinsics(
            fx=float(value["fx"]),
            fy=float(value["fy"]),
            cx=float(value["cx"]),
            cy=float(value["cy"]),
            width=int(value["width"]),
            height=int(value["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: intrinsics must carry numeric fx/fy/cx/cy/width/height") from exc
    if cam.fx <= 0 or cam.fy <= 0 or cam.width < 1 or cam.height < 1:
        raise ManifestError(f"{where}: intrinsics out of range")
    return cam


def parse_record(obj: dict, line: int = 0) -> ManifestRecord:
    """Validate one decoded manifest object into a ManifestRecord."""
    where = f"line {line}" if line else "record"
    rec_id = _require_str(obj, "id", where)
    where = f"{where} (id={rec_id})"
    source = _require_str(obj, "source", where)
    if source not in SOURCES:
        raise ManifestError(f"{where}: unknown source '{source}'")
    record = ManifestRecord(
        id=rec_id,
        source=source,
        instruction=_require_str(obj, "instruction", where),
        object_name=_require_str(obj, "object_name", where),
        contact_frame_features=_require_str(obj, "contact_frame_features", where),
        contact_frame_embedding=_require_str(obj, "contact_frame_embedding", where),
        instruction_embedding=_optional_str(obj, "instruction_embedding", where),
        success_frame_embedding=_optional_str(obj, "success_frame_embedding", where),
        mask=_optional_str(obj, "mask", where),
        depth=_optional_str(obj, "depth", where),
        intrinsics=_intrinsics(obj, where),
        contact_point=_contact_point(obj, where),
        dir_up=_unit3(obj, "dir_up", where),
        dir_forward=_unit3(obj, "dir_forward", where),
        gaussians=_optional_str(obj, "gaussians", where),
        line=line,
    )
    if record.source == "simulation":
        missing = [
            name
            for name, value in (
                ("contact_point", record.contact_point),
                ("dir_up", record.dir_up),
                ("dir_forward", record.dir_forward),
            )
            if value is None
        ]
        if missing:
            raise ManifestError(f"{where}: simulation record missing {', '.join(missing)}")
    return record


def load_manifest(src: str | Path | TextIO) -> list[ManifestRecord]:
    """Parse a JSON-lines manifest, enforcing per-record invariants.

    Order-preserving; blank lines are skipped. Referenced tensor paths are
    recorded, not opened.
    """
    if hasattr(src, "read"):
        text = src.read()
    else:
        text = Path(src).read_text(encoding="utf-8")
    records: list[ManifestRecord] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ManifestError(f"line {lineno}: record must be a JSON object")
        record = parse_record(obj, line=lineno)
        if record.id in seen:
            raise ManifestError(
                f"duplicate id '{record.id}' on lines {seen[record.id]} and {lineno}"
            )
        seen[record.id] = lineno
        records.append(record)
    return records


def record_to_json(record: ManifestRecord) -> dict:
    """Inverse of parse_record: a plain JSON-ready dict (omits absent fields)."""
    obj: dict = {
        "id": record.id,
        "source": record.source,
        "instruction": record.instruction,
        "object_name": record.object_name,
        "contact_frame_features": record.contact_frame_features,
        "contact_frame_embedding": record.contact_frame_embedding,
    }
    for key in (
        "instruction_embedding",
        "success_frame_embedding",
        "mask",
        "depth",
        "gaussians",
    ):
        value = getattr(record, key)
        if value is not None:
            obj[key] = value
    if record.intrinsics is not None:
        cam = record.intrinsics
        obj["intrinsics"] = {
            "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
            "width": cam.width, "height": cam.height,
        }
    if record.contact_point is not None:
        obj["contact_point"] = list(record.contact_point)
    if record.dir_up is not None:
        obj["dir_up"] = list(record.dir_up)
    if record.dir_forward is not None:
        obj["dir_forward"] = list(record.dir_forward)
    return obj


def dump_manifest(records: Iterable[ManifestRecord], dest: str | Path | TextIO) -> None:
    """Write records as JSON-lines, one per line, stable key order."""
    lines = "".join(json.dumps(record_to_json(r), sort_keys=True) + "\n" for r in records)
    if hasattr(dest, "write"):
        dest.write(lines)
    else:
        Path(dest).write_text(lines, encoding="utf-8")
