"""Dense-feature instance matching.

The matching distance between an observation and a candidate frame is the
sum, over masked observation pixels, of the L2 distance from each pixel's
feature vector to its nearest neighbour among all candidate-frame feature
vectors. The normalized variant divides by the masked pixel count so one
threshold works across object sizes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .knowledge_base import KnowledgeBase

GATE_ACCEPT = "accept"
GATE_NEEDS_REFINEMENT = "needs_refinement"

# Masked-pixel rows processed per block; keeps the distance buffer small
# without changing any computed value (rows are independent).
_ROW_BLOCK = 256


@dataclass(frozen=True)
class DenseFeatureMap:
    """H x W x C per-pixel feature tensor."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"feature map must be H x W x C with all dims >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("feature map contains non-finite values")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class InstanceMask:
    """H x W boolean mask selecting the pixels that belong to the instance."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"mask must be H x W, got shape {arr.shape}")
        object.__setattr__(self, "bits", arr.astype(bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def pixel_count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class ImdResult:
    """Matching distance in sum form plus its per-pixel normalization."""

    imd: float
    imd_normalized: float
    matches: np.ndarray | None = None

    def to_json_dict(self) -> dict:
        return {"imd": self.imd, "imd_normalized": self.imd_normalized}


def normalize_features(values: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """L2-normalize each pixel's feature vector; zero vectors stay zero."""
    arr = np.asarray(values, dtype=np.float64)
    norms = np.sqrt((arr * arr).sum(axis=-1, keepdims=True))
    return np.where(norms > eps, arr / np.where(norms > eps, norms, 1.0), arr)


def resize_mask_nearest(mask: InstanceMask, height: int, width: int) -> InstanceMask:
    """Nearest-neighbour resample, used when mask and feature grids differ."""
    if mask.height == height and mask.width == width:
        return mask
    rows = (np.arange(height) * mask.height) // height
    cols = (np.arange(width) * mask.width) // width
    return InstanceMask(mask.bits[np.ix_(rows, cols)])


def imd(
    obs: DenseFeatureMap,
    ctc: DenseFeatureMap,
    mask: InstanceMask,
    *,
    ctc_mask: InstanceMask | None = None,
    block_size: int | None = None,
    keep_matches: bool = True,
) -> ImdResult:
    """Nearest-neighbour matching distance over the masked observation pixels.

    The neighbour search runs over every candidate pixel (or only the pixels
    selected by ``ctc_mask`` when given); ties resolve to the smallest
    row-major candidate index. ``block_size`` chunks the candidate axis; any
    chunking is bit-identical to the unchunked scan.
    """
    if obs.channels != ctc.channels:
        raise ValueError(f"channel mismatch: obs C={obs.channels}, candidate C={ctc.channels}")
    if (mask.height, mask.width) != (obs.height, obs.width):
        raise ValueError(
            f"mask {mask.height}x{mask.width} does not match observation "
            f"{obs.height}x{obs.width}"
        )
    if ctc_mask is not None and (ctc_mask.height, ctc_mask.width) != (ctc.height, ctc.width):
        raise ValueError("ctc_mask dimensions do not match candidate feature map")

    flat_mask = mask.bits.reshape(-1)
    n_masked = int(flat_mask.sum())
    if n_masked == 0:
        warnings.warn("empty instance mask: matching distance is vacuously 0", stacklevel=2)
        return ImdResult(imd=0.0, imd_normalized=0.0, matches=np.empty(0, dtype=np.int64))

    obs_vecs = obs.values.reshape(-1, obs.channels)[flat_mask].astype(np.float64)
    cand_vecs = ctc.values.reshape(-1, ctc.channels).astype(np.float64)
    cand_index = np.arange(cand_vecs.shape[0], dtype=np.int64)
    if ctc_mask is not None:
        keep = ctc_mask.bits.reshape(-1)
        if not keep.any():
            raise ValueError("ctc_mask selects no candidate pixels")
        cand_vecs = cand_vecs[keep]
        cand_index = cand_index[keep]

    n_cand = cand_vecs.shape[0]
    step = n_cand if block_size is None else max(1, int(block_size))

    best_d2 = np.empty(n_masked, dtype=np.float64)
    best_idx = np.empty(n_masked, dtype=np.int64)
    for row0 in range(0, n_masked, _ROW_BLOCK):
        rows = obs_vecs[row0 : row0 + _ROW_BLOCK]
        row_best_d2: np.ndarray | None = None
        row_best_idx: np.ndarray | None = None
        for col0 in range(0, n_cand, step):
            chunk = cand_vecs[col0 : col0 + step]
            diff = rows[:, None, :] - chunk[None, :, :]
            d2 = np.einsum("mpc,mpc->mp", diff, diff)
            chunk_arg = np.argmin(d2, axis=1)
            chunk_min = d2[np.arange(d2.shape[0]), chunk_arg]
            if row_best_d2 is None:
                row_best_d2 = chunk_min
                row_best_idx = chunk_arg + col0
            else:
                # strict < keeps the earliest index on exact ties
                better = chunk_min < row_best_d2
                row_best_d2 = np.where(better, chunk_min, row_best_d2)
                row_best_idx = np.where(better, chunk_arg + col0, row_best_idx)
        best_d2[row0 : row0 + rows.shape[0]] = row_best_d2
        best_idx[row0 : row0 + rows.shape[0]] = row_best_idx

    distances = np.sqrt(best_d2)
    total = float(distances.sum())
    matches = cand_index[best_idx] if keep_matches else None
    return ImdResult(imd=total, imd_normalized=total / max(1, n_masked), matches=matches)


def select_min_imd(
    obs: DenseFeatureMap,
    mask: InstanceMask,
    candidates: Sequence[str],
    kb: "KnowledgeBase",
    tau_imd: float,
) -> tuple[str, ImdResult, str]:
    """Score each candidate's contact features; keep the lowest normalized distance.

    Ties resolve to the ascending id. The gate is ``accept`` when the best
    normalized distance is at or below ``tau_imd``, otherwise
    ``needs_refinement`` (the pick still serves as the geometric prior).
    """
    if not candidates:
        raise ValueError("empty candidate list")
    best: tuple[float, str] | None = None
    best_result: ImdResult | None = None
    for cand_id in candidates:
        example = kb.get_example(cand_id)
        features = example.contact_features()
        result = imd(obs, features, mask, keep_matches=False)
        key = (result.imd_normalized, cand_id)
        if best is None or key < best:
            best = key
            best_result = result
    assert best is not None and best_result is not None
    gate = GATE_ACCEPT if best_result.imd_normalized <= tau_imd else GATE_NEEDS_REFINEMENT
    return best[1], best_result, gate
