"""Standalone evaluators for pose regression and masked-parameter losses.

No model lives here: pose_loss scores two grasp poses directly, and the
masking utilities prepare / score the character-level infilling objective
given externally produced probability distributions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .refinement import GraspPose

MASK_TOKEN = "<m>"

_DIR_TOL = 1e-4
_DIST_SUM_TOL = 1e-6


@dataclass(frozen=True)
class PoseLossConfig:
    """Balance weights: lambda1 scales the contact MSE, lambda2 the direction term."""

    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self) -> None:
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")


def _pose_fields(pose, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(pose, GraspPose):
        contact = np.asarray(pose.contact_2d, dtype=np.float64)
        d_up, d_fwd = pose.dir_up, pose.dir_forward
    else:
        try:
            contact = np.asarray(pose["contact_2d"], dtype=np.float64)
            d_up = np.asarray(pose["dir_up"], dtype=np.float64)
            d_fwd = np.asarray(pose["dir_forward"], dtype=np.float64)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{name} must be a GraspPose or a mapping with "
                             "contact_2d/dir_up/dir_forward") from exc
    if contact.shape != (2,):
        raise ValueError(f"{name}: contact_2d must be a 2-vector")
    for label, vec in (("dir_up", d_up), ("dir_forward", d_fwd)):
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > _DIR_TOL:
            raise ValueError(f"{name}: non-unit {label} (norm {norm:.6f})")
    return contact, np.asarray(d_up, dtype=np.float64), np.asarray(d_fwd, dtype=np.float64)


def pose_loss(pred, gt, cfg: PoseLossConfig | None = None) -> float:
    """lambda1 ||c - c_hat||^2 + lambda2 (2 - d_u.d_u_hat - d_f.d_f_hat).

    The direction dots are clipped to [-1, 1] (they are cosines of unit
    vectors), which makes the identical-pose loss exactly 0 and the
    opposite-directions loss exactly 4 lambda2.
    """
    if cfg is None:
        cfg = PoseLossConfig()
    c_pred, up_pred, fwd_pred = _pose_fields(pred, "pred")
    c_gt, up_gt, fwd_gt = _pose_fields(gt, "gt")
    diff = c_pred - c_gt
    mse = float(diff @ diff)
    dot_up = float(np.clip(up_pred @ up_gt, -1.0, 1.0))
    dot_fwd = float(np.clip(fwd_pred @ fwd_gt, -1.0, 1.0))
    return cfg.lambda1 * mse + cfg.lambda2 * (2.0 - dot_up - dot_fwd)


def total_loss(mlm: float, pose: float) -> float:
    """Combined objective: masked-infilling loss plus pose loss."""
    return mlm + pose


@dataclass(frozen=True)
class MaskingResult:
    """A text with some digit characters replaced by the mask token.

    ``positions`` are character indices into the ORIGINAL text, ascending;
    ``targets`` holds the original character at each position.
    """

    masked_text: str
    positions: tuple[int, ...]
    targets: tuple[str, ...]
    mask_token: str = MASK_TOKEN


def mask_pose_parameters(
    text: str, mask_fraction: float, seed: int, mask_token: str = MASK_TOKEN
) -> MaskingResult:
    """Mask ceil(fraction * digit_count) digit characters, chosen by seed.

    Only digits are masked; signs and decimal points stay visible so the
    numeric structure remains readable. Text without digits comes back
    unchanged with an empty position set.
    """
    if not 0.0 < mask_fraction <= 1.0:
        raise ValueError("mask_fraction must lie in (0, 1]")
    digit_positions = [i for i, ch in enumerate(text) if ch.isdigit()]
    n_mask = math.ceil(mask_fraction * len(digit_positions))
    if n_mask == 0:
        return MaskingResult(masked_text=text, positions=(), targets=(), mask_token=mask_token)
    rng = random.Random(seed)
    chosen = sorted(rng.sample(digit_positions, n_mask))
    pieces: list[str] = []
    cursor = 0
    for pos in chosen:
        pieces.append(text[cursor:pos])
        pieces.append(mask_token)
        cursor = pos + 1
    pieces.append(text[cursor:])
    return MaskingResult(
        masked_text="".join(pieces),
        positions=tuple(chosen),
        targets=tuple(text[p] for p in chosen),
        mask_token=mask_token,
    )


def unmask(result: MaskingResult) -> str:
    """Exact inverse of mask_pose_parameters."""
    text = result.masked_text
    token = result.mask_token
    pieces: list[str] = []
    cursor = 0
    prev_original = 0
    for pos, ch in zip(result.positions, result.targets):
        gap = pos - prev_original
        pieces.append(text[cursor : cursor + gap])
        cursor += gap
        if text[cursor : cursor + len(token)] != token:
            raise ValueError(f"masked text does not carry the mask token at position {pos}")
        pieces.append(ch)
        cursor += len(token)
        prev_original = pos + 1
    pieces.append(text[cursor:])
    return "".join(pieces)


def mlm_cross_entropy(
    targets: Sequence[str], dists: Sequence[Mapping[str, float]]
) -> float:
    """- sum_i log P(target_i) over the supplied per-position distributions."""
    if len(targets) != len(dists):
        raise ValueError(f"{len(targets)} targets but {len(dists)} distributions")
    loss = 0.0
    for i, (target, dist) in enumerate(zip(targets, dists)):
        total = math.fsum(dist.values())
        if abs(total - 1.0) > _DIST_SUM_TOL:
            raise ValueError(f"position {i}: distribution sums to {total:.8f}, expected 1")
        if target not in dist:
            raise ValueError(f"position {i}: target {target!r} outside the vocabulary")
        p = dist[target]
        if p <= 0.0:
            raise ValueError(f"position {i}: target {target!r} has zero probability")
        loss -= math.log(p)
    return loss
