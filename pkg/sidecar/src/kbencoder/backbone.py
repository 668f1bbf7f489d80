"""Deterministic encoding backbones.

A backbone turns an RGB image into a unit embedding and a dense per-cell
feature map, and instruction text into a unit embedding in the same space
as the image embeddings. The built-in backbone is a seeded random
projection over pooled image statistics and hashed tokens: no weights to
download, bit-identical across runs, and everything downstream needs is
shape and determinism, not semantics. Swapping in a learned encoder means
implementing the same three methods.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_TEXT_SLOTS = 256
_PATCH = 16  # image embedding samples a PATCH x PATCH grid


class BackboneError(ValueError):
    """Unknown backbone name or unencodable input."""


def _seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class SpectralBackbone:
    """Fixed random-projection encoder; all randomness is name-seeded."""

    name: str = "spectral-v1"
    embed_dim: int = 32
    feature_dim: int = 16
    stride: int = 8

    def grid(self, height: int, width: int) -> tuple[int, int]:
        """Dense feature-map dims for an input resolution (ceil division)."""
        return math.ceil(height / self.stride), math.ceil(width / self.stride)

    def _projection(self, tag: str, in_dim: int, out_dim: int) -> np.ndarray:
        rng = np.random.default_rng(_seed(self.name, tag, in_dim, out_dim))
        return rng.standard_normal((out_dim, in_dim)) / math.sqrt(in_dim)

    def embed_text(self, text: str) -> np.ndarray:
        """Hashed bag-of-tokens projected to a unit vector."""
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            raise BackboneError("cannot embed text without alphanumeric tokens")
        bag = np.zeros(_TEXT_SLOTS)
        for token in tokens:
            bag[_seed("token", token) % _TEXT_SLOTS] += 1.0
        vec = self._projection("text", _TEXT_SLOTS, self.embed_dim) @ bag
        return _unit(vec)

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        """Coarse PATCH x PATCH resample projected to a unit vector."""
        arr = _check_image(image)
        h, w = arr.shape[:2]
        rows = (np.arange(_PATCH) * h) // _PATCH
        cols = (np.arange(_PATCH) * w) // _PATCH
        coarse = arr[np.ix_(rows, cols)].reshape(-1)
        vec = self._projection("image", coarse.size, self.embed_dim) @ coarse
        return _unit(vec)

    def dense_features(self, image: np.ndarray) -> np.ndarray:
        """Per-cell pooled statistics projected to feature_dim channels.

        Output shape is exactly ``grid(h, w) + (feature_dim,)``.
        """
        arr = _check_image(image)
        h, w = arr.shape[:2]
        gh, gw = self.grid(h, w)
        stats = np.empty((gh, gw, 9))
        for i in range(gh):
            r0, r1 = i * self.stride, min(h, (i + 1) * self.stride)
            for j in range(gw):
                c0, c1 = j * self.stride, min(w, (j + 1) * self.stride)
                cell = arr[r0:r1, c0:c1].reshape(-1, 3)
                stats[i, j] = np.concatenate(
                    [cell.mean(axis=0), cell.max(axis=0), cell.min(axis=0)]
                )
        proj = self._projection("features", 9, self.feature_dim)
        return np.einsum("ck,ijk->ijc", proj, stats)


_REGISTRY = {b.name: b for b in (SpectralBackbone(),)}


def get_backbone(name: str) -> SpectralBackbone:
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise BackboneError(f"unknown backbone '{name}' (available: {known})") from None


def backbone_names() -> list[str]:
    return sorted(_REGISTRY)


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise BackboneError("degenerate input produced a zero embedding")
    return vec / norm


def _check_image(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise BackboneError(f"image must be H x W x 3, got shape {arr.shape}")
    return arr
