"""Raw image, mask, and depth loading via Pillow.

Every loader raises ImageError naming the offending file; values come out
as numpy arrays in [0, 1] (images), booleans (masks), or meters (depth).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class ImageError(ValueError):
    """An input image could not be read or has the wrong shape."""


def _open(path: str | Path, mode: str) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert(mode))
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageError(f"{path}: cannot read image ({exc})") from exc


def load_rgb(path: str | Path) -> np.ndarray:
    """H x W x 3 float64 in [0, 1]."""
    return _open(path, "RGB").astype(np.float64) / 255.0


def load_mask(path: str | Path, expect_hw: tuple[int, int]) -> np.ndarray:
    """H x W bool; any nonzero pixel belongs to the instance."""
    arr = _open(path, "L")
    if arr.shape != expect_hw:
        raise ImageError(
            f"{path}: mask is {arr.shape[1]}x{arr.shape[0]}, "
            f"image is {expect_hw[1]}x{expect_hw[0]}"
        )
    return arr > 0


def load_depth(path: str | Path, expect_hw: tuple[int, int], scale: float) -> np.ndarray:
    """H x W float64 depth in meters: normalized gray level times ``scale``.

    Zero pixels stay zero and downstream treats them as missing depth.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            gray = img.convert("I") if img.mode in ("I", "I;16") else img.convert("L")
            arr = np.asarray(gray).astype(np.float64)
            full = 65535.0 if img.mode in ("I", "I;16") else 255.0
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageError(f"{path}: cannot read image ({exc})") from exc
    if arr.shape != expect_hw:
        raise ImageError(
            f"{path}: depth is {arr.shape[1]}x{arr.shape[0]}, "
            f"image is {expect_hw[1]}x{expect_hw[0]}"
        )
    if scale <= 0:
        raise ImageError(f"{path}: depth scale must be positive, got {scale}")
    return arr / full * scale
