"""Shared toy dataset: two small PNG scenes with masks, depth, and poses."""

import json

import numpy as np
import pytest
from PIL import Image


def gradient_image(width=32, height=24):
    """A red-to-blue gradient with a bright square: the 'mug' scene."""
    x = np.linspace(0.0, 1.0, width)[None, :, None]
    img = np.concatenate([1.0 - x, 0.3 * np.ones_like(x), x], axis=2)
    img = np.repeat(img, height, axis=0)
    img[8:16, 12:20] = [0.9, 0.9, 0.2]
    return (img * 255).astype(np.uint8)


def checker_image(width=32, height=24, period=4):
    """A two-tone checkerboard: the 'pan' scene."""
    yy, xx = np.mgrid[0:height, 0:width]
    board = ((yy // period + xx // period) % 2).astype(np.float64)
    img = np.stack([0.2 + 0.6 * board, 0.5 * np.ones_like(board), 0.8 - 0.6 * board], axis=2)
    return (img * 255).astype(np.uint8)


def write_png(path, array):
    Image.fromarray(array).save(path)
    return path


@pytest.fixture()
def toy_dataset(tmp_path):
    """Dataset directory with one simulation record (full pose) and one robotic."""
    root = tmp_path / "dataset"
    root.mkdir()
    write_png(root / "mug.png", gradient_image())
    write_png(root / "pan.png", checker_image())

    mask = np.zeros((24, 32), dtype=np.uint8)
    mask[6:18, 10:22] = 255
    write_png(root / "mug_mask.png", mask)
    write_png(root / "mug_depth.png", np.full((24, 32), 128, dtype=np.uint8))

    records = [
        {
            "id": "toy_mug",
            "source": "simulation",
            "instruction": "pick up the red mug by its handle",
            "object_name": "mug",
            "image": "mug.png",
            "mask": "mug_mask.png",
            "depth": "mug_depth.png",
            "depth_scale": 2.0,
            "intrinsics": {"fx": 40.0, "fy": 40.0, "cx": 16.0, "cy": 12.0,
                           "width": 32, "height": 24},
            "contact_point": [0.4, 0.6],
            "dir_up": [0.0, 0.0, 1.0],
            "dir_forward": [1.0, 0.0, 0.0],
        },
        {
            "id": "toy_pan",
            "source": "robotic",
            "instruction": "wipe the pan with the sponge",
            "object_name": "pan",
            "image": "pan.png",
        },
    ]
    listing = root / "dataset.jsonl"
    listing.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return root
