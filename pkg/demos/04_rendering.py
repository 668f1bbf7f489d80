"""CPU Gaussian-splat rendering: rasterize a toy scene, then rotate it.

Writes PPM images next to this script under demo_output/.
"""

from pathlib import Path

import numpy as np

from graspkit import Camera, apply_rigid, axis_angle_matrix, make_blob_scene, render, write_ppm

out_dir = Path(__file__).parent / "demo_output"
out_dir.mkdir(exist_ok=True)

cam = Camera(fx=120.0, fy=120.0, cx=64.0, cy=48.0, width=128, height=96)
scene = make_blob_scene(seed=42, count=6)

out = render(scene, cam, background=np.array([0.05, 0.05, 0.08]))
print(f"color {out.color.shape}, alpha range [{out.alpha.min():.3f}, {out.alpha.max():.3f}]")
write_ppm(out_dir / "scene.ppm", out.color)
print(f"wrote {out_dir / 'scene.ppm'}")

# Rotating the scene geometry and rotating inside render() agree.
rot = axis_angle_matrix(np.array([0.0, 1.0, 0.0]), 25.0)
live = render(scene, cam, rotation=rot, background=np.array([0.05, 0.05, 0.08]))
baked = render(apply_rigid(scene, rot, np.zeros(3)), cam, background=np.array([0.05, 0.05, 0.08]))
print(f"max |live - baked|: {np.max(np.abs(live.color - baked.color)):.2e}")
write_ppm(out_dir / "scene_rotated.ppm", live.color)
print(f"wrote {out_dir / 'scene_rotated.ppm'}")
