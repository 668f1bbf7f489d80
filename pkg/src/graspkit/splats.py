"""CPU forward rasterizer for 3D Gaussian splat sets.

Each splat is (center, per-axis scale, orientation quaternion, opacity,
color). Rendering projects every splat through a pinhole camera, builds its
screen-space covariance by first-order (Jacobian) projection, and alpha-
composites front-to-back with per-pixel transmittance. Output is
deterministic: splats are processed in stable depth order (ties by index),
footprints truncate at 3 sigma and at per-splat alpha below 1/255.

The splat asset file is a tensor of shape [N, 14] laid out as
(center:3, scale:3, quaternion:4 (w,x,y,z), opacity:1, rgb:3).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matching import DenseFeatureMap
from .rotations import matrix_to_quat, quat_mul, quat_to_matrix

Z_EPS = 1e-9
ALPHA_CUTOFF = 1.0 / 255.0
FOOTPRINT_SIGMA = 3.0
ASSET_COLUMNS = 14


@dataclass(frozen=True)
class Camera:
    """Pinhole intrinsics plus the image size they address."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def to_json_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }


@dataclass(frozen=True)
class GaussianSet:
    """N splats; arrays are (N,3) mu, (N,3) scale, (N,4) rot, (N,) opacity, (N,C) color."""

    mu: np.ndarray
    scale: np.ndarray
    rot: np.ndarray
    opacity: np.ndarray
    color: np.ndarray

    def __post_init__(self) -> None:
        mu = np.atleast_2d(np.asarray(self.mu, dtype=np.float64))
        scale = np.atleast_2d(np.asarray(self.scale, dtype=np.float64))
        rot = np.atleast_2d(np.asarray(self.rot, dtype=np.float64))
        opacity = np.atleast_1d(np.asarray(self.opacity, dtype=np.float64))
        color = np.atleast_2d(np.asarray(self.color, dtype=np.float64))
        n = mu.shape[0]
        if mu.shape != (n, 3) or scale.shape != (n, 3) or rot.shape != (n, 4):
            raise ValueError("mu must be (N,3), scale (N,3), rot (N,4)")
        if opacity.shape != (n,) or color.ndim != 2 or color.shape[0] != n:
            raise ValueError("opacity must be (N,), color (N,C)")
        if n:
            if not (np.isfinite(mu).all() and np.isfinite(scale).all()):
                raise ValueError("centers and scales must be finite")
            if (scale <= 0).any():
                raise ValueError("scales must be positive")
            norms = np.linalg.norm(rot, axis=1)
            if np.abs(norms - 1.0).max() > 1e-6:
                raise ValueError("rotation quaternions must be unit length")
            if ((opacity < 0) | (opacity > 1)).any():
                raise ValueError("opacity must lie in [0, 1]")
            if ((color < 0) | (color > 1)).any():
                raise ValueError("color channels must lie in [0, 1]")
        for name, arr in (("mu", mu), ("scale", scale), ("rot", rot),
                          ("opacity", opacity), ("color", color)):
            object.__setattr__(self, name, arr)

    @property
    def count(self) -> int:
        return self.mu.shape[0]

    @property
    def channels(self) -> int:
        return self.color.shape[1]

    def covariance(self, i: int) -> np.ndarray:
        """World-frame covariance R diag(scale^2) R^T of splat i (SPD)."""
        r = quat_to_matrix(self.rot[i])
        return r @ np.diag(self.scale[i] ** 2) @ r.T

    def centroid(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("centroid of an empty splat set")
        return self.mu.mean(axis=0)


def empty_gaussian_set(channels: int = 3) -> GaussianSet:
    return GaussianSet(
        mu=np.zeros((0, 3)), scale=np.zeros((0, 3)), rot=np.zeros((0, 4)),
        opacity=np.zeros(0), color=np.zeros((0, channels)),
    )


def gaussian_set_from_array(arr: np.ndarray) -> GaussianSet:
    """Decode the [N,14] asset layout."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != ASSET_COLUMNS:
        raise ValueError(f"splat asset must be [N, {ASSET_COLUMNS}], got shape {a.shape}")
    return GaussianSet(
        mu=a[:, 0:3], scale=a[:, 3:6], rot=a[:, 6:10], opacity=a[:, 10], color=a[:, 11:14]
    )


def gaussian_set_to_array(g: GaussianSet) -> np.ndarray:
    if g.channels != 3:
        raise ValueError("asset layout stores exactly 3 color channels")
    return np.concatenate(
        [g.mu, g.scale, g.rot, g.opacity[:, None], g.color], axis=1
    ).astype(np.float32)


def apply_rigid(g: GaussianSet, rotation: np.ndarray, translation) -> GaussianSet:
    """Pre-transform a splat set: mu <- R mu + t, rot <- Quat(R) (x) rot."""
    r = np.asarray(rotation, dtype=np.float64)
    t = np.asarray(translation, dtype=np.float64)
    rq = matrix_to_quat(r)
    new_rot = np.stack([quat_mul(rq, q) for q in g.rot]) if g.count else g.rot
    if g.count:
        norms = np.linalg.norm(new_rot, axis=1, keepdims=True)
        new_rot = new_rot / norms
    return GaussianSet(
        mu=g.mu @ r.T + t, scale=g.scale, rot=new_rot, opacity=g.opacity, color=g.color
    )


@dataclass(frozen=True)
class RenderOutput:
    """color H x W x C, alpha H x W in [0,1], depth H x W (0 where alpha is 0)."""

    color: np.ndarray
    alpha: np.ndarray
    depth: np.ndarray


def project_point(cam: Camera, p, rotation=None, translation=None) -> np.ndarray:
    """Pinhole projection of ``R p + t``; errors when the point is not in front."""
    q = np.asarray(p, dtype=np.float64)
    if rotation is not None:
        q = np.asarray(rotation, dtype=np.float64) @ q
    if translation is not None:
        q = q + np.asarray(translation, dtype=np.float64)
    x, y, z = q
    if z <= Z_EPS:
        raise ValueError(f"point at or behind camera plane (z={z:.3g})")
    return np.array([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy])


def render(
    g: GaussianSet,
    cam: Camera,
    rotation=None,
    translation=None,
    background=None,
) -> RenderOutput:
    """Rasterize the splat set under rigid transform [R|t] into the camera."""
    r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
    t = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)
    channels = g.channels
    bg = np.zeros(channels) if background is None else np.asarray(background, dtype=np.float64)
    if bg.shape != (channels,):
        raise ValueError(f"background must have {channels} channels")

    height, width = cam.height, cam.width
    color_acc = np.zeros((height, width, channels))
    trans = np.ones((height, width))
    weighted_z = np.zeros((height, width))

    if g.count:
        mu_cam = g.mu @ r.T + t
        # stable sort keeps splat index order on equal depths
        order = np.argsort(mu_cam[:, 2], kind="stable")
        for i in order:
            _splat(g, i, mu_cam[i], r, cam, color_acc, trans, weighted_z)

    alpha = 1.0 - trans
    color = color_acc + trans[:, :, None] * bg
    with np.errstate(invalid="ignore", divide="ignore"):
        depth = np.where(alpha > 0.0, weighted_z / np.where(alpha > 0.0, alpha, 1.0), 0.0)
    return RenderOutput(color=color, alpha=alpha, depth=depth)


def _splat(g, i, center_cam, r, cam, color_acc, trans, weighted_z) -> None:
    x, y, z = center_cam
    if z <= Z_EPS:
        return
    opacity = g.opacity[i]
    if opacity <= 0.0:
        return

    cov_cam = r @ g.covariance(i) @ r.T
    # first-order projection: Sigma2D = J Sigma J^T with J the pinhole Jacobian
    jac = np.array(
        [
            [cam.fx / z, 0.0, -cam.fx * x / (z * z)],
            [0.0, cam.fy / z, -cam.fy * y / (z * z)],
        ]
    )
    s2 = jac @ cov_cam @ jac.T
    a, b, c = s2[0, 0], s2[0, 1], s2[1, 1]
    det = a * c - b * b
    if det <= 0.0 or a <= 0.0:
        return
    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(max(mid * mid - det, 0.0))
    radius = FOOTPRINT_SIGMA * np.sqrt(lam_max)

    px = cam.fx * x / z + cam.cx
    py = cam.fy * y / z + cam.cy
    x0 = max(0, int(np.ceil(px - radius)))
    x1 = min(cam.width - 1, int(np.floor(px + radius)))
    y0 = max(0, int(np.ceil(py - radius)))
    y1 = min(cam.height - 1, int(np.floor(py + radius)))
    if x0 > x1 or y0 > y1:
        return

    dx = np.arange(x0, x1 + 1, dtype=np.float64) - px
    dy = np.arange(y0, y1 + 1, dtype=np.float64) - py
    # Mahalanobis distance via the conic (inverse 2D covariance)
    d2 = (c * dx[None, :] ** 2 - 2.0 * b * dy[:, None] * dx[None, :] + a * dy[:, None] ** 2) / det
    alpha = opacity * np.exp(-0.5 * d2)
    alpha[(d2 > FOOTPRINT_SIGMA**2) | (alpha < ALPHA_CUTOFF)] = 0.0
    if not alpha.any():
        return

    patch = (slice(y0, y1 + 1), slice(x0, x1 + 1))
    w = alpha * trans[patch]
    color_acc[patch] += w[:, :, None] * g.color[i]
    weighted_z[patch] += w * z
    trans[patch] *= 1.0 - alpha


def render_as_features(
    g: GaussianSet,
    cam: Camera,
    rotation=None,
    translation=None,
    background=None,
    include_alpha: bool = False,
) -> DenseFeatureMap:
    """Self-contained feature mode: rendered colors (optionally + alpha) as features."""
    out = render(g, cam, rotation, translation, background)
    values = out.color
    if include_alpha:
        values = np.concatenate([values, out.alpha[:, :, None]], axis=2)
    return DenseFeatureMap(values)


def write_ppm(path: str | Path, color: np.ndarray) -> None:
    """Write an H x W x 3 float image in [0,1] as binary PPM (P6, maxval 255)."""
    arr = np.asarray(color)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("PPM output requires an H x W x 3 image")
    h, w = arr.shape[:2]
    bytes_ = (np.clip(arr, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    with Path(path).open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(bytes_.tobytes(order="C"))
