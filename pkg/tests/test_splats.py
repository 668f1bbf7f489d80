"""CPU splat rasterizer: projection, compositing, and file output."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspkit import (
    Camera,
    GaussianSet,
    axis_angle_matrix,
    gaussian_set_from_array,
    gaussian_set_to_array,
    make_blob_scene,
    project_point,
    render,
    render_as_features,
    write_ppm,
)

from .oracles import render_oracle


def tiny_camera(width=16, height=12, f=20.0) -> Camera:
    return Camera(fx=f, fy=f, cx=width / 2, cy=height / 2, width=width, height=height)


def single_splat(mu, scale=0.05, opacity=0.9, color=(1.0, 0.5, 0.25)) -> GaussianSet:
    return GaussianSet(
        mu=np.array([mu], dtype=np.float64),
        scale=np.full((1, 3), scale),
        rot=np.array([[1.0, 0.0, 0.0, 0.0]]),
        opacity=np.array([opacity]),
        color=np.array([color]),
    )


# ---------------------------------------------------------------------------
# Camera and projection
# ---------------------------------------------------------------------------


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(fx=0.0, fy=1.0, cx=0.0, cy=0.0, width=4, height=4)
    with pytest.raises(ValueError):
        Camera(fx=1.0, fy=1.0, cx=10.0, cy=0.0, width=4, height=4)
    with pytest.raises(ValueError):
        Camera(fx=1.0, fy=1.0, cx=0.0, cy=0.0, width=0, height=4)


def test_project_point_formula():
    cam = Camera(fx=100.0, fy=80.0, cx=32.0, cy=24.0, width=64, height=48)
    x, y = project_point(cam, np.array([0.1, -0.05, 2.0]))
    assert x == pytest.approx(100.0 * 0.1 / 2.0 + 32.0, abs=1e-12)
    assert y == pytest.approx(80.0 * -0.05 / 2.0 + 24.0, abs=1e-12)


def test_project_point_behind_camera_rejected():
    cam = tiny_camera()
    with pytest.raises(ValueError, match="behind"):
        project_point(cam, np.array([0.0, 0.0, 0.0]))
    with pytest.raises(ValueError, match="behind"):
        project_point(cam, np.array([0.0, 0.0, -1.0]))


# ---------------------------------------------------------------------------
# Rasterization against the scalar oracle
# ---------------------------------------------------------------------------


@given(seed=st.integers(0, 2**31 - 1), count=st.integers(1, 4))
@settings(max_examples=12, deadline=None)
def test_render_matches_scalar_oracle(seed, count):
    cam = tiny_camera()
    scene = make_blob_scene(seed=seed, count=count, spread=0.25)
    bg = np.array([0.2, 0.1, 0.4])
    out = render(scene, cam, background=bg)
    want_color, want_alpha, want_depth = render_oracle(scene, cam, background=bg)
    np.testing.assert_allclose(out.color, want_color, atol=1e-12)
    np.testing.assert_allclose(out.alpha, want_alpha, atol=1e-12)
    np.testing.assert_allclose(out.depth, want_depth, atol=1e-10)


def test_render_matches_oracle_under_rigid_transform():
    cam = tiny_camera()
    scene = make_blob_scene(seed=5, count=3, spread=0.2)
    rot = axis_angle_matrix([0.0, 1.0, 0.0], 17.0)
    t = np.array([0.01, -0.02, 0.05])
    out = render(scene, cam, rot, t)
    want_color, want_alpha, want_depth = render_oracle(scene, cam, rot, t)
    np.testing.assert_allclose(out.color, want_color, atol=1e-12)
    np.testing.assert_allclose(out.alpha, want_alpha, atol=1e-12)
    np.testing.assert_allclose(out.depth, want_depth, atol=1e-10)


def test_center_pixel_of_centered_splat():
    # splat centre projects exactly onto pixel (cx, cy): alpha there = opacity
    cam = tiny_camera(width=17, height=13, f=25.0)
    cam = Camera(fx=25.0, fy=25.0, cx=8.0, cy=6.0, width=17, height=13)
    g = single_splat([0.0, 0.0, 1.0], opacity=0.8)
    out = render(g, cam)
    assert out.alpha[6, 8] == pytest.approx(0.8, abs=1e-12)
    np.testing.assert_allclose(out.color[6, 8], 0.8 * np.array([1.0, 0.5, 0.25]),
                               atol=1e-12)
    assert out.depth[6, 8] == pytest.approx(1.0, abs=1e-12)


@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=100, deadline=None)
def test_alpha_stays_in_unit_interval(seed):
    cam = tiny_camera(width=12, height=9)
    count = 1 + seed % 6
    scene = make_blob_scene(seed=seed, count=count, spread=0.3)
    out = render(scene, cam)
    assert (out.alpha >= 0.0).all() and (out.alpha <= 1.0).all()
    assert (out.depth >= 0.0).all()


def test_empty_scene_returns_background():
    from graspkit.splats import empty_gaussian_set

    cam = tiny_camera()
    bg = np.array([0.3, 0.6, 0.9])
    out = render(empty_gaussian_set(), cam, background=bg)
    np.testing.assert_array_equal(out.alpha, 0.0)
    np.testing.assert_array_equal(out.depth, 0.0)
    np.testing.assert_allclose(out.color, np.broadcast_to(bg, out.color.shape))


def test_rotation_consistency():
    # baking the rotation into the splats equals passing it to the renderer
    cam = tiny_camera(width=32, height=24, f=40.0)
    scene = make_blob_scene(seed=9, count=5, spread=0.15)
    rot = axis_angle_matrix([1.0, 0.5, 0.2], 23.0)

    from graspkit.splats import apply_rigid

    baked = apply_rigid(scene, rot, np.zeros(3))
    out_passed = render(scene, cam, rotation=rot)
    out_baked = render(baked, cam)
    assert np.abs(out_passed.color - out_baked.color).max() <= 1e-5
    assert np.abs(out_passed.alpha - out_baked.alpha).max() <= 1e-5


def test_depth_sort_ties_keep_splat_order():
    # two coincident splats: compositing order must follow array order
    g = GaussianSet(
        mu=np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]),
        scale=np.full((2, 3), 0.05),
        rot=np.array([[1.0, 0.0, 0.0, 0.0]] * 2),
        opacity=np.array([0.6, 0.6]),
        color=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
    )
    cam = Camera(fx=25.0, fy=25.0, cx=8.0, cy=6.0, width=17, height=13)
    out = render(g, cam)
    # front (index 0, red) contributes 0.6, second sees transmittance 0.4
    np.testing.assert_allclose(out.color[6, 8], [0.6, 0.4 * 0.6, 0.0], atol=1e-12)


def test_occlusion_front_to_back():
    near = single_splat([0.0, 0.0, 0.5], opacity=0.95, color=(1.0, 0.0, 0.0))
    far = single_splat([0.0, 0.0, 2.0], opacity=0.95, color=(0.0, 1.0, 0.0))
    both = GaussianSet(
        mu=np.vstack([far.mu, near.mu]),
        scale=np.vstack([far.scale, near.scale]),
        rot=np.vstack([far.rot, near.rot]),
        opacity=np.concatenate([far.opacity, near.opacity]),
        color=np.vstack([far.color, near.color]),
    )
    cam = Camera(fx=25.0, fy=25.0, cx=8.0, cy=6.0, width=17, height=13)
    out = render(both, cam)
    # the near red splat dominates the centre pixel despite array order
    assert out.color[6, 8, 0] > out.color[6, 8, 1]
    assert 0.5 < out.depth[6, 8] < 2.0


def test_gaussian_set_array_roundtrip():
    scene = make_blob_scene(seed=21, count=4)
    arr = gaussian_set_to_array(scene)
    assert arr.shape == (4, 14)
    back = gaussian_set_from_array(arr)
    np.testing.assert_allclose(back.mu, scene.mu, atol=1e-6)
    np.testing.assert_allclose(back.opacity, scene.opacity, atol=1e-6)


def test_gaussian_set_validation():
    with pytest.raises(ValueError):
        GaussianSet(
            mu=np.zeros((1, 3)), scale=np.array([[0.1, -0.1, 0.1]]),
            rot=np.array([[1.0, 0, 0, 0]]), opacity=np.array([0.5]),
            color=np.zeros((1, 3)),
        )
    with pytest.raises(ValueError):
        GaussianSet(
            mu=np.zeros((1, 3)), scale=np.full((1, 3), 0.1),
            rot=np.array([[2.0, 0, 0, 0]]), opacity=np.array([0.5]),
            color=np.zeros((1, 3)),
        )
    with pytest.raises(ValueError):
        GaussianSet(
            mu=np.zeros((1, 3)), scale=np.full((1, 3), 0.1),
            rot=np.array([[1.0, 0, 0, 0]]), opacity=np.array([1.5]),
            color=np.zeros((1, 3)),
        )


def test_render_as_features_channels():
    cam = tiny_camera()
    scene = make_blob_scene(seed=2, count=2)
    plain = render_as_features(scene, cam)
    with_alpha = render_as_features(scene, cam, include_alpha=True)
    assert plain.channels == 3
    assert with_alpha.channels == 4
    np.testing.assert_array_equal(with_alpha.values[:, :, :3], plain.values)


def test_write_ppm_layout(tmp_path):
    img = np.zeros((2, 3, 3))
    img[0, 0] = [1.0, 0.0, 0.5]
    path = tmp_path / "out.ppm"
    write_ppm(path, img)
    raw = path.read_bytes()
    assert raw.startswith(b"P6\n3 2\n255\n")
    pixels = raw[len(b"P6\n3 2\n255\n"):]
    assert len(pixels) == 2 * 3 * 3
    assert pixels[0] == 255 and pixels[1] == 0 and pixels[2] == 128


def test_write_ppm_requires_rgb(tmp_path):
    with pytest.raises(ValueError):
        write_ppm(tmp_path / "bad.ppm", np.zeros((2, 2)))
