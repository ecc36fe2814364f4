import numpy as np
import pytest

from evpipe.geometry import (
    Homography,
    ImageBuffer,
    estimate_homography,
    homography_from_json,
    homography_to_json,
    read_ppm,
    resize_image,
    warp_image,
    write_ppm,
)
from evpipe.errors import DegenerateConfiguration, SingularHomography, TooFewPoints


def normalized(h):
    return h / h[2, 2]


def random_well_conditioned_h(rng):
    """Rotation + scale + translation + mild projective terms."""
    angle = rng.uniform(-0.25, 0.25)
    s = rng.uniform(0.8, 1.25)
    tx, ty = rng.uniform(-100, 100, 2)
    shear = rng.uniform(-0.1, 0.1)
    h = np.array(
        [
            [s * np.cos(angle), -s * np.sin(angle) + shear, tx],
            [s * np.sin(angle), s * np.cos(angle), ty],
            [rng.uniform(-1e-4, 1e-4), rng.uniform(-1e-4, 1e-4), 1.0],
        ]
    )
    return h


def apply_h(h, pts):
    ones = np.ones((pts.shape[0], 1))
    proj = np.hstack([pts, ones]) @ h.T
    return proj[:, :2] / proj[:, 2:3]


# --- estimate_homography ------------------------------------------------------

def test_identity_from_equal_points():
    src = np.array([[0.0, 0.0], [100.0, 0.0], [100.0, 80.0], [0.0, 80.0]])
    h = estimate_homography(src, src)
    assert np.abs(normalized(h.h) - np.eye(3)).max() < 1e-12


def test_pure_translation():
    src = np.array([[0.0, 0.0], [100.0, 0.0], [100.0, 80.0], [0.0, 80.0]])
    dst = src + np.array([10.0, -5.0])
    h = estimate_homography(src, dst)
    expected = np.array([[1, 0, 10], [0, 1, -5], [0, 0, 1]], float)
    assert np.abs(normalized(h.h) - expected).max() < 1e-10


def test_recovers_random_homography(rng):
    src = rng.uniform(0, [1280, 720], (20, 2))
    true_h = random_well_conditioned_h(rng)
    dst = apply_h(true_h, src)
    est = estimate_homography(src, dst)
    assert np.abs(normalized(est.h) - normalized(true_h)).max() < 1e-6


def test_reprojection_error_noiseless(rng):
    src = rng.uniform(0, [640, 480], (12, 2))
    true_h = random_well_conditioned_h(rng)
    dst = apply_h(true_h, src)
    est = estimate_homography(src, dst)
    err = np.abs(est.apply(src) - dst).max()
    assert err < 1e-6


def test_similarity_equivariance(rng):
    src = rng.uniform(0, [500, 500], (15, 2))
    true_h = random_well_conditioned_h(rng)
    dst = apply_h(true_h, src)
    angle, s, t = 0.3, 1.4, np.array([25.0, -12.0])
    sim = np.array(
        [
            [s * np.cos(angle), -s * np.sin(angle), t[0]],
            [s * np.sin(angle), s * np.cos(angle), t[1]],
            [0, 0, 1.0],
        ]
    )
    h1 = estimate_homography(src, apply_h(sim, dst)).h
    h2 = sim @ estimate_homography(src, dst).h
    assert np.abs(normalized(h1) - normalized(h2)).max() < 1e-8


def test_too_few_and_collinear():
    pts3 = np.array([[0.0, 0], [1, 0], [0, 1]])
    with pytest.raises(TooFewPoints):
        estimate_homography(pts3, pts3)
    collinear = np.array([[0.0, 0], [1, 1], [2, 2], [5, 0]])
    with pytest.raises(DegenerateConfiguration):
        estimate_homography(collinear, collinear)


def test_homography_json_roundtrip(tmp_path, rng):
    h = Homography(random_well_conditioned_h(rng))
    path = tmp_path / "h.json"
    homography_to_json(h, path)
    again = homography_from_json(path)
    assert np.abs(again.h - h.h).max() < 1e-15


# --- warp_image -------------------------------------------------------------------

def gradient_image(width=64, height=48, channels=1):
    x = np.linspace(30, 220, width)
    y = np.linspace(10, 200, height)
    img = (y[:, None] * 0.5 + x[None, :] * 0.5).astype(np.uint8)
    return ImageBuffer(
        width=width,
        height=height,
        channels=channels,
        pixels=np.repeat(img[:, :, None], channels, axis=2),
    )


def test_warp_identity_exact():
    img = gradient_image(channels=3)
    out = warp_image(img, Homography(np.eye(3)), img.width, img.height)
    assert out == img


def test_warp_integer_translation():
    img = gradient_image()
    h = Homography(np.array([[1, 0, 5], [0, 1, 3], [0, 0, 1]], float))
    out = warp_image(img, h, img.width, img.height)
    np.testing.assert_array_equal(out.pixels[3:, 5:], img.pixels[:-3, :-5])
    assert (out.pixels[:3] == 0).all()
    assert (out.pixels[:, :5] == 0).all()


def test_warp_inverse_roundtrip_smooth():
    img = gradient_image(96, 72)
    h = Homography(
        np.array([[1.02, 0.03, 4.0], [-0.02, 0.99, -3.0], [1e-5, -1e-5, 1.0]])
    )
    fwd = warp_image(img, h, img.width, img.height)
    back = warp_image(fwd, h.inverse(), img.width, img.height)
    inner = (slice(8, -8), slice(8, -8))
    err = np.abs(
        back.pixels[inner].astype(float) - img.pixels[inner].astype(float)
    ).mean()
    assert err < 1.0


def test_warp_singular_rejected():
    with pytest.raises(SingularHomography):
        Homography(np.array([[1, 0, 0], [2, 0, 0], [0, 0, 1.0]]))


# --- resize_image ------------------------------------------------------------------

def test_resize_identity():
    img = gradient_image()
    out = resize_image(img, img.width, img.height)
    assert out == img


def test_resize_constant_block():
    img = ImageBuffer(width=4, height=4, channels=1, pixels=np.full((4, 4, 1), 77, np.uint8))
    out = resize_image(img, 1, 1)
    assert out.pixels[0, 0, 0] == 77


def test_resize_block_mean_oracle(rng):
    pixels = rng.integers(0, 256, (720, 1280, 3)).astype(np.uint8)
    img = ImageBuffer(width=1280, height=720, channels=3, pixels=pixels)
    out = resize_image(img, 320, 180)
    blocks = pixels.astype(np.float64).reshape(180, 4, 320, 4, 3).mean(axis=(1, 3))
    assert np.abs(out.pixels.astype(np.float64) - blocks).max() <= 1.0


def test_resize_enlarge_bilinear_smoke():
    img = gradient_image(8, 8)
    out = resize_image(img, 16, 16)
    assert out.width == 16 and out.height == 16
    # enlargement of a monotonic ramp stays monotonic along rows
    rows = out.pixels[8, :, 0].astype(int)
    assert (np.diff(rows) >= 0).all()


# --- netpbm io -------------------------------------------------------------------

def test_ppm_roundtrip(tmp_path, rng):
    pixels = rng.integers(0, 256, (20, 30, 3)).astype(np.uint8)
    img = ImageBuffer(width=30, height=20, channels=3, pixels=pixels)
    path = tmp_path / "img.ppm"
    write_ppm(img, path)
    assert read_ppm(path) == img


def test_pgm_roundtrip(tmp_path, rng):
    pixels = rng.integers(0, 256, (10, 12, 1)).astype(np.uint8)
    img = ImageBuffer(width=12, height=10, channels=1, pixels=pixels)
    path = tmp_path / "img.pgm"
    write_ppm(img, path)
    assert read_ppm(path) == img
