"""Homography estimation and image warping onto the event-camera frame.

The estimator is a direct linear transform with isotropic (Hartley-style)
point normalization, solved through the SVD null space of the 2n x 9 design
matrix. Warping samples the inverse map with bilinear interpolation.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateConfiguration, SingularHomography, TooFewPoints


@dataclass
class Homography:
    h: np.ndarray  # 3x3, scaled so h[2,2] == 1 whenever that entry is nonzero

    def __post_init__(self):
        self.h = np.asarray(self.h, np.float64).reshape(3, 3)
        if abs(self.h[2, 2]) > 1e-12:
            self.h = self.h / self.h[2, 2]
        if abs(np.linalg.det(self.h)) < 1e-12:
            raise SingularHomography("homography matrix is singular")

    def inverse(self):
        return Homography(np.linalg.inv(self.h))

    def apply(self, points):
        """Map (n, 2) points through the homography."""
        pts = np.asarray(points, np.float64)
        ones = np.ones((pts.shape[0], 1))
        proj = np.hstack([pts, ones]) @ self.h.T
        return proj[:, :2] / proj[:, 2:3]


@dataclass
class ImageBuffer:
    """Row-major 8-bit image, shape (height, width, channels)."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, np.uint8)
        expected = (self.height, self.width, self.channels)
        if self.pixels.shape != expected:
            self.pixels = self.pixels.reshape(expected)

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.channels == other.channels
            and np.array_equal(self.pixels, other.pixels)
        )


def _normalize(pts):
    """Similarity transform taking the set to centroid 0, mean radius sqrt(2)."""
    centroid = pts.mean(axis=0)
    dist = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    if dist < 1e-12:
        raise DegenerateConfiguration("points are coincident")
    s = np.sqrt(2.0) / dist
    T = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    normed = (pts - centroid) * s
    return normed, T


def _collinear_triple_exists(pts):
    n = pts.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = pts[i], pts[j], pts[k]
                area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                if abs(area) < 1e-9:
                    return True
    return False


def estimate_homography(src_points, dst_points):
    """DLT estimate of H mapping src -> dst from >= 4 correspondences."""
    src = np.asarray(src_points, np.float64)
    dst = np.asarray(dst_points, np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise TooFewPoints("expected matching (n, 2) point arrays")
    n = src.shape[0]
    if n < 4:
        raise TooFewPoints(f"need >= 4 correspondences, got {n}")
    if n <= 12 and _collinear_triple_exists(src):
        raise DegenerateConfiguration("three source points are collinear")

    src_n, T_src = _normalize(src)
    dst_n, T_dst = _normalize(dst)

    A = np.zeros((2 * n, 9))
    x, y = src_n[:, 0], src_n[:, 1]
    u, v = dst_n[:, 0], dst_n[:, 1]
    A[0::2, 0] = -x
    A[0::2, 1] = -y
    A[0::2, 2] = -1.0
    A[0::2, 6] = u * x
    A[0::2, 7] = u * y
    A[0::2, 8] = u
    A[1::2, 3] = -x
    A[1::2, 4] = -y
    A[1::2, 5] = -1.0
    A[1::2, 6] = v * x
    A[1::2, 7] = v * y
    A[1::2, 8] = v

    _, sv, vt = np.linalg.svd(A)
    if sv[-2] < 1e-10:
        raise DegenerateConfiguration("design matrix has a rank-deficient null space")
    h_n = vt[-1].reshape(3, 3)
    h = np.linalg.inv(T_dst) @ h_n @ T_src
    if abs(np.linalg.det(h)) < 1e-12:
        raise DegenerateConfiguration("estimated homography is singular")
    return Homography(h)


def _bilinear_sample(pixels, xs, ys):
    """Sample float coordinates with bilinear interpolation, zero outside."""
    h, w = pixels.shape[:2]
    inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    xc = np.clip(xs, 0, w - 1)
    yc = np.clip(ys, 0, h - 1)
    x0 = np.floor(xc).astype(np.int64)
    y0 = np.floor(yc).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xc - x0)[..., None]
    fy = (yc - y0)[..., None]
    p = pixels.astype(np.float64)
    top = p[y0, x0] * (1 - fx) + p[y0, x1] * fx
    bot = p[y1, x0] * (1 - fx) + p[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    out[~inside] = 0.0
    return out


def warp_image(img, homography, out_width, out_height):
    """Resample img so that output pixel (u, v) = img at H^-1 (u, v, 1)."""
    hinv = homography.inverse().h
    us, vs = np.meshgrid(np.arange(out_width), np.arange(out_height))
    denom = hinv[2, 0] * us + hinv[2, 1] * vs + hinv[2, 2]
    xs = (hinv[0, 0] * us + hinv[0, 1] * vs + hinv[0, 2]) / denom
    ys = (hinv[1, 0] * us + hinv[1, 1] * vs + hinv[1, 2]) / denom
    sampled = _bilinear_sample(img.pixels, xs, ys)
    out = np.clip(np.rint(sampled), 0, 255).astype(np.uint8)
    return ImageBuffer(
        width=out_width, height=out_height, channels=img.channels, pixels=out
    )


def resize_image(img, out_width, out_height):
    """Area-averaging when shrinking by integer factors, bilinear otherwise."""
    if out_width == img.width and out_height == img.height:
        return ImageBuffer(
            width=img.width,
            height=img.height,
            channels=img.channels,
            pixels=img.pixels.copy(),
        )
    if (
        out_width <= img.width
        and out_height <= img.height
        and img.width % out_width == 0
        and img.height % out_height == 0
    ):
        fy, fx = img.height // out_height, img.width // out_width
        blocks = img.pixels.astype(np.float64).reshape(
            out_height, fy, out_width, fx, img.channels
        )
        means = blocks.mean(axis=(1, 3))
        out = np.clip(np.rint(means), 0, 255).astype(np.uint8)
    else:
        # pixel-center aligned bilinear resampling
        xs = (np.arange(out_width) + 0.5) * img.width / out_width - 0.5
        ys = (np.arange(out_height) + 0.5) * img.height / out_height - 0.5
        gx, gy = np.meshgrid(np.clip(xs, 0, img.width - 1), np.clip(ys, 0, img.height - 1))
        out = np.clip(np.rint(_bilinear_sample(img.pixels, gx, gy)), 0, 255).astype(
            np.uint8
        )
    return ImageBuffer(
        width=out_width, height=out_height, channels=img.channels, pixels=out
    )


def homography_to_json(h, path):
    Path(path).write_text(
        json.dumps({"h": [[float(v) for v in row] for row in h.h]}, indent=2) + "\n"
    )


def homography_from_json(path):
    data = json.loads(Path(path).read_text())
    return Homography(np.asarray(data["h"], np.float64))


def write_ppm(img, path):
    """Write a binary PPM (P6) or PGM (P5); codec-free image payloads."""
    magic = b"P6" if img.channels == 3 else b"P5"
    header = magic + f"\n{img.width} {img.height}\n255\n".encode()
    Path(path).write_bytes(header + img.pixels.tobytes())


def read_ppm(path):
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    # header = magic, width, height, maxval separated by whitespace/comments
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    magic, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P6", b"P5") or maxval != 255:
        raise ValueError(f"unsupported netpbm header {fields!r}")
    channels = 3 if magic == b"P6" else 1
    data = np.frombuffer(raw[pos : pos + width * height * channels], np.uint8)
    if data.size != width * height * channels:
        raise ValueError("truncated netpbm payload")
    return ImageBuffer(
        width=width,
        height=height,
        channels=channels,
        pixels=data.reshape(height, width, channels).copy(),
    )
