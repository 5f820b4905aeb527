"""Melt-pool geometry from grayscale camera frames.

A frame is cropped to the pool region, binarized at the mean intensity of
the crop, and reduced to its largest connected blob.  Two circles summarize
the blob: the largest circle inscribed in it gives the melt-pool width
(MPW) and the smallest circle enclosing it gives the melt-pool length
(MPL).  Both operate on pixel centers; results are meaningful to about one
pixel, so callers should expect +-1 px and pools only a few pixels across
can report MPW slightly above MPL.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyPoolError

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

__all__ = [
    "GrayImage",
    "CropRect",
    "MeltPoolGeometry",
    "binarize_mean",
    "largest_connected_component",
    "largest_inscribed_circle",
    "smallest_enclosing_circle",
    "extract_geometry",
    "read_pgm",
    "write_pgm",
]


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale frame, row-major."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width), uint8

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1x1")
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {px.shape} does not match "
                f"{self.height}x{self.width}")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class CropRect:
    """Axis-aligned crop window in pixel coordinates."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError("crop must be at least 1x1")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError("crop origin must be non-negative")

    def validate_inside(self, img: GrayImage) -> None:
        if self.x0 + self.w > img.width or self.y0 + self.h > img.height:
            raise ValueError(
                f"crop {self} exceeds image {img.width}x{img.height}")


@dataclass(frozen=True)
class MeltPoolGeometry:
    """Extracted pool geometry in millimeters; invalid when no pool is seen."""

    mpw: float
    mpl: float
    area_px: int
    valid: bool


def binarize_mean(img: GrayImage, crop: CropRect) -> np.ndarray:
    """Threshold the cropped region at its mean intensity.

    A pixel is foreground iff it is strictly brighter than the mean, so a
    uniform crop yields an empty mask rather than a full one.
    """
    crop.validate_inside(img)
    region = img.pixels[crop.y0:crop.y0 + crop.h, crop.x0:crop.x0 + crop.w]
    return region > float(region.mean())


def largest_connected_component(mask: np.ndarray) -> np.ndarray:
    """Keep only the largest 4-connected foreground component.

    Ties are broken by the component whose first pixel appears earliest in
    row-major scan order.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        raise ValueError("mask must have non-empty dimensions")
    labels, nlab = ndimage.label(mask, structure=FOUR_CONNECTED)
    if nlab == 0:
        raise EmptyPoolError("mask has no foreground pixels")
    sizes = np.bincount(labels.ravel())[1:]
    best = sizes.max()
    tied = np.flatnonzero(sizes == best) + 1
    if tied.size == 1:
        keep = int(tied[0])
    else:
        flat = labels.ravel()
        keep = int(min(tied, key=lambda lab: np.flatnonzero(flat == lab)[0]))
    return labels == keep


def largest_inscribed_circle(mask: np.ndarray) -> float:
    """Diameter of the largest circle inscribed in the foreground.

    Computed from the Euclidean distance transform with the image border
    treated as background: twice the largest distance from a foreground
    pixel to the nearest background pixel (or just outside the frame).
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyPoolError("mask has no foreground pixels")
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    dist = ndimage.distance_transform_edt(padded)
    return 2.0 * float(dist.max())


def smallest_enclosing_circle(mask: np.ndarray) -> float:
    """Diameter of the exact minimum circle enclosing all foreground pixel centers."""
    mask = np.asarray(mask, dtype=bool)
    pts = np.argwhere(mask)
    if pts.shape[0] == 0:
        raise EmptyPoolError("mask has no foreground pixels")
    points = [(float(x), float(y)) for y, x in pts]
    _, _, r = _min_enclosing_circle(points)
    return 2.0 * r


def extract_geometry(img: GrayImage, crop: CropRect,
                     mm_per_px: float) -> MeltPoolGeometry:
    """Full per-frame pipeline: binarize, isolate the pool, fit both circles."""
    if not (mm_per_px > 0):
        raise ValueError("mm_per_px must be positive")
    mask = binarize_mean(img, crop)
    try:
        pool = largest_connected_component(mask)
        d_in = largest_inscribed_circle(pool)
        d_enc = smallest_enclosing_circle(pool)
    except EmptyPoolError:
        return MeltPoolGeometry(mpw=0.0, mpl=0.0, area_px=0, valid=False)
    return MeltPoolGeometry(mpw=d_in * mm_per_px, mpl=d_enc * mm_per_px,
                            area_px=int(pool.sum()), valid=True)


# --- exact minimum enclosing circle -------------------------------------
#
# Progressive construction (expected linear time): grow the circle point by
# point; whenever a point falls outside, rebuild with it pinned to the
# boundary.  Shuffling is seeded so runs are reproducible.

_EPS = 1e-10


def _min_enclosing_circle(points):
    pts = list(points)
    random.Random(1).shuffle(pts)
    c = None
    for i, p in enumerate(pts):
        if c is None or not _contains(c, p):
            c = _circle_with_one(pts[: i + 1], p)
    return c


def _circle_with_one(points, p):
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _contains(c, q):
            if c[2] == 0.0:
                c = _circle_from_two(p, q)
            else:
                c = _circle_with_two(points[: i + 1], p, q)
    return c


def _circle_with_two(points, p, q):
    circ = _circle_from_two(p, q)
    left = None
    right = None
    px, py = p
    qx, qy = q
    for r in points:
        if _contains(circ, r):
            continue
        cross = (qx - px) * (r[1] - py) - (qy - py) * (r[0] - px)
        c = _circumcircle(p, q, r)
        if c is None:
            continue
        ccross = (qx - px) * (c[1] - py) - (qy - py) * (c[0] - px)
        if cross > 0.0 and (left is None or ccross > (qx - px) * (left[1] - py) - (qy - py) * (left[0] - px)):
            left = c
        elif cross < 0.0 and (right is None or ccross < (qx - px) * (right[1] - py) - (qy - py) * (right[0] - px)):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _circle_from_two(p, q):
    cx = (p[0] + q[0]) / 2.0
    cy = (p[1] + q[1]) / 2.0
    r = max(_dist(p, (cx, cy)), _dist(q, (cx, cy)))
    return (cx, cy, r)


def _circumcircle(a, b, c):
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    ux = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
               + (cx * cx + cy * cy) * (ay - by)) / d
    uy = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
               + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(_dist(a, (ux, uy)), _dist(b, (ux, uy)), _dist(c, (ux, uy)))
    return (ux, uy, r)


def _dist(p, q):
    return ((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2) ** 0.5


def _contains(c, p):
    return _dist((c[0], c[1]), p) <= c[2] * (1.0 + _EPS) + _EPS


# --- PGM interchange -----------------------------------------------------

def read_pgm(path) -> GrayImage:
    """Read a binary 8-bit PGM (magic P5, maxval <= 255)."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise ValueError(f"{path}: truncated PGM header")
        ch = data[i:i + 1]
        if ch == b"#":
            i = data.index(b"\n", i) + 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if not (0 < maxval <= 255):
        raise ValueError(f"{path}: maxval {maxval} not supported")
    raw = data[i + 1:i + 1 + width * height]
    if len(raw) != width * height:
        raise ValueError(f"{path}: pixel data truncated")
    px = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return GrayImage(width=width, height=height, pixels=px)


def write_pgm(path, img: GrayImage) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(img.pixels.tobytes())
