"""Independent brute-force oracles and mask builders shared by the test suite."""

import itertools

import numpy as np


def ellipse_mask(a, b, pad=3, center=None, shape=None):
    """Filled ellipse with semi-axes (a, b) px; a along x, b along y."""
    if shape is None:
        w = 2 * a + 2 * pad + 1
        h = 2 * b + 2 * pad + 1
        shape = (h, w)
    h, w = shape
    if center is None:
        center = (w // 2, h // 2)
    cx, cy = center
    y, x = np.mgrid[0:h, 0:w]
    return ((x - cx) / a) ** 2 + ((y - cy) / b) ** 2 <= 1.0


def disc_mask(r, pad=3):
    return ellipse_mask(r, r, pad=pad)


def square_mask(side, pad=3):
    h = w = side + 2 * pad
    m = np.zeros((h, w), dtype=bool)
    m[pad:pad + side, pad:pad + side] = True
    return m


def random_blob_mask(rng, shape=(48, 48), n_seeds=3, steps=60):
    """Random-walk blob: a union of short random walks, possibly multi-part."""
    h, w = shape
    m = np.zeros(shape, dtype=bool)
    for _ in range(n_seeds):
        y = int(rng.integers(4, h - 4))
        x = int(rng.integers(4, w - 4))
        for _ in range(steps):
            m[y, x] = True
            y = int(np.clip(y + rng.integers(-1, 2), 0, h - 1))
            x = int(np.clip(x + rng.integers(-1, 2), 0, w - 1))
    return m


def brute_inscribed_diameter(mask):
    """Exhaustive oracle: max over foreground pixels of the distance to the
    nearest background pixel or to just outside the frame, times two."""
    padded = np.pad(np.asarray(mask, bool), 1, constant_values=False)
    fg = np.argwhere(padded).astype(float)
    bg = np.argwhere(~padded).astype(float)
    best = 0.0
    for p in fg:
        d2 = ((bg - p) ** 2).sum(axis=1)
        best = max(best, float(d2.min()))
    return 2.0 * best ** 0.5


def brute_enclosing_diameter(mask):
    """Exhaustive pair/triple oracle for the minimum enclosing circle."""
    pts = np.argwhere(np.asarray(mask, bool))[:, ::-1].astype(float)  # (x, y)
    n = len(pts)
    if n == 0:
        raise ValueError("empty mask")
    if n == 1:
        return 0.0
    best = np.inf
    # circles with two points on a diameter
    for i, j in itertools.combinations(range(n), 2):
        c = (pts[i] + pts[j]) / 2.0
        r = np.linalg.norm(pts - c, axis=1).max()
        if np.linalg.norm(pts[i] - c) >= r - 1e-9:
            best = min(best, float(np.linalg.norm(pts - c, axis=1).max()))
    # circumcircles of all triples that contain every point
    for i, j, k in itertools.combinations(range(n), 3):
        c = _circumcenter(pts[i], pts[j], pts[k])
        if c is None:
            continue
        d = np.linalg.norm(pts - c, axis=1)
        r = max(np.linalg.norm(pts[i] - c), np.linalg.norm(pts[j] - c),
                np.linalg.norm(pts[k] - c))
        if d.max() <= r + 1e-9:
            best = min(best, float(r))
    return 2.0 * best


def _circumcenter(a, b, c):
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if d == 0.0:
        return None
    ux = ((a @ a) * (b[1] - c[1]) + (b @ b) * (c[1] - a[1]) + (c @ c) * (a[1] - b[1])) / d
    uy = ((a @ a) * (c[0] - b[0]) + (b @ b) * (a[0] - c[0]) + (c @ c) * (b[0] - a[0])) / d
    return np.array([ux, uy])


def flood_fill_components(mask):
    """Pure-python 4-connected labeling, scan order; returns list of pixel sets."""
    mask = np.asarray(mask, bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    comps = []
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not seen[y, x]:
                stack = [(y, x)]
                seen[y, x] = True
                comp = []
                while stack:
                    cy, cx = stack.pop()
                    comp.append((cy, cx))
                    for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            stack.append((ny, nx))
                comps.append(comp)
    return comps
