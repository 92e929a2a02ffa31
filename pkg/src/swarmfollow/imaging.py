"""Raster primitives of the color-tracking pipeline.

Images are numpy uint8 arrays: (H, W, 3) for RGB/HSV, (H, W) for single
channel. Binary occupancy maps are (H, W) bool arrays. HSV hue is stored on
the half-degree [0, 180) scale, saturation and value on [0, 255].
All rounding is half away from zero.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy import ndimage

from .geometry import CameraIntrinsics


def check_image(img, channels: int | None = None) -> np.ndarray:
    """Validate an 8-bit image array; channels=None accepts 1 or 3."""
    if not isinstance(img, np.ndarray) or img.dtype != np.uint8:
        raise ValueError("image must be a uint8 numpy array")
    if img.ndim == 2:
        c = 1
    elif img.ndim == 3 and img.shape[2] in (1, 3):
        c = img.shape[2]
    else:
        raise ValueError(f"unsupported image shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if channels is not None and c != channels:
        raise ValueError(f"expected {channels}-channel image, got {c}")
    return img


# -- blur -------------------------------------------------------------------

@numba.njit(cache=True)
def _blur_kernel(a):
    h, w, c = a.shape
    tmp = np.empty((h, w, c), np.int32)
    out = np.empty((h, w, c), np.uint8)
    for y in range(h):
        for x in range(w):
            x0 = max(x - 2, 0)
            x1 = max(x - 1, 0)
            x3 = min(x + 1, w - 1)
            x4 = min(x + 2, w - 1)
            for k in range(c):
                tmp[y, x, k] = (np.int32(a[y, x0, k]) + 4 * np.int32(a[y, x1, k])
                                + 6 * np.int32(a[y, x, k]) + 4 * np.int32(a[y, x3, k])
                                + np.int32(a[y, x4, k]))
    for y in range(h):
        y0 = max(y - 2, 0)
        y1 = max(y - 1, 0)
        y3 = min(y + 1, h - 1)
        y4 = min(y + 2, h - 1)
        for x in range(w):
            for k in range(c):
                s = (tmp[y0, x, k] + 4 * tmp[y1, x, k] + 6 * tmp[y, x, k]
                     + 4 * tmp[y3, x, k] + tmp[y4, x, k])
                out[y, x, k] = (s + 128) >> 8
    return out


def gaussian_blur_5x5(img: np.ndarray) -> np.ndarray:
    """5x5 binomial blur, (1,4,6,4,1) separable, edge-replicated borders."""
    check_image(img)
    a = img if img.ndim == 3 else img[:, :, None]
    out = _blur_kernel(np.ascontiguousarray(a))
    return out.reshape(img.shape)


# -- color ------------------------------------------------------------------

@numba.njit(cache=True)
def _hsv_pixel(r, g, b):
    mx = max(r, g, b)
    mn = min(r, g, b)
    d = mx - mn
    s = 0 if mx == 0 else (510 * d + mx) // (2 * mx)
    if d == 0:
        return 0, s, mx
    if mx == r:
        n = g - b
        off = 180 if n < 0 else 0
    elif mx == g:
        n = b - r
        off = 60
    else:
        n = r - g
        off = 120
    # round(off + 30 n / d), exact in integers
    h = (60 * n + 2 * d * off + d) // (2 * d)
    return h % 180, s, mx


@numba.njit(cache=True)
def _hsv_kernel(a):
    h, w, _ = a.shape
    out = np.empty((h, w, 3), np.uint8)
    for y in range(h):
        for x in range(w):
            hh, ss, vv = _hsv_pixel(np.int64(a[y, x, 0]), np.int64(a[y, x, 1]), np.int64(a[y, x, 2]))
            out[y, x, 0] = hh
            out[y, x, 1] = ss
            out[y, x, 2] = vv
    return out


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    check_image(img, 3)
    return _hsv_kernel(np.ascontiguousarray(img.reshape(img.shape[0], img.shape[1], 3)))


@dataclass(frozen=True)
class HsvBounds:
    lo: tuple[int, int, int] = (40, 75, 20)
    hi: tuple[int, int, int] = (80, 255, 255)

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("HSV bounds need three channels")
        limits = (179, 255, 255)
        for name, a, b, top in zip("hsv", lo, hi, limits):
            if not (0 <= a <= top and 0 <= b <= top):
                raise ValueError(f"HSV bound on {name} out of range [0, {top}]")
            if a > b:
                raise ValueError(f"HSV lower bound exceeds upper bound on {name} ({a} > {b}); "
                                 "hue wraparound is not supported")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


def apply_mask(hsv: np.ndarray, bounds: HsvBounds) -> np.ndarray:
    check_image(hsv, 3)
    lo = np.asarray(bounds.lo, dtype=np.uint8)
    hi = np.asarray(bounds.hi, dtype=np.uint8)
    return np.all((hsv >= lo) & (hsv <= hi), axis=-1)


@numba.njit(cache=True)
def _segment_kernel(p, lo, hi):
    # p is planar (3, H, W). The separable blur runs on contiguous rows; each
    # blurred row is screened on V and S with integer comparisons (no
    # division) and hue is computed only for surviving pixels.
    _, h, w = p.shape
    hp = np.empty((3, h, w), np.int32)
    for k in range(3):
        for y in range(h):
            src = p[k, y]
            dst = hp[k, y]
            for x in range(2, w - 2):
                dst[x] = (np.int32(src[x - 2]) + 4 * np.int32(src[x - 1]) + 6 * np.int32(src[x])
                          + 4 * np.int32(src[x + 1]) + np.int32(src[x + 2]))
            for x in (0, 1, w - 2, w - 1):
                if 0 <= x < w:
                    x0 = max(x - 2, 0)
                    x1 = max(x - 1, 0)
                    x3 = min(x + 1, w - 1)
                    x4 = min(x + 2, w - 1)
                    dst[x] = (np.int32(src[x0]) + 4 * np.int32(src[x1]) + 6 * np.int32(src[x])
                              + 4 * np.int32(src[x3]) + np.int32(src[x4]))
    out = np.zeros((h, w), np.bool_)
    v0 = np.empty(w, np.int32)
    v1 = np.empty(w, np.int32)
    v2 = np.empty(w, np.int32)
    cand = np.empty(w, np.bool_)
    lo0, lo1, lo2 = np.int32(lo[0]), np.int32(lo[1]), np.int32(lo[2])
    hi0, hi1, hi2 = np.int32(hi[0]), np.int32(hi[1]), np.int32(hi[2])
    for y in range(h):
        y0 = max(y - 2, 0)
        y1 = max(y - 1, 0)
        y3 = min(y + 1, h - 1)
        y4 = min(y + 2, h - 1)
        for k in range(3):
            a0 = hp[k, y0]
            a1 = hp[k, y1]
            a2 = hp[k, y]
            a3 = hp[k, y3]
            a4 = hp[k, y4]
            vk = v0 if k == 0 else (v1 if k == 1 else v2)
            for x in range(w):
                vk[x] = (a0[x] + 4 * a1[x] + 6 * a2[x] + 4 * a3[x] + a4[x] + 128) >> 8
        for x in range(w):
            mx = max(v0[x], max(v1[x], v2[x]))
            mn = min(v0[x], min(v1[x], v2[x]))
            num = 510 * (mx - mn) + mx
            # S = floor(num / 2mx) for mx > 0, and S = 0 when mx == 0
            s_ok = ((mx > 0) & (num >= 2 * mx * lo1) & (num < 2 * mx * (hi1 + 1))) | ((mx == 0) & (lo1 == 0))
            cand[x] = (mx >= lo2) & (mx <= hi2) & s_ok
        for x in range(w):
            if cand[x]:
                hh, ss, vv = _hsv_pixel(np.int64(v0[x]), np.int64(v1[x]), np.int64(v2[x]))
                out[y, x] = lo0 <= hh <= hi0
    return out


def segment(img: np.ndarray, bounds: HsvBounds) -> np.ndarray:
    """blur -> HSV -> mask in one pass; equal to the composition of the three."""
    check_image(img, 3)
    planar = np.ascontiguousarray(img.reshape(img.shape[0], img.shape[1], 3).transpose(2, 0, 1))
    lo = np.asarray(bounds.lo, dtype=np.int64)
    hi = np.asarray(bounds.hi, dtype=np.int64)
    return _segment_kernel(planar, lo, hi)


# -- morphology -------------------------------------------------------------

def _erode_once(m: np.ndarray) -> np.ndarray:
    p = np.pad(m, 1, constant_values=False)
    rows = p[:, :-2] & p[:, 1:-1] & p[:, 2:]
    return rows[:-2] & rows[1:-1] & rows[2:]


def _dilate_once(m: np.ndarray) -> np.ndarray:
    p = np.pad(m, 1, constant_values=False)
    rows = p[:, :-2] | p[:, 1:-1] | p[:, 2:]
    return rows[:-2] | rows[1:-1] | rows[2:]


def morphology(bmap: np.ndarray, mode: str, iterations: int = 1) -> np.ndarray:
    """3x3 square erosion or dilation; outside the image counts as unoccupied."""
    if mode == "erode":
        op = _erode_once
    elif mode == "dilate":
        op = _dilate_once
    else:
        raise ValueError(f"unknown morphology mode {mode!r}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    out = np.asarray(bmap, dtype=bool)
    for _ in range(iterations):
        out = op(out)
    return out


# -- components -------------------------------------------------------------

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class Component:
    """An 8-connected blob; pixel arrays hold (x, y) = (column, row) pairs."""
    pixels: np.ndarray
    area: int
    contour: np.ndarray

    @property
    def top_left(self) -> tuple[int, int]:
        return int(self.pixels[0, 0]), int(self.pixels[0, 1])


def _xy(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.stack([cols, rows], axis=1).astype(np.int64)


def find_external_components(bmap: np.ndarray) -> list[Component]:
    """Components sorted by area (desc), ties by first pixel in row-major order.

    Contour pixels are those with an out-of-component 4-neighbor once interior
    holes are filled, so only the outer boundary is reported.
    """
    bmap = np.asarray(bmap, dtype=bool)
    labels, n = ndimage.label(bmap, structure=_EIGHT)
    out = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        comp = labels[sl] == lab
        filled = np.pad(ndimage.binary_fill_holes(comp), 1, constant_values=False)
        inner = filled[:-2, 1:-1] & filled[2:, 1:-1] & filled[1:-1, :-2] & filled[1:-1, 2:]
        edge = comp & ~inner
        r, c = np.nonzero(comp)
        er, ec = np.nonzero(edge)
        out.append(Component(
            pixels=_xy(r + sl[0].start, c + sl[1].start),
            area=int(r.size),
            contour=_xy(er + sl[0].start, ec + sl[1].start),
        ))
    # pixels come out row-major, so pixels[0] is the component's first pixel
    width = bmap.shape[1]
    out.sort(key=lambda cp: (-cp.area, int(cp.pixels[0, 1]) * width + int(cp.pixels[0, 0])))
    return out


# -- minimum enclosing circle -----------------------------------------------

@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError("circle radius must be >= 0")

    def contains(self, p, eps: float = 1e-9) -> bool:
        return math.hypot(p[0] - self.center[0], p[1] - self.center[1]) <= self.radius + eps


_REL_EPS = 1 + 1e-14


def _convex_hull(pts: list[tuple[float, float]]) -> list[tuple[float, float]]:
    pts = sorted(set(pts))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _in(c, p) -> bool:
    return c is not None and math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * _REL_EPS


def _diameter(a, b):
    cx, cy = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    return (cx, cy, max(math.hypot(cx - a[0], cy - a[1]), math.hypot(cx - b[0], cy - b[1])))


def circumcircle(a, b, c):
    """Circle through three points, or None if they are collinear."""
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0
    if d == 0.0:
        return None
    x = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
    y = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(math.hypot(x - a[0], y - a[1]), math.hypot(x - b[0], y - b[1]),
            math.hypot(x - c[0], y - c[1]))
    return (x, y, r)


def _cross(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _circle_two(points, p, q):
    circ = _diameter(p, q)
    left = right = None
    px, py = p
    qx, qy = q
    for r in points:
        if _in(circ, r):
            continue
        cr = _cross(px, py, qx, qy, r[0], r[1])
        c = circumcircle(p, q, r)
        if c is None:
            continue
        side = _cross(px, py, qx, qy, c[0], c[1])
        if cr > 0.0 and (left is None or side > _cross(px, py, qx, qy, left[0], left[1])):
            left = c
        elif cr < 0.0 and (right is None or side < _cross(px, py, qx, qy, right[0], right[1])):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _circle_one(points, p):
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _in(c, q):
            c = _diameter(p, q) if c[2] == 0.0 else _circle_two(points[: i + 1], p, q)
    return c


def min_enclosing_circle(points) -> Circle:
    """Smallest circle containing every point (Welzl, iterative form, on the hull)."""
    pts = [(float(x), float(y)) for x, y in np.asarray(points, dtype=float).reshape(-1, 2)]
    if not pts:
        raise ValueError("min_enclosing_circle needs at least one point")
    hull = _convex_hull(pts)
    # fixed shuffle seed keeps results reproducible
    random.Random(0x5EC).shuffle(hull)
    c = None
    for i, p in enumerate(hull):
        if c is None or not _in(c, p):
            c = _circle_one(hull[: i + 1], p)
    return Circle((c[0], c[1]), c[2])


def compute_offsets(c: Circle, k: CameraIntrinsics, radius_setpoint: float):
    """(dx, dy, dr): + dx object right, + dy object below, + dr object too far."""
    return (c.center[0] - k.width / 2.0, c.center[1] - k.height / 2.0,
            radius_setpoint - c.radius)


# -- netpbm IO --------------------------------------------------------------

def write_netpbm(path, img: np.ndarray) -> None:
    """P6 for RGB, P5 for single channel, maxval 255."""
    check_image(img)
    magic = b"P6" if img.ndim == 3 and img.shape[2] == 3 else b"P5"
    h, w = img.shape[:2]
    header = magic + b"\n%d %d\n255\n" % (w, h)
    Path(path).write_bytes(header + np.ascontiguousarray(img).tobytes())


def read_netpbm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated netpbm header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace before raster
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6") or maxval != 255:
        raise ValueError(f"{path}: only binary P5/P6 with maxval 255 are supported")
    c = 3 if magic == b"P6" else 1
    n = w * h * c
    raster = data[pos:pos + n]
    if len(raster) != n:
        raise ValueError(f"{path}: expected {n} raster bytes, found {len(raster)}")
    arr = np.frombuffer(raster, dtype=np.uint8)
    return arr.reshape(h, w, 3).copy() if c == 3 else arr.reshape(h, w).copy()
