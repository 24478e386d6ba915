"""Unit-sphere geometry under the equirectangular projection.

Conventions used throughout the toolkit:

* A panorama raster has ``W = 2 * H`` and is horizontally periodic; column
  indices are always interpreted modulo W.
* Grid arrays are indexed ``[row, col]``; the sample stored at integer index
  ``(r, c)`` sits at continuous pixel coordinates ``(u, v) = (c, r)``.
* Longitude ``lon = 2*pi*(u + 0.5)/W - pi`` and latitude
  ``lat = pi/2 - pi*(v + 0.5)/H``, so square angular pixels
  (``2*pi/W == pi/H``) fall out of W = 2H.
* The z axis points up (toward row v = -0.5, the north-pole boundary);
  gravity-aligned panoramas keep floors at the bottom of the image.
* Both poles map to column ``u = W/2`` by convention.

All functions are pure and accept scalars or numpy arrays (broadcasting on
the leading axes). Directions are unit 3-vectors stored in the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AntipodalEndpoints, ShapeMismatch

# Antipodal detection threshold for geodesic arcs: |a.b + 1| below this
# means the connecting great circle is not unique.
ANTIPODAL_EPS = 1e-9


def check_pano_shape(width: int, height: int) -> None:
    """Raise ShapeMismatch unless width == 2 * height >= 2."""
    if height < 1 or width != 2 * height:
        raise ShapeMismatch(f"need W = 2H with H >= 1, got W={width}, H={height}")


@dataclass
class EquirectGrid:
    """Validated container for a W x H (W = 2H) raster.

    ``data`` is ``(H, W)`` or ``(C, H, W)``, row-major, horizontally
    periodic. Most numeric routines in this package take bare arrays; this
    wrapper is used at I/O boundaries where the shape invariant matters.
    """

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim not in (2, 3):
            raise ShapeMismatch(f"grid must be (H, W) or (C, H, W), got {self.data.shape}")
        check_pano_shape(self.width, self.height)

    @property
    def height(self) -> int:
        return self.data.shape[-2]

    @property
    def width(self) -> int:
        return self.data.shape[-1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[0]


def pixel_to_dir(u, v, width: int, height: int) -> np.ndarray:
    """Map continuous pixel coordinates to unit directions.

    ``u`` wraps modulo W; ``v`` is clamped to ``[-0.5, H - 0.5]``, the row
    range whose latitudes span the closed interval [-pi/2, pi/2].

    Returns an array shaped like ``broadcast(u, v) + (3,)``.
    """
    check_pano_shape(width, height)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    v = np.clip(v, -0.5, height - 0.5)
    lon = 2.0 * np.pi * (u + 0.5) / width - np.pi
    lat = np.pi / 2.0 - np.pi * (v + 0.5) / height
    clat = np.cos(lat)
    out = np.stack(
        np.broadcast_arrays(clat * np.cos(lon), clat * np.sin(lon), np.sin(lat)),
        axis=-1,
    )
    return out


@lru_cache(maxsize=4)
def _panorama_rays_cached(width: int, height: int) -> np.ndarray:
    cols = np.arange(width, dtype=float)
    rows = np.arange(height, dtype=float)
    lon = 2.0 * np.pi * (cols + 0.5) / width - np.pi
    lat = np.pi / 2.0 - np.pi * (rows + 0.5) / height
    cl, sl = np.cos(lon), np.sin(lon)
    clat, slat = np.cos(lat), np.sin(lat)
    out = np.empty((height, width, 3))
    np.outer(clat, cl, out=out[..., 0])
    np.outer(clat, sl, out=out[..., 1])
    out[..., 2] = slat[:, None]
    out.flags.writeable = False
    return out


def panorama_rays(width: int, height: int) -> np.ndarray:
    """Read-only (H, W, 3) array of every pixel center's direction.

    Cached per grid size; do not mutate the result.
    """
    check_pano_shape(width, height)
    return _panorama_rays_cached(width, height)


def dir_to_pixel(d, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`pixel_to_dir` away from the poles.

    Returns ``(u, v)`` with ``u`` in ``[-0.5, W - 0.5)`` and ``v`` in
    ``[-0.5, H - 0.5]``. At the exact poles ``u = W/2`` by convention and
    ``v`` hits the row boundary (-0.5 north, H - 0.5 south).
    """
    check_pano_shape(width, height)
    d = np.asarray(d, dtype=float)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    lon = np.arctan2(y, x)
    lat = np.arcsin(np.clip(z, -1.0, 1.0))
    u = (lon + np.pi) * width / (2.0 * np.pi) - 0.5
    v = (np.pi / 2.0 - lat) * height / np.pi - 0.5
    at_pole = np.hypot(x, y) == 0.0
    u = np.where(at_pole, width / 2.0, u)
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def normalize(vecs: np.ndarray) -> np.ndarray:
    """Scale vectors in the last axis to unit length."""
    vecs = np.asarray(vecs, dtype=float)
    return vecs / np.linalg.norm(vecs, axis=-1, keepdims=True)


def geodesic_arc(a, b, n: int) -> np.ndarray:
    """``n >= 2`` points on the great-circle arc from ``a`` to ``b``.

    Spherical linear interpolation with exact endpoints. Raises
    AntipodalEndpoints when the arc is not unique.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 points, got {n}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dot = float(np.dot(a, b))
    if abs(dot + 1.0) < ANTIPODAL_EPS:
        raise AntipodalEndpoints("endpoints are antipodal; arc is ambiguous")
    t = np.linspace(0.0, 1.0, n)
    omega = np.arccos(np.clip(dot, -1.0, 1.0))
    if omega < 1e-9:
        # Nearly coincident endpoints: slerp is 0/0, fall back to chord.
        pts = normalize(np.outer(1.0 - t, a) + np.outer(t, b))
    else:
        s = np.sin(omega)
        pts = (np.outer(np.sin((1.0 - t) * omega), a) + np.outer(np.sin(t * omega), b)) / s
        pts = normalize(pts)
    pts[0] = a
    pts[-1] = b
    return pts


def wrap_interval_overlap(a: tuple[float, float], b: tuple[float, float], width: float) -> float:
    """Overlap length of two column intervals taken modulo ``width``.

    Intervals are ``(start, length)`` with ``0 <= length <= width``; starts
    may be any real number. Symmetric in its interval arguments.
    """
    sa, la = float(a[0]), float(a[1])
    sb, lb = float(b[0]), float(b[1])
    if la < 0 or lb < 0 or la > width or lb > width:
        raise ValueError("interval lengths must lie in [0, width]")
    s = (sb - sa) % width
    e = s + lb
    ov = max(0.0, min(la, e) - s) + max(0.0, min(la, e - width))
    return ov


def wrap_min_diff(u, ref, width: float):
    """Signed column difference ``u - ref`` folded into [-W/2, W/2)."""
    return (np.asarray(u, dtype=float) - ref + width / 2.0) % width - width / 2.0


def yaw_rotation(angle: float) -> np.ndarray:
    """3x3 rotation about the z (up) axis by ``angle`` radians."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def tangent_basis(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (east, north) tangent vectors at unit direction(s) ``d``.

    East points toward increasing longitude, north toward the +z pole.
    Undefined at the poles (east degenerates); callers guard that case.
    """
    d = np.asarray(d, dtype=float)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    h = np.hypot(x, y)
    # east = d x (unit z cross ...): (-sin lon, cos lon, 0)
    east = np.stack(np.broadcast_arrays(-y / h, x / h, np.zeros_like(z)), axis=-1)
    # north = completes right-handed (east, north, d) frame
    north = np.stack(
        np.broadcast_arrays(-z * x / h, -z * y / h, h),
        axis=-1,
    )
    return east, north
