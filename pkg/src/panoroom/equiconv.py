"""Distortion-adaptive convolution for equirectangular rasters.

Kernel taps live on the tangent plane of the sphere at each output pixel,
spaced ``angular_step`` radians apart, and are mapped back into the raster
through the inverse gnomonic projection. Near the equator the taps coincide
with a standard convolution stencil; toward the poles the horizontal spread
grows like 1/cos(latitude), following the projection's distortion.

Because the construction is invariant under rotations about the vertical
axis, the tap offsets depend only on the output row. The sample field is
therefore stored per row, which makes integer column rotation commute with
the operator bit for bit.

Weight layout matches cross-correlation: ``weights[co, ci, 0, 0]`` is the
top-left (north-west) tap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PoleSingularity, ShapeMismatch
from .sphere import check_pano_shape, dir_to_pixel, normalize, pixel_to_dir, tangent_basis, wrap_min_diff

MAX_ANGULAR_STEP = np.pi / 4.0


@dataclass(frozen=True)
class EquiKernelSpec:
    """Tap-grid geometry: ``kh x kw`` taps, ``angular_step`` radians apart."""

    kh: int
    kw: int
    angular_step: float

    def __post_init__(self):
        if self.kh < 1 or self.kw < 1 or self.kh % 2 == 0 or self.kw % 2 == 0:
            raise ValueError(f"tap counts must be odd and >= 1, got {self.kh}x{self.kw}")
        if not 0.0 < self.angular_step < MAX_ANGULAR_STEP:
            raise ValueError(f"angular_step must be in (0, pi/4), got {self.angular_step}")

    @staticmethod
    def for_grid(width: int, kh: int = 3, kw: int = 3) -> "EquiKernelSpec":
        """Default spacing of one equator pixel (2*pi/W)."""
        return EquiKernelSpec(kh, kw, 2.0 * np.pi / width)


class SampleField:
    """Per-output-pixel tap sample positions, stored per row.

    ``du[r, i, j]`` is the column offset of tap (i, j) relative to an output
    pixel in row ``r`` (wrap-minimal, in [-W/2, W/2)); ``v_abs[r, i, j]`` is
    the tap's absolute continuous row coordinate. The center tap is exactly
    the output pixel itself.
    """

    def __init__(self, width: int, height: int, spec: EquiKernelSpec, du: np.ndarray, v_abs: np.ndarray):
        self.width = width
        self.height = height
        self.spec = spec
        self.du = du
        self.v_abs = v_abs

    def coords(self, row: int, col: int) -> np.ndarray:
        """Absolute (u, v) sample coordinates for one output pixel, (kh, kw, 2)."""
        u = (col + self.du[row]) % self.width
        v = np.broadcast_to(self.v_abs[row], u.shape)
        return np.stack([u, v], axis=-1)


def build_sample_field(
    width: int,
    height: int,
    spec: EquiKernelSpec,
    strict_poles: bool = False,
) -> SampleField:
    """Construct the tap sample field for a ``width x height`` grid.

    In strict mode, rows whose latitude lies within
    ``angular_step * max(kh, kw)`` of a pole raise PoleSingularity; otherwise
    taps that cross a pole wrap naturally to the far-side column (+W/2) and
    re-enter the valid row range.
    """
    check_pano_shape(width, height)
    rows = np.arange(height, dtype=float)
    lat = np.pi / 2.0 - np.pi * (rows + 0.5) / height
    if strict_poles:
        margin = spec.angular_step * max(spec.kh, spec.kw)
        bad = np.abs(lat) >= np.pi / 2.0 - margin
        if np.any(bad):
            raise PoleSingularity(
                f"{int(bad.sum())} rows lie within {margin:.4f} rad of a pole"
            )

    # Tap (i=0, j=0) is the top-left (north-west) corner of the stencil.
    ci, cj = (spec.kh - 1) // 2, (spec.kw - 1) // 2
    north_off = (ci - np.arange(spec.kh, dtype=float)) * spec.angular_step
    east_off = (np.arange(spec.kw, dtype=float) - cj) * spec.angular_step

    # Reference pixels at column 0; offsets are longitude differences and
    # hence hold for every column of the row.
    d0 = pixel_to_dir(np.zeros(height), rows, width, height)
    east, north = tangent_basis(d0)
    # Inverse gnomonic projection: tangent-plane displacement tan(angle)
    # along each axis, then back to the sphere.
    te = np.tan(east_off)[None, None, :, None]
    tn = np.tan(north_off)[None, :, None, None]
    taps = d0[:, None, None, :] + te * east[:, None, None, :] + tn * north[:, None, None, :]
    taps = normalize(taps)
    u_t, v_t = dir_to_pixel(taps, width, height)
    du = wrap_min_diff(u_t, 0.0, width)
    v_abs = v_t
    # The center tap is the output pixel by construction; pin exactly.
    du[:, ci, cj] = 0.0
    v_abs[:, ci, cj] = rows
    return SampleField(width, height, spec, du, v_abs)


def _as_chw(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x[None]
    if x.ndim == 3:
        return x
    raise ShapeMismatch(f"input must be (H, W) or (C, H, W), got {x.shape}")


def _check_shapes(x: np.ndarray, weights: np.ndarray, field: SampleField) -> None:
    if x.shape[1] != field.height or x.shape[2] != field.width:
        raise ShapeMismatch(f"input {x.shape[1:]} does not match field {(field.height, field.width)}")
    if weights.ndim != 4 or weights.shape[2] != field.spec.kh or weights.shape[3] != field.spec.kw:
        raise ShapeMismatch(f"weights {weights.shape} do not match taps {(field.spec.kh, field.spec.kw)}")
    if weights.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"weights expect {weights.shape[1]} input channels, input has {x.shape[0]}")


def _tap_gather(x: np.ndarray, field: SampleField, i: int, j: int, vertical: str) -> np.ndarray:
    """Bilinear samples of ``x`` at tap (i, j) for every output pixel.

    Horizontal wrap; vertical behaviour 'clamp' (default) or 'wrap_pole'
    (out-of-range rows continue over the pole at column + W/2).
    """
    H, W = field.height, field.width
    du = field.du[:, i, j]
    v = field.v_abs[:, i, j]
    iu = np.floor(du).astype(int)
    fu = (du - iu)[None, :, None]
    iv = np.floor(v).astype(int)
    fv = (v - iv)[None, :, None]

    cols = np.arange(W)
    c0 = (cols[None, :] + iu[:, None]) % W
    c1 = (c0 + 1) % W

    def rows_cols(ivr):
        if vertical == "clamp":
            return np.clip(ivr, 0, H - 1)[:, None], None
        # wrap_pole: reflect the row across the pole boundary and shift the
        # column half a turn.
        r = ivr.copy()
        below = r < 0
        above = r > H - 1
        r[below] = -1 - r[below]
        r[above] = 2 * H - 1 - r[above]
        shift = (below | above).astype(int) * (W // 2)
        return r[:, None], shift[:, None]

    out = 0.0
    for ivr, wv in ((iv, (1.0 - fv)), (iv + 1, fv)):
        r, shift = rows_cols(ivr)
        if shift is None:
            g0 = x[:, r, c0]
            g1 = x[:, r, c1]
        else:
            g0 = x[:, r, (c0 + shift) % W]
            g1 = x[:, r, (c1 + shift) % W]
        out = out + wv * ((1.0 - fu) * g0 + fu * g1)
    return out


def equiconv_forward(
    x: np.ndarray,
    weights: np.ndarray,
    field: SampleField,
    stride: int = 1,
    vertical: str = "clamp",
) -> np.ndarray:
    """Evaluate the operator: ``out[o, p] = sum_{c,tap} w * sample(x[c], tap)``.

    ``x`` is (C_in, H, W) or (H, W); ``weights`` is (C_out, C_in, kh, kw).
    Output is (C_out, H, W); ``stride`` subsamples the output grid.
    """
    x = _as_chw(x)
    weights = np.asarray(weights, dtype=float)
    _check_shapes(x, weights, field)
    kh, kw = field.spec.kh, field.spec.kw
    cout = weights.shape[0]
    out = np.zeros((cout, field.height, field.width))
    for i in range(kh):
        for j in range(kw):
            s = _tap_gather(x, field, i, j, vertical)  # (C_in, H, W)
            out += np.einsum("oc,chw->ohw", weights[:, :, i, j], s)
    if stride > 1:
        out = out[:, ::stride, ::stride]
    return out


def equiconv_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    weights: np.ndarray,
    field: SampleField,
    stride: int = 1,
    vertical: str = "clamp",
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradients of :func:`equiconv_forward` w.r.t. input and weights."""
    x = _as_chw(x)
    weights = np.asarray(weights, dtype=float)
    _check_shapes(x, weights, field)
    grad_out = np.asarray(grad_out, dtype=float)
    H, W = field.height, field.width
    kh, kw = field.spec.kh, field.spec.kw

    full = np.zeros((weights.shape[0], H, W))
    expect = (weights.shape[0], (H + stride - 1) // stride, (W + stride - 1) // stride)
    if grad_out.shape != expect:
        raise ShapeMismatch(f"grad_out {grad_out.shape}, expected {expect}")
    full[:, ::stride, ::stride] = grad_out

    grad_w = np.zeros_like(weights)
    grad_x = np.zeros_like(x)
    cols = np.arange(W)
    for i in range(kh):
        for j in range(kw):
            s = _tap_gather(x, field, i, j, vertical)
            grad_w[:, :, i, j] = np.einsum("ohw,chw->oc", full, s)

            # Scatter pass: route each output pixel's contribution back to
            # the four bilinear corners of its tap sample.
            t = np.einsum("ohw,oc->chw", full, weights[:, :, i, j])
            du = field.du[:, i, j]
            v = field.v_abs[:, i, j]
            iu = np.floor(du).astype(int)
            fu = (du - iu)[None, :, None]
            iv = np.floor(v).astype(int)
            fv = (v - iv)[None, :, None]
            c0 = (cols[None, :] + iu[:, None]) % W
            c1 = (c0 + 1) % W
            for ivr, wv in ((iv, 1.0 - fv), (iv + 1, fv)):
                if vertical == "clamp":
                    r = np.clip(ivr, 0, H - 1)[:, None]
                    cc0, cc1 = c0, c1
                else:
                    r = ivr.copy()
                    below = r < 0
                    above = r > H - 1
                    r[below] = -1 - r[below]
                    r[above] = 2 * H - 1 - r[above]
                    shift = (below | above).astype(int) * (W // 2)
                    r = r[:, None]
                    cc0 = (c0 + shift[:, None]) % W
                    cc1 = (c1 + shift[:, None]) % W
                rb = np.broadcast_to(r, (H, W))
                np.add.at(grad_x, (slice(None), rb, cc0), wv * (1.0 - fu) * t)
                np.add.at(grad_x, (slice(None), rb, cc1), wv * fu * t)
    return grad_x, grad_w
