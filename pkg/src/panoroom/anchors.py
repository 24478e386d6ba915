"""Multi-scale panoramic anchor boxes and wrap-aware box arithmetic.

Anchor grids span the whole raster, one grid per pyramid level from
``128 x 256`` cells down to ``1 x 2`` (rows halve each level, and every grid
keeps cols = 2 * rows so cells stay square). Each cell carries one proposal
per aspect ratio; the default ratio set is {1, 2, 1/2, 3, 1/3}.

Boxes are axis-aligned with a center that wraps modulo W, so objects cut by
the left/right image seam are first-class citizens.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .sphere import wrap_interval_overlap, wrap_min_diff

DEFAULT_RATIOS = (1.0, 2.0, 0.5, 3.0, 1.0 / 3.0)


@dataclass
class PanoBox:
    """Detection or ground-truth box: center (cx, cy), size (w, h), wrap-aware in cx."""

    class_id: int
    score: float
    cx: float
    cy: float
    w: float
    h: float

    def shifted(self, delta_cols: float, width: float) -> "PanoBox":
        return replace(self, cx=(self.cx + delta_cols) % width)

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=float)


@dataclass
class AnchorConfig:
    """Anchor-grid pyramid: (rows, cols) per level plus the ratio set.

    ``scale_base`` sets each level's anchor area: the square-root area at
    level l is ``scale_base * (H / rows_l)``, i.e. proportional to the
    level's cell size. Explicit per-level ``scales`` (pixels) override it.
    """

    grids: tuple[tuple[int, int], ...]
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    scale_base: float = 1.0
    scales: tuple[float, ...] | None = None

    def __post_init__(self):
        for rows, cols in self.grids:
            if cols != 2 * rows:
                raise ValueError(f"grid must have cols = 2*rows, got {rows}x{cols}")
        if self.scales is not None and len(self.scales) != len(self.grids):
            raise ValueError("scales must match the number of grid levels")

    @staticmethod
    def default() -> "AnchorConfig":
        grids = []
        rows = 128
        while rows >= 1:
            grids.append((rows, 2 * rows))
            rows //= 2
        return AnchorConfig(grids=tuple(grids))

    def level_scale(self, level: int, height: int) -> float:
        if self.scales is not None:
            return self.scales[level]
        rows, _ = self.grids[level]
        return self.scale_base * height / rows

    def num_anchors(self) -> int:
        return len(self.ratios) * sum(r * c for r, c in self.grids)


def generate_anchors(cfg: AnchorConfig, width: int, height: int) -> np.ndarray:
    """All anchors as an ``(N, 4)`` array of (cx, cy, w, h).

    Ordering is deterministic: level-major, then cell raster order
    (row-major), then ratio.
    """
    out = []
    for level, (rows, cols) in enumerate(cfg.grids):
        s = cfg.level_scale(level, height)
        ch = height / rows
        cw = width / cols
        cy = (np.arange(rows) + 0.5) * ch
        cx = (np.arange(cols) + 0.5) * cw
        ws = np.array([s * np.sqrt(r) for r in cfg.ratios])
        hs = np.array([s / np.sqrt(r) for r in cfg.ratios])
        gy, gx = np.meshgrid(cy, cx, indexing="ij")
        centers = np.stack([gx.ravel(), gy.ravel()], axis=1)  # row-major cells
        n_cells = centers.shape[0]
        n_r = len(cfg.ratios)
        block = np.empty((n_cells, n_r, 4))
        block[:, :, 0] = centers[:, None, 0]
        block[:, :, 1] = centers[:, None, 1]
        block[:, :, 2] = ws[None, :]
        block[:, :, 3] = hs[None, :]
        out.append(block.reshape(-1, 4))
    return np.concatenate(out, axis=0)


def _box_array(b) -> np.ndarray:
    if isinstance(b, PanoBox):
        return b.as_array()
    return np.asarray(b, dtype=float)


def pano_iou(a, b, width: float) -> float:
    """Intersection over union with horizontal wrap; symmetric.

    Accepts PanoBox or (cx, cy, w, h) array-likes.
    """
    a = _box_array(a)
    b = _box_array(b)
    inter_c = wrap_interval_overlap((a[0] - a[2] / 2.0, min(a[2], width)),
                                    (b[0] - b[2] / 2.0, min(b[2], width)), width)
    inter_r = max(0.0, min(a[1] + a[3] / 2.0, b[1] + b[3] / 2.0)
                  - max(a[1] - a[3] / 2.0, b[1] - b[3] / 2.0))
    inter = inter_c * inter_r
    union = a[2] * a[3] + b[2] * b[3] - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def pano_iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray, width: float) -> np.ndarray:
    """Pairwise wrap-aware IoU, vectorized over (N, 4) x (M, 4) arrays."""
    a = np.asarray(boxes_a, dtype=float)
    b = np.asarray(boxes_b, dtype=float)
    # column interval overlap on the circle
    dc = wrap_min_diff(b[None, :, 0], 0.0, width) - wrap_min_diff(a[:, None, 0], 0.0, width)
    dc = (dc + width / 2.0) % width - width / 2.0
    half = (a[:, None, 2] + b[None, :, 2]) / 2.0
    inter_c = np.minimum(np.clip(half - np.abs(dc), 0.0, None),
                         np.minimum(a[:, None, 2], b[None, :, 2]))
    # wrapped second lobe: when widths sum beyond the circle
    wrap_extra = np.clip(half - (width - np.abs(dc)), 0.0, None)
    inter_c = np.minimum(inter_c + wrap_extra, np.minimum(a[:, None, 2], b[None, :, 2]))
    lo = np.maximum(a[:, None, 1] - a[:, None, 3] / 2.0, b[None, :, 1] - b[None, :, 3] / 2.0)
    hi = np.minimum(a[:, None, 1] + a[:, None, 3] / 2.0, b[None, :, 1] + b[None, :, 3] / 2.0)
    inter_r = np.clip(hi - lo, 0.0, None)
    inter = inter_c * inter_r
    union = a[:, None, 2] * a[:, None, 3] + b[None, :, 2] * b[None, :, 3] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0.0, inter / union, 0.0)
    return iou


def match_anchors(anchors: np.ndarray, gt_boxes, width: float, pos_iou: float = 0.5):
    """Best anchor per ground-truth box plus the per-anchor IoU maxima.

    Returns ``(best_anchor_idx, anchor_labels)`` where labels are 1 for
    anchors whose best GT IoU reaches ``pos_iou``, else 0.
    """
    gt = np.stack([_box_array(g) for g in gt_boxes]) if len(gt_boxes) else np.zeros((0, 4))
    if gt.shape[0] == 0:
        return np.zeros(0, dtype=int), np.zeros(anchors.shape[0], dtype=int)
    iou = pano_iou_matrix(gt, anchors, width)
    best = np.argmax(iou, axis=1)
    labels = (iou.max(axis=0) >= pos_iou).astype(int)
    return best, labels


def nms_pano(boxes: np.ndarray, scores: np.ndarray, width: float, iou_th: float = 0.5) -> list[int]:
    """Greedy non-maximum suppression with wrap-aware IoU; returns kept indices."""
    order = np.argsort(-np.asarray(scores), kind="stable")
    boxes = np.asarray(boxes, dtype=float)
    keep: list[int] = []
    alive = np.ones(len(order), dtype=bool)
    for oi, i in enumerate(order):
        if not alive[oi]:
            continue
        keep.append(int(i))
        rest = order[oi + 1:]
        mask = alive[oi + 1:]
        if rest.size == 0:
            continue
        ious = pano_iou_matrix(boxes[i][None], boxes[rest], width)[0]
        alive[oi + 1:] = mask & (ious <= iou_th)
    return keep


@dataclass
class PanoSample:
    """One training/eval sample: rasters plus boxes, rotated together."""

    image: np.ndarray | None = None
    boxes: list[PanoBox] = field(default_factory=list)
    masks: list[np.ndarray] = field(default_factory=list)
    labels: list[int] = field(default_factory=list)


def rotate_horizontal(sample: PanoSample, delta_deg: float, width: int) -> PanoSample:
    """Horizontal (yaw) rotation of a whole sample by ``delta_deg`` degrees.

    Rasters are column-shifted by ``round(delta * W / 360)`` and boxes are
    shifted by the same amount so rasters and boxes stay aligned; labels are
    untouched. Random crops are deliberately not part of the augmentation
    set, full-context rotation is the only geometric transform.
    """
    shift = int(round((delta_deg % 360.0) * width / 360.0)) % width
    image = None if sample.image is None else np.roll(sample.image, shift, axis=-1)
    masks = [np.roll(m, shift, axis=-1) for m in sample.masks]
    boxes = [b.shifted(shift, width) for b in sample.boxes]
    return PanoSample(image=image, boxes=boxes, masks=masks, labels=list(sample.labels))
