"""Detection and segmentation evaluation.

Detections match ground truth greedily in descending score order; a match
needs wrap-aware IoU strictly above the threshold (default 0.3, since exact
localization is the segmentation branch's job). Per class:

* AP: interpolated precision (envelope) averaged over the distinct recall
  levels the detector actually reaches.
* AP_w: the same envelope weighted by the recall interval each point
  represents, i.e. area under the interpolated PR curve.

Class means use detection-count weights: ``mAP = sum_i (d_i / n) AP_i``
with d_i detections of class i out of n total, so rare classes do not
dominate the mean. Segmentation is scored with mean IoU over the classes
present in ground truth or prediction (background included as class 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anchors import PanoBox, pano_iou_matrix
from .errors import EmptyEval, NoGroundTruth, ShapeMismatch

DETECTION_IOU_TH = 0.3


def _boxes_array(boxes) -> np.ndarray:
    if len(boxes) == 0:
        return np.zeros((0, 4))
    return np.stack([b.as_array() if isinstance(b, PanoBox) else np.asarray(b, dtype=float) for b in boxes])


def match_detections(dets, gts, width: float, iou_th: float = DETECTION_IOU_TH) -> np.ndarray:
    """Greedy TP/FP flags for detections sorted by descending score.

    Each ground-truth box is matched at most once; a detection is a true
    positive when its best IoU against the unmatched ground truth is
    strictly above ``iou_th``. Returns the boolean TP flags in score order
    (ties keep input order).
    """
    order = np.argsort([-d.score for d in dets], kind="stable")
    gt_arr = _boxes_array(gts)
    det_arr = _boxes_array(dets)
    used = np.zeros(len(gts), dtype=bool)
    tp = np.zeros(len(dets), dtype=bool)
    if len(gts) and len(dets):
        iou = pano_iou_matrix(det_arr, gt_arr, width)
        for rank, di in enumerate(order):
            cand = np.where(~used)[0]
            if cand.size == 0:
                break
            j = cand[np.argmax(iou[di, cand])]
            if iou[di, j] > iou_th:
                used[j] = True
                tp[rank] = True
    return tp


def average_precision(dets, gts, width: float, iou_th: float = DETECTION_IOU_TH) -> tuple[float, float]:
    """(AP, AP_w) for one class. Raises NoGroundTruth when ``gts`` is empty."""
    if len(gts) == 0:
        raise NoGroundTruth("average precision undefined without ground truth")
    if len(dets) == 0:
        return 0.0, 0.0
    tp = match_detections(dets, gts, width, iou_th)
    cum_tp = np.cumsum(tp)
    ranks = np.arange(1, len(dets) + 1)
    precision = cum_tp / ranks
    # Interpolated precision: envelope from the right.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    hit = np.where(tp)[0]
    if hit.size == 0:
        return 0.0, 0.0
    p_at_recall = envelope[hit]
    recalls = cum_tp[hit] / len(gts)
    ap = float(p_at_recall.mean())
    ap_w = float(np.sum(np.diff(np.concatenate([[0.0], recalls])) * p_at_recall))
    return ap, ap_w


def weighted_map(per_class: list[tuple[float, int]]) -> float:
    """Detection-count weighted mean of per-class APs: sum_i (d_i/n) AP_i."""
    n = sum(d for _, d in per_class)
    if n <= 0:
        raise EmptyEval("no detections to weight")
    return float(sum(ap * d for ap, d in per_class) / n)


def mean_iou(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> tuple[np.ndarray, float]:
    """Per-class IoU (NaN where a class is absent from both maps) and mIoU.

    mIoU averages over the classes present in ground truth or prediction;
    classes absent from both would be 0/0 and are excluded.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    ious = np.full(num_classes, np.nan)
    for c in range(num_classes):
        p = pred == c
        g = gt == c
        union = np.count_nonzero(p | g)
        if union == 0:
            continue
        ious[c] = np.count_nonzero(p & g) / union
    if np.all(np.isnan(ious)):
        return ious, float("nan")
    return ious, float(np.nanmean(ious))


@dataclass
class EvalResult:
    """Per-class detection/segmentation scores plus their weighted means.

    ``ap[c]`` is None for classes with no ground truth (reported absent,
    excluded from the means, and their detections excluded from n).
    """

    class_names: list[str]
    ap: dict[int, float | None] = field(default_factory=dict)
    ap_w: dict[int, float | None] = field(default_factory=dict)
    det_counts: dict[int, int] = field(default_factory=dict)
    n_detections: int = 0
    map_weighted: float | None = None
    map_w_weighted: float | None = None
    iou: list[float | None] = field(default_factory=list)
    miou: float | None = None

    def to_json(self) -> dict:
        per_class = {}
        for c, name in enumerate(self.class_names):
            per_class[name] = {
                "ap": self.ap.get(c),
                "ap_w": self.ap_w.get(c),
                "detections": self.det_counts.get(c, 0),
                "iou": self.iou[c] if c < len(self.iou) else None,
            }
        return {
            "per_class": per_class,
            "n_detections": self.n_detections,
            "mAP": self.map_weighted,
            "mAP_w": self.map_w_weighted,
            "mIoU": self.miou,
        }


def evaluate(
    det_boxes: list[PanoBox],
    gt_boxes: list[PanoBox],
    width: float,
    class_names: list[str],
    pred_seg: np.ndarray | None = None,
    gt_seg: np.ndarray | None = None,
    iou_th: float = DETECTION_IOU_TH,
) -> EvalResult:
    """Full evaluation over all classes (0 is background, never detected)."""
    res = EvalResult(class_names=list(class_names))
    per_class = []
    for c in range(1, len(class_names)):
        dets_c = [b for b in det_boxes if b.class_id == c]
        gts_c = [b for b in gt_boxes if b.class_id == c]
        if not gts_c:
            if dets_c:
                res.ap[c] = None
                res.ap_w[c] = None
            continue
        ap, ap_w = average_precision(dets_c, gts_c, width, iou_th)
        res.ap[c] = ap
        res.ap_w[c] = ap_w
        res.det_counts[c] = len(dets_c)
        per_class.append((c, ap, ap_w, len(dets_c)))
    res.n_detections = sum(d for _, _, _, d in per_class)
    if res.n_detections > 0:
        res.map_weighted = weighted_map([(ap, d) for _, ap, _, d in per_class])
        res.map_w_weighted = weighted_map([(apw, d) for _, _, apw, d in per_class])
    if pred_seg is not None and gt_seg is not None:
        ious, miou = mean_iou(pred_seg, gt_seg, len(class_names))
        res.iou = [None if np.isnan(v) else float(v) for v in ious]
        res.miou = None if np.isnan(miou) else miou
    return res
