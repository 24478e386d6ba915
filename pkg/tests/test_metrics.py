import numpy as np
import pytest

from panoroom.anchors import PanoBox, pano_iou
from panoroom.errors import EmptyEval, NoGroundTruth, ShapeMismatch
from panoroom.metrics import average_precision, evaluate, mean_iou, weighted_map

W = 512


def box(cx, cy, w, h, score=1.0, cls=1):
    return PanoBox(class_id=cls, score=score, cx=cx, cy=cy, w=w, h=h)


def oracle_pr_curve(dets, gts, width, iou_th):
    """Brute-force PR construction: re-run greedy matching per prefix."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    points = []
    for k in range(1, len(dets) + 1):
        prefix = [dets[i] for i in order[:k]]
        used = [False] * len(gts)
        tp = 0
        for d in prefix:
            best, best_iou = None, 0.0
            for j, g in enumerate(gts):
                if used[j]:
                    continue
                v = pano_iou(d, g, width)
                if v > best_iou:
                    best, best_iou = j, v
            if best is not None and best_iou > iou_th:
                used[best] = True
                tp += 1
        points.append((tp / len(gts), tp / k, tp))
    return points


def oracle_ap(dets, gts, width, iou_th):
    points = oracle_pr_curve(dets, gts, width, iou_th)
    # Envelope precision at each achieved recall level (a new TP).
    levels = []
    for k, (r, p, tp) in enumerate(points):
        if tp > (points[k - 1][2] if k else 0):
            p_env = max(q[1] for q in points[k:])
            levels.append((r, p_env))
    if not levels:
        return 0.0, 0.0
    ap = sum(p for _, p in levels) / len(levels)
    ap_w = 0.0
    prev_r = 0.0
    for r, p in levels:
        ap_w += (r - prev_r) * p
        prev_r = r
    return ap, ap_w


def test_all_correct_gives_ap_one():
    gts = [box(100, 100, 40, 30), box(300, 50, 60, 40)]
    dets = [box(100, 100, 40, 30, 0.9), box(300, 50, 60, 40, 0.8)]
    ap, ap_w = average_precision(dets, gts, W)
    assert ap == 1.0 and ap_w == 1.0


def test_correct_detection_scored_lower():
    # One GT; the wrong detection outranks the right one: precision history
    # {0, 1/2}; the single achieved recall level has envelope precision 1/2.
    gts = [box(100, 100, 40, 30)]
    dets = [box(400, 200, 40, 30, 0.9), box(100, 100, 40, 30, 0.6)]
    ap, ap_w = average_precision(dets, gts, W)
    assert ap == 0.5 and ap_w == 0.5


def test_no_detections_zero_ap():
    assert average_precision([], [box(10, 10, 5, 5)], W) == (0.0, 0.0)


def test_no_ground_truth_raises():
    with pytest.raises(NoGroundTruth):
        average_precision([box(10, 10, 5, 5)], [], W)


def test_wrap_aware_tp_criterion():
    # GT crosses the seam; a detection phrased on the other side matches.
    gts = [box(2.0, 100, 30, 20)]
    dets = [box(W - 1.0, 101, 30, 20, 0.9)]
    assert pano_iou(dets[0], gts[0], W) > 0.3
    ap, _ = average_precision(dets, gts, W)
    assert ap == 1.0


def test_iou_threshold_is_strict():
    # Construct IoU exactly 0.3: not a match ("higher than" is strict).
    a = box(100.0, 100.0, 30.0, 10.0, 0.9)
    g = box(100.0 + 30.0 * 0.7 / 1.3, 100.0, 30.0, 10.0)
    assert pano_iou(a, g, W) == pytest.approx(0.3, abs=1e-12)
    ap, _ = average_precision([a], [g], W, iou_th=0.3)
    assert ap == 0.0


def test_matches_bruteforce_oracle_on_random_fixtures():
    rng = np.random.default_rng(0)
    for trial in range(25):
        n_gt = int(rng.integers(1, 6))
        n_det = int(rng.integers(0, 9))
        gts = [box(float(rng.uniform(0, W)), float(rng.uniform(30, 220)),
                   float(rng.uniform(10, 80)), float(rng.uniform(10, 60))) for _ in range(n_gt)]
        dets = [box(float(rng.uniform(0, W)), float(rng.uniform(30, 220)),
                    float(rng.uniform(10, 80)), float(rng.uniform(10, 60)),
                    float(rng.uniform(0, 1))) for _ in range(n_det)]
        # Make some detections near-hits of ground truth.
        for g in gts:
            if rng.random() < 0.7 and dets:
                k = int(rng.integers(0, len(dets)))
                dets[k] = box(g.cx + float(rng.normal(0, 5)), g.cy + float(rng.normal(0, 4)),
                              g.w, g.h, float(rng.uniform(0, 1)))
        want = oracle_ap(dets, gts, W, 0.3)
        got = average_precision(dets, gts, W, 0.3)
        assert got[0] == pytest.approx(want[0], abs=1e-12)
        assert got[1] == pytest.approx(want[1], abs=1e-12)


def test_ap_invariant_under_monotone_score_transform():
    rng = np.random.default_rng(1)
    gts = [box(float(rng.uniform(0, W)), 100, 40, 30) for _ in range(4)]
    dets = [box(float(rng.uniform(0, W)), 100, 40, 30, float(s))
            for s in np.linspace(0.1, 0.9, 7)]
    base = average_precision(dets, gts, W)
    squashed = [PanoBox(d.class_id, d.score ** 3 / 2, d.cx, d.cy, d.w, d.h) for d in dets]
    assert average_precision(squashed, gts, W) == base


def test_weighted_map_formula():
    assert weighted_map([(1.0, 3), (0.0, 1)]) == pytest.approx(0.75)
    # Equal per-class APs collapse to that value.
    assert weighted_map([(0.4, 2), (0.4, 5), (0.4, 1)]) == pytest.approx(0.4)
    # Zero-detection classes carry no weight.
    assert weighted_map([(0.9, 4), (0.1, 0)]) == pytest.approx(0.9)
    with pytest.raises(EmptyEval):
        weighted_map([(1.0, 0)])


def test_weighted_map_reduces_to_mean_for_equal_counts():
    aps = [0.2, 0.5, 0.8]
    got = weighted_map([(a, 7) for a in aps])
    assert got == pytest.approx(np.mean(aps))


def test_mean_iou_identity():
    rng = np.random.default_rng(2)
    seg = rng.integers(0, 4, (8, 16))
    per, miou = mean_iou(seg, seg, 4)
    assert miou == 1.0


def test_mean_iou_half_background():
    gt = np.zeros((8, 16), dtype=int)
    gt[:, :8] = 1
    pred = np.zeros((8, 16), dtype=int)
    per, miou = mean_iou(pred, gt, 3)
    assert per[0] == pytest.approx(0.5)
    assert per[1] == 0.0
    assert np.isnan(per[2])  # class 2 absent everywhere: excluded
    assert miou == pytest.approx(0.25)


def test_mean_iou_matches_set_counting_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        gt = rng.integers(0, 3, (8, 16))
        pred = rng.integers(0, 3, (8, 16))
        per, miou = mean_iou(pred, gt, 3)
        vals = []
        for c in range(3):
            gset = {(r, cc) for r in range(8) for cc in range(16) if gt[r, cc] == c}
            pset = {(r, cc) for r in range(8) for cc in range(16) if pred[r, cc] == c}
            if gset | pset:
                want = len(gset & pset) / len(gset | pset)
                assert per[c] == pytest.approx(want, abs=1e-12)
                vals.append(want)
        assert miou == pytest.approx(np.mean(vals), abs=1e-12)


def test_mean_iou_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        mean_iou(np.zeros((4, 8)), np.zeros((4, 9)), 2)


def test_metrics_rotation_invariance():
    rng = np.random.default_rng(4)
    gt = rng.integers(0, 3, (16, 32))
    pred = rng.integers(0, 3, (16, 32))
    _, m0 = mean_iou(pred, gt, 3)
    _, m1 = mean_iou(np.roll(pred, 7, axis=1), np.roll(gt, 7, axis=1), 3)
    assert m0 == m1
    gts = [box(float(rng.uniform(0, W)), 100, 40, 30) for _ in range(4)]
    dets = [box(float(rng.uniform(0, W)), 102, 42, 28, float(rng.uniform(0, 1))) for _ in range(6)]
    base = average_precision(dets, gts, W)
    k = 123
    rg = [PanoBox(1, b.score, (b.cx + k) % W, b.cy, b.w, b.h) for b in gts]
    rd = [PanoBox(1, b.score, (b.cx + k) % W, b.cy, b.w, b.h) for b in dets]
    got = average_precision(rd, rg, W)
    assert got[0] == pytest.approx(base[0], abs=1e-12)
    assert got[1] == pytest.approx(base[1], abs=1e-12)


def test_evaluate_full_report():
    gts = [box(100, 100, 40, 30, cls=1), box(300, 60, 50, 40, cls=2), box(400, 120, 40, 40, cls=2)]
    dets = [box(100, 100, 40, 30, 0.9, cls=1), box(300, 60, 50, 40, 0.8, cls=2),
            box(50, 50, 40, 40, 0.7, cls=3)]  # class 3 has no GT
    rng = np.random.default_rng(5)
    gt_seg = rng.integers(0, 3, (256, 512))
    res = evaluate(dets, gts, W, ["background", "bed", "painting", "table"],
                   pred_seg=gt_seg, gt_seg=gt_seg)
    assert res.ap[1] == 1.0
    # Class 2: one perfect detection of two GTs. The simple AP averages the
    # envelope over achieved recall levels only (1.0); the AUC variant pays
    # for the unreached recall (0.5).
    assert res.ap[2] == 1.0
    assert res.ap_w[2] == pytest.approx(0.5)
    assert res.ap[3] is None  # no ground truth: reported absent
    assert res.n_detections == 2
    assert res.map_weighted == pytest.approx(1.0)
    assert res.map_w_weighted == pytest.approx(0.75)
    assert res.miou == 1.0
    doc = res.to_json()
    assert doc["per_class"]["table"]["ap"] is None
    assert doc["mAP"] == res.map_weighted
