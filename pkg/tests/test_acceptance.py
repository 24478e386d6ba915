"""Acceptance suite: one test per release criterion, tolerances pinned.

Each test prints one `ACCEPTANCE <name>: PASS|FAIL` line (visible with
`pytest -s` or in failure output).
"""

import time
from itertools import permutations

import numpy as np
import pytest

from panoroom.anchors import PanoBox, pano_iou
from panoroom.equiconv import EquiKernelSpec, build_sample_field, equiconv_backward, equiconv_forward
from panoroom.fixtures import generate_fixture, random_scene
from panoroom.instances import CHI2_99_2DOF, GaussianInstance, assign_instances, mahalanobis2
from panoroom.layout3d import (
    ClassRules,
    build_plane_map,
    fit_boundary_lines,
    majority_wall,
    refine_masks,
    PLANE_WALL0,
)
from panoroom.maskgen import compose_semantic
from panoroom.metrics import average_precision, mean_iou, weighted_map
from panoroom.pipeline import PipelineConfig, layout_from_json, run_pipeline
from panoroom.sphere import yaw_rotation

from test_instances import oracle_assign, random_fixture
from test_layout3d import make_instance_map
from test_maskgen import make_rect_mask, occlusion_oracle_two
from test_metrics import oracle_ap


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {name}: {status} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Distortion-aware convolution


def test_equiconv_equator_agreement():
    # 256x128 random input, nonzero only in the 20 equator rows; compare
    # against a standard 3x3 stencil on those rows at 1e-3 relative max
    # error, in under 5 s.
    t0 = time.monotonic()
    W, H = 256, 128
    field = build_sample_field(W, H, EquiKernelSpec.for_grid(W))
    rng = np.random.default_rng(42)
    x = np.zeros((1, H, W))
    band = slice(H // 2 - 10, H // 2 + 10)
    x[0, band] = rng.random((20, W))
    w = rng.normal(size=(1, 1, 3, 3))
    y = equiconv_forward(x, w, field)

    std = np.zeros_like(x[0])
    for i in range(3):
        for j in range(3):
            std += w[0, 0, i, j] * np.roll(x[0], (-(i - 1), -(j - 1)), axis=(0, 1))
    rel = float(np.abs(y[0][band] - std[band]).max() / np.abs(std[band]).max())
    elapsed = time.monotonic() - t0
    report(
        "equiconv-equator-agreement",
        rel < 1e-3 and elapsed < 5.0,
        f"rel_err={rel:.3e} (limit 1e-3), elapsed={elapsed:.2f}s",
    )


def test_equiconv_column_rotation_equivariance():
    W, H = 256, 128
    field = build_sample_field(W, H, EquiKernelSpec.for_grid(W))
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, H, W))
    w = rng.normal(size=(3, 2, 3, 3))
    y = equiconv_forward(x, w, field)
    ok = True
    for k in (1, 37, W // 2):
        a = equiconv_forward(np.roll(x, k, axis=-1), w, field)
        ok = ok and np.array_equal(a, np.roll(y, k, axis=-1))
    report("equiconv-rotation-equivariance", ok, "bitwise, k in {1, 37, W/2}")


def test_equiconv_gradient_check():
    W, H = 32, 16
    field = build_sample_field(W, H, EquiKernelSpec.for_grid(W))
    rng = np.random.default_rng(2)
    x = rng.normal(size=(1, H, W))
    w = rng.normal(size=(2, 1, 3, 3))
    g = rng.normal(size=(2, H, W))
    gx, gw = equiconv_backward(g, x, w, field)
    h = 1e-5

    def loss(xx, ww):
        return float(np.sum(equiconv_forward(xx, ww, field) * g))

    worst = 0.0
    for r in range(0, H, 3):
        for c in range(0, W, 7):
            xp, xm = x.copy(), x.copy()
            xp[0, r, c] += h
            xm[0, r, c] -= h
            fd = (loss(xp, w) - loss(xm, w)) / (2 * h)
            worst = max(worst, abs(fd - gx[0, r, c]) / max(1e-8, abs(fd)))
    for o in range(2):
        for i in range(3):
            for j in range(3):
                wp, wm = w.copy(), w.copy()
                wp[o, 0, i, j] += h
                wm[o, 0, i, j] -= h
                fd = (loss(x, wp) - loss(x, wm)) / (2 * h)
                worst = max(worst, abs(fd - gw[o, 0, i, j]) / max(1e-8, abs(fd)))
    report("equiconv-gradients", worst < 1e-4, f"max_rel_err={worst:.3e} (limit 1e-4)")


# ---------------------------------------------------------------------------
# Instance assignment


def test_instance_assignment_oracle_and_containment():
    rng = np.random.default_rng(3)
    ok = True
    for _ in range(50):
        sem, dets = random_fixture(rng, width=64, height=32, n_dets=10)
        im = assign_instances(sem, dets, CHI2_99_2DOF)
        ok = ok and np.array_equal(im.ids, oracle_assign(sem, dets, CHI2_99_2DOF))

    box = PanoBox(1, 0.9, 30.0, 16.0, 12.0, 6.0)
    g = GaussianInstance.from_box(box, 1)
    corner = mahalanobis2(box.cx + 6.0, box.cy + 3.0, g, 64.0)
    ok_corner = corner == 18.0

    mc = np.random.default_rng(4)
    gm = GaussianInstance(1, 1, 500.0, 300.0, 24.0, 12.0)
    u = mc.normal(gm.cx, gm.sigma_w, 100_000)
    v = mc.normal(gm.cy, gm.sigma_h, 100_000)
    frac = float((mahalanobis2(u, v, gm, 2048.0) <= 9.21).mean())
    ok_mc = abs(frac - 0.99) <= 0.01
    report(
        "instance-assignment",
        ok and ok_corner and ok_mc,
        f"oracle_equal={ok}, corner_d2=={float(corner)}, containment={frac:.4f}",
    )


# ---------------------------------------------------------------------------
# Occlusion composition


def test_occlusion_composition():
    rng = np.random.default_rng(5)
    ok_pairs = True
    fixtures = [
        (make_rect_mask(50, 150, 50, 250), make_rect_mask(80, 120, 100, 160)),  # containment
        (make_rect_mask(50, 100, 100, 200), make_rect_mask(60, 110, 150, 260)),  # partial
        (make_rect_mask(10, 30, 10, 40), make_rect_mask(60, 90, 100, 140)),  # disjoint
        (make_rect_mask(40, 90, 480, 512) | make_rect_mask(40, 90, 0, 30),
         make_rect_mask(50, 80, 500, 512) | make_rect_mask(50, 80, 0, 10)),  # seam
    ]
    for _ in range(60):
        r0, c0 = rng.integers(0, 190), rng.integers(0, 420)
        r1, c1 = rng.integers(0, 190), rng.integers(0, 420)
        fixtures.append((
            make_rect_mask(r0, r0 + rng.integers(8, 60), c0, c0 + rng.integers(8, 80)),
            make_rect_mask(r1, r1 + rng.integers(8, 60), c1, c1 + rng.integers(8, 80)),
        ))
    for a, b in fixtures:
        if a.sum() == b.sum():
            continue
        sem = compose_semantic([a, b], [1, 2], tau=0.5)
        ok_pairs = ok_pairs and np.array_equal(sem, occlusion_oracle_two(a, b, 1, 2, 0.5))

    ok_perm = True
    count = 0
    while count < 100:
        masks = []
        for _ in range(3):
            r0, c0 = rng.integers(0, 180), rng.integers(0, 400)
            masks.append(make_rect_mask(r0, r0 + rng.integers(10, 70), c0, c0 + rng.integers(10, 100)))
        if len({m.sum() for m in masks}) < 3:
            continue
        count += 1
        ref = compose_semantic(masks, [1, 2, 3], tau=0.5)
        for perm in permutations(range(3)):
            got = compose_semantic([masks[i] for i in perm], [i + 1 for i in perm], tau=0.5)
            ok_perm = ok_perm and np.array_equal(got, ref)
    report("occlusion-composition", ok_pairs and ok_perm,
           f"pairwise_oracle={ok_pairs}, permutation_invariant={ok_perm}")


# ---------------------------------------------------------------------------
# Metrics


def test_metrics_against_oracles():
    # Weighted mean: hand-computed fixtures, exact.
    ok_map = (
        weighted_map([(1.0, 3), (0.0, 1)]) == 0.75
        and weighted_map([(0.5, 2), (0.25, 1), (1.0, 1)]) == 0.5625
        and weighted_map([(0.375, 2), (0.375, 5), (0.375, 1)]) == 0.375
    )

    # Mean IoU vs set counting, exact.
    rng = np.random.default_rng(6)
    ok_miou = True
    for _ in range(10):
        gt = rng.integers(0, 3, (8, 16))
        pred = rng.integers(0, 3, (8, 16))
        per, miou = mean_iou(pred, gt, 3)
        vals = []
        for c in range(3):
            gset = {(r, cc) for r in range(8) for cc in range(16) if gt[r, cc] == c}
            pset = {(r, cc) for r in range(8) for cc in range(16) if pred[r, cc] == c}
            if gset | pset:
                want = len(gset & pset) / len(gset | pset)
                ok_miou = ok_miou and per[c] == want
                vals.append(per[c])
        ok_miou = ok_miou and miou == np.nanmean(np.array(vals))

    # AP vs the brute-force PR oracle on 25 random fixtures.
    W = 512
    ok_ap = True
    for _ in range(25):
        n_gt = int(rng.integers(1, 6))
        n_det = int(rng.integers(0, 9))
        gts = [PanoBox(1, 1.0, float(rng.uniform(0, W)), float(rng.uniform(30, 220)),
                       float(rng.uniform(10, 80)), float(rng.uniform(10, 60))) for _ in range(n_gt)]
        dets = [PanoBox(1, float(rng.uniform(0, 1)), float(rng.uniform(0, W)),
                        float(rng.uniform(30, 220)), float(rng.uniform(10, 80)),
                        float(rng.uniform(10, 60))) for _ in range(n_det)]
        for g in gts:
            if rng.random() < 0.7 and dets:
                k = int(rng.integers(0, len(dets)))
                dets[k] = PanoBox(1, float(rng.uniform(0, 1)), g.cx + float(rng.normal(0, 5)),
                                  g.cy + float(rng.normal(0, 4)), g.w, g.h)
        want = oracle_ap(dets, gts, W, 0.3)
        got = average_precision(dets, gts, W, 0.3)
        ok_ap = ok_ap and abs(got[0] - want[0]) < 1e-12 and abs(got[1] - want[1]) < 1e-12

    # Wrap-aware strict TP criterion at IoU 0.3.
    gt = PanoBox(1, 1.0, 2.0, 100.0, 30.0, 20.0)
    det = PanoBox(1, 0.9, float(W - 1.0), 101.0, 30.0, 20.0)
    ok_wrap = pano_iou(det, gt, W) > 0.3 and average_precision([det], [gt], W)[0] == 1.0
    at = PanoBox(1, 0.9, 100.0, 100.0, 30.0, 10.0)
    gt2 = PanoBox(1, 1.0, 100.0 + 30.0 * 0.7 / 1.3, 100.0, 30.0, 10.0)
    ok_wrap = ok_wrap and average_precision([at], [gt2], W)[0] == 0.0

    report("metrics", ok_map and ok_miou and ok_ap and ok_wrap,
           f"weighted_map={ok_map}, miou={ok_miou}, ap_oracle={ok_ap}, wrap_tp={ok_wrap}")


# ---------------------------------------------------------------------------
# 3D round trip


@pytest.fixture(scope="module")
def room_fixtures():
    rooms = []
    for seed in range(20):
        rng = np.random.default_rng(seed + 1000)
        n_cuboids = int(rng.integers(1, 5))
        scene = random_scene(seed, n_cuboids=n_cuboids, n_wall_rects=2,
                             cuboid_classes=(1,), wall_classes=(2,))
        rooms.append((scene, generate_fixture(scene, seed=seed)))
    return rooms


def test_3d_round_trip(room_fixtures):
    t0 = time.monotonic()
    cfg = PipelineConfig()
    worst_dim, worst_center = 0.0, 0.0
    labels_ok = True
    n_cuboids = n_rects = 0
    for scene, fb in room_fixtures:
        layout = layout_from_json(fb.layout, scene.width, scene.height)
        res = run_pipeline(fb.semantic, fb.detections, layout, cfg)
        room_w = max(scene.bounds[1] - scene.bounds[0], scene.bounds[3] - scene.bounds[2])
        for gt, mask in zip(fb.gt_objects, fb.masks):
            best = min(res.objects, key=lambda o: np.linalg.norm(np.asarray(o.pose) - gt.pose))
            if gt.kind == "cuboid":
                n_cuboids += 1
                worst_dim = max(worst_dim, float(np.abs((np.asarray(best.dims) - gt.dims) / gt.dims).max()))
            else:
                n_rects += 1
                worst_center = max(worst_center,
                                   float(np.linalg.norm(np.asarray(best.pose) - gt.pose)) / room_w)
                lines = fit_boundary_lines(mask, scene.frame, theta_th=np.deg2rad(0.5))
                lab = sorted(str(l.axis) for l in lines)
                labels_ok = labels_ok and lab.count("z") == 2 and "None" not in lab and len(lab) == 4
    elapsed = time.monotonic() - t0
    report(
        "3d-round-trip",
        worst_dim < 0.05 and worst_center < 0.02 and labels_ok and elapsed < 60.0,
        f"{n_cuboids} cuboids worst_dim={worst_dim:.4f} (limit .05), "
        f"{n_rects} rects worst_center={worst_center:.4f} (limit .02), "
        f"labels_ok={labels_ok}, elapsed={elapsed:.1f}s (limit 60)",
    )


def test_rotation_equivariance_end_to_end(room_fixtures):
    scene, fb = room_fixtures[7]
    W = scene.width
    cfg = PipelineConfig()
    layout = layout_from_json(fb.layout, W, scene.height)
    res = run_pipeline(fb.semantic, fb.detections, layout, cfg)

    delta = np.pi / 2
    rot = yaw_rotation(delta)
    k = W // 4
    sem_r = np.roll(fb.semantic, k, axis=1)
    dets_r = [PanoBox(d.class_id, d.score, (d.cx + k) % W, d.cy, d.w, d.h) for d in fb.detections]
    lay = {
        "floor_corners": [[(u + k) % W, v] for u, v in fb.layout["floor_corners"]],
        "ceiling_corners": [[(u + k) % W, v] for u, v in fb.layout["ceiling_corners"]],
        "axes": (np.asarray(fb.layout["axes"]) @ rot.T).tolist(),
    }
    res_r = run_pipeline(sem_r, dets_r, layout_from_json(lay, W, scene.height), cfg)

    ok = len(res.objects) == len(res_r.objects)
    worst = 0.0
    for o in res.objects:
        want = rot @ np.asarray(o.pose)
        best = min(res_r.objects, key=lambda q: np.linalg.norm(np.asarray(q.pose) - want))
        worst = max(worst, float(np.linalg.norm(np.asarray(best.pose) - want)))
        worst = max(worst, float(np.abs(np.asarray(best.dims) - o.dims).max()))
        dyaw = (best.yaw - o.yaw - delta + np.pi) % (2 * np.pi) - np.pi
        worst = max(worst, abs(dyaw))
    report("rotation-equivariance-end-to-end", ok and worst < 1e-6,
           f"max deviation {worst:.2e} (limit 1e-6)")


# ---------------------------------------------------------------------------
# Layout refinement behavior


def test_layout_refinement_behavior(room_fixtures):
    scene, _ = room_fixtures[0]
    W, H = scene.width, scene.height
    layout = scene.layout_model()
    pm = build_plane_map(layout, W, H)

    # Door mask ending above the floor line gets extended down to it.
    wall_id = PLANE_WALL0
    wall_cols = np.where((pm == wall_id).any(axis=0))[0]
    u0 = int(np.median(wall_cols))
    wall_rows = np.where(pm[:, u0] == wall_id)[0]
    door = np.zeros((H, W), dtype=bool)
    door[wall_rows.min() + 3:wall_rows.max() - 5, u0 - 10:u0 + 10] = True
    # Painting straddling two walls, ~90/10.
    row = H // 2
    cols = pm[row]
    corner_u = next(u for u in range(W) if cols[u] != cols[(u + 1) % W])
    paint = np.zeros((H, W), dtype=bool)
    paint[np.ix_(range(row - 12, row + 12), [(corner_u - 53 + i) % W for i in range(60)])] = True
    # Mask with an interior hole.
    holed = np.zeros((H, W), dtype=bool)
    holed[H // 3:H // 3 + 40, 200:260] = True
    holed[H // 3 + 10:H // 3 + 30, 220:240] = False

    im = make_instance_map([(door, 10), (paint, 2), (holed, 7)], (H, W))
    rules = ClassRules(clip_to_wall=frozenset({2}), extend_to_floor=frozenset({10}))
    out = refine_masks(im, pm, rules)

    new_door = out.ids == 1
    door_ok = all(new_door[np.where(pm[:, u] == wall_id)[0].max(), u]
                  for u in range(u0 - 10, u0 + 10)) and (new_door & door).sum() == door.sum()

    new_paint = out.ids == 2
    w_major = majority_wall(paint, pm)
    paint_ok = (new_paint.sum() > 0
                and (pm[new_paint] == PLANE_WALL0 + w_major).all()
                and new_paint.sum() < paint.sum())

    new_holed = out.ids == 3
    hole_ok = new_holed[H // 3 + 20, 230] and new_holed.sum() == 60 * 40
    again = refine_masks(out, pm, rules)
    hole_kept = ((again.ids == 3) & new_holed).sum() == new_holed.sum()

    report("layout-refinement", door_ok and paint_ok and hole_ok and hole_kept,
           f"door_extended={door_ok}, painting_clipped={paint_ok}, "
           f"holes_filled={hole_ok}, fills_never_lost={hole_kept}")
