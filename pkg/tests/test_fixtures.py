import numpy as np
import pytest

from panoroom.errors import ObjectOutsideRoom
from panoroom.fixtures import (
    SyntheticScene,
    cuboid_against,
    generate_fixture,
    random_scene,
    render_object_mask,
    tight_pano_box,
    wall_rect_on,
)

BOUNDS = (-2.0, 2.5, -1.8, 2.2)
CEIL = 1.2
W, H = 1024, 512


def test_object_outside_room_rejected():
    big = cuboid_against(BOUNDS, "+x", 1, 0.0, 6.0, 1.0, 0.5)
    with pytest.raises(ObjectOutsideRoom):
        SyntheticScene(bounds=BOUNDS, ceil_z=CEIL, objects=[big], width=W, height=H)
    with pytest.raises(ObjectOutsideRoom):
        SyntheticScene(bounds=(0.5, 2.0, -1.0, 1.0), ceil_z=CEIL)  # camera outside


def test_tight_box_encloses_mask():
    cub = cuboid_against(BOUNDS, "+y", 1, 0.3, 0.7, 1.2, 0.5)
    mask = render_object_mask(cub, W, H)
    b = tight_pano_box(mask)
    rows = np.where(mask.any(axis=1))[0]
    assert b.cy - b.h / 2 == pytest.approx(rows.min() - 0.5 + 0.5, abs=0.51)
    assert b.h == rows.max() - rows.min() + 1
    # Every mask pixel's wrap distance from the box center fits inside.
    cols = np.where(mask.any(axis=0))[0]
    rel = (cols - (b.cx - b.w / 2.0)) % W
    assert rel.max() <= b.w - 0.5


def test_tight_box_seam_crossing():
    cub = cuboid_against(BOUNDS, "-x", 1, 0.05, 0.7, 1.2, 0.5)
    mask = render_object_mask(cub, W, H)
    occ = mask.any(axis=0)
    assert occ[0] and occ[-1]
    b = tight_pano_box(mask)
    assert b.w < W / 2  # not the naive full-width box


def test_fixture_jitter_zero_boxes_exact():
    scene = random_scene(11, n_cuboids=2, n_wall_rects=1)
    fb = generate_fixture(scene, seed=11, jitter=0.0)
    for det, mask in zip(fb.detections, fb.masks):
        want = tight_pano_box(mask)
        assert det.cx == want.cx and det.w == want.w
        assert det.cy == want.cy and det.h == want.h


def test_fixture_seed_stable():
    scene = random_scene(5)
    a = generate_fixture(scene, seed=9, jitter=1.5)
    b = generate_fixture(scene, seed=9, jitter=1.5)
    assert all(x.cx == y.cx and x.score == y.score for x, y in zip(a.detections, b.detections))
    assert np.array_equal(a.semantic, b.semantic)
    c = generate_fixture(scene, seed=10, jitter=1.5)
    assert any(x.cx != y.cx for x, y in zip(a.detections, c.detections))


def test_render_area_monotone_with_distance():
    # The same cuboid farther from the camera covers fewer pixels.
    areas = []
    for d in np.linspace(1.2, 2.4, 5):
        obj = cuboid_against((-d, d, -d, d), "+x", 1, 0.0, 0.6, 1.0, 0.5)
        areas.append(int(render_object_mask(obj, W, H).sum()))
    assert all(a > b for a, b in zip(areas, areas[1:]))


def test_wall_rect_mask_sits_on_wall():
    rect = wall_rect_on(BOUNDS, CEIL, "+y", 2, 0.2, 0.4, 1.0, 0.4)
    scene = SyntheticScene(bounds=BOUNDS, ceil_z=CEIL, objects=[rect], width=W, height=H)
    mask = render_object_mask(rect, W, H)
    from panoroom.layout3d import PLANE_WALL0, build_plane_map, majority_wall

    pm = build_plane_map(scene.layout_model(), W, H)
    w = majority_wall(mask, pm)
    n, d = scene.layout_model().walls[w]
    assert float(n @ rect.pose) == pytest.approx(d, abs=1e-9)


def test_random_scene_objects_disjoint():
    for seed in range(8):
        scene = random_scene(seed, n_cuboids=3, n_wall_rects=2)
        masks = [render_object_mask(o, scene.width, scene.height) for o in scene.objects]
        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                assert not (masks[i] & masks[j]).any()


def test_layout_json_schema_fields():
    scene = random_scene(3)
    doc = scene.layout_json()
    assert set(doc) == {"floor_corners", "ceiling_corners", "axes"}
    assert len(doc["floor_corners"]) == 4
    assert len(doc["axes"]) == 3
