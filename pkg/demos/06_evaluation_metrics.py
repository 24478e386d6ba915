"""Detection and segmentation scoring on a toy benchmark.

Detections count as true positives at wrap-aware IoU > 0.3; per-class APs
are combined with detection-count weights so rare classes do not dominate.
"""

import numpy as np

from panoroom.anchors import PanoBox
from panoroom.fixtures import generate_fixture, random_scene
from panoroom.metrics import evaluate

scene = random_scene(33, n_cuboids=3, n_wall_rects=2, cuboid_classes=(1,), wall_classes=(2,))
fb_gt = generate_fixture(scene, seed=33, jitter=0.0)
fb_noisy = generate_fixture(scene, seed=34, jitter=6.0)

# Add one confident false positive and shuffle scores a bit.
rng = np.random.default_rng(0)
preds = list(fb_noisy.detections)
preds.append(PanoBox(class_id=1, score=0.97, cx=float(rng.uniform(0, scene.width)),
                     cy=float(rng.uniform(100, 400)), w=80.0, h=60.0))

# Simulate an imperfect segmentation: the predicted map lags a few columns.
pred_seg = np.roll(fb_gt.semantic, 9, axis=1)

names = ["background", "bed", "painting"]
res = evaluate(preds, fb_gt.detections, scene.width, names,
               pred_seg=pred_seg, gt_seg=fb_gt.semantic)
doc = res.to_json()
for name in names[1:]:
    row = doc["per_class"][name]
    print(f"{name:<10} AP={row['ap']}  AP_w={row['ap_w']}  detections={row['detections']}  IoU={row['iou']}")
print(f"weighted mAP = {doc['mAP']:.3f}   weighted mAP_w = {doc['mAP_w']:.3f}   mIoU = {doc['mIoU']:.3f}")
