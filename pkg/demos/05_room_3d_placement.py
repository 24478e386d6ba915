"""A synthetic room, rendered and recovered.

Ground-truth cuboids and wall rectangles are rendered to panorama masks by
ray casting; the pipeline gets only the composed semantic map, the tight
detection boxes, and the layout, and has to place the objects back in 3D.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from panoroom.fixtures import generate_fixture, random_scene
from panoroom.pipeline import PipelineConfig, layout_from_json, run_pipeline

scene = random_scene(12, n_cuboids=2, n_wall_rects=2, cuboid_classes=(1,), wall_classes=(2,))
fb = generate_fixture(scene, seed=12)
layout = layout_from_json(fb.layout, scene.width, scene.height)
res = run_pipeline(fb.semantic, fb.detections, layout, PipelineConfig())

print(f"room bounds {np.round(scene.bounds, 2)}, ceiling at {scene.ceil_z:.2f}")
print(f"{len(fb.gt_objects)} objects in, {len(res.objects)} recovered, "
      f"{len(res.errors)} placement errors")
for gt in fb.gt_objects:
    rec = min(res.objects, key=lambda o: np.linalg.norm(np.asarray(o.pose) - gt.pose))
    pose_err = np.linalg.norm(np.asarray(rec.pose) - gt.pose)
    print(f"  {gt.kind:<10} dims gt {np.round(gt.dims, 3)} -> rec {np.round(rec.dims, 3)}"
          f"  pose err {pose_err:.4f}")

fig, axes = plt.subplots(2, 1, figsize=(10, 8))
axes[0].imshow(fb.semantic, cmap="tab10", vmin=0, vmax=9, interpolation="nearest")
axes[0].set_title("composed semantic map (pipeline input)")
axes[1].imshow(res.plane_map, cmap="tab10", vmin=0, vmax=9, interpolation="nearest")
axes[1].set_title("room plane map: floor, ceiling, walls (from the layout)")
for ax in axes:
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig("demos/output/room_pipeline.png", dpi=110)

# Top-down view of the recovered scene vs ground truth.
fig, ax = plt.subplots(figsize=(6, 6))
x0, x1, y0, y1 = scene.bounds
ax.plot([x0, x1, x1, x0, x0], [y0, y0, y1, y1, y0], "k-", lw=2, label="room")
ax.plot(0, 0, "k*", markersize=12, label="camera")


def footprint(obj):
    axes_m = obj.local_axes()
    f, l = axes_m[0, :2], axes_m[1, :2]
    c = np.asarray(obj.pose)[:2]
    hd, hl = obj.dims[0] / 2.0, obj.dims[1] / 2.0
    corners = [c + sf * hd * f + sl * hl * l for sf, sl in
               [(-1, -1), (1, -1), (1, 1), (-1, 1), (-1, -1)]]
    return np.asarray(corners)


for gt in fb.gt_objects:
    fp = footprint(gt)
    ax.plot(fp[:, 0], fp[:, 1], "g-", lw=2)
for rec in res.objects:
    fp = footprint(rec)
    ax.plot(fp[:, 0], fp[:, 1], "r--", lw=1.5)
ax.plot([], [], "g-", label="ground truth")
ax.plot([], [], "r--", label="recovered")
ax.set_aspect("equal")
ax.legend()
ax.set_title("top-down: recovered objects over ground truth")
fig.tight_layout()
fig.savefig("demos/output/room_topdown.png", dpi=110)
print("wrote demos/output/room_pipeline.png and demos/output/room_topdown.png")
