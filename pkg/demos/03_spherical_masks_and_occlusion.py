"""Object masks from boundary points, composed under the occlusion rule.

The same four corner points rasterized planar vs. spherical: the spherical
version curves with the projection and survives the image seam. Overlaps
are resolved by the pairwise size rule (heavily-overlapped smaller object
is closer).
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from panoroom.maskgen import ObjectAnnotation, compose_semantic, rasterize_spherical_polygon

W, H = 1024, 512

# A wide, high quad: on the sphere its top and bottom edges bow toward the
# pole instead of staying straight raster rows.
quad = ObjectAnnotation(1, np.array([[300.0, 90.0], [620.0, 90.0], [620.0, 150.0], [300.0, 150.0]]))
mask_high = rasterize_spherical_polygon(quad, W, H)

# A seam-crossing object: just translate the boundary points; the mask
# comes out whole on both sides of u = 0.
seam = ObjectAnnotation(2, np.array([[980.0, 250.0], [60.0, 250.0], [60.0, 330.0], [980.0, 330.0]]))
mask_seam = rasterize_spherical_polygon(seam, W, H)

# Occlusion: a small object fully inside a large one stays visible.
big = ObjectAnnotation(3, np.array([[400.0, 300.0], [700.0, 300.0], [700.0, 430.0], [400.0, 430.0]]))
small = ObjectAnnotation(4, np.array([[500.0, 340.0], [600.0, 340.0], [600.0, 400.0], [500.0, 400.0]]))
masks = [mask_high, mask_seam,
         rasterize_spherical_polygon(big, W, H),
         rasterize_spherical_polygon(small, W, H)]
sem = compose_semantic(masks, [1, 2, 3, 4], tau=0.5)

areas = [int(m.sum()) for m in masks]
print("mask areas:", areas)
print("small object fully visible inside the big one:",
      bool((sem[masks[3]] == 4).all()))

fig, ax = plt.subplots(figsize=(10, 5))
ax.imshow(sem, interpolation="nearest", cmap="tab10", vmin=0, vmax=9)
ax.set_title("semantic map: curved contours, seam-crossing object, occlusion rule")
fig.tight_layout()
fig.savefig("demos/output/semantic_composition.png", dpi=110)
print("wrote demos/output/semantic_composition.png")
