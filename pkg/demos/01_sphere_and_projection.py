"""Pixels and directions on the equirectangular sphere.

Round trips, square angular pixels, geodesics, and what a "straight line"
looks like in a panorama.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from panoroom.sphere import dir_to_pixel, geodesic_arc, normalize, pixel_to_dir

W, H = 1024, 512

# Every pixel column is a longitude, every row a latitude; with W = 2H the
# angular pixels are square (2*pi/W == pi/H).
print("angular pixel size:", 2 * np.pi / W, "==", np.pi / H)

# The projection and its inverse agree to machine precision away from poles.
rng = np.random.default_rng(0)
d = normalize(rng.normal(size=(10_000, 3)))
u, v = dir_to_pixel(d, W, H)
err = np.abs(pixel_to_dir(u, v, W, H) - d).max()
print(f"round-trip max error over 10k random directions: {err:.2e}")

# A 3D straight segment seen from the panorama center projects to a
# great-circle arc. Draw a few arcs; near the poles they bend strongly.
fig, ax = plt.subplots(figsize=(10, 5))
for lat0 in np.deg2rad([0, 30, 55, 75]):
    a = np.array([np.cos(lat0), 0.0, np.sin(lat0)])
    b = np.array([0.0, np.cos(lat0), np.sin(lat0)])
    arc = geodesic_arc(a, b, 200)
    au, av = dir_to_pixel(arc, W, H)
    ax.plot(au, av, label=f"endpoints at {np.rad2deg(lat0):.0f} deg latitude")
ax.set_xlim(0, W)
ax.set_ylim(H, 0)
ax.set_xlabel("column (longitude)")
ax.set_ylabel("row (latitude)")
ax.legend()
ax.set_title("Great-circle arcs between equal-latitude endpoints")
fig.tight_layout()
fig.savefig("demos/output/geodesic_arcs.png", dpi=110)
print("wrote demos/output/geodesic_arcs.png")
