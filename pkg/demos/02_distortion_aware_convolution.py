"""The distortion-adaptive convolution kernel, visualized.

Tap positions live on the tangent plane of the sphere at each output pixel,
one equator-pixel apart; mapped back to the raster they form a normal 3x3
stencil at the equator and spread horizontally like 1/cos(latitude) toward
the poles.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from panoroom.equiconv import EquiKernelSpec, build_sample_field, equiconv_forward

W, H = 512, 256
spec = EquiKernelSpec.for_grid(W, 5, 5)
field = build_sample_field(W, H, spec)

fig, ax = plt.subplots(figsize=(10, 5))
for row in (128, 96, 64, 40, 20, 6):
    coords = field.coords(row, W // 2).reshape(-1, 2)
    lat = 90 - (row + 0.5) * 180 / H
    ax.scatter(coords[:, 0], coords[:, 1], s=8, label=f"row {row} ({lat:.0f} deg)")
ax.set_xlim(W // 2 - 40, W // 2 + 40)
ax.set_ylim(H, 0)
ax.set_title("5x5 kernel tap positions at different latitudes")
ax.set_xlabel("column")
ax.set_ylabel("row")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig("demos/output/equiconv_taps.png", dpi=110)
print("wrote demos/output/equiconv_taps.png")

# At the equator the operator reduces to a standard convolution.
spec3 = EquiKernelSpec.for_grid(W)
field3 = build_sample_field(W, H, spec3)
rng = np.random.default_rng(0)
x = rng.random((1, H, W))
w = rng.normal(size=(1, 1, 3, 3))
y = equiconv_forward(x, w, field3)
std = np.zeros((H, W))
for i in range(3):
    for j in range(3):
        std += w[0, 0, i, j] * np.roll(x[0], (-(i - 1), -(j - 1)), axis=(0, 1))
rows = [H // 2 - 1, H // 2]
rel = np.abs(y[0][rows] - std[rows]).max() / np.abs(std[rows]).max()
print(f"agreement with a standard 3x3 stencil on the equator rows: {rel:.2e}")

# Column rotation commutes with the operator bit for bit.
k = 123
same = np.array_equal(
    equiconv_forward(np.roll(x, k, axis=-1), w, field3),
    np.roll(y, k, axis=-1),
)
print("column-rotation equivariance (bitwise):", same)
