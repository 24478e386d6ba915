"""Equirectangular-panorama scene understanding toolkit.

Submodules:

* ``sphere``: pixel/direction conversions, geodesics, wrap arithmetic.
* ``equiconv``: distortion-adaptive convolution operator with gradients.
* ``anchors``: multi-scale panoramic anchor boxes, wrap-aware IoU, NMS.
* ``maskgen``: spherical polygon rasterization and occlusion composition.
* ``instances``: Gaussian/Mahalanobis instance assignment.
* ``layout3d``: plane maps, layout-prior mask refinement, 3D placement.
* ``metrics``: weighted mAP and mean IoU.
* ``fixtures``: synthetic-room rendering oracle.
* ``pipeline``: end-to-end orchestration and file formats.
* ``cli``: command-line front end (``panoroom`` entry point).
"""

__version__ = "0.1.0"

from . import anchors, equiconv, errors, fixtures, instances, io, layout3d, maskgen, metrics, pipeline, sphere

__all__ = [
    "anchors",
    "equiconv",
    "errors",
    "fixtures",
    "instances",
    "io",
    "layout3d",
    "maskgen",
    "metrics",
    "pipeline",
    "sphere",
]
