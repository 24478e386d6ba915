"""Synthetic Manhattan rooms rendered to panorama masks.

This is the testing oracle for the 3D placement pipeline: scenes are built
from known ground-truth objects, rendered to per-object masks by ray
casting, and the pipeline has to recover the objects from the masks alone.

Rooms are boxes in the Manhattan frame with the camera at the origin, floor
at z = -1 (camera height = 1 room unit) and a configurable ceiling height.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anchors import PanoBox
from .errors import ObjectOutsideRoom
from .layout3d import LayoutModel, ManhattanFrame, Object3D, covering_arc_start
from .maskgen import compose_instances
from .sphere import check_pano_shape, normalize, panorama_rays

FLOOR_Z = -1.0


@dataclass
class SyntheticScene:
    """Box room with ground-truth objects, in frame coordinates.

    ``bounds`` is (x0, x1, y0, y1) along the frame's horizontal axes; the
    camera (origin) must be inside. Objects are ground-truth
    :class:`Object3D` records; cuboids rest on the floor flush against a
    wall, wall rectangles sit on a wall plane.
    """

    bounds: tuple[float, float, float, float]
    ceil_z: float
    objects: list[Object3D] = field(default_factory=list)
    frame: ManhattanFrame = field(default_factory=ManhattanFrame.identity)
    width: int = 1024
    height: int = 512

    def __post_init__(self):
        check_pano_shape(self.width, self.height)
        x0, x1, y0, y1 = self.bounds
        if not (x0 < 0.0 < x1 and y0 < 0.0 < y1):
            raise ObjectOutsideRoom("camera (origin) must be inside the room bounds")
        if self.ceil_z <= 0.0:
            raise ObjectOutsideRoom("ceiling must be above the camera")
        for obj in self.objects:
            self._check_inside(obj)

    def _check_inside(self, obj: Object3D, tol: float = 1e-6) -> None:
        x0, x1, y0, y1 = self.bounds
        axes = obj.local_axes()
        half = obj.dims / 2.0
        corners = []
        for sx in (-1, 1):
            for sy in (-1, 1):
                for sz in (-1, 1):
                    corners.append(obj.pose + axes.T @ (half * np.array([sx, sy, sz])))
        corners = np.asarray(corners)
        fx = corners @ self.frame.vp_x
        fy = corners @ self.frame.vp_y
        fz = corners[:, 2]
        if (fx.min() < x0 - tol or fx.max() > x1 + tol
                or fy.min() < y0 - tol or fy.max() > y1 + tol
                or fz.min() < FLOOR_Z - tol or fz.max() > self.ceil_z + tol):
            raise ObjectOutsideRoom(f"object {obj.kind}/{obj.class_id} leaves the room box")

    def floor_corners_xy(self) -> np.ndarray:
        """Room floor corners (frame coords), counter-clockwise."""
        x0, x1, y0, y1 = self.bounds
        return np.array([[x1, y0], [x1, y1], [x0, y1], [x0, y0]])

    def layout_model(self) -> LayoutModel:
        corners = self.floor_corners_xy()
        world = corners @ self.frame.axes[:2]  # frame coords -> world xy
        walls = []
        n_c = len(corners)
        for i in range(n_c):
            p0, p1 = world[i], world[(i + 1) % n_c]
            e = np.array([p1[0] - p0[0], p1[1] - p0[1], 0.0])
            axis = self.frame.horizontal_axis_index(e)
            n = self.frame.axes[1 - axis].copy()
            d = float(n @ (p0 + p1) / 2.0)
            if d < 0:
                n, d = -n, -d
            walls.append((n, d))
        return LayoutModel(
            frame=self.frame,
            walls=walls,
            ceil_z=self.ceil_z,
            floor_z=FLOOR_Z,
            floor_corners_xy=world[:, :2],
        )

    def layout_json(self) -> dict:
        layout = self.layout_model()
        floor_px, ceil_px = layout.corner_pixels(self.width, self.height)
        return {
            "floor_corners": [[float(u), float(v)] for u, v in floor_px],
            "ceiling_corners": [[float(u), float(v)] for u, v in ceil_px],
            "axes": [[float(x) for x in row] for row in self.frame.axes],
        }


def _object_corners(obj: Object3D) -> np.ndarray:
    axes = obj.local_axes()
    half = obj.dims / 2.0
    corners = []
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                corners.append(obj.pose + axes.T @ (half * np.array([sx, sy, sz])))
    return np.asarray(corners)


_EDGE_PAIRS = [
    (i, j)
    for i in range(8)
    for j in range(i + 1, 8)
    if bin(i ^ j).count("1") == 1  # corners indexed by sign bits; edges flip one
]


def _silhouette_window(obj: Object3D, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Conservative (rows, cols) index window containing the silhouette.

    Latitude extremes of a convex box seen from the origin live on corners
    or at the horizontal perpendicular foot of an edge; longitude extremes
    live on corners (no object edge is radial in these scenes).
    """
    pts = [_object_corners(obj)]
    corners = pts[0]
    for i, j in _EDGE_PAIRS:
        p0, p1 = corners[i], corners[j]
        a = p1 - p0
        a2 = a[0] ** 2 + a[1] ** 2
        if a2 > 1e-12:
            t = np.clip(-(p0[0] * a[0] + p0[1] * a[1]) / a2, 0.0, 1.0)
            pts.append((p0 + t * a)[None])
    pts = np.concatenate(pts, axis=0)
    lat = np.arctan2(pts[:, 2], np.hypot(pts[:, 0], pts[:, 1]))
    v = (np.pi / 2.0 - lat) * height / np.pi - 0.5
    r0 = max(0, int(np.floor(v.min())) - 2)
    r1 = min(height - 1, int(np.ceil(v.max())) + 2)
    rows = np.arange(r0, r1 + 1)

    lon = np.arctan2(pts[:, 1], pts[:, 0])
    u = np.round((lon + np.pi) * width / (2.0 * np.pi) - 0.5).astype(int) % width
    occ = np.zeros(width, dtype=bool)
    occ[u] = True
    start = covering_arc_start(occ)
    rel = (np.nonzero(occ)[0] - start) % width
    span = int(rel.max()) + 1
    if span + 4 >= width:
        cols = np.arange(width)
    else:
        cols = (np.arange(start - 2, start + span + 2)) % width
    return rows, cols


def render_object_mask(obj: Object3D, width: int, height: int, rays: np.ndarray | None = None) -> np.ndarray:
    """Silhouette of one object seen from the origin, as a boolean mask."""
    if rays is None:
        rays = panorama_rays(width, height)
    rows, cols = _silhouette_window(obj, width, height)
    rays = rays[np.ix_(rows, cols)]
    axes = obj.local_axes()
    r_local = rays @ axes.T
    c_local = axes @ obj.pose
    half = obj.dims / 2.0

    if obj.kind == "cuboid":
        lo = c_local - half
        hi = c_local + half
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = lo / r_local
            t_hi = hi / r_local
            t1 = np.minimum(t_lo, t_hi)
            t2 = np.maximum(t_lo, t_hi)
            # Degenerate axes (ray component ~0): inside-slab check.
            flat = np.abs(r_local) < 1e-12
            inside = (lo <= 0.0) & (0.0 <= hi)
            t1 = np.where(flat, np.where(inside, -np.inf, np.inf), t1)
            t2 = np.where(flat, np.where(inside, np.inf, -np.inf), t2)
            t_entry = t1.max(axis=-1)
            t_exit = t2.min(axis=-1)
        hit = (t_exit >= t_entry) & (t_exit > 0)
    elif obj.kind in ("wall_rect", "ceiling_rect"):
        if obj.kind == "wall_rect":
            n_local = np.array([1.0, 0.0, 0.0])  # plane normal along facing
            ext_axes, ext = (1, 2), (half[1], half[2])
        else:
            n_local = np.array([0.0, 0.0, 1.0])
            ext_axes, ext = (0, 1), (half[0], half[1])
        d = float(n_local @ c_local)
        den = r_local @ n_local
        sgn = np.sign(d) if d != 0 else 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(sgn * den > 1e-12, d / den, np.nan)
        hit = np.isfinite(t) & (t > 0)
        p0 = t[..., None] * r_local - c_local
        for ax, e in zip(ext_axes, ext):
            hit = hit & (np.abs(p0[..., ax]) <= e + 1e-12)
    else:
        raise ValueError(f"cannot render kind {obj.kind!r}")

    mask = np.zeros((height, width), dtype=bool)
    mask[np.ix_(rows, cols)] = hit
    return mask


def tight_pano_box(mask: np.ndarray, class_id: int = 0, score: float = 1.0) -> PanoBox:
    """Smallest wrap-aware box enclosing a mask's pixels."""
    if not mask.any():
        raise ValueError("empty mask has no bounding box")
    height, width = mask.shape
    occ = mask.any(axis=0)
    start = covering_arc_start(occ)
    cols = np.nonzero(occ)[0]
    rel = (cols - start) % width
    w = float(rel.max() + 1)
    cx = (start + rel.max() / 2.0) % width
    rows = np.nonzero(mask.any(axis=1))[0]
    h = float(rows.max() - rows.min() + 1)
    cy = (rows.min() + rows.max()) / 2.0
    return PanoBox(class_id=class_id, score=score, cx=float(cx), cy=float(cy), w=w, h=h)


@dataclass
class FixtureBundle:
    """Everything a pipeline run needs, plus the ground truth to score it."""

    scene: SyntheticScene
    masks: list[np.ndarray]
    semantic: np.ndarray
    instance_ids: np.ndarray
    detections: list[PanoBox]
    layout: dict
    gt_objects: list[Object3D]


def generate_fixture(scene: SyntheticScene, seed: int = 0, jitter: float = 0.0) -> FixtureBundle:
    """Render a scene into masks, detections, a semantic map, and GT JSON.

    ``jitter`` adds N(0, jitter^2) pixel noise to each detection box edge;
    at zero the boxes exactly enclose the masks. Scores are drawn from the
    seeded generator, so the output is reproducible.
    """
    rng = np.random.default_rng(seed)
    rays = panorama_rays(scene.width, scene.height)
    masks = [render_object_mask(o, scene.width, scene.height, rays) for o in scene.objects]
    dets = []
    for obj, m in zip(scene.objects, masks):
        box = tight_pano_box(m, class_id=obj.class_id, score=float(rng.uniform(0.7, 1.0)))
        if jitter > 0.0:
            du0, du1, dv0, dv1 = rng.normal(0.0, jitter, 4)
            u0 = box.cx - box.w / 2.0 + du0
            u1 = box.cx + box.w / 2.0 + du1
            v0 = box.cy - box.h / 2.0 + dv0
            v1 = box.cy + box.h / 2.0 + dv1
            box = PanoBox(
                class_id=box.class_id,
                score=box.score,
                cx=((u0 + u1) / 2.0) % scene.width,
                cy=(v0 + v1) / 2.0,
                w=max(1.0, u1 - u0),
                h=max(1.0, v1 - v0),
            )
        dets.append(box)
    class_ids = [o.class_id for o in scene.objects]
    semantic, ids = compose_instances(masks, class_ids)
    return FixtureBundle(
        scene=scene,
        masks=masks,
        semantic=semantic,
        instance_ids=ids,
        detections=dets,
        layout=scene.layout_json(),
        gt_objects=list(scene.objects),
    )


def wall_rect_on(
    scene_bounds: tuple[float, float, float, float],
    ceil_z: float,
    wall: str,
    class_id: int,
    center_s: float,
    center_z: float,
    length: float,
    height: float,
    frame: ManhattanFrame | None = None,
) -> Object3D:
    """Ground-truth rectangle on one of the four box-room walls.

    ``wall`` is one of '+x', '-x', '+y', '-y' (frame axes); ``center_s`` is
    the lateral position along the wall's in-plane axis.
    """
    frame = frame or ManhattanFrame.identity()
    x0, x1, y0, y1 = scene_bounds
    offs = {"+x": x1, "-x": -x0, "+y": y1, "-y": -y0}
    axis = {"+x": frame.vp_x, "-x": -frame.vp_x, "+y": frame.vp_y, "-y": -frame.vp_y}
    n = axis[wall]
    d = offs[wall]
    lateral = normalize(np.cross(np.array([0.0, 0.0, 1.0]), n))
    pose = n * d + lateral * center_s + np.array([0.0, 0.0, center_z])
    return Object3D(
        kind="wall_rect",
        class_id=class_id,
        pose=pose,
        dims=np.array([0.0, length, height]),
        yaw=float(np.arctan2(-n[1], -n[0])),
    )


def cuboid_against(
    scene_bounds: tuple[float, float, float, float],
    wall: str,
    class_id: int,
    center_s: float,
    depth: float,
    length: float,
    height: float,
    frame: ManhattanFrame | None = None,
) -> Object3D:
    """Ground-truth cuboid resting on the floor, flush against one wall."""
    frame = frame or ManhattanFrame.identity()
    x0, x1, y0, y1 = scene_bounds
    offs = {"+x": x1, "-x": -x0, "+y": y1, "-y": -y0}
    axis = {"+x": frame.vp_x, "-x": -frame.vp_x, "+y": frame.vp_y, "-y": -frame.vp_y}
    n = axis[wall]
    d = offs[wall]
    lateral = normalize(np.cross(np.array([0.0, 0.0, 1.0]), n))
    pose = n * (d - depth / 2.0) + lateral * center_s + np.array([0.0, 0.0, FLOOR_Z + height / 2.0])
    return Object3D(
        kind="cuboid",
        class_id=class_id,
        pose=pose,
        dims=np.array([depth, length, height]),
        yaw=float(np.arctan2(-n[1], -n[0])),
    )


def _lon_interval(obj: Object3D) -> tuple[float, float]:
    """Conservative (start, width) longitude arc covered by the silhouette."""
    axes = obj.local_axes()
    half = obj.dims / 2.0
    lons = []
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                c = obj.pose + axes.T @ (half * np.array([sx, sy, sz]))
                lons.append(np.arctan2(c[1], c[0]))
    lons = np.sort(np.asarray(lons))
    gaps = np.diff(np.concatenate([lons, [lons[0] + 2 * np.pi]]))
    k = int(np.argmax(gaps))
    start = lons[(k + 1) % len(lons)]
    return float(start), float(2 * np.pi - gaps[k])


def _arcs_disjoint(a: tuple[float, float], b: tuple[float, float], margin: float) -> bool:
    from .sphere import wrap_interval_overlap

    return wrap_interval_overlap(
        (a[0] - margin, a[1] + 2 * margin), b, 2 * np.pi
    ) == 0.0


def random_scene(
    seed: int,
    n_cuboids: int = 2,
    n_wall_rects: int = 2,
    width: int = 2048,
    height: int = 1024,
    cuboid_classes: tuple[int, ...] = (1,),
    wall_classes: tuple[int, ...] = (2,),
) -> SyntheticScene:
    """Seeded random box room with flush cuboids and wall rectangles.

    Placement is rejection-sampled so object silhouettes occupy disjoint
    longitude arcs, objects subtend healthy angles (boundary arcs long
    enough for sub-degree line fits), and no silhouette edge degenerates
    through the camera. Cuboids sit below the horizon, wall rectangles
    above it.
    """
    rng = np.random.default_rng(seed)
    x1, y1 = rng.uniform(1.5, 2.6, 2)
    x0, y0 = -rng.uniform(1.5, 2.6, 2)
    ceil_z = float(rng.uniform(0.8, 1.5))
    bounds = (float(x0), float(x1), float(y0), float(y1))
    walls = ["+x", "-x", "+y", "-y"]
    spans = {"+x": (y0, y1), "-x": (y0, y1), "+y": (x0, x1), "-y": (x0, x1)}
    # The lateral coordinate runs along z x n; for -x and +y walls it is
    # anti-aligned with the frame axis, so flip the admissible span.
    flip = {"+x": 1.0, "-x": -1.0, "+y": -1.0, "-y": 1.0}

    objects: list[Object3D] = []
    arcs: list[tuple[float, float]] = []

    def try_place(make) -> None:
        for _ in range(50):
            obj = make()
            if obj is None:
                continue
            arc = _lon_interval(obj)
            if all(_arcs_disjoint(arc, other, 0.04) for other in arcs):
                objects.append(obj)
                arcs.append(arc)
                return

    offs = {"+x": x1, "-x": -x0, "+y": y1, "-y": -y0}
    order = rng.permutation(len(walls))
    for k in range(n_cuboids):
        wall = walls[order[k % 4]]
        lo, hi = spans[wall]

        def make_cuboid(wall=wall, lo=lo, hi=hi, k=k):
            length = float(rng.uniform(1.0, 1.7))
            # Keep the front face >= 1.1 units from the camera so one object
            # cannot monopolize the longitude budget.
            d_max = max(0.35, min(1.0, offs[wall] - 1.1))
            depth = float(rng.uniform(0.3, d_max))
            hgt = float(rng.uniform(0.35, 0.75))
            margin = 0.2
            s_lo, s_hi = lo + margin + length / 2.0, hi - margin - length / 2.0
            if s_hi <= s_lo:
                return None
            s = float(rng.uniform(s_lo, s_hi)) * flip[wall]
            cls = cuboid_classes[k % len(cuboid_classes)]
            return cuboid_against(bounds, wall, cls, s, depth, length, hgt)

        try_place(make_cuboid)
    for k in range(n_wall_rects):
        wall = walls[order[(k + n_cuboids) % 4]]
        lo, hi = spans[wall]

        def make_rect(wall=wall, lo=lo, hi=hi, k=k):
            length = float(rng.uniform(0.9, 1.4))
            hgt = float(rng.uniform(0.3, 0.55))
            margin = 0.25
            s_lo, s_hi = lo + margin + length / 2.0, hi - margin - length / 2.0
            if s_hi <= s_lo:
                return None
            s = float(rng.uniform(s_lo, s_hi)) * flip[wall]
            # Keep horizontal edges clearly off the horizon so their image
            # curvature spreads them over several pixel rows.
            z_lo = 0.22 + hgt / 2.0
            z_hi = ceil_z - 0.1 - hgt / 2.0
            if z_hi <= z_lo:
                return None
            cz = float(rng.uniform(z_lo, z_hi))
            cls = wall_classes[k % len(wall_classes)]
            return wall_rect_on(bounds, ceil_z, wall, cls, s, cz, length, hgt)

        try_place(make_rect)
    return SyntheticScene(bounds=bounds, ceil_z=ceil_z, objects=objects, width=width, height=height)
