"""Manhattan room model: plane maps, layout-guided mask refinement, and
3D object placement.

The camera sits at the origin with the floor one room unit below it (all
geometry is up to scale; camera height anchors the unit). Walls are
vertical planes whose normals are Manhattan axes; each wall is stored as
``normal . X = offset`` with a positive offset.

Straight 3D segments seen from the panorama center project to great-circle
arcs, so object mask boundaries are approximated by up to four great
circles fitted with RANSAC. A fitted circle whose plane normal is
perpendicular to a Manhattan axis (within an angular threshold) is an image
of a 3D line along that axis; lines resting on a wall and on the floor pin
down a cuboid's back edge, top height, and footprint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    InsufficientBoundary,
    NoWallIntersection,
    OpenLayout,
    ShapeMismatch,
    UnderconstrainedCuboid,
)
from .sphere import check_pano_shape, dir_to_pixel, normalize, panorama_rays, pixel_to_dir

PLANE_FLOOR = 0
PLANE_CEILING = 1
PLANE_WALL0 = 2  # wall i gets plane id PLANE_WALL0 + i

AXIS_NAMES = ("x", "y", "z")
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class ManhattanFrame:
    """Three mutually orthogonal unit axes; the third is the vertical."""

    axes: np.ndarray  # (3, 3) rows: vp_x, vp_y, vp_z

    def __post_init__(self):
        a = np.asarray(self.axes, dtype=float)
        if a.shape != (3, 3):
            raise ShapeMismatch(f"axes must be (3, 3), got {a.shape}")
        if np.abs(np.linalg.norm(a, axis=1) - 1.0).max() > 1e-6:
            raise ValueError("axes must be unit vectors")
        g = a @ a.T
        if np.abs(g - np.eye(3)).max() > 1e-6:
            raise ValueError("axes must be mutually orthogonal")
        if abs(abs(a[2, 2]) - 1.0) > 1e-6:
            raise ValueError("third axis must be vertical (gravity-aligned)")
        if a[2, 2] < 0:
            a = a.copy()
            a[2] = -a[2]
        object.__setattr__(self, "axes", a)

    @staticmethod
    def identity() -> "ManhattanFrame":
        return ManhattanFrame(np.eye(3))

    @property
    def vp_x(self) -> np.ndarray:
        return self.axes[0]

    @property
    def vp_y(self) -> np.ndarray:
        return self.axes[1]

    @property
    def vp_z(self) -> np.ndarray:
        return self.axes[2]

    def horizontal_axis_index(self, v: np.ndarray) -> int:
        """0 or 1: which horizontal axis ``v`` is (anti)parallel to."""
        return int(np.argmax(np.abs(self.axes[:2] @ v)))


@dataclass
class LayoutModel:
    """Closed Manhattan wall loop with floor and ceiling heights.

    ``walls[i] = (unit normal, offset)`` with ``normal . X = offset`` and
    offset > 0 (normals point from the camera toward the wall). Wall i runs
    between floor corners i and i+1.
    """

    frame: ManhattanFrame
    walls: list[tuple[np.ndarray, float]]
    ceil_z: float
    floor_z: float = -1.0
    floor_corners_xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        if len(self.walls) < 4 or len(self.walls) % 2 != 0:
            raise OpenLayout(f"need an even number >= 4 of walls, got {len(self.walls)}")
        for i, (n, d) in enumerate(self.walls):
            nn = self.walls[(i + 1) % len(self.walls)][0]
            if abs(float(n @ nn)) > 1e-6:
                raise OpenLayout("adjacent wall normals must be orthogonal")
            if d <= 0:
                raise OpenLayout("wall offsets must be positive (camera inside)")
        if not (self.floor_z < 0.0 < self.ceil_z):
            raise OpenLayout("camera must sit between floor and ceiling")

    @property
    def num_planes(self) -> int:
        return PLANE_WALL0 + len(self.walls)

    def wall_inplane_axis(self, i: int) -> np.ndarray:
        """Unit horizontal direction lying in wall i."""
        n, _ = self.walls[i]
        return normalize(np.cross(self.frame.vp_z, n))

    @staticmethod
    def from_corners(
        floor_px: np.ndarray,
        ceil_px: np.ndarray,
        frame: ManhattanFrame,
        width: int,
        height: int,
        floor_z: float = -1.0,
    ) -> "LayoutModel":
        """Build the model from corner pixel coordinates.

        Floor corners must lie below the horizon and ceiling corners above;
        corner i of both lists sits on the same vertical room edge. Wall
        directions are snapped to the Manhattan axes.
        """
        check_pano_shape(width, height)
        floor_px = np.asarray(floor_px, dtype=float)
        ceil_px = np.asarray(ceil_px, dtype=float)
        if floor_px.shape != ceil_px.shape or floor_px.ndim != 2 or floor_px.shape[0] < 4:
            raise OpenLayout("need matching lists of >= 4 floor and ceiling corners")
        rays = pixel_to_dir(floor_px[:, 0], floor_px[:, 1], width, height)
        if np.any(rays[:, 2] >= 0):
            raise OpenLayout("floor corners must lie below the horizon")
        pts = rays * (floor_z / rays[:, 2])[:, None]

        n_c = len(pts)
        walls = []
        for i in range(n_c):
            e = pts[(i + 1) % n_c] - pts[i]
            axis = frame.horizontal_axis_index(e)
            n = frame.axes[1 - axis].copy()
            d = float(n @ (pts[i] + pts[(i + 1) % n_c]) / 2.0)
            if d < 0:
                n, d = -n, -d
            if d <= 0:
                raise OpenLayout("degenerate wall through the camera")
            walls.append((n, d))
        for i in range(n_c):
            if abs(float(walls[i][0] @ walls[(i + 1) % n_c][0])) > 1e-6:
                raise OpenLayout("consecutive edges map to the same Manhattan axis")

        # Regularized corners: intersection of adjacent wall planes.
        corners = []
        for i in range(n_c):
            n0, d0 = walls[i - 1]
            n1, d1 = walls[i]
            p = d0 * n0 + d1 * n1
            corners.append(p[:2])
        corners = np.asarray(corners)

        crays = pixel_to_dir(ceil_px[:, 0], ceil_px[:, 1], width, height)
        if np.any(crays[:, 2] <= 0):
            raise OpenLayout("ceiling corners must lie above the horizon")
        h_xy = np.linalg.norm(corners, axis=1)
        r_xy = np.linalg.norm(crays[:, :2], axis=1)
        ceil_z = float(np.mean(crays[:, 2] * h_xy / r_xy))
        return LayoutModel(
            frame=frame,
            walls=walls,
            ceil_z=ceil_z,
            floor_z=floor_z,
            floor_corners_xy=corners,
        )

    def corner_pixels(self, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
        """Render the model corners back to pixel coordinates."""
        fc = np.concatenate([self.floor_corners_xy,
                             np.full((len(self.floor_corners_xy), 1), self.floor_z)], axis=1)
        cc = fc.copy()
        cc[:, 2] = self.ceil_z
        fu, fv = dir_to_pixel(normalize(fc), width, height)
        cu, cv = dir_to_pixel(normalize(cc), width, height)
        return np.stack([fu, fv], axis=1), np.stack([cu, cv], axis=1)


def build_plane_map(layout: LayoutModel, width: int, height: int) -> np.ndarray:
    """Label every pixel with the nearest layout plane hit by its ray.

    Ids: 0 floor, 1 ceiling, 2+i wall i. The labeling is total: downward
    rays hit the floor, upward rays the ceiling, and the wall normals span
    all horizontal directions.
    """
    check_pano_shape(width, height)
    rays = panorama_rays(width, height)
    dz = rays[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        best_t = np.where(dz < 0, layout.floor_z / dz, np.inf)
        labels = np.full((height, width), PLANE_FLOOR, dtype=np.int32)
        t = np.where(dz > 0, layout.ceil_z / dz, np.inf)
        better = t < best_t
        best_t = np.where(better, t, best_t)
        labels[better] = PLANE_CEILING
        for i, (n, d) in enumerate(layout.walls):
            den = rays @ n
            t = np.where(den > 1e-12, d / den, np.inf)
            better = t < best_t
            best_t = np.where(better, t, best_t)
            labels[better] = PLANE_WALL0 + i
    return labels


# ---------------------------------------------------------------------------
# Wrap-aware mask morphology


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Mask pixels with a missing 4-neighbor, as (col, row) pairs.

    Columns wrap; the top and bottom image rows count as boundary. The
    pixels come back in a canonical order anchored at the start of the
    mask's minimal covering column arc, so the ordering commutes with
    horizontal rotation.
    """
    west = np.roll(mask, 1, axis=1)
    east = np.roll(mask, -1, axis=1)
    north = np.zeros_like(mask)
    north[1:] = mask[:-1]
    south = np.zeros_like(mask)
    south[:-1] = mask[1:]
    boundary = mask & ~(west & east & north & south)
    rows, cols = np.nonzero(boundary)
    if rows.size == 0:
        return np.zeros((0, 2), dtype=int)
    width = mask.shape[1]
    start = covering_arc_start(mask.any(axis=0))
    key = ((cols - start) % width) * mask.shape[0] + rows
    order = np.argsort(key, kind="stable")
    return np.stack([cols[order], rows[order]], axis=1)


def covering_arc_start(occupied_cols: np.ndarray) -> int:
    """First column of the minimal circular arc covering the occupied set."""
    occ = np.nonzero(occupied_cols)[0]
    width = occupied_cols.shape[0]
    if occ.size == 0 or occ.size == width:
        return 0
    gaps = np.diff(np.concatenate([occ, [occ[0] + width]]))
    k = int(np.argmax(gaps))
    return int((occ[k] + gaps[k]) % width)


def fill_holes_wrap(mask: np.ndarray) -> np.ndarray:
    """Fill interior holes, treating columns as periodic.

    A hole is a connected component of the complement that cannot reach the
    top or bottom image row (the only true 'outside' on the cylinder).
    """
    comp = ~mask
    lab, n = ndimage.label(comp, structure=_CROSS)
    if n == 0:
        return mask.copy()
    parent = np.arange(n + 1)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    left = lab[:, 0]
    right = lab[:, -1]
    for a, b in zip(left, right):
        if a > 0 and b > 0:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    roots = np.array([find(i) for i in range(n + 1)])
    outside = np.zeros(n + 1, dtype=bool)
    for lbl in np.concatenate([lab[0], lab[-1]]):
        if lbl > 0:
            outside[roots[lbl]] = True
    hole = comp & ~outside[roots[lab]]
    return mask | hole


def dilate_wrap(mask: np.ndarray, steps: int = 1) -> np.ndarray:
    """4-neighborhood dilation with periodic columns and clamped rows."""
    out = mask.copy()
    for _ in range(steps):
        north = np.zeros_like(out)
        north[:-1] = out[1:]
        south = np.zeros_like(out)
        south[1:] = out[:-1]
        out = out | np.roll(out, 1, axis=1) | np.roll(out, -1, axis=1) | north | south
    return out


# ---------------------------------------------------------------------------
# Rule-based mask refinement


@dataclass
class ClassRules:
    """Which geometric priors apply to each class id."""

    wall_classes: frozenset[int] = frozenset()
    cuboid_classes: frozenset[int] = frozenset()
    ceiling_classes: frozenset[int] = frozenset()
    clip_to_wall: frozenset[int] = frozenset()
    extend_to_floor: frozenset[int] = frozenset()


def majority_wall(mask: np.ndarray, plane_map: np.ndarray) -> int | None:
    """Wall index with the most mask pixels, or None if the mask misses walls."""
    vals = plane_map[mask]
    vals = vals[vals >= PLANE_WALL0]
    if vals.size == 0:
        return None
    ids, counts = np.unique(vals, return_counts=True)
    return int(ids[np.argmax(counts)] - PLANE_WALL0)


def _extend_mask_to_floor(mask: np.ndarray, plane_map: np.ndarray, wall_idx: int) -> np.ndarray:
    """Grow the mask downward, per column, to the bottom of its wall region."""
    height, width = mask.shape
    wall = plane_map == PLANE_WALL0 + wall_idx
    colmask = mask.any(axis=0)
    colwall = wall.any(axis=0)
    use = colmask & colwall
    if not use.any():
        return mask
    rev = mask[::-1]
    mask_bottom = height - 1 - np.argmax(rev, axis=0)
    wall_bottom = height - 1 - np.argmax(wall[::-1], axis=0)
    rr = np.arange(height)[:, None]
    add = use[None, :] & (rr > mask_bottom[None, :]) & (rr <= wall_bottom[None, :])
    return mask | add


def refine_masks(im, plane_map: np.ndarray, rules: ClassRules):
    """Apply layout priors to every instance of an instance map.

    Per class: wall-decoration classes are clipped to their majority wall;
    doors are extended down to the floor line of their wall; floor-standing
    classes lose any ceiling pixels; finally all masks get their interior
    holes filled (fill runs last so no filled pixel is lost again).
    Returns a new instance map; pixels removed from an instance become
    background.
    """
    from .instances import InstanceMap

    new_ids = im.ids.copy()
    new_classes = im.classes.copy()
    for iid in sorted(int(i) for i in np.unique(im.ids) if i > 0):
        mask0 = im.ids == iid
        cls = int(np.bincount(im.classes[mask0]).argmax())
        mask = mask0.copy()
        if cls in rules.clip_to_wall:
            w = majority_wall(mask, plane_map)
            if w is not None:
                mask &= plane_map == PLANE_WALL0 + w
        if cls in rules.cuboid_classes:
            mask &= plane_map != PLANE_CEILING
        if cls in rules.extend_to_floor:
            w = majority_wall(mask, plane_map)
            if w is not None:
                mask = _extend_mask_to_floor(mask, plane_map, w)
        if mask.any():
            mask = fill_holes_wrap(mask)
        removed = mask0 & ~mask
        new_ids[removed] = 0
        new_classes[removed] = 0
        new_ids[mask] = iid
        new_classes[mask] = cls
    return InstanceMap(ids=new_ids, classes=new_classes)


# ---------------------------------------------------------------------------
# Great-circle boundary lines


@dataclass
class RansacParams:
    tol_deg: float = 0.3
    iters: int = 500
    min_inlier_frac: float = 0.05
    min_inliers: int = 8
    max_lines: int = 4
    seed: int = 0


@dataclass
class FittedLine:
    """Great circle (plane through the camera) fitted to boundary pixels."""

    normal: np.ndarray
    inlier_px: np.ndarray  # (K, 2) (col, row)
    inlier_dirs: np.ndarray  # (K, 3)
    axis: str | None  # 'x' | 'y' | 'z' | None

    @property
    def inlier_count(self) -> int:
        return self.inlier_px.shape[0]


def classify_line_axis(normal: np.ndarray, frame: ManhattanFrame, theta_th: float) -> str | None:
    """Axis whose direction is perpendicular to the circle normal, if any.

    A 3D line along axis k projects to a great circle whose plane contains
    the axis direction, i.e. |normal . vp_k| <= sin(theta_th).
    """
    dots = np.abs(frame.axes @ normal)
    k = int(np.argmin(dots))
    if dots[k] <= np.sin(theta_th):
        return AXIS_NAMES[k]
    return None


def _lsq_plane_normal(dirs: np.ndarray) -> np.ndarray:
    """Unit normal minimizing sum of squared point-plane dots."""
    _, _, vt = np.linalg.svd(dirs, full_matrices=False)
    return vt[-1]


def fit_boundary_lines(
    mask: np.ndarray,
    frame: ManhattanFrame,
    theta_th: float = np.deg2rad(0.5),
    params: RansacParams | None = None,
) -> list[FittedLine]:
    """Fit up to ``max_lines`` great circles to a mask boundary via RANSAC.

    Two boundary directions give the minimal sample (normal = their cross
    product); the consensus fit is refined by least squares on its inliers,
    inliers are removed, and the search repeats. Each line is classified
    against the Manhattan axes within ``theta_th``.
    """
    params = params or RansacParams()
    height, width = mask.shape
    bpx = boundary_pixels(mask)
    min_inl = max(params.min_inliers, int(np.ceil(params.min_inlier_frac * len(bpx))))
    if len(bpx) < 2 * min_inl:
        raise InsufficientBoundary(f"{len(bpx)} boundary pixels, need >= {2 * min_inl}")
    dirs = pixel_to_dir(bpx[:, 0].astype(float), bpx[:, 1].astype(float), width, height)
    sin_tol = np.sin(np.deg2rad(params.tol_deg))
    rng = np.random.default_rng(params.seed)

    remaining = np.arange(len(bpx))
    lines: list[FittedLine] = []
    for _ in range(params.max_lines):
        if len(remaining) < min_inl:
            break
        d = dirs[remaining]
        i1 = rng.integers(0, len(remaining), params.iters)
        i2 = rng.integers(0, len(remaining), params.iters)
        n = np.cross(d[i1], d[i2])
        norms = np.linalg.norm(n, axis=1)
        valid = norms > 1e-12
        n[valid] /= norms[valid, None]
        scores = np.where(valid, (np.abs(d @ n.T) <= sin_tol).sum(axis=0), -1)
        best = int(np.argmax(scores))
        if scores[best] < min_inl:
            break
        normal = n[best]
        for _ in range(2):
            inl = np.abs(d @ normal) <= sin_tol
            if inl.sum() < 2:
                break
            normal = _lsq_plane_normal(d[inl])
        inl = np.abs(d @ normal) <= sin_tol
        if inl.sum() < min_inl:
            break
        idx = remaining[inl]
        lines.append(
            FittedLine(
                normal=normal,
                inlier_px=bpx[idx],
                inlier_dirs=dirs[idx],
                axis=classify_line_axis(normal, frame, theta_th),
            )
        )
        remaining = remaining[~inl]
    return lines


def line_contact_fraction(line: FittedLine, region: np.ndarray, tol_px: int = 2) -> float:
    """Fraction of the line's inlier pixels within ``tol_px`` of a region."""
    near = dilate_wrap(region, tol_px)
    cols = line.inlier_px[:, 0]
    rows = line.inlier_px[:, 1]
    return float(near[rows, cols].mean())


# ---------------------------------------------------------------------------
# 3D placement


@dataclass
class Object3D:
    """Placed object: a thin rectangle on a wall/ceiling or a free cuboid.

    ``pose`` is the center in room coordinates (camera at origin, camera
    height = 1 unit). ``yaw`` is the horizontal facing direction (away from
    the supporting wall, into the room). ``dims`` are extents in the
    object's local frame: (depth along facing, lateral, vertical height);
    wall rectangles have zero depth, ceiling rectangles zero height.
    """

    kind: str
    class_id: int
    pose: np.ndarray
    dims: np.ndarray
    yaw: float
    plane_id: int | None = None
    approximate: bool = False

    def local_axes(self) -> np.ndarray:
        """Rows: facing, lateral (left), up unit vectors."""
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "class": int(self.class_id),
            "pose": [float(x) for x in self.pose],
            "dims": [float(x) for x in self.dims],
            "yaw": float(self.yaw),
            "plane_id": None if self.plane_id is None else int(self.plane_id),
            "approximate": bool(self.approximate),
        }

    @staticmethod
    def from_json(d: dict) -> "Object3D":
        return Object3D(
            kind=d["kind"],
            class_id=int(d["class"]),
            pose=np.asarray(d["pose"], dtype=float),
            dims=np.asarray(d["dims"], dtype=float),
            yaw=float(d["yaw"]),
            plane_id=d.get("plane_id"),
            approximate=bool(d.get("approximate", False)),
        )


def _mask_rays(mask: np.ndarray) -> np.ndarray:
    rows, cols = np.nonzero(mask)
    return pixel_to_dir(cols.astype(float), rows.astype(float), mask.shape[1], mask.shape[0])


def _facing_yaw(n: np.ndarray) -> float:
    return float(np.arctan2(-n[1], -n[0]))


def place_wall_object(
    mask: np.ndarray,
    layout: LayoutModel,
    class_id: int,
    plane_map: np.ndarray | None = None,
) -> Object3D:
    """Project a wall-bound mask onto its majority wall plane.

    The object is the bounding rectangle (in wall coordinates) of the
    projected mask pixels.
    """
    if not mask.any():
        raise NoWallIntersection("empty mask")
    if plane_map is None:
        plane_map = build_plane_map(layout, mask.shape[1], mask.shape[0])
    w = majority_wall(mask, plane_map)
    if w is None:
        raise NoWallIntersection("mask does not overlap any wall region")
    n, d = layout.walls[w]
    a = layout.wall_inplane_axis(w)
    rays = _mask_rays(mask)
    den = rays @ n
    good = den > 1e-9
    if not good.any():
        raise NoWallIntersection("no mask ray hits the wall plane")
    pts = rays[good] * (d / den[good])[:, None]
    s = pts @ a
    z = pts[:, 2]
    center = n * d + a * (s.min() + s.max()) / 2.0 + np.array([0.0, 0.0, 1.0]) * (z.min() + z.max()) / 2.0
    dims = np.array([0.0, float(s.max() - s.min()), float(z.max() - z.min())])
    return Object3D(
        kind="wall_rect",
        class_id=class_id,
        pose=center,
        dims=dims,
        yaw=_facing_yaw(n),
        plane_id=PLANE_WALL0 + w,
    )


def place_ceiling_object(mask: np.ndarray, layout: LayoutModel, class_id: int) -> Object3D:
    """Project a ceiling-attached mask (lights) onto the ceiling plane."""
    if not mask.any():
        raise NoWallIntersection("empty mask")
    rays = _mask_rays(mask)
    good = rays[:, 2] > 1e-9
    if not good.any():
        raise NoWallIntersection("no mask ray hits the ceiling")
    pts = rays[good] * (layout.ceil_z / rays[good, 2])[:, None]
    # Frame-aligned footprint; facing follows the frame's first axis.
    sx = pts @ layout.frame.vp_x
    sy = pts @ layout.frame.vp_y
    cx = (sx.min() + sx.max()) / 2.0
    cy = (sy.min() + sy.max()) / 2.0
    center = layout.frame.vp_x * cx + layout.frame.vp_y * cy
    center[2] = layout.ceil_z
    dims = np.array([float(sx.max() - sx.min()), float(sy.max() - sy.min()), 0.0])
    return Object3D(
        kind="ceiling_rect",
        class_id=class_id,
        pose=center,
        dims=dims,
        yaw=float(np.arctan2(layout.frame.vp_x[1], layout.frame.vp_x[0])),
        plane_id=PLANE_CEILING,
    )


def place_cuboid(
    mask: np.ndarray,
    lines: list[FittedLine],
    layout: LayoutModel,
    class_id: int,
    plane_map: np.ndarray | None = None,
    contact_frac: float = 0.3,
    contact_tol_px: int = 2,
) -> Object3D:
    """Solve an axis-aligned cuboid from its wall- and floor-contact lines.

    The wall-contact line (resting on the back wall) fixes the top height
    and the back edge; the floor-contact line fixes the front footprint
    edge and, through its lateral extent, the width. Raises
    UnderconstrainedCuboid when either contact line is missing; callers may
    fall back to :func:`estimate_cuboid_footprint`.
    """
    if plane_map is None:
        plane_map = build_plane_map(layout, mask.shape[1], mask.shape[0])
    w = majority_wall(mask, plane_map)
    if w is None:
        raise UnderconstrainedCuboid("mask touches no wall region")
    n, d = layout.walls[w]
    a = layout.wall_inplane_axis(w)
    a_name = AXIS_NAMES[layout.frame.horizontal_axis_index(a)]

    wall_region = plane_map == PLANE_WALL0 + w
    floor_region = plane_map == PLANE_FLOOR
    z_axis = np.array([0.0, 0.0, 1.0])

    def pick(region):
        best = None
        for ln in lines:
            if ln.axis != a_name:
                continue
            if line_contact_fraction(ln, region, contact_tol_px) < contact_frac:
                continue
            if best is None or ln.inlier_count > best.inlier_count:
                best = ln
        return best

    wall_line = pick(wall_region)
    floor_line = pick(floor_region)
    if wall_line is None:
        raise UnderconstrainedCuboid("no line resting on the wall")
    if floor_line is None:
        raise UnderconstrainedCuboid("no line resting on the floor")

    # Snap each line exactly perpendicular to the in-wall axis, then solve.
    nl = normalize(wall_line.normal - (wall_line.normal @ a) * a)
    nf = normalize(floor_line.normal - (floor_line.normal @ a) * a)
    if abs(float(nl @ z_axis)) < 1e-9 or abs(float(nf @ n)) < 1e-9:
        raise UnderconstrainedCuboid("contact line degenerate for this wall")
    z_top = -d * float(nl @ n) / float(nl @ z_axis)
    q_front = -layout.floor_z * float(nf @ z_axis) / float(nf @ n)
    if not (layout.floor_z < z_top <= layout.ceil_z):
        raise UnderconstrainedCuboid(f"top height {z_top:.3f} outside the room")
    if not (0.0 < q_front < d):
        raise UnderconstrainedCuboid("front edge not between camera and wall")

    fr = floor_line.inlier_dirs
    down = fr[:, 2] < -1e-9
    if not down.any():
        raise UnderconstrainedCuboid("floor line has no downward rays")
    fpts = fr[down] * (layout.floor_z / fr[down, 2])[:, None]
    s = fpts @ a
    s0, s1 = float(s.min()), float(s.max())

    depth = d - q_front
    height = z_top - layout.floor_z
    center = n * (q_front + d) / 2.0 + a * (s0 + s1) / 2.0 + z_axis * (layout.floor_z + z_top) / 2.0
    return Object3D(
        kind="cuboid",
        class_id=class_id,
        pose=center,
        dims=np.array([depth, s1 - s0, height]),
        yaw=_facing_yaw(n),
        plane_id=PLANE_WALL0 + w,
    )


def estimate_cuboid_footprint(
    mask: np.ndarray,
    layout: LayoutModel,
    class_id: int,
    plane_map: np.ndarray | None = None,
) -> Object3D:
    """Approximate cuboid from floor-projected mask pixels.

    Fallback when contact lines are missing: the footprint is the bounding
    box of mask rays cast onto the floor; the height comes from where the
    silhouette's top rays pass over the footprint's near face. Flagged
    approximate.
    """
    if plane_map is None:
        plane_map = build_plane_map(layout, mask.shape[1], mask.shape[0])
    floor_mask = mask & (plane_map == PLANE_FLOOR)
    if not floor_mask.any():
        raise UnderconstrainedCuboid("mask has no floor pixels to project")
    rays = _mask_rays(floor_mask)
    pts = rays * (layout.floor_z / rays[:, 2])[:, None]
    # Frame-aligned footprint box.
    fx = pts @ layout.frame.vp_x
    fy = pts @ layout.frame.vp_y
    lo = np.array([fx.min(), fy.min()])
    hi = np.array([fx.max(), fy.max()])

    # Height: intersect every mask ray with the 2D footprint box; record the
    # z where the ray first crosses above it.
    all_rays = _mask_rays(mask)
    rxy = np.stack([all_rays @ layout.frame.vp_x, all_rays @ layout.frame.vp_y], axis=1)
    z_top = layout.floor_z
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = lo[None, :] / rxy
        t_hi = hi[None, :] / rxy
        t1 = np.minimum(t_lo, t_hi)
        t2 = np.maximum(t_lo, t_hi)
        t_entry = np.nanmax(t1, axis=1)
        t_exit = np.nanmin(t2, axis=1)
        ok = (t_exit >= t_entry) & (t_entry > 0)
        if ok.any():
            z = t_entry[ok] * all_rays[ok, 2]
            z = z[(z > layout.floor_z) & (z <= layout.ceil_z)]
            if z.size:
                z_top = float(z.max())
    cx, cy = (lo + hi) / 2.0
    center = layout.frame.vp_x * cx + layout.frame.vp_y * cy
    center[2] = (layout.floor_z + z_top) / 2.0
    return Object3D(
        kind="cuboid",
        class_id=class_id,
        pose=center,
        dims=np.array([hi[0] - lo[0], hi[1] - lo[1], z_top - layout.floor_z]),
        yaw=float(np.arctan2(layout.frame.vp_x[1], layout.frame.vp_x[0])),
        plane_id=None,
        approximate=True,
    )
