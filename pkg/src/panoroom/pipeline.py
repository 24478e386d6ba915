"""End-to-end orchestration on stored detections, semantic maps, and layouts.

The pipeline is a pure function of its inputs, the configuration, and one
seed: detections + semantic map -> instance map -> layout-refined instance
map -> per-object 3D placement. Every artifact lands in an output directory
with a content-hash manifest, so re-running with identical inputs is
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .anchors import AnchorConfig, PanoBox
from .errors import (
    NoWallIntersection,
    PanoroomError,
    ShapeMismatch,
    UnderconstrainedCuboid,
)
from .instances import CHI2_99_2DOF, InstanceMap, assign_instances, reclaim_unassigned
from .layout3d import (
    ClassRules,
    LayoutModel,
    ManhattanFrame,
    Object3D,
    RansacParams,
    build_plane_map,
    estimate_cuboid_footprint,
    fit_boundary_lines,
    place_ceiling_object,
    place_cuboid,
    place_wall_object,
    refine_masks,
)
from .maskgen import DEFAULT_OCCLUSION_TAU

# The 14 annotated object classes; index 0 is background.
DEFAULT_CLASS_NAMES = [
    "background", "bed", "painting", "table", "mirror", "window", "curtain",
    "chair", "light", "sofa", "door", "cabinet", "bedside", "tv", "shelf",
]
WALL_CLASS_NAMES = ("painting", "mirror", "window", "tv", "door", "curtain", "shelf")
CUBOID_CLASS_NAMES = ("bed", "table", "chair", "sofa", "cabinet", "bedside")
CEILING_CLASS_NAMES = ("light",)
CLIP_CLASS_NAMES = ("painting", "mirror", "window", "tv")
EXTEND_CLASS_NAMES = ("door",)

DETECTIONS_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["class", "score", "cx", "cy", "w", "h"],
        "properties": {
            "class": {"type": "integer", "minimum": 0},
            "score": {"type": "number", "minimum": 0, "maximum": 1},
            "cx": {"type": "number"},
            "cy": {"type": "number"},
            "w": {"type": "number", "exclusiveMinimum": 0},
            "h": {"type": "number", "exclusiveMinimum": 0},
        },
        "additionalProperties": False,
    },
}

LAYOUT_SCHEMA = {
    "type": "object",
    "required": ["floor_corners", "ceiling_corners", "axes"],
    "properties": {
        "floor_corners": {
            "type": "array",
            "minItems": 4,
            "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
        },
        "ceiling_corners": {
            "type": "array",
            "minItems": 4,
            "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
        },
        "axes": {
            "type": "array",
            "minItems": 3,
            "maxItems": 3,
            "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}},
        },
    },
    "additionalProperties": False,
}

SCENE_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["kind", "class", "pose", "dims", "yaw"],
        "properties": {
            "kind": {"enum": ["wall_rect", "cuboid", "ceiling_rect"]},
            "class": {"type": "integer", "minimum": 0},
            "pose": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}},
            "dims": {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}},
            "yaw": {"type": "number"},
            "plane_id": {"type": ["integer", "null"]},
            "approximate": {"type": "boolean"},
        },
        "additionalProperties": False,
    },
}

ANNOTATIONS_SCHEMA = {
    "type": "object",
    "required": ["width", "height", "objects"],
    "properties": {
        "width": {"type": "integer", "minimum": 2},
        "height": {"type": "integer", "minimum": 1},
        "objects": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["class", "points"],
                "properties": {
                    "class": {"type": "integer", "minimum": 1},
                    "instance": {"type": "integer", "minimum": 1},
                    "points": {
                        "type": "array",
                        "minItems": 3,
                        "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
                    },
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}


@dataclass
class PipelineConfig:
    """Every tunable the pipeline exposes, JSON-serializable.

    Defaults: chi-squared gate at the 99% quantile (2 dof), occlusion
    threshold 0.5 of the smaller mask, line-direction threshold 0.5 deg,
    detection confidence cut 0.5.
    """

    class_names: list[str] = field(default_factory=lambda: list(DEFAULT_CLASS_NAMES))
    wall_classes: list[str] = field(default_factory=lambda: list(WALL_CLASS_NAMES))
    cuboid_classes: list[str] = field(default_factory=lambda: list(CUBOID_CLASS_NAMES))
    ceiling_classes: list[str] = field(default_factory=lambda: list(CEILING_CLASS_NAMES))
    clip_to_wall: list[str] = field(default_factory=lambda: list(CLIP_CLASS_NAMES))
    extend_to_floor: list[str] = field(default_factory=lambda: list(EXTEND_CLASS_NAMES))
    chi2_threshold: float = CHI2_99_2DOF
    occlusion_tau: float = DEFAULT_OCCLUSION_TAU
    theta_th_deg: float = 0.5
    confidence_cut: float = 0.5
    # Re-attach chi-squared-rejected pixels to the unique adjacent
    # same-class instance before refinement (see instances.reclaim_unassigned).
    reclaim_unassigned: bool = True
    detection_iou_th: float = 0.3
    ransac_tol_deg: float = 0.3
    ransac_iters: int = 500
    ransac_min_inlier_frac: float = 0.05
    ransac_min_inliers: int = 8
    ransac_max_lines: int = 4
    seed: int = 0
    anchor_grids: list[list[int]] = field(default_factory=lambda: [[r, 2 * r] for r in (128, 64, 32, 16, 8, 4, 2, 1)])
    anchor_ratios: list[float] = field(default_factory=lambda: [1.0, 2.0, 0.5, 3.0, 1.0 / 3.0])
    anchor_scale_base: float = 1.0

    def class_id(self, name: str) -> int:
        return self.class_names.index(name)

    def class_rules(self) -> ClassRules:
        ids = {n: i for i, n in enumerate(self.class_names)}
        pick = lambda names: frozenset(ids[n] for n in names if n in ids)
        return ClassRules(
            wall_classes=pick(self.wall_classes),
            cuboid_classes=pick(self.cuboid_classes),
            ceiling_classes=pick(self.ceiling_classes),
            clip_to_wall=pick(self.clip_to_wall),
            extend_to_floor=pick(self.extend_to_floor),
        )

    def ransac_params(self) -> RansacParams:
        return RansacParams(
            tol_deg=self.ransac_tol_deg,
            iters=self.ransac_iters,
            min_inlier_frac=self.ransac_min_inlier_frac,
            min_inliers=self.ransac_min_inliers,
            max_lines=self.ransac_max_lines,
            seed=self.seed,
        )

    def anchor_config(self) -> AnchorConfig:
        return AnchorConfig(
            grids=tuple((int(r), int(c)) for r, c in self.anchor_grids),
            ratios=tuple(self.anchor_ratios),
            scale_base=self.anchor_scale_base,
        )

    def to_json(self) -> dict:
        return {
            "class_names": self.class_names,
            "wall_classes": self.wall_classes,
            "cuboid_classes": self.cuboid_classes,
            "ceiling_classes": self.ceiling_classes,
            "clip_to_wall": self.clip_to_wall,
            "extend_to_floor": self.extend_to_floor,
            "chi2_threshold": self.chi2_threshold,
            "occlusion_tau": self.occlusion_tau,
            "theta_th_deg": self.theta_th_deg,
            "confidence_cut": self.confidence_cut,
            "reclaim_unassigned": self.reclaim_unassigned,
            "detection_iou_th": self.detection_iou_th,
            "ransac_tol_deg": self.ransac_tol_deg,
            "ransac_iters": self.ransac_iters,
            "ransac_min_inlier_frac": self.ransac_min_inlier_frac,
            "ransac_min_inliers": self.ransac_min_inliers,
            "ransac_max_lines": self.ransac_max_lines,
            "seed": self.seed,
            "anchor_grids": self.anchor_grids,
            "anchor_ratios": self.anchor_ratios,
            "anchor_scale_base": self.anchor_scale_base,
        }

    @staticmethod
    def from_json(doc: dict) -> "PipelineConfig":
        cfg = PipelineConfig()
        unknown = set(doc) - set(cfg.to_json())
        if unknown:
            raise PanoroomError(f"unknown config keys: {sorted(unknown)}")
        return replace(cfg, **doc)

    @staticmethod
    def load(path) -> "PipelineConfig":
        return PipelineConfig.from_json(io.read_json(path))


def detections_to_json(dets: list[PanoBox]) -> list[dict]:
    return [
        {"class": int(b.class_id), "score": float(b.score), "cx": float(b.cx),
         "cy": float(b.cy), "w": float(b.w), "h": float(b.h)}
        for b in dets
    ]


def detections_from_json(doc) -> list[PanoBox]:
    io.validate_schema(doc, DETECTIONS_SCHEMA, "detections")
    return [
        PanoBox(class_id=int(d["class"]), score=float(d["score"]), cx=float(d["cx"]),
                cy=float(d["cy"]), w=float(d["w"]), h=float(d["h"]))
        for d in doc
    ]


def layout_from_json(doc, width: int, height: int) -> LayoutModel:
    io.validate_schema(doc, LAYOUT_SCHEMA, "layout")
    frame = ManhattanFrame(np.asarray(doc["axes"], dtype=float))
    return LayoutModel.from_corners(
        np.asarray(doc["floor_corners"], dtype=float),
        np.asarray(doc["ceiling_corners"], dtype=float),
        frame,
        width,
        height,
    )


def scene_to_json(objs: list[Object3D]) -> list[dict]:
    return [o.to_json() for o in objs]


def scene_from_json(doc) -> list[Object3D]:
    io.validate_schema(doc, SCENE_SCHEMA, "scene")
    return [Object3D.from_json(d) for d in doc]


@dataclass
class PipelineResult:
    instances: InstanceMap
    refined: InstanceMap
    objects: list[Object3D]
    errors: list[dict]
    plane_map: np.ndarray


def place_objects(
    refined: InstanceMap,
    layout: LayoutModel,
    plane_map: np.ndarray,
    cfg: PipelineConfig,
) -> tuple[list[Object3D], list[dict]]:
    """Route every instance to its placement rule; collect non-fatal errors."""
    rules = cfg.class_rules()
    theta = np.deg2rad(cfg.theta_th_deg)
    objects: list[Object3D] = []
    errors: list[dict] = []
    for iid in sorted(int(i) for i in np.unique(refined.ids) if i > 0):
        mask = refined.ids == iid
        cls = int(np.bincount(refined.classes[mask]).argmax())
        try:
            if cls in rules.ceiling_classes:
                obj = place_ceiling_object(mask, layout, cls)
            elif cls in rules.cuboid_classes:
                params = replace(cfg.ransac_params(), seed=cfg.seed + iid)
                lines = fit_boundary_lines(mask, layout.frame, theta, params)
                try:
                    obj = place_cuboid(mask, lines, layout, cls, plane_map)
                except UnderconstrainedCuboid:
                    obj = estimate_cuboid_footprint(mask, layout, cls, plane_map)
            else:
                # Wall classes and anything unrouted: project onto the wall.
                obj = place_wall_object(mask, layout, cls, plane_map)
            objects.append(obj)
        except (PanoroomError, ValueError) as e:
            errors.append({"instance": iid, "class": cls, "error": type(e).__name__, "detail": str(e)})
    return objects, errors


def run_pipeline(
    semantic: np.ndarray,
    detections: list[PanoBox],
    layout: LayoutModel,
    cfg: PipelineConfig | None = None,
) -> PipelineResult:
    """Detections + semantic map + layout -> instances, refined map, scene."""
    cfg = cfg or PipelineConfig()
    height, width = semantic.shape
    if width != 2 * height:
        raise ShapeMismatch(f"semantic map must be W = 2H, got {semantic.shape}")
    dets = [d for d in detections if d.score >= cfg.confidence_cut]
    instances = assign_instances(semantic, dets, cfg.chi2_threshold)
    staged = reclaim_unassigned(instances, semantic) if cfg.reclaim_unassigned else instances
    plane_map = build_plane_map(layout, width, height)
    refined = refine_masks(staged, plane_map, cfg.class_rules())
    objects, errors = place_objects(refined, layout, plane_map, cfg)
    return PipelineResult(
        instances=instances,
        refined=refined,
        objects=objects,
        errors=errors,
        plane_map=plane_map,
    )


def write_pipeline_outputs(result: PipelineResult, out_dir, cfg: PipelineConfig) -> dict:
    """Serialize all artifacts plus a content-hash manifest; returns it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_instance_png(out / "instances.png", result.instances.ids)
    io.write_class_png(out / "instance_classes.png", result.instances.classes)
    io.write_instance_png(out / "instances_refined.png", result.refined.ids)
    io.write_class_png(out / "instance_classes_refined.png", result.refined.classes)
    io.write_class_png(out / "plane_map.png", result.plane_map)
    io.write_json(out / "scene.json", scene_to_json(result.objects))
    io.write_json(out / "instance_table.json", {
        "pixel_counts": {str(k): v for k, v in result.refined.pixel_counts().items()},
        "placement_errors": result.errors,
    })
    io.write_json(out / "config.json", cfg.to_json())
    names = [
        "instances.png", "instance_classes.png", "instances_refined.png",
        "instance_classes_refined.png", "plane_map.png", "scene.json",
        "instance_table.json", "config.json",
    ]
    manifest = {
        "artifacts": {name: io.sha256_file(out / name) for name in names},
        "seed": cfg.seed,
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest
