"""Command-line front end.

Every subcommand takes explicit input/output paths plus an optional
``--config`` JSON file; nothing depends on the working directory. Exit
codes: 0 success, 2 schema/input error, 3 numeric check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import PanoroomError, SchemaError
from .fixtures import generate_fixture, random_scene
from .instances import InstanceMap, assign_instances, instance_to_semantic
from .layout3d import build_plane_map, refine_masks
from .maskgen import ObjectAnnotation, compose_semantic, rasterize_spherical_polygon
from .metrics import evaluate
from .pipeline import (
    ANNOTATIONS_SCHEMA,
    PipelineConfig,
    detections_from_json,
    detections_to_json,
    layout_from_json,
    place_objects,
    run_pipeline,
    scene_to_json,
    write_pipeline_outputs,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_CHECK = 3


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.load(args.config)
    return PipelineConfig()


def _load_annotations(path):
    doc = io.read_json(path)
    io.validate_schema(doc, ANNOTATIONS_SCHEMA, "annotations")
    width, height = int(doc["width"]), int(doc["height"])
    anns = [
        ObjectAnnotation(
            class_id=int(o["class"]),
            vertices=np.asarray(o["points"], dtype=float),
            instance_id=int(o.get("instance", i + 1)),
        )
        for i, o in enumerate(doc["objects"])
    ]
    return width, height, anns


def cmd_masks_from_points(args) -> int:
    cfg = _load_config(args)
    width, height, anns = _load_annotations(args.annotations)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    masks, records = [], []
    for ann in anns:
        mask = rasterize_spherical_polygon(ann, width, height)
        name = f"mask_{ann.instance_id:03d}.png"
        io.write_mask_png(out / name, mask)
        masks.append(mask)
        records.append({"class": ann.class_id, "instance": ann.instance_id, "mask": name})
    sem = compose_semantic(masks, [a.class_id for a in anns], cfg.occlusion_tau)
    io.write_class_png(out / "semantic.png", sem)
    io.write_json(out / "objects.json", {"width": width, "height": height, "objects": records})
    return EXIT_OK


def cmd_compose_semantic(args) -> int:
    cfg = _load_config(args)
    doc = io.read_json(Path(args.masks_dir) / "objects.json")
    masks = [io.read_mask_png(Path(args.masks_dir) / o["mask"]) for o in doc["objects"]]
    classes = [int(o["class"]) for o in doc["objects"]]
    sem = compose_semantic(masks, classes, cfg.occlusion_tau)
    io.write_class_png(args.out, sem)
    return EXIT_OK


def cmd_instances(args) -> int:
    cfg = _load_config(args)
    sem = io.read_class_png(args.semantic)
    dets = detections_from_json(io.read_json(args.detections))
    dets = [d for d in dets if d.score >= cfg.confidence_cut]
    im = assign_instances(sem, dets, cfg.chi2_threshold)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_instance_png(out / "instances.png", im.ids)
    io.write_class_png(out / "instance_classes.png", im.classes)
    io.write_json(out / "instance_table.json",
                  {"pixel_counts": {str(k): v for k, v in im.pixel_counts().items()}})
    return EXIT_OK


def _read_instance_map(dir_path) -> InstanceMap:
    d = Path(dir_path)
    return InstanceMap(
        ids=io.read_instance_png(d / "instances.png"),
        classes=io.read_class_png(d / "instance_classes.png"),
    )


def cmd_refine(args) -> int:
    cfg = _load_config(args)
    im = _read_instance_map(args.instances_dir)
    height, width = im.ids.shape
    layout = layout_from_json(io.read_json(args.layout), width, height)
    pm = build_plane_map(layout, width, height)
    refined = refine_masks(im, pm, cfg.class_rules())
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_instance_png(out / "instances.png", refined.ids)
    io.write_class_png(out / "instance_classes.png", refined.classes)
    io.write_class_png(out / "semantic.png", instance_to_semantic(refined))
    return EXIT_OK


def cmd_to3d(args) -> int:
    cfg = _load_config(args)
    im = _read_instance_map(args.instances_dir)
    height, width = im.ids.shape
    layout = layout_from_json(io.read_json(args.layout), width, height)
    pm = build_plane_map(layout, width, height)
    objects, errors = place_objects(im, layout, pm, cfg)
    io.write_json(args.out, scene_to_json(objects))
    if errors:
        print(json.dumps({"placement_errors": errors}, indent=2), file=sys.stderr)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    sem = io.read_class_png(args.semantic)
    dets = detections_from_json(io.read_json(args.detections))
    height, width = sem.shape
    layout = layout_from_json(io.read_json(args.layout), width, height)
    result = run_pipeline(sem, dets, layout, cfg)
    manifest = write_pipeline_outputs(result, args.out_dir, cfg)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_gen_fixture(args) -> int:
    scene = random_scene(
        args.seed,
        n_cuboids=args.cuboids,
        n_wall_rects=args.wall_rects,
        width=args.width,
        height=args.width // 2,
        cuboid_classes=(1,),  # bed
        wall_classes=(2,),  # painting
    )
    fb = generate_fixture(scene, seed=args.seed, jitter=args.jitter)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_class_png(out / "semantic.png", fb.semantic)
    io.write_instance_png(out / "instances_gt.png", fb.instance_ids)
    io.write_json(out / "detections.json", detections_to_json(fb.detections))
    io.write_json(out / "layout.json", fb.layout)
    io.write_json(out / "gt_scene.json", scene_to_json(fb.gt_objects))
    for k, m in enumerate(fb.masks):
        io.write_mask_png(out / f"mask_{k + 1:03d}.png", m)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    dets = detections_from_json(io.read_json(args.pred_detections))
    gts = detections_from_json(io.read_json(args.gt_detections))
    pred_seg = io.read_class_png(args.pred_seg) if args.pred_seg else None
    gt_seg = io.read_class_png(args.gt_seg) if args.gt_seg else None
    if args.width:
        width = args.width
    elif pred_seg is not None:
        width = pred_seg.shape[1]
    else:
        raise SchemaError("--width is required when no segmentation map is given")
    res = evaluate(dets, gts, width, cfg.class_names, pred_seg, gt_seg, cfg.detection_iou_th)
    io.write_json(args.out, res.to_json())
    print(json.dumps(res.to_json(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_equiconv_check(args) -> int:
    from .equiconv import EquiKernelSpec, build_sample_field, equiconv_backward, equiconv_forward

    if args.width < 256:
        # The fixed 1e-3 equator tolerance assumes the central rows sit
        # within ~0.7 deg of the equator, i.e. a grid at least 256 wide.
        raise SchemaError("equiconv-check needs --width >= 256")
    rng = np.random.default_rng(args.seed)
    width, height = args.width, args.width // 2
    spec = EquiKernelSpec.for_grid(width)
    fld = build_sample_field(width, height, spec)
    x = rng.normal(size=(1, height, width))
    w = rng.normal(size=(2, 1, 3, 3))

    # Column-rotation equivariance (bitwise, reported as max abs diff).
    y = equiconv_forward(x, w, fld)
    equiv_err = 0.0
    for k in (1, width // 3, width // 2):
        a = equiconv_forward(np.roll(x, k, axis=-1), w, fld)
        equiv_err = max(equiv_err, float(np.abs(a - np.roll(y, k, axis=-1)).max()))

    # Agreement with a standard stencil on the rows nearest the equator.
    rows = [height // 2 - 1, height // 2]
    std = np.zeros_like(x[0])
    for i in range(3):
        for j in range(3):
            std += w[0, 0, i, j] * np.roll(x[0], (-(i - 1), -(j - 1)), axis=(0, 1))
    ref = float(np.abs(std[rows]).max())
    equator_err = float(np.abs(y[0][rows] - std[rows]).max() / ref)

    # Gradient check against central finite differences.
    g = rng.normal(size=(2, height, width))
    gx, gw = equiconv_backward(g, x, w, fld)
    h_step = 1e-5
    idx = [(0, int(r), int(c)) for r in rng.integers(0, height, 4) for c in rng.integers(0, width, 3)]
    grad_err = 0.0
    for c, r, cc in idx:
        xp = x.copy()
        xp[c, r, cc] += h_step
        xm = x.copy()
        xm[c, r, cc] -= h_step
        fd = float(np.sum((equiconv_forward(xp, w, fld) - equiconv_forward(xm, w, fld)) * g) / (2 * h_step))
        grad_err = max(grad_err, abs(fd - gx[c, r, cc]) / max(1e-8, abs(fd)))

    report = {
        "equivariance_max_abs_err": equiv_err,
        "equator_rel_err": equator_err,
        "grad_input_max_rel_err": grad_err,
        "passed": bool(equiv_err == 0.0 and equator_err < 1e-3 and grad_err < 1e-4),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["passed"] else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="panoroom", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.set_defaults(fn=fn)
        sp.add_argument("--config", default=None, help="pipeline config JSON")
        return sp

    sp = add("masks-from-points", cmd_masks_from_points,
             help="rasterize annotation polygons into per-object masks + semantic map")
    sp.add_argument("--annotations", required=True)
    sp.add_argument("--out-dir", required=True)

    sp = add("compose-semantic", cmd_compose_semantic,
             help="combine per-object masks into a semantic map")
    sp.add_argument("--masks-dir", required=True)
    sp.add_argument("--out", required=True)

    sp = add("instances", cmd_instances, help="instance assignment from detections + semantic map")
    sp.add_argument("--semantic", required=True)
    sp.add_argument("--detections", required=True)
    sp.add_argument("--out-dir", required=True)

    sp = add("refine", cmd_refine, help="layout-prior refinement of an instance map")
    sp.add_argument("--instances-dir", required=True)
    sp.add_argument("--layout", required=True)
    sp.add_argument("--out-dir", required=True)

    sp = add("to3d", cmd_to3d, help="place instances into the 3D room")
    sp.add_argument("--instances-dir", required=True)
    sp.add_argument("--layout", required=True)
    sp.add_argument("--out", required=True)

    sp = add("run", cmd_run, help="full pipeline: instances -> refine -> 3D scene")
    sp.add_argument("--semantic", required=True)
    sp.add_argument("--detections", required=True)
    sp.add_argument("--layout", required=True)
    sp.add_argument("--out-dir", required=True)

    sp = add("gen-fixture", cmd_gen_fixture, help="generate a synthetic-room fixture")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cuboids", type=int, default=2)
    sp.add_argument("--wall-rects", type=int, default=2)
    sp.add_argument("--width", type=int, default=1024)
    sp.add_argument("--jitter", type=float, default=0.0)
    sp.add_argument("--out-dir", required=True)

    sp = add("eval", cmd_eval, help="detection mAP / segmentation mIoU evaluation")
    sp.add_argument("--pred-detections", required=True)
    sp.add_argument("--gt-detections", required=True)
    sp.add_argument("--pred-seg", default=None)
    sp.add_argument("--gt-seg", default=None)
    sp.add_argument("--width", type=int, default=None)
    sp.add_argument("--out", required=True)

    sp = add("equiconv-check", cmd_equiconv_check,
             help="distortion-aware convolution self-checks (exit 3 on failure)")
    sp.add_argument("--width", type=int, default=256)
    sp.add_argument("--seed", type=int, default=0)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except (PanoroomError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
