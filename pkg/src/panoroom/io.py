"""File formats: label-map PNGs, JSON records, schema validation, hashing.

Class label maps are 8-bit single-channel PNGs, instance-id maps 16-bit,
individual object masks 1-bit. JSON documents are validated against the
schemas in :mod:`panoroom.pipeline`; validation errors carry a JSON pointer
to the offending element.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import SchemaError


def write_class_png(path, labels: np.ndarray) -> None:
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("class ids must fit in 8 bits")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)


def read_class_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.int32)


def write_instance_png(path, ids: np.ndarray) -> None:
    arr = np.asarray(ids)
    if arr.min() < 0 or arr.max() > 65535:
        raise ValueError("instance ids must fit in 16 bits")
    Image.fromarray(arr.astype(np.uint16)).save(path)


def read_instance_png(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.int32)


def write_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray(np.asarray(mask, dtype=bool)).save(path)


def read_mask_png(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=bool)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def validate_schema(doc, schema, name: str) -> None:
    """Validate ``doc``; raise SchemaError with a JSON-pointer path."""
    import jsonschema

    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        pointer = "/" + "/".join(str(p) for p in e.absolute_path)
        raise SchemaError(f"{name}: {e.message} at {pointer!r}")
