"""Exception types shared across the toolkit."""


class PanoroomError(Exception):
    """Base class for all toolkit errors."""


class ShapeMismatch(PanoroomError):
    """Array shapes are inconsistent with each other or with W = 2H."""


class AntipodalEndpoints(PanoroomError):
    """Great-circle arc endpoints are antipodal; the arc is not unique."""


class PoleSingularity(PanoroomError):
    """Kernel taps reach over a pole and strict pole handling is enabled."""


class DegeneratePolygon(PanoroomError):
    """Polygon covers less than one pixel or has fewer than three vertices."""


class OpenLayout(PanoroomError):
    """Room layout corners do not form a closed Manhattan wall loop."""


class InsufficientBoundary(PanoroomError):
    """Mask boundary has too few pixels to fit lines."""


class NoWallIntersection(PanoroomError):
    """Object mask does not hit any wall plane."""


class UnderconstrainedCuboid(PanoroomError):
    """Wall-contact or floor-contact line missing; cuboid cannot be solved."""


class NoGroundTruth(PanoroomError):
    """Average precision is undefined for a class with no ground truth."""


class EmptyEval(PanoroomError):
    """Weighted mean requested over zero detections."""


class ObjectOutsideRoom(PanoroomError):
    """Synthetic scene object does not fit inside the room box."""


class SchemaError(PanoroomError):
    """A JSON document violates its schema; message carries a JSON pointer."""
