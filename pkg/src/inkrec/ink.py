"""Ink data model: touch points, strokes, normalization and resampling.

An ink is an ordered sequence of strokes; a stroke is an ordered run of
touch points sharing one pen state. Coordinates are device units until
normalize_ink maps them into a writer-independent frame where the writing
area's y extent spans [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

INK_FORMAT_VERSION = 1


class EmptyInk(ValueError):
    """Raised when an operation needs at least one touch point."""


class ZeroHeightArea(ValueError):
    """Raised when the writing area (given or surrogate) has no y extent."""


class TouchPoint(NamedTuple):
    x: float
    y: float
    t: float
    pen_down: bool
    stroke_start: bool


@dataclass(frozen=True)
class WritingArea:
    x: float
    y: float
    w: float
    h: float


class Stroke:
    """Immutable run of touch points with a single pen state.

    Timestamps are clamped to be non-decreasing at construction, so a
    stroke's time axis is always monotone regardless of input quality.
    """

    __slots__ = ("xyt", "pen_down")

    def __init__(self, xyt, pen_down: bool = True):
        arr = np.array(xyt, dtype=np.float64).reshape(-1, 3)
        if arr.shape[0] == 0:
            raise EmptyInk("stroke must contain at least one point")
        if not np.all(np.isfinite(arr)):
            raise ValueError("stroke coordinates must be finite")
        arr[:, 2] = np.maximum.accumulate(arr[:, 2])
        arr.setflags(write=False)
        object.__setattr__(self, "xyt", arr)
        object.__setattr__(self, "pen_down", bool(pen_down))

    def __setattr__(self, name, value):
        raise AttributeError("Stroke is immutable")

    def __len__(self) -> int:
        return self.xyt.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Stroke):
            return NotImplemented
        return self.pen_down == other.pen_down and np.array_equal(self.xyt, other.xyt)

    def __repr__(self) -> str:
        return f"Stroke({len(self)} points, pen_down={self.pen_down})"

    @property
    def x(self) -> np.ndarray:
        return self.xyt[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.xyt[:, 1]

    @property
    def t(self) -> np.ndarray:
        return self.xyt[:, 2]

    @property
    def points(self) -> list[TouchPoint]:
        return [
            TouchPoint(float(x), float(y), float(t), self.pen_down, i == 0)
            for i, (x, y, t) in enumerate(self.xyt)
        ]

    def arc_length(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.hypot(np.diff(self.x), np.diff(self.y)).sum())


@dataclass(frozen=True)
class Ink:
    strokes: tuple[Stroke, ...]
    writing_area: WritingArea | None = None

    def __post_init__(self):
        object.__setattr__(self, "strokes", tuple(self.strokes))

    def __len__(self) -> int:
        return len(self.strokes)

    def point_count(self) -> int:
        return sum(len(s) for s in self.strokes)

    def iter_points(self) -> Iterator[TouchPoint]:
        for stroke in self.strokes:
            yield from stroke.points

    def concat_xyt(self) -> np.ndarray:
        """All points as one (N, 3) array in stroke order."""
        if not self.strokes:
            raise EmptyInk("ink has no strokes")
        return np.concatenate([s.xyt for s in self.strokes], axis=0)

    def bounding_box(self) -> WritingArea:
        xyt = self.concat_xyt()
        x0, y0 = xyt[:, 0].min(), xyt[:, 1].min()
        x1, y1 = xyt[:, 0].max(), xyt[:, 1].max()
        return WritingArea(float(x0), float(y0), float(x1 - x0), float(y1 - y0))


def surrogate_writing_area(ink: Ink) -> WritingArea:
    """Bounding box grown 20% in each dimension about its center.

    Stand-in for a missing writing area; for a degenerate ink (single point,
    horizontal line) the surrogate keeps zero height and normalize_ink will
    reject it.
    """
    box = ink.bounding_box()
    return WritingArea(
        box.x - 0.1 * box.w,
        box.y - 0.1 * box.h,
        1.2 * box.w,
        1.2 * box.h,
    )


def normalize_ink(ink: Ink, *, zero_height: str = "raise") -> Ink:
    """Map an ink into the writer-independent frame.

    The writing area's y extent is scaled to [0, 1]; x uses the same scale
    factor so aspect ratio is preserved, then is shifted so the ink's first
    point sits at x = 0. Timestamps shift so the first sample is at t = 0.

    zero_height selects what happens when the area has no y extent:
    "raise" signals ZeroHeightArea, "unit" substitutes scale factor 1.
    """
    if zero_height not in ("raise", "unit"):
        raise ValueError(f"unknown zero_height policy: {zero_height!r}")
    if not ink.strokes:
        raise EmptyInk("cannot normalize an empty ink")
    area = ink.writing_area if ink.writing_area is not None else surrogate_writing_area(ink)
    if area.h <= 0.0:
        if zero_height == "raise":
            raise ZeroHeightArea(f"writing area height is {area.h}")
        scale = 1.0
    else:
        scale = 1.0 / area.h

    first = ink.strokes[0].xyt[0]
    x0 = first[0]
    t0 = first[2]
    strokes = []
    for stroke in ink.strokes:
        xyt = np.empty_like(stroke.xyt)
        xyt[:, 0] = (stroke.x - x0) * scale
        xyt[:, 1] = (stroke.y - area.y) * scale
        xyt[:, 2] = stroke.t - t0
        strokes.append(Stroke(xyt, stroke.pen_down))
    # h is written as exactly 1.0 (not h * scale) so a second pass is a
    # bit-exact no-op.
    new_h = 1.0 if area.h > 0.0 else 0.0
    new_area = WritingArea((area.x - x0) * scale, 0.0, area.w * scale, new_h)
    return Ink(tuple(strokes), new_area)


def _drop_duplicate_points(xyt: np.ndarray) -> np.ndarray:
    """Remove consecutive points at zero planar distance, keeping the first."""
    if xyt.shape[0] < 2:
        return xyt
    d = np.hypot(np.diff(xyt[:, 0]), np.diff(xyt[:, 1]))
    keep = np.concatenate(([True], d > 0.0))
    return xyt[keep]


def resample_equidistant(stroke: Stroke, delta: float = 0.05) -> Stroke:
    """Resample a stroke to points spaced exactly delta apart in arc length.

    Samples sit at arc positions 0, delta, 2*delta, ... along the piecewise
    linear curve through the input points; x, y and t are interpolated
    linearly. The original endpoint is kept only when it is more than
    delta/2 but less than a full delta past the last grid sample, so a
    stroke whose length is an exact multiple of delta gets length/delta
    points and the final gap is never longer than delta.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    xyt = _drop_duplicate_points(stroke.xyt)
    if xyt.shape[0] < 2:
        return Stroke(xyt, stroke.pen_down)

    seg = np.hypot(np.diff(xyt[:, 0]), np.diff(xyt[:, 1]))
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    total = cum[-1]
    tol = 1e-9 * max(1.0, total)
    if total <= tol:
        return Stroke(xyt[:1], stroke.pen_down)
    k_max = max(int(np.floor((total - tol) / delta)), 0)
    arcs = delta * np.arange(k_max + 1)

    out = np.empty((arcs.size, 3))
    out[:, 0] = np.interp(arcs, cum, xyt[:, 0])
    out[:, 1] = np.interp(arcs, cum, xyt[:, 1])
    out[:, 2] = np.interp(arcs, cum, xyt[:, 2])
    out[0] = xyt[0]

    remainder = total - arcs[-1]
    if remainder > 0.5 * delta and remainder < delta * (1.0 - 1e-9):
        out = np.concatenate([out, xyt[-1:]], axis=0)
    return Stroke(out, stroke.pen_down)


def resample_ink(ink: Ink, delta: float = 0.05) -> Ink:
    return Ink(
        tuple(resample_equidistant(s, delta) for s in ink.strokes),
        ink.writing_area,
    )


def raw_features(ink: Ink) -> np.ndarray:
    """Point-delta feature rows, one per touch point across the whole ink.

    Each row is (dx, dy, dt, pen_down, stroke_start); the first row carries
    zero deltas. Deltas run across stroke boundaries so positions can be
    reconstructed from the first point by cumulative summation.
    """
    xyt = ink.concat_xyt()
    n = xyt.shape[0]
    feats = np.zeros((n, 5))
    feats[1:, 0:3] = np.diff(xyt, axis=0)
    i = 0
    for stroke in ink.strokes:
        feats[i : i + len(stroke), 3] = 1.0 if stroke.pen_down else 0.0
        feats[i, 4] = 1.0
        i += len(stroke)
    return feats


def ink_to_json(ink: Ink) -> dict:
    """Ink as a JSON-ready dict in the wire format (version 1)."""
    area = None
    if ink.writing_area is not None:
        wa = ink.writing_area
        area = {"x": wa.x, "y": wa.y, "w": wa.w, "h": wa.h}
    return {
        "version": INK_FORMAT_VERSION,
        "writing_area": area,
        "strokes": [
            {
                "pen_down": s.pen_down,
                "points": [[float(x), float(y), float(t)] for x, y, t in s.xyt],
            }
            for s in ink.strokes
        ],
    }


def ink_from_json(obj) -> Ink:
    """Parse the wire format produced by ink_to_json.

    Raises ValueError with a descriptive message on malformed input.
    """
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if not isinstance(obj, dict):
        raise ValueError("ink JSON must be an object")
    version = obj.get("version")
    if version != INK_FORMAT_VERSION:
        raise ValueError(f"unsupported ink format version: {version!r}")
    area = obj.get("writing_area")
    writing_area = None
    if area is not None:
        try:
            writing_area = WritingArea(
                float(area["x"]), float(area["y"]), float(area["w"]), float(area["h"])
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed writing_area: {area!r}") from exc
    raw_strokes = obj.get("strokes")
    if not isinstance(raw_strokes, list) or not raw_strokes:
        raise ValueError("ink JSON needs a non-empty strokes list")
    strokes = []
    for i, rs in enumerate(raw_strokes):
        if not isinstance(rs, dict) or "points" not in rs:
            raise ValueError(f"stroke {i} is malformed")
        points = rs["points"]
        if not isinstance(points, list) or not points:
            raise ValueError(f"stroke {i} has no points")
        for p in points:
            if not isinstance(p, list) or len(p) != 3:
                raise ValueError(f"stroke {i} has a malformed point: {p!r}")
        strokes.append(Stroke(points, bool(rs.get("pen_down", True))))
    return Ink(tuple(strokes), writing_area)
