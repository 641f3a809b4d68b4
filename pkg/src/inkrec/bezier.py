"""Cubic curve encoding of ink strokes.

Each stroke is approximated by a short sequence of parametric cubics in
x, y and t over s in [0, 1]. Fitting alternates a linear least-squares
solve for the polynomial coefficients with safeguarded Newton updates of
the per-point curve parameters; segments are split recursively where one
cubic cannot represent the points and greedily re-merged afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from inkrec.ink import Ink, Stroke

FIT_TOLERANCE = 0.02  # max admissible per-point RMS residual
SSE_IMPROVEMENT_EPS = 1e-10
MAX_ALTERNATIONS = 32
MAX_SPLIT_DEPTH = 32
ARC_CHORD_RATIO = 3.0
CURVATURE_GRID = 256

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class CubicCurve:
    """Parametric cubic: each coordinate is a power-basis polynomial in s."""

    x_coeffs: np.ndarray
    y_coeffs: np.ndarray
    t_coeffs: np.ndarray

    def __post_init__(self):
        for name in ("x_coeffs", "y_coeffs", "t_coeffs"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (4,):
                raise ValueError(f"{name} must have 4 entries")
            object.__setattr__(self, name, arr)

    def evaluate(self, s: np.ndarray) -> np.ndarray:
        """Curve points at parameters s, shape (len(s), 3)."""
        s = np.asarray(s, dtype=np.float64)
        out = np.empty((s.size, 3))
        for j, c in enumerate((self.x_coeffs, self.y_coeffs, self.t_coeffs)):
            out[:, j] = ((c[3] * s + c[2]) * s + c[1]) * s + c[0]
        return out

    def planar_derivative(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=np.float64)
        cx, cy = self.x_coeffs, self.y_coeffs
        dx = (3.0 * cx[3] * s + 2.0 * cx[2]) * s + cx[1]
        dy = (3.0 * cy[3] * s + 2.0 * cy[2]) * s + cy[1]
        return dx, dy

    def planar_second_derivative(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.asarray(s, dtype=np.float64)
        cx, cy = self.x_coeffs, self.y_coeffs
        return 6.0 * cx[3] * s + 2.0 * cx[2], 6.0 * cy[3] * s + 2.0 * cy[2]

    def control_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Planar Bezier control points equivalent to the power basis."""

        def convert(c):
            return np.array(
                [
                    c[0],
                    c[0] + c[1] / 3.0,
                    c[0] + 2.0 * c[1] / 3.0 + c[2] / 3.0,
                    c[0] + c[1] + c[2] + c[3],
                ]
            )

        return convert(self.x_coeffs), convert(self.y_coeffs)

    def arc_length(self) -> float:
        """Planar arc length over s in [0, 1] by 64-point Gauss-Legendre."""
        s = 0.5 * (_GL_NODES + 1.0)
        dx, dy = self.planar_derivative(s)
        return float(0.5 * np.sum(_GL_WEIGHTS * np.hypot(dx, dy)))


def curve_from_controls(ctrl_x, ctrl_y, t_coeffs=(0.0, 0.0, 0.0, 0.0)) -> CubicCurve:
    """Build a curve from planar Bezier control points."""

    def convert(p):
        p = np.asarray(p, dtype=np.float64)
        return np.array(
            [
                p[0],
                3.0 * (p[1] - p[0]),
                3.0 * (p[2] - 2.0 * p[1] + p[0]),
                p[3] - 3.0 * p[2] + 3.0 * p[1] - p[0],
            ]
        )

    return CubicCurve(convert(ctrl_x), convert(ctrl_y), np.asarray(t_coeffs, float))


def straight_curve(point_a, point_b) -> CubicCurve:
    """Linear segment between two (x, y, t) points, expressed as a cubic."""
    a = np.asarray(point_a, dtype=np.float64)
    b = np.asarray(point_b, dtype=np.float64)
    d = b - a
    return CubicCurve(
        [a[0], d[0], 0.0, 0.0],
        [a[1], d[1], 0.0, 0.0],
        [a[2], d[2], 0.0, 0.0],
    )


def constant_curve(point) -> CubicCurve:
    p = np.asarray(point, dtype=np.float64)
    return CubicCurve([p[0], 0, 0, 0], [p[1], 0, 0, 0], [p[2], 0, 0, 0])


@dataclass
class FitState:
    s_values: np.ndarray
    sse: float
    iterations: int
    history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class CurveFeature:
    """10-value descriptor of one fitted curve.

    Vector order: chord dx, chord dy, first and second control leg lengths
    relative to the chord, their signed angles against the chord, the three
    non-constant time coefficients, and the pen state.
    """

    chord_dx: float
    chord_dy: float
    ctrl1_dist: float
    ctrl2_dist: float
    ctrl1_angle: float
    ctrl2_angle: float
    time_c1: float
    time_c2: float
    time_c3: float
    pen: float

    def vector(self) -> np.ndarray:
        return np.array(
            [
                self.chord_dx,
                self.chord_dy,
                self.ctrl1_dist,
                self.ctrl2_dist,
                self.ctrl1_angle,
                self.ctrl2_angle,
                self.time_c1,
                self.time_c2,
                self.time_c3,
                self.pen,
            ]
        )


@dataclass(frozen=True)
class SplitDecision:
    reason: str | None  # "residual" or "bend"
    index: int | None

    def __bool__(self) -> bool:
        return self.reason is not None


NO_SPLIT = SplitDecision(None, None)


@dataclass(frozen=True)
class EncodedSegment:
    lo: int
    hi: int
    curve: CubicCurve
    fit: FitState
    feature: CurveFeature


@dataclass(frozen=True)
class CurveFeatureSequence:
    rows: tuple[CurveFeature, ...]
    curves: tuple[CubicCurve, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def to_array(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, 10))
        return np.stack([r.vector() for r in self.rows])


# ---------------------------------------------------------------- time scaling


def scale_time(ink: Ink) -> Ink:
    """Rescale timestamps so the total time span equals the arc length.

    The arc length runs over the concatenated point sequence, pen-up gaps
    included. If all timestamps coincide while the ink has extent, time is
    reassigned proportionally to cumulative arc length instead.
    """
    xyt = ink.concat_xyt()
    seg = np.hypot(np.diff(xyt[:, 0]), np.diff(xyt[:, 1]))
    total = float(seg.sum()) if seg.size else 0.0
    span = float(xyt[-1, 2] - xyt[0, 2])

    if span > 0.0:
        scale = total / span
        new_t = (xyt[:, 2] - xyt[0, 2]) * scale
    elif total > 0.0:
        new_t = np.concatenate(([0.0], np.cumsum(seg)))
    else:
        new_t = np.zeros(xyt.shape[0])

    strokes = []
    i = 0
    for stroke in ink.strokes:
        part = np.column_stack([stroke.x, stroke.y, new_t[i : i + len(stroke)]])
        strokes.append(Stroke(part, stroke.pen_down))
        i += len(stroke)
    return Ink(tuple(strokes), ink.writing_area)


# ---------------------------------------------------------------- fitting


def _chord_length_params(pts: np.ndarray) -> np.ndarray:
    chord = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    cum = np.concatenate(([0.0], np.cumsum(chord)))
    if cum[-1] <= 0.0:
        return np.linspace(0.0, 1.0, pts.shape[0])
    s = cum / cum[-1]
    s[0], s[-1] = 0.0, 1.0
    return s


def _solve_coefficients(pts: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Least-squares power-basis coefficients for fixed parameters s.

    Returns a (4, 3) array of columns (x, y, t). Exact for up to four
    points; larger systems go through the normal equations with a tiny
    ridge fallback when they are singular.
    """
    vand = np.vander(s, 4, increasing=True)
    if pts.shape[0] <= 4:
        coeffs, *_ = np.linalg.lstsq(vand, pts, rcond=None)
        return coeffs
    gram = vand.T @ vand
    rhs = vand.T @ pts
    try:
        coeffs = np.linalg.solve(gram, rhs)
        if not np.all(np.isfinite(coeffs)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        coeffs = np.linalg.solve(gram + 1e-12 * np.eye(4), rhs)
    return coeffs


def _sum_squared_error(pts: np.ndarray, s: np.ndarray, curve: CubicCurve) -> float:
    resid = curve.evaluate(s) - pts
    return float(np.sum(resid * resid))


def _refine_parameters(pts: np.ndarray, s: np.ndarray, curve: CubicCurve) -> np.ndarray:
    """One safeguarded Newton sweep toward per-point foot parameters.

    Each interior parameter takes a Newton step on the planar orthogonality
    condition, clamped between its (already updated) left neighbor and its
    old right neighbor, and is accepted only when the point's full squared
    residual does not grow. This keeps parameters ordered and the overall
    fit error monotone. Endpoints stay pinned at 0 and 1.

    Newton candidates and current errors are precomputed in one vector
    pass; only the neighbor clamp is inherently sequential.
    """
    n = pts.shape[0]
    if n <= 2:
        return s.copy()
    p = curve.evaluate(s)
    dx, dy = curve.planar_derivative(s)
    ddx, ddy = curve.planar_second_derivative(s)
    ex = pts[:, 0] - p[:, 0]
    ey = pts[:, 1] - p[:, 1]
    f = dx * ex + dy * ey
    fp = ddx * ex - dx * dx + ddy * ey - dy * dy
    safe = np.abs(fp) > 1e-12
    cand_all = (s - np.where(safe, f, 0.0) / np.where(safe, fp, 1.0)).tolist()
    resid = p - pts
    err_old = (
        resid[:, 0] * resid[:, 0]
        + resid[:, 1] * resid[:, 1]
        + resid[:, 2] * resid[:, 2]
    ).tolist()
    cx3, cx2, cx1, cx0 = (float(v) for v in curve.x_coeffs[::-1])
    cy3, cy2, cy1, cy0 = (float(v) for v in curve.y_coeffs[::-1])
    ct3, ct2, ct1, ct0 = (float(v) for v in curve.t_coeffs[::-1])
    s_list = s.tolist()
    s_new = list(s_list)
    px_list = pts[:, 0].tolist()
    py_list = pts[:, 1].tolist()
    pt_list = pts[:, 2].tolist()
    for i in range(1, n - 1):
        cand = cand_all[i]
        left = s_new[i - 1]
        right = s_list[i + 1]
        if cand < left:
            cand = left
        if cand > right:
            cand = right
        if cand == s_list[i]:
            continue
        qx = ((cx3 * cand + cx2) * cand + cx1) * cand + cx0 - px_list[i]
        qy = ((cy3 * cand + cy2) * cand + cy1) * cand + cy0 - py_list[i]
        qt = ((ct3 * cand + ct2) * cand + ct1) * cand + ct0 - pt_list[i]
        if qx * qx + qy * qy + qt * qt <= err_old[i]:
            s_new[i] = cand
    return np.asarray(s_new)


def fit_single_curve(
    pts: np.ndarray, *, track_history: bool = False
) -> tuple[CubicCurve, FitState]:
    """Fit one cubic to (N, 3) points by alternating minimization.

    Alternates the coefficient solve with one parameter-refinement sweep,
    stopping once the error improves by less than SSE_IMPROVEMENT_EPS or
    after MAX_ALTERNATIONS rounds.
    """
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("expected an (N, 3) point array")
    if pts.shape[0] < 2:
        raise ValueError("need at least two points to fit a curve")

    s = _chord_length_params(pts)
    coeffs = _solve_coefficients(pts, s)
    curve = CubicCurve(coeffs[:, 0], coeffs[:, 1], coeffs[:, 2])
    sse = _sum_squared_error(pts, s, curve)
    history = [sse]
    iterations = 0

    for _ in range(MAX_ALTERNATIONS):
        s_next = _refine_parameters(pts, s, curve)
        coeffs = _solve_coefficients(pts, s_next)
        curve_next = CubicCurve(coeffs[:, 0], coeffs[:, 1], coeffs[:, 2])
        sse_next = _sum_squared_error(pts, s_next, curve_next)
        iterations += 1
        improved = sse - sse_next
        if sse_next <= sse:
            s, curve, sse = s_next, curve_next, sse_next
            history.append(sse)
        if improved < SSE_IMPROVEMENT_EPS:
            break

    state = FitState(s, sse, iterations, history if track_history else [])
    return curve, state


# ---------------------------------------------------------------- splitting


def _sharpest_corner_index(pts: np.ndarray) -> int:
    """Middle index of the consecutive triplet with the smallest angle."""
    u = pts[:-2, :2] - pts[1:-1, :2]
    v = pts[2:, :2] - pts[1:-1, :2]
    cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
    dot = u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1]
    norms = np.hypot(u[:, 0], u[:, 1]) * np.hypot(v[:, 0], v[:, 1])
    angles = np.where(norms > 0.0, np.arctan2(cross, dot), np.pi)
    return int(np.argmin(angles)) + 1


def _max_curvature_index(curve: CubicCurve, s_values: np.ndarray) -> int:
    grid = np.linspace(0.0, 1.0, CURVATURE_GRID)
    dx, dy = curve.planar_derivative(grid)
    ddx, ddy = curve.planar_second_derivative(grid)
    speed_sq = dx * dx + dy * dy
    kappa = np.abs(dx * ddy - dy * ddx) / np.maximum(speed_sq, 1e-12) ** 1.5
    s_star = grid[int(np.argmax(kappa))]
    idx = int(np.argmin(np.abs(s_values - s_star)))
    return int(np.clip(idx, 1, len(s_values) - 2))


def should_split(
    pts: np.ndarray,
    curve: CubicCurve,
    fit: FitState,
    tolerance: float = FIT_TOLERANCE,
) -> SplitDecision:
    """Decide whether a fitted segment must be split, and where.

    A segment splits when the per-point RMS residual exceeds the tolerance
    (at the sharpest corner) or when the curve's arc length exceeds three
    times its endpoint distance (at the curvature maximum).
    """
    pts = np.asarray(pts, dtype=np.float64)
    n = pts.shape[0]
    if n < 3:
        return NO_SPLIT
    rms = np.sqrt(fit.sse / n)
    if rms > tolerance:
        return SplitDecision("residual", _sharpest_corner_index(pts))
    ends = curve.evaluate(np.array([0.0, 1.0]))
    chord = float(np.hypot(ends[1, 0] - ends[0, 0], ends[1, 1] - ends[0, 1]))
    if curve.arc_length() > ARC_CHORD_RATIO * chord:
        return SplitDecision("bend", _max_curvature_index(curve, fit.s_values))
    return NO_SPLIT


# ---------------------------------------------------------------- features


def _signed_angle(base: np.ndarray, vec: np.ndarray) -> float:
    angle = float(np.arctan2(base[0] * vec[1] - base[1] * vec[0], base @ vec))
    if angle == -np.pi:
        angle = np.pi
    return angle


def curve_features(curve: CubicCurve, pen_down: bool) -> CurveFeature:
    """Descriptor of one curve; a zero-length chord blanks the geometry."""
    px, py = curve.control_points()
    chord = np.array([px[3] - px[0], py[3] - py[0]])
    length = float(np.hypot(chord[0], chord[1]))
    tc = curve.t_coeffs
    if length <= 1e-12:
        return CurveFeature(0, 0, 0, 0, 0, 0, tc[1], tc[2], tc[3], float(pen_down))
    v1 = np.array([px[1] - px[0], py[1] - py[0]])
    v2 = np.array([px[2] - px[3], py[2] - py[3]])
    d1 = float(np.hypot(v1[0], v1[1])) / length
    d2 = float(np.hypot(v2[0], v2[1])) / length
    a1 = _signed_angle(chord, v1) if d1 > 0 else 0.0
    a2 = _signed_angle(-chord, v2) if d2 > 0 else 0.0
    return CurveFeature(
        float(chord[0]),
        float(chord[1]),
        d1,
        d2,
        a1,
        a2,
        float(tc[1]),
        float(tc[2]),
        float(tc[3]),
        float(pen_down),
    )


# ---------------------------------------------------------------- encoding


def _degenerate_segment(pts: np.ndarray, pen_down: bool, lo: int) -> EncodedSegment:
    curve = constant_curve(pts[0])
    feature = CurveFeature(0, 0, 0, 0, 0, 0, 0, 0, 0, float(pen_down))
    fit = FitState(np.zeros(1), 0.0, 0)
    return EncodedSegment(lo, lo + pts.shape[0] - 1, curve, fit, feature)


def _fit_range(pts: np.ndarray, lo: int, hi: int) -> tuple[CubicCurve, FitState]:
    return fit_single_curve(pts[lo : hi + 1])


def _split_recursive(pts, lo, hi, tolerance, depth, out):
    curve, fit = _fit_range(pts, lo, hi)
    n = hi - lo + 1
    decision = should_split(pts[lo : hi + 1], curve, fit, tolerance)
    if decision and depth < MAX_SPLIT_DEPTH and n >= 3:
        idx = int(np.clip(decision.index, 1, n - 2))
        _split_recursive(pts, lo, lo + idx, tolerance, depth + 1, out)
        _split_recursive(pts, lo + idx, hi, tolerance, depth + 1, out)
    else:
        out.append((lo, hi, curve, fit))


def _merge_pass(pts, segments, tolerance):
    """Greedy left-to-right merging until a fixed point."""
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(segments) - 1:
            lo = segments[i][0]
            hi = segments[i + 1][1]
            curve, fit = _fit_range(pts, lo, hi)
            if not should_split(pts[lo : hi + 1], curve, fit, tolerance):
                segments[i] = (lo, hi, curve, fit)
                del segments[i + 1]
                changed = True
            else:
                i += 1
    return segments


def encode_stroke_segments(
    stroke: Stroke, tolerance: float = FIT_TOLERANCE
) -> list[EncodedSegment]:
    """Full encoding detail for one stroke: ranges, curves, fits, features."""
    pts = stroke.xyt
    if pts.shape[0] < 2:
        return [_degenerate_segment(pts, stroke.pen_down, 0)]
    segments: list = []
    _split_recursive(pts, 0, pts.shape[0] - 1, tolerance, 0, segments)
    segments = _merge_pass(pts, segments, tolerance)
    return [
        EncodedSegment(lo, hi, curve, fit, curve_features(curve, stroke.pen_down))
        for lo, hi, curve, fit in segments
    ]


def encode_stroke(
    stroke: Stroke, tolerance: float = FIT_TOLERANCE
) -> list[tuple[CubicCurve, CurveFeature]]:
    return [(seg.curve, seg.feature) for seg in encode_stroke_segments(stroke, tolerance)]


def encode_ink_curves(ink: Ink, tolerance: float = FIT_TOLERANCE) -> CurveFeatureSequence:
    """Curve features for a whole ink, with straight pen-up connectors.

    Consecutive strokes are joined by a synthetic straight curve from the
    previous stroke's last point to the next stroke's first point, carrying
    the real timestamps and a pen-up flag.
    """
    rows: list[CurveFeature] = []
    curves: list[CubicCurve] = []
    prev_end = None
    for stroke in ink.strokes:
        if prev_end is not None:
            connector = straight_curve(prev_end, stroke.xyt[0])
            curves.append(connector)
            rows.append(curve_features(connector, pen_down=False))
        for curve, feature in encode_stroke(stroke, tolerance):
            curves.append(curve)
            rows.append(feature)
        prev_end = stroke.xyt[-1]
    return CurveFeatureSequence(tuple(rows), tuple(curves))
