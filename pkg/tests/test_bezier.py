import numpy as np
import pytest

from inkrec.bezier import (
    CubicCurve,
    CurveFeature,
    curve_features,
    curve_from_controls,
    encode_ink_curves,
    encode_stroke,
    encode_stroke_segments,
    fit_single_curve,
    scale_time,
    should_split,
    straight_curve,
)
from inkrec.ink import Ink, Stroke

# ---------------------------------------------------------------- helpers


def line_points(p0, p1, n, t0=0.0, t1=1.0):
    s = np.linspace(0.0, 1.0, n)[:, None]
    xy = np.asarray(p0, float) + s * (np.asarray(p1, float) - np.asarray(p0, float))
    t = np.linspace(t0, t1, n)[:, None]
    return np.hstack([xy, t])


def random_line_cubic(rng):
    """Random cubic whose planar part moves at constant speed.

    For these curves the cumulative chord fraction of any sample set equals
    the generating parameter exactly, so a chord-initialized fit starts at
    the truth and must reproduce the coefficients. The time coordinate is a
    full random cubic; the planar part is a random ray.
    """
    theta = rng.uniform(0.0, 2.0 * np.pi)
    speed = rng.uniform(0.5, 2.0)
    ox, oy = rng.uniform(-1.0, 1.0, size=2)
    x_coeffs = np.array([ox, speed * np.cos(theta), 0.0, 0.0])
    y_coeffs = np.array([oy, speed * np.sin(theta), 0.0, 0.0])
    t_coeffs = rng.uniform(-1.0, 1.0, size=4)
    return CubicCurve(x_coeffs, y_coeffs, t_coeffs)


def ragged_params(rng, n):
    # ordered parameters 0..1 with uneven gaps, endpoints included
    gaps = rng.uniform(0.2, 1.0, size=n - 1)
    u = np.concatenate(([0.0], np.cumsum(gaps)))
    return u / u[-1]


def arc_cubic(angle, radius=1.0):
    """Circular-arc approximation spanning the given angle, nearly constant
    planar speed, with a bent time polynomial riding along."""
    k = (4.0 / 3.0) * np.tan(angle / 4.0) * radius
    a0, a1 = -angle / 2.0, angle / 2.0
    p0 = radius * np.array([np.cos(a0), np.sin(a0)])
    p3 = radius * np.array([np.cos(a1), np.sin(a1)])
    d0 = np.array([-np.sin(a0), np.cos(a0)])
    d1 = np.array([-np.sin(a1), np.cos(a1)])
    return curve_from_controls(
        [p0[0], p0[0] + k * d0[0], p3[0] - k * d1[0], p3[0]],
        [p0[1], p0[1] + k * d0[1], p3[1] - k * d1[1], p3[1]],
        t_coeffs=[0.0, 1.0, -0.3, 0.2],
    )


# ---------------------------------------------------------------- scale_time


class TestScaleTime:
    def test_span_matches_arc_length(self):
        # two unit strokes with a unit pen-up gap: flattened arc length 3,
        # time span 6, so every timestamp shrinks by half
        s1 = Stroke(line_points((0, 0), (1, 0), 2, t0=0.0, t1=2.0))
        s2 = Stroke(line_points((2, 0), (3, 0), 2, t0=4.0, t1=6.0))
        out = scale_time(Ink((s1, s2)))
        np.testing.assert_allclose(out.strokes[0].t, [0.0, 1.0])
        np.testing.assert_allclose(out.strokes[1].t, [2.0, 3.0])

    def test_shifts_to_zero(self):
        s1 = Stroke(line_points((0, 0), (2, 0), 3, t0=10.0, t1=11.0))
        out = scale_time(Ink((s1,)))
        assert out.strokes[0].t[0] == 0.0
        np.testing.assert_allclose(out.strokes[0].t[-1], 2.0)

    def test_degenerate_time_uses_arc_length(self):
        # all timestamps equal: fall back to cumulative arc length
        s1 = Stroke([[0, 0, 5], [1, 0, 5]])
        s2 = Stroke([[1, 0, 5], [2, 0, 5]])
        out = scale_time(Ink((s1, s2)))
        np.testing.assert_allclose(out.strokes[0].t, [0.0, 1.0])
        np.testing.assert_allclose(out.strokes[1].t, [1.0, 2.0])

    def test_zero_arc_length(self):
        s1 = Stroke([[1, 1, 0], [1, 1, 3]])
        out = scale_time(Ink((s1,)))
        np.testing.assert_allclose(out.strokes[0].t, [0.0, 0.0])


# ---------------------------------------------------------------- curve basics


class TestCubicCurve:
    def test_control_points_from_power_basis(self):
        curve = CubicCurve([1, 3, -2, 0.5], [0, 0, 0, 0], [0, 1, 0, 0])
        px, py = curve.control_points()
        np.testing.assert_allclose(px, [1.0, 2.0, 1 + 3 * 2 / 3 - 2 / 3, 2.5])
        np.testing.assert_allclose(py, [0, 0, 0, 0])

    def test_control_points_round_trip(self):
        rng = np.random.default_rng(3)
        cx, cy = rng.normal(size=(2, 4))
        curve = curve_from_controls(cx, cy)
        bx, by = curve.control_points()
        np.testing.assert_allclose(bx, cx, atol=1e-12)
        np.testing.assert_allclose(by, cy, atol=1e-12)

    def test_straight_line_arc_length(self):
        curve = straight_curve((0.0, 0.0, 0.0), (3.0, 4.0, 1.0))
        np.testing.assert_allclose(curve.arc_length(), 5.0, atol=1e-12)

    def test_parabola_arc_length(self):
        # x = s, y = s^2: closed form sqrt(5)/2 + asinh(2)/4
        curve = CubicCurve([0, 1, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0])
        expected = 1.4789428575445975
        np.testing.assert_allclose(curve.arc_length(), expected, atol=1e-12)

    def test_evaluate_horner(self):
        curve = CubicCurve([1, -1, 2, 0.5], [0, 2, -1, 1], [0, 1, 1, -0.5])
        s = np.array([0.0, 0.3, 1.0])
        pts = curve.evaluate(s)
        for i, si in enumerate(s):
            np.testing.assert_allclose(
                pts[i],
                [
                    1 - si + 2 * si**2 + 0.5 * si**3,
                    2 * si - si**2 + si**3,
                    si + si**2 - 0.5 * si**3,
                ],
            )


# ---------------------------------------------------------------- fitting


class TestFitSingleCurve:
    def test_two_points_exact(self):
        pts = np.array([[0, 0, 0], [1, 2, 3]], dtype=float)
        curve, fit = fit_single_curve(pts)
        assert fit.sse < 1e-20
        np.testing.assert_allclose(curve.evaluate(np.array([0.0]))[0], [0, 0, 0], atol=1e-9)
        np.testing.assert_allclose(curve.evaluate(np.array([1.0]))[0], [1, 2, 3], atol=1e-9)

    def test_four_points_interpolated(self):
        rng = np.random.default_rng(11)
        pts = rng.normal(size=(4, 3)).cumsum(axis=0)
        curve, fit = fit_single_curve(pts)
        assert fit.sse < 1e-16

    def test_recovers_known_cubic(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            curve = random_line_cubic(rng)
            pts = curve.evaluate(ragged_params(rng, 50))
            fitted, fit = fit_single_curve(pts)
            assert fit.sse < 1e-10
            np.testing.assert_allclose(fitted.x_coeffs, curve.x_coeffs, atol=1e-6)
            np.testing.assert_allclose(fitted.y_coeffs, curve.y_coeffs, atol=1e-6)
            np.testing.assert_allclose(fitted.t_coeffs, curve.t_coeffs, atol=1e-6)

    def test_sse_monotone_and_endpoints_pinned(self):
        rng = np.random.default_rng(5)
        pts = np.cumsum(rng.normal(scale=0.3, size=(25, 3)), axis=0)
        curve, fit = fit_single_curve(pts, track_history=True)
        assert fit.s_values[0] == 0.0
        assert fit.s_values[-1] == 1.0
        assert np.all(np.diff(fit.s_values) >= -1e-12)
        hist = np.asarray(fit.history)
        assert np.all(np.diff(hist) <= 1e-12)

    def test_orthogonality_at_convergence(self):
        # a gentle bow converges well inside the iteration budget; the
        # refined parameters must then sit at planar orthogonal feet
        pts = arc_cubic(0.3).evaluate(np.linspace(0.0, 1.0, 40))
        fitted, fit = fit_single_curve(pts)
        assert fit.iterations < 32
        dx, dy = fitted.planar_derivative(fit.s_values[1:-1])
        ex = pts[1:-1, 0] - fitted.evaluate(fit.s_values[1:-1])[:, 0]
        ey = pts[1:-1, 1] - fitted.evaluate(fit.s_values[1:-1])[:, 1]
        resid = dx * ex + dy * ey
        assert np.max(np.abs(resid)) < 1e-6

    def test_rejects_single_point(self):
        with pytest.raises(ValueError):
            fit_single_curve(np.array([[0.0, 0.0, 0.0]]))

    def test_iteration_cap(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(40, 3))  # noise, never converges cleanly
        _, fit = fit_single_curve(pts)
        assert fit.iterations <= 32


# ---------------------------------------------------------------- features


class TestCurveFeatures:
    def test_straight_thirds(self):
        curve = straight_curve((0, 0, 0.0), (1, 0, 0.7))
        feat = curve_features(curve, pen_down=True)
        np.testing.assert_allclose(
            feat.vector(),
            [1, 0, 1 / 3, 1 / 3, 0, 0, 0.7, 0, 0, 1],
            atol=1e-12,
        )

    def test_control_angles_and_lengths(self):
        # first control leg 1/3 long at +45 deg from the chord, second leg
        # 1/3 long at -30 deg from the reversed chord
        r2, r3 = np.sqrt(2), np.sqrt(3)
        curve = curve_from_controls(
            [0.0, r2 / 6, 1 - r3 / 6, 1.0],
            [0.0, r2 / 6, 1 / 6, 0.0],
            t_coeffs=[0.0, 1.0, 0.0, 0.0],
        )
        feat = curve_features(curve, pen_down=True)
        np.testing.assert_allclose(feat.chord_dx, 1.0, atol=1e-12)
        np.testing.assert_allclose(feat.chord_dy, 0.0, atol=1e-12)
        np.testing.assert_allclose(feat.ctrl1_dist, 1 / 3, atol=1e-12)
        np.testing.assert_allclose(feat.ctrl2_dist, 1 / 3, atol=1e-12)
        np.testing.assert_allclose(feat.ctrl1_angle, np.pi / 4, atol=1e-12)
        np.testing.assert_allclose(feat.ctrl2_angle, -np.pi / 6, atol=1e-12)

    def test_mirror_negates_angles(self):
        rng = np.random.default_rng(8)
        cx, cy = rng.normal(size=(2, 4))
        feat = curve_features(curve_from_controls(cx, cy), pen_down=True)
        mirrored = curve_features(curve_from_controls(cx, -cy), pen_down=True)
        np.testing.assert_allclose(mirrored.ctrl1_angle, -feat.ctrl1_angle, atol=1e-12)
        np.testing.assert_allclose(mirrored.ctrl2_angle, -feat.ctrl2_angle, atol=1e-12)
        np.testing.assert_allclose(mirrored.ctrl1_dist, feat.ctrl1_dist, atol=1e-12)
        np.testing.assert_allclose(mirrored.ctrl2_dist, feat.ctrl2_dist, atol=1e-12)

    def test_zero_chord_blanks_geometry(self):
        # closed curve: geometry features zero, time and pen state carried
        curve = curve_from_controls(
            [0.0, 1.0, -1.0, 0.0],
            [0.0, 1.0, 1.0, 0.0],
            t_coeffs=[0.2, 0.5, 0.1, 0.0],
        )
        feat = curve_features(curve, pen_down=False)
        np.testing.assert_allclose(
            feat.vector(), [0, 0, 0, 0, 0, 0, 0.5, 0.1, 0, 0], atol=1e-12
        )

    def test_angle_range(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            cx, cy = rng.normal(size=(2, 4))
            feat = curve_features(curve_from_controls(cx, cy), pen_down=True)
            assert -np.pi < feat.ctrl1_angle <= np.pi
            assert -np.pi < feat.ctrl2_angle <= np.pi
            assert feat.ctrl1_dist >= 0 and feat.ctrl2_dist >= 0


# ---------------------------------------------------------------- splitting


class TestShouldSplit:
    def test_straight_line_no_split(self):
        pts = line_points((0, 0), (1, 0), 20)
        curve, fit = fit_single_curve(pts)
        assert not should_split(pts, curve, fit)

    def test_corner_splits_at_apex(self):
        # deep narrow V: a single cubic smooths the apex and leaves a large
        # residual there
        left = line_points((0, 1), (0.2, -1), 11, t0=0.0, t1=0.5)
        right = line_points((0.2, -1), (0.4, 1), 11, t0=0.5, t1=1.0)
        pts = np.vstack([left, right[1:]])
        curve, fit = fit_single_curve(pts)
        assert np.sqrt(fit.sse / len(pts)) > 0.02
        decision = should_split(pts, curve, fit)
        assert decision and decision.reason == "residual"
        assert decision.index == 10  # the apex is the sharpest triplet

    def test_hairpin_splits_on_arc_ratio(self):
        # four points are interpolated exactly (zero residual) but the
        # fitted curve winds far relative to the endpoint gap, so the bend
        # criterion fires
        pts = np.array(
            [
                [0.0, 0.0, 0.0],
                [1.0, 1.0, 0.3],
                [-1.0, 1.0, 0.6],
                [0.1, 0.0, 1.0],
            ]
        )
        fitted, fit = fit_single_curve(pts)
        assert fit.sse < 1e-10
        chord = np.hypot(pts[-1, 0] - pts[0, 0], pts[-1, 1] - pts[0, 1])
        assert fitted.arc_length() > 3.0 * chord
        decision = should_split(pts, fitted, fit)
        assert decision and decision.reason == "bend"
        assert 1 <= decision.index <= len(pts) - 2

    def test_split_index_interior(self):
        rng = np.random.default_rng(13)
        pts = np.cumsum(rng.normal(scale=0.2, size=(30, 3)), axis=0)
        curve, fit = fit_single_curve(pts)
        decision = should_split(pts, curve, fit)
        if decision:
            assert 1 <= decision.index <= len(pts) - 2


# ---------------------------------------------------------------- encoding


class TestEncodeStroke:
    def test_line_is_one_segment(self):
        stroke = Stroke(line_points((0, 0), (1, 0), 20))
        segments = encode_stroke(stroke)
        assert len(segments) == 1
        curve, feat = segments[0]
        assert feat.pen == 1.0
        np.testing.assert_allclose(feat.chord_dx, 1.0, atol=1e-6)

    def test_corner_splits_then_passes(self):
        left = line_points((0, 1), (0.2, -1), 11, t0=0.0, t1=0.5)
        right = line_points((0.2, -1), (0.4, 1), 11, t0=0.5, t1=1.0)
        stroke = Stroke(np.vstack([left, right[1:]]))
        details = encode_stroke_segments(stroke)
        # one straight segment per leg, split exactly at the apex
        assert len(details) == 2
        assert details[0].hi == 10 and details[1].lo == 10
        for seg in details:
            pts = stroke.xyt[seg.lo : seg.hi + 1]
            assert not should_split(pts, seg.curve, seg.fit)

    def test_single_point_degenerate(self):
        stroke = Stroke([[0.4, 0.2, 1.5]])
        segments = encode_stroke(stroke)
        assert len(segments) == 1
        curve, feat = segments[0]
        np.testing.assert_allclose(
            feat.vector(), [0, 0, 0, 0, 0, 0, 0, 0, 0, 1], atol=1e-12
        )
        np.testing.assert_allclose(curve.evaluate(np.array([0.5]))[0], [0.4, 0.2, 1.5])

    def test_wave_segments_all_pass(self):
        u = np.linspace(0, 1, 90)
        pts = np.stack([u * 2, 0.4 * np.sin(3 * np.pi * u), u], axis=1)
        stroke = Stroke(pts)
        details = encode_stroke_segments(stroke)
        assert len(details) >= 2
        for seg in details:
            sub = stroke.xyt[seg.lo : seg.hi + 1]
            assert not should_split(sub, seg.curve, seg.fit)
        # segments tile the stroke and share boundary points
        assert details[0].lo == 0
        assert details[-1].hi == len(stroke) - 1
        for a, b in zip(details, details[1:]):
            assert a.hi == b.lo

    def test_merge_reaches_fixed_point(self):
        u = np.linspace(0, 1, 80)
        pts = np.stack([u * 3, 0.4 * np.sin(3 * np.pi * u), u], axis=1)
        details = encode_stroke_segments(Stroke(pts))
        ranges = [(s.lo, s.hi) for s in details]
        # re-encoding is deterministic and already merged
        again = [(s.lo, s.hi) for s in encode_stroke_segments(Stroke(pts))]
        assert ranges == again


class TestEncodeInk:
    def test_pen_up_connector_between_strokes(self):
        s1 = Stroke(line_points((0, 0), (1, 0), 12, t0=0.0, t1=1.0))
        s2 = Stroke(line_points((2, 0), (3, 0), 12, t0=2.0, t1=3.0))
        seq = encode_ink_curves(Ink((s1, s2)))
        assert len(seq) == 3
        gap = seq.rows[1]
        assert gap.pen == 0.0
        np.testing.assert_allclose(gap.chord_dx, 1.0, atol=1e-9)
        np.testing.assert_allclose(gap.ctrl1_dist, 1 / 3, atol=1e-12)
        np.testing.assert_allclose(gap.time_c1, 1.0, atol=1e-9)
        arr = seq.to_array()
        assert arr.shape == (3, 10)
        np.testing.assert_allclose(arr[1], gap.vector())

    def test_touching_strokes_zero_gap(self):
        s1 = Stroke(line_points((0, 0), (1, 0), 12, t0=0.0, t1=1.0))
        s2 = Stroke(line_points((1, 0), (1, 1), 12, t0=1.0, t1=2.0))
        seq = encode_ink_curves(Ink((s1, s2)))
        gap = seq.rows[1]
        np.testing.assert_allclose(gap.vector()[:6], np.zeros(6), atol=1e-12)
        assert gap.pen == 0.0
