import type { EncodedStrokeJson } from "./types.js";

/** Minimal 2d-context surface the overlay draws with; stubbed in tests. */
export interface StrokeContext {
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export interface OverlayStyle {
  penDown: string;
  penUp: string;
  lineWidth: number;
  samplesPerCurve: number;
}

export const DEFAULT_OVERLAY_STYLE: OverlayStyle = {
  penDown: "#0b7a55",
  penUp: "#d9622b",
  lineWidth: 2,
  samplesPerCurve: 24,
};

/** Evaluate a cubic Bezier at evenly spaced parameters, endpoints included. */
export function bezierPolyline(
  controlPoints: ReadonlyArray<readonly [number, number]>,
  samples = 24,
): Array<[number, number]> {
  const [p0, p1, p2, p3] = controlPoints;
  const out: Array<[number, number]> = [];
  for (let i = 0; i <= samples; i++) {
    const s = i / samples;
    const r = 1 - s;
    const b0 = r * r * r;
    const b1 = 3 * r * r * s;
    const b2 = 3 * r * s * s;
    const b3 = s * s * s;
    out.push([
      b0 * p0[0] + b1 * p1[0] + b2 * p2[0] + b3 * p3[0],
      b0 * p0[1] + b1 * p1[1] + b2 * p2[1] + b3 * p3[1],
    ]);
  }
  return out;
}

/**
 * Draw every fitted curve as its own polyline, colored by pen state.
 * Returns the number of segments drawn.
 */
export function drawOverlay(
  ctx: StrokeContext,
  strokes: ReadonlyArray<EncodedStrokeJson>,
  style: OverlayStyle = DEFAULT_OVERLAY_STYLE,
): number {
  let drawn = 0;
  for (const stroke of strokes) {
    ctx.strokeStyle = stroke.pen_down ? style.penDown : style.penUp;
    ctx.lineWidth = style.lineWidth;
    for (const segment of stroke.segments) {
      const line = bezierPolyline(segment.control_points, style.samplesPerCurve);
      ctx.beginPath();
      ctx.moveTo(line[0][0], line[0][1]);
      for (let i = 1; i < line.length; i++) {
        ctx.lineTo(line[i][0], line[i][1]);
      }
      ctx.stroke();
      drawn++;
    }
  }
  return drawn;
}
