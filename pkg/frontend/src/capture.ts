import type { InkJson, InkPoint, StrokeJson } from "./types.js";

/** The slice of a pointer event the recorder reads; tests pass plain objects. */
export interface PointerSample {
  clientX: number;
  clientY: number;
  /** Milliseconds, as event.timeStamp. */
  timeStamp: number;
  pointerId?: number;
}

export interface RecorderHooks {
  /** A stroke began; any pending recognition should be held back. */
  onStrokeStart?: () => void;
  /** A stroke was committed. */
  onStrokeEnd?: () => void;
  /** Any change to the recorded ink, including clear(). */
  onChange?: () => void;
}

/**
 * Collects pointer strokes on a surface element into service-format ink.
 *
 * Coordinates are kept in surface-local pixels exactly as drawn; the
 * surface rectangle is reported as the writing area and all scaling is
 * left to the service. Timestamps are seconds from the first contact
 * and never decrease, whatever the event stream claims.
 */
export class InkRecorder {
  private strokes: StrokeJson[] = [];
  private current: InkPoint[] | null = null;
  private activePointer: number | null = null;
  private origin: number | null = null;
  private lastTime = 0;

  constructor(
    private surface: HTMLElement,
    private hooks: RecorderHooks = {},
  ) {
    surface.addEventListener("pointerdown", (e) => this.penDown(e as PointerEvent));
    surface.addEventListener("pointermove", (e) => this.penMove(e as PointerEvent));
    surface.addEventListener("pointerup", (e) => this.penUp(e as PointerEvent));
    surface.addEventListener("pointercancel", (e) => this.penUp(e as PointerEvent));
  }

  penDown(sample: PointerSample): void {
    if (this.activePointer !== null) return;
    this.activePointer = sample.pointerId ?? 0;
    const capture = (this.surface as Partial<HTMLElement>).setPointerCapture;
    if (typeof capture === "function" && sample.pointerId !== undefined) {
      try {
        capture.call(this.surface, sample.pointerId);
      } catch {
        // capture is best-effort; synthetic events have no active pointer
      }
    }
    this.current = [this.toPoint(sample)];
    this.hooks.onStrokeStart?.();
    this.hooks.onChange?.();
  }

  penMove(sample: PointerSample): void {
    if (this.current === null) return;
    if ((sample.pointerId ?? 0) !== this.activePointer) return;
    this.current.push(this.toPoint(sample));
    this.hooks.onChange?.();
  }

  penUp(sample: PointerSample): void {
    if (this.current === null) return;
    if ((sample.pointerId ?? 0) !== this.activePointer) return;
    const point = this.toPoint(sample);
    const last = this.current[this.current.length - 1];
    if (point[0] !== last[0] || point[1] !== last[1]) {
      this.current.push(point);
    }
    this.strokes.push({ pen_down: true, points: this.current });
    this.current = null;
    this.activePointer = null;
    this.hooks.onStrokeEnd?.();
    this.hooks.onChange?.();
  }

  /** Points of the stroke being drawn right now, for live feedback. */
  currentPoints(): ReadonlyArray<InkPoint> {
    return this.current ?? [];
  }

  completedStrokes(): ReadonlyArray<StrokeJson> {
    return this.strokes;
  }

  isEmpty(): boolean {
    return this.strokes.length === 0 && this.current === null;
  }

  clear(): void {
    this.strokes = [];
    this.current = null;
    this.activePointer = null;
    this.origin = null;
    this.lastTime = 0;
    this.hooks.onChange?.();
  }

  /** Snapshot of the committed strokes as wire-format ink; null when empty. */
  ink(): InkJson | null {
    if (this.strokes.length === 0) return null;
    const rect = this.surface.getBoundingClientRect();
    return {
      version: 1,
      writing_area: { x: 0, y: 0, w: rect.width, h: rect.height },
      strokes: this.strokes.map((s) => ({
        pen_down: s.pen_down,
        points: s.points.map((p) => [...p] as InkPoint),
      })),
    };
  }

  private toPoint(sample: PointerSample): InkPoint {
    const rect = this.surface.getBoundingClientRect();
    if (this.origin === null) this.origin = sample.timeStamp;
    const t = Math.max((sample.timeStamp - this.origin) / 1000, this.lastTime);
    this.lastTime = t;
    return [sample.clientX - rect.left, sample.clientY - rect.top, t];
  }
}
