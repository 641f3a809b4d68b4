/** Wire formats shared with the recognition service. */

/** One sampled pen position: x, y in sender units, time in seconds. */
export type InkPoint = [number, number, number];

export interface StrokeJson {
  pen_down: boolean;
  points: InkPoint[];
}

export interface WritingAreaJson {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface InkJson {
  version: 1;
  writing_area: WritingAreaJson | null;
  strokes: StrokeJson[];
}

export interface NBestEntry {
  text: string;
  score: number;
  network_score: number;
}

export interface RecognizeResponse {
  version: number;
  model: string;
  text: string;
  n_best: NBestEntry[];
  timings: Record<string, number>;
}

/** One fitted cubic: four control points in the sender's coordinates. */
export interface CurveSegmentJson {
  control_points: Array<[number, number]>;
}

export interface EncodedStrokeJson {
  pen_down: boolean;
  segments: CurveSegmentJson[];
}

export interface EncodeResponse {
  version: number;
  strokes: EncodedStrokeJson[];
}

export interface HealthResponse {
  version: number;
  status: string;
  backend: string;
  default_model: string;
  models: string[];
}
