import { InkRecorder } from "./capture.js";
import { RecognizerClient, ServiceError, type RecognitionApi } from "./client.js";
import { DEFAULT_OVERLAY_STYLE, drawOverlay } from "./overlay.js";
import type { EncodeResponse, RecognizeResponse } from "./types.js";

export interface AppConfig {
  baseUrl?: string;
  /** Quiet time after pen-up before recognition fires. */
  idleMs?: number;
  nBest?: number;
  /** Injected in tests; defaults to a RecognizerClient for baseUrl. */
  client?: RecognitionApi;
}

export interface InkApp {
  root: HTMLElement;
  canvas: HTMLCanvasElement;
  recorder: InkRecorder;
  client: RecognitionApi;
  recognizeButton: HTMLButtonElement;
  clearButton: HTMLButtonElement;
  overlayToggle: HTMLInputElement;
  banner: HTMLElement;
  results: HTMLOListElement;
  latency: HTMLElement;
  /** Recognize the current ink immediately, bypassing the idle timer. */
  recognizeNow(): Promise<void>;
  dispose(): void;
}

const INK_COLOR = "#1b2a41";
const DEFAULT_BASE_URL = "http://127.0.0.1:8077";
const DEFAULT_IDLE_MS = 300;

function button(label: string, role: string): HTMLButtonElement {
  const b = document.createElement("button");
  b.type = "button";
  b.textContent = label;
  b.dataset.role = role;
  return b;
}

/** Assemble the pad UI under root and wire capture to recognition. */
export function createApp(root: HTMLElement, config: AppConfig = {}): InkApp {
  const idleMs = config.idleMs ?? DEFAULT_IDLE_MS;
  const nBest = config.nBest ?? 5;
  const client =
    config.client ?? new RecognizerClient(config.baseUrl ?? DEFAULT_BASE_URL);

  const banner = document.createElement("div");
  banner.dataset.role = "banner";
  banner.className = "banner";
  banner.hidden = true;

  const canvas = document.createElement("canvas");
  canvas.dataset.role = "pad";
  canvas.width = 420;
  canvas.height = 280;
  canvas.className = "pad";

  const recognizeButton = button("Recognize", "recognize");
  const clearButton = button("Clear", "clear");

  const overlayToggle = document.createElement("input");
  overlayToggle.type = "checkbox";
  overlayToggle.dataset.role = "overlay-toggle";
  const overlayLabel = document.createElement("label");
  overlayLabel.append(overlayToggle, " curves");

  const toolbar = document.createElement("div");
  toolbar.className = "toolbar";
  toolbar.append(recognizeButton, clearButton, overlayLabel);

  const results = document.createElement("ol");
  results.dataset.role = "results";
  const latency = document.createElement("div");
  latency.dataset.role = "latency";

  root.append(banner, canvas, toolbar, results, latency);

  let overlayData: EncodeResponse | null = null;
  let idleTimer: ReturnType<typeof setTimeout> | null = null;
  const ctx = canvas.getContext("2d");

  const disarm = () => {
    if (idleTimer !== null) clearTimeout(idleTimer);
    idleTimer = null;
  };

  const redraw = () => {
    if (ctx === null) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = INK_COLOR;
    ctx.lineWidth = 2;
    ctx.lineJoin = "round";
    ctx.lineCap = "round";
    const paths = [
      ...recorder.completedStrokes().map((s) => s.points),
      recorder.currentPoints(),
    ];
    for (const points of paths) {
      if (points.length === 0) continue;
      ctx.beginPath();
      ctx.moveTo(points[0][0], points[0][1]);
      for (let i = 1; i < points.length; i++) {
        ctx.lineTo(points[i][0], points[i][1]);
      }
      ctx.stroke();
    }
    if (overlayData !== null) {
      drawOverlay(ctx, overlayData.strokes, DEFAULT_OVERLAY_STYLE);
    }
  };

  const updateControls = () => {
    recognizeButton.disabled = recorder.isEmpty();
    clearButton.disabled = recorder.isEmpty();
  };

  const showBanner = (message: string) => {
    banner.textContent = message;
    banner.hidden = false;
  };

  const renderResults = (res: RecognizeResponse) => {
    results.replaceChildren(
      ...res.n_best.map((entry) => {
        const li = document.createElement("li");
        li.textContent = `${entry.text || "(empty)"}  ${entry.score.toFixed(3)}`;
        return li;
      }),
    );
    const stages = ["normalize_ms", "features_ms", "forward_ms", "decode_ms"]
      .filter((k) => k in res.timings)
      .map((k) => `${k.replace("_ms", "")} ${res.timings[k].toFixed(1)}`);
    latency.textContent =
      `${(res.timings.total_ms ?? 0).toFixed(1)} ms total (${stages.join(", ")})`;
  };

  const recognizeNow = async (): Promise<void> => {
    disarm();
    const ink = recorder.ink();
    if (ink === null) return;
    banner.hidden = true;
    let res: RecognizeResponse;
    try {
      res = await client.recognize(ink, nBest);
    } catch (err) {
      if (err instanceof ServiceError && err.code === "cancelled") return;
      showBanner(err instanceof Error ? err.message : String(err));
      return;
    }
    renderResults(res);
    if (overlayToggle.checked) {
      try {
        overlayData = await client.encode(ink);
      } catch (err) {
        if (!(err instanceof ServiceError && err.code === "cancelled")) {
          showBanner(err instanceof Error ? err.message : String(err));
        }
        overlayData = null;
      }
      redraw();
    }
  };

  const recorder = new InkRecorder(canvas, {
    onStrokeStart: disarm,
    onStrokeEnd: () => {
      disarm();
      idleTimer = setTimeout(() => void recognizeNow(), idleMs);
    },
    onChange: () => {
      overlayData = null;
      updateControls();
      redraw();
    },
  });

  recognizeButton.addEventListener("click", () => void recognizeNow());
  clearButton.addEventListener("click", () => {
    disarm();
    recorder.clear();
    results.replaceChildren();
    latency.textContent = "";
    banner.hidden = true;
  });
  overlayToggle.addEventListener("change", () => {
    if (!overlayToggle.checked) {
      overlayData = null;
      redraw();
    } else if (!recorder.isEmpty()) {
      void recognizeNow();
    }
  });

  updateControls();

  return {
    root,
    canvas,
    recorder,
    client,
    recognizeButton,
    clearButton,
    overlayToggle,
    banner,
    results,
    latency,
    recognizeNow,
    dispose: disarm,
  };
}
