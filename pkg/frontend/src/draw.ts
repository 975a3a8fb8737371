/** Canvas compositing and stroke capture for the annotation view. */

import { Stroke } from "./api.js";

/** Label tint colors; index = label id (0 stays transparent). */
export const PALETTE: [number, number, number][] = [
  [0, 0, 0],
  [46, 204, 113],
  [231, 76, 60],
  [52, 152, 219],
  [241, 196, 15],
  [155, 89, 182],
];

/**
 * Tint a grayscale label-id image into RGBA overlay pixels.
 *
 * `gray` is RGBA data whose R channel holds label ids; `out` receives the
 * palette color with `opacity` on labeled pixels and stays transparent on
 * background. Pure array-in/array-out so it is testable headlessly.
 */
export function colorizeMask(
  gray: Uint8ClampedArray,
  out: Uint8ClampedArray,
  opacity: number,
): void {
  const alpha = Math.round(Math.max(0, Math.min(1, opacity)) * 255);
  for (let i = 0; i < gray.length; i += 4) {
    const label = gray[i]!;
    if (label === 0) {
      out[i + 3] = 0;
      continue;
    }
    const color = PALETTE[label % PALETTE.length]!;
    out[i] = color[0];
    out[i + 1] = color[1];
    out[i + 2] = color[2];
    out[i + 3] = alpha;
  }
}

/** Composite frame, mask overlay (or model view) and the live stroke. */
export class OverlayView {
  private frame: HTMLImageElement | null = null;
  private mask: HTMLImageElement | null = null;
  private model: HTMLImageElement | null = null;
  opacity = 0.5;
  showModel = false;
  livePoints: [number, number][] = [];
  liveLabel = 1;
  liveRadius = 3;

  constructor(readonly canvas: HTMLCanvasElement) {}

  get width(): number {
    return this.frame?.naturalWidth ?? 0;
  }

  get height(): number {
    return this.frame?.naturalHeight ?? 0;
  }

  setFrame(img: HTMLImageElement | null): void {
    this.frame = img;
    if (img) {
      this.canvas.width = img.naturalWidth;
      this.canvas.height = img.naturalHeight;
    }
    this.render();
  }

  setMask(img: HTMLImageElement | null): void {
    this.mask = img;
    this.render();
  }

  setModel(img: HTMLImageElement | null): void {
    this.model = img;
    this.render();
  }

  render(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!this.frame) return;
    ctx.drawImage(this.frame, 0, 0);
    if (this.showModel && this.model) {
      ctx.globalAlpha = 0.75;
      ctx.drawImage(this.model, 0, 0);
      ctx.globalAlpha = 1.0;
    } else if (this.mask) {
      ctx.drawImage(this.tintedMask(), 0, 0);
    }
    if (this.livePoints.length > 0) this.drawLiveStroke(ctx);
  }

  private tintedMask(): HTMLCanvasElement {
    const w = this.canvas.width;
    const h = this.canvas.height;
    const scratch = document.createElement("canvas");
    scratch.width = w;
    scratch.height = h;
    const sctx = scratch.getContext("2d")!;
    sctx.drawImage(this.mask!, 0, 0);
    const src = sctx.getImageData(0, 0, w, h);
    const dst = sctx.createImageData(w, h);
    colorizeMask(src.data, dst.data, this.opacity);
    sctx.putImageData(dst, 0, 0);
    return scratch;
  }

  private drawLiveStroke(ctx: CanvasRenderingContext2D): void {
    const color = PALETTE[this.liveLabel % PALETTE.length]!;
    ctx.strokeStyle = `rgba(${color[0]},${color[1]},${color[2]},0.9)`;
    ctx.lineWidth = this.liveRadius * 2;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    const [first, ...rest] = this.livePoints;
    if (!first) return;
    ctx.moveTo(first[0], first[1]);
    for (const [x, y] of rest) ctx.lineTo(x, y);
    ctx.stroke();
  }
}

/** Collect pointer gestures on a canvas as strokes in image coordinates. */
export class StrokeCapture {
  private active = false;
  private points: [number, number][] = [];

  constructor(
    readonly view: OverlayView,
    readonly onStroke: (stroke: Stroke) => void,
    readonly enabled: () => boolean,
  ) {
    const c = view.canvas;
    c.addEventListener("pointerdown", (e) => this.begin(e));
    c.addEventListener("pointermove", (e) => this.extend(e));
    window.addEventListener("pointerup", () => this.finish());
  }

  private toImage(e: PointerEvent): [number, number] {
    const rect = this.view.canvas.getBoundingClientRect();
    const sx = this.view.canvas.width / rect.width;
    const sy = this.view.canvas.height / rect.height;
    return [(e.clientX - rect.left) * sx, (e.clientY - rect.top) * sy];
  }

  private begin(e: PointerEvent): void {
    if (!this.enabled()) return;
    this.active = true;
    this.points = [this.toImage(e)];
    this.view.livePoints = this.points;
    this.view.liveLabel = this.view.canvas.dataset.label
      ? Number(this.view.canvas.dataset.label)
      : 1;
    this.view.render();
  }

  private extend(e: PointerEvent): void {
    if (!this.active) return;
    this.points.push(this.toImage(e));
    this.view.livePoints = this.points;
    this.view.render();
  }

  private finish(): void {
    if (!this.active) return;
    this.active = false;
    const pts = this.points;
    this.points = [];
    this.view.livePoints = [];
    this.view.render();
    if (pts.length > 0) {
      this.onStroke({
        label: this.view.liveLabel,
        points: pts.map(([x, y]) => [Math.round(x), Math.round(y)]),
        radius: this.view.liveRadius,
      });
    }
  }
}
