// Canvas painting for the symbolic egocentric frame: colored instance cells,
// depth shading, a class legend, and a pulsing mask for highlight events.

import type { FrameObservation, HighlightState } from "./types.js";

const FAR_PLANE = 10.0;

export function instanceColor(id: string): [number, number, number] {
  let hash = 2166136261;
  for (let i = 0; i < id.length; i++) {
    hash = (hash ^ id.charCodeAt(i)) * 16777619;
    hash >>>= 0;
  }
  const hue = hash % 360;
  return hsl(hue, 0.65, 0.55);
}

function hsl(h: number, s: number, l: number): [number, number, number] {
  const c = (1 - Math.abs(2 * l - 1)) * s;
  const x = c * (1 - Math.abs(((h / 60) % 2) - 1));
  const m = l - c / 2;
  const [r, g, b] =
    h < 60 ? [c, x, 0] : h < 120 ? [x, c, 0] : h < 180 ? [0, c, x]
      : h < 240 ? [0, x, c] : h < 300 ? [x, 0, c] : [c, 0, x];
  return [
    Math.round((r + m) * 255),
    Math.round((g + m) * 255),
    Math.round((b + m) * 255),
  ];
}

export function decodeRaster(frame: FrameObservation): Int32Array {
  const cells = new Int32Array(frame.width * frame.height);
  let pos = 0;
  for (const [run, value] of frame.raster_rle) {
    cells.fill(value, pos, pos + run);
    pos += run;
  }
  return cells;
}

export class FrameRenderer {
  private canvas: HTMLCanvasElement;
  private legend: HTMLElement;
  private pulseUntil = 0;
  private pulseInstance: string | null = null;
  private lastSequence = 0;
  private current: FrameObservation | null = null;

  constructor(canvas: HTMLCanvasElement, legend: HTMLElement) {
    this.canvas = canvas;
    this.legend = legend;
    const tick = () => {
      if (this.pulseInstance && performance.now() < this.pulseUntil) {
        this.paint();
      } else if (this.pulseInstance) {
        this.pulseInstance = null;
        this.paint();
      }
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }

  setFrame(frame: FrameObservation) {
    this.current = frame;
    this.paint();
    this.paintLegend();
  }

  flash(highlight: HighlightState) {
    if (highlight.sequence === this.lastSequence) return;
    this.lastSequence = highlight.sequence;
    this.pulseInstance = highlight.instance;
    this.pulseUntil = performance.now() + highlight.durationMs;
  }

  private paint() {
    const frame = this.current;
    if (!frame) return;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const cellW = this.canvas.width / frame.width;
    const cellH = this.canvas.height / frame.height;
    const cells = decodeRaster(frame);
    const pulse =
      this.pulseInstance !== null
        ? 0.5 + 0.5 * Math.sin(performance.now() / 90)
        : 0;
    ctx.fillStyle = "#10131a";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    for (let y = 0; y < frame.height; y++) {
      for (let x = 0; x < frame.width; x++) {
        const idx = cells[y * frame.width + x];
        if (idx < 0) continue;
        const seen = frame.visible[idx];
        const [r, g, b] = instanceColor(seen.id);
        // nearer objects render brighter
        const shade = 1.0 - 0.65 * Math.min(seen.depth / FAR_PLANE, 1.0);
        let fr = r * shade, fg = g * shade, fb = b * shade;
        if (this.pulseInstance === seen.id) {
          fr = fr + (255 - fr) * pulse;
          fg = fg + (255 - fg) * pulse;
          fb = fb + (255 - fb) * pulse;
        }
        ctx.fillStyle = `rgb(${fr | 0},${fg | 0},${fb | 0})`;
        ctx.fillRect(x * cellW, y * cellH, Math.ceil(cellW), Math.ceil(cellH));
      }
    }
  }

  private paintLegend() {
    const frame = this.current;
    if (!frame) return;
    this.legend.replaceChildren();
    for (const seen of frame.visible) {
      const row = document.createElement("div");
      row.className = "legend-row";
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      const [r, g, b] = instanceColor(seen.id);
      swatch.style.background = `rgb(${r},${g},${b})`;
      const label = document.createElement("span");
      label.textContent = `${seen.class} (${seen.depth.toFixed(1)} m)`;
      row.append(swatch, label);
      this.legend.append(row);
    }
  }
}
