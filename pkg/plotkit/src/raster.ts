/**
 * Software rasterizer for chart primitives: RGB canvas, 1px-ish lines with
 * optional dashing, bitmap-font text. Good enough for publication-style
 * line figures without native dependencies.
 */

import type { Figure, Primitive } from "./chart.js";
import { GLYPH_H, GLYPH_W, glyphRows, textWidth } from "./font.js";

export class Canvas {
  width: number;
  height: number;
  pixels: Uint8Array;

  constructor(width: number, height: number) {
    this.width = Math.round(width);
    this.height = Math.round(height);
    this.pixels = new Uint8Array(this.width * this.height * 3).fill(255);
  }

  set(x: number, y: number, r: number, g: number, b: number): void {
    const xi = Math.round(x);
    const yi = Math.round(y);
    if (xi < 0 || yi < 0 || xi >= this.width || yi >= this.height) return;
    const o = (yi * this.width + xi) * 3;
    this.pixels[o] = r;
    this.pixels[o + 1] = g;
    this.pixels[o + 2] = b;
  }

  fillRect(x: number, y: number, w: number, h: number, rgb: [number, number, number]): void {
    for (let yy = Math.max(0, Math.round(y)); yy < Math.min(this.height, Math.round(y + h)); yy += 1) {
      for (let xx = Math.max(0, Math.round(x)); xx < Math.min(this.width, Math.round(x + w)); xx += 1) {
        const o = (yy * this.width + xx) * 3;
        this.pixels[o] = rgb[0];
        this.pixels[o + 1] = rgb[1];
        this.pixels[o + 2] = rgb[2];
      }
    }
  }

  /** Bresenham segment with dash support; thickness grows as small squares. */
  line(
    x0: number,
    y0: number,
    x1: number,
    y1: number,
    rgb: [number, number, number],
    width: number,
    dashState?: { pattern: number[]; pos: number },
  ): void {
    let xa = Math.round(x0);
    let ya = Math.round(y0);
    const xb = Math.round(x1);
    const yb = Math.round(y1);
    const dx = Math.abs(xb - xa);
    const dy = -Math.abs(yb - ya);
    const sx = xa < xb ? 1 : -1;
    const sy = ya < yb ? 1 : -1;
    let err = dx + dy;
    const r = Math.max(0, Math.round(width / 2) - 1);
    for (;;) {
      let draw = true;
      if (dashState) {
        const total = dashState.pattern.reduce((a, b) => a + b, 0);
        let p = dashState.pos % total;
        let on = true;
        for (const seg of dashState.pattern) {
          if (p < seg) {
            draw = on;
            break;
          }
          p -= seg;
          on = !on;
        }
        dashState.pos += 1;
      }
      if (draw) {
        if (r === 0) {
          this.set(xa, ya, rgb[0], rgb[1], rgb[2]);
        } else {
          for (let oy = -r; oy <= r; oy += 1) {
            for (let ox = -r; ox <= r; ox += 1) {
              this.set(xa + ox, ya + oy, rgb[0], rgb[1], rgb[2]);
            }
          }
        }
      }
      if (xa === xb && ya === yb) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        xa += sx;
      }
      if (e2 <= dx) {
        err += dx;
        ya += sy;
      }
    }
  }

  text(
    x: number,
    y: number,
    s: string,
    size: number,
    rgb: [number, number, number],
    anchor: "start" | "middle" | "end",
    rotate = false,
  ): void {
    const scale = Math.max(1, Math.round(size / 8));
    const w = textWidth(s, scale);
    let ox = x;
    if (anchor === "middle") ox -= rotate ? 0 : w / 2;
    if (anchor === "end") ox -= rotate ? 0 : w;
    let oy = y - GLYPH_H * scale; // y is the baseline
    if (rotate && anchor === "middle") oy = y + w / 2;

    for (let ci = 0; ci < s.length; ci += 1) {
      const rows = glyphRows(s[ci]);
      for (let gy = 0; gy < GLYPH_H; gy += 1) {
        for (let gx = 0; gx < GLYPH_W; gx += 1) {
          if ((rows[gy] >> (GLYPH_W - 1 - gx)) & 1) {
            for (let py = 0; py < scale; py += 1) {
              for (let px = 0; px < scale; px += 1) {
                const lx = ci * (GLYPH_W + 1) * scale + gx * scale + px;
                const ly = gy * scale + py;
                if (rotate) {
                  // -90 degrees: (lx, ly) -> (x + ly, oy - lx)
                  this.set(x + ly, oy - lx, rgb[0], rgb[1], rgb[2]);
                } else {
                  this.set(ox + lx, oy + ly, rgb[0], rgb[1], rgb[2]);
                }
              }
            }
          }
        }
      }
    }
  }
}

export function hexToRgb(hex: string): [number, number, number] {
  const h = hex.replace("#", "");
  return [
    parseInt(h.slice(0, 2), 16),
    parseInt(h.slice(2, 4), 16),
    parseInt(h.slice(4, 6), 16),
  ];
}

export function rasterize(fig: Figure): Canvas {
  const canvas = new Canvas(fig.width, fig.height);
  for (const p of fig.primitives as Primitive[]) {
    if (p.kind === "rect") {
      canvas.fillRect(p.x, p.y, p.w, p.h, hexToRgb(p.fill));
    } else if (p.kind === "marker") {
      canvas.fillRect(p.x - p.size / 2, p.y - p.size / 2, p.size, p.size, hexToRgb(p.color));
    } else if (p.kind === "polyline") {
      const rgb = hexToRgb(p.color);
      const dashState = p.dash ? { pattern: p.dash, pos: 0 } : undefined;
      for (let i = 0; i + 3 < p.points.length; i += 2) {
        canvas.line(
          p.points[i],
          p.points[i + 1],
          p.points[i + 2],
          p.points[i + 3],
          rgb,
          p.width,
          dashState,
        );
      }
    } else {
      canvas.text(p.x, p.y, p.text, p.size, hexToRgb(p.color), p.anchor, p.rotate ?? false);
    }
  }
  return canvas;
}
