/**
 * Chart building: data series -> a device-independent list of drawing
 * primitives, serializable to SVG or rasterizable to PNG.
 */

export interface Polyline {
  kind: "polyline";
  points: Float64Array; // x0,y0,x1,y1,...
  color: string;
  width: number;
  dash?: number[]; // on/off lengths
}

export interface Rect {
  kind: "rect";
  x: number;
  y: number;
  w: number;
  h: number;
  fill: string;
}

export interface Marker {
  kind: "marker"; // small filled square, for single-point series
  x: number;
  y: number;
  size: number;
  color: string;
}

export interface Text {
  kind: "text";
  x: number;
  y: number; // baseline
  text: string;
  size: number;
  color: string;
  anchor: "start" | "middle" | "end";
  rotate?: boolean; // -90 degrees about (x, y)
}

export type Primitive = Polyline | Rect | Marker | Text;

export interface Figure {
  width: number;
  height: number;
  primitives: Primitive[];
}

export interface Series {
  label: string;
  t: Float64Array;
  y: Float64Array;
  color: string;
  width?: number;
  dash?: number[];
}

export interface PanelSpec {
  title: string;
  yLabel: string;
  series: Series[];
}

const AXIS = "#333333";
const GRID = "#e3e3e3";
const LABEL = "#555555";

export function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(Math.abs(rough))));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export function formatTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) return v.toExponential(1).replace("+", "");
  const s = v.toPrecision(6);
  return String(Number(s));
}

function dataRange(values: Float64Array[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of values) {
    for (let i = 0; i < arr.length; i += 1) {
      if (arr[i] < lo) lo = arr[i];
      if (arr[i] > hi) hi = arr[i];
    }
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    lo = 0;
    hi = 1;
  }
  if (hi - lo === 0) {
    // degenerate (single point or constant series): pad symmetrically
    const pad = Math.abs(hi) > 0 ? Math.abs(hi) * 0.1 : 1;
    lo -= pad;
    hi += pad;
  } else {
    const pad = (hi - lo) * 0.06;
    lo -= pad;
    hi += pad;
  }
  return [lo, hi];
}

/** Lay out stacked panels and emit all primitives for the figure. */
export function buildFigure(panels: PanelSpec[], width = 800, panelHeight = 230): Figure {
  const ml = 72;
  const mr = 16;
  const mt = 34;
  const mb = 44;
  const height = panels.length * panelHeight;
  const prims: Primitive[] = [{ kind: "rect", x: 0, y: 0, w: width, h: height, fill: "#ffffff" }];

  panels.forEach((panel, idx) => {
    const top = idx * panelHeight;
    const ph = panelHeight - mt - mb;
    const pw = width - ml - mr;
    const allT = panel.series.map((s) => s.t);
    const allY = panel.series.map((s) => s.y);
    const [t0, t1] = dataRange(allT);
    const [y0, y1] = dataRange(allY);
    const xOf = (t: number) => ml + ((t - t0) / (t1 - t0)) * pw;
    const yOf = (y: number) => top + mt + ph - ((y - y0) / (y1 - y0)) * ph;

    // grid + y ticks
    for (const v of niceTicks(y0, y1, 5)) {
      const y = yOf(v);
      prims.push({
        kind: "polyline",
        points: new Float64Array([ml, y, ml + pw, y]),
        color: GRID,
        width: 0.6,
      });
      prims.push({
        kind: "text",
        x: ml - 6,
        y: y + 3,
        text: formatTick(v),
        size: 10,
        color: LABEL,
        anchor: "end",
      });
    }
    // x ticks
    for (const v of niceTicks(t0, t1, 7)) {
      const x = xOf(v);
      prims.push({
        kind: "polyline",
        points: new Float64Array([x, top + mt + ph, x, top + mt + ph + 4]),
        color: AXIS,
        width: 0.8,
      });
      prims.push({
        kind: "text",
        x,
        y: top + mt + ph + 16,
        text: formatTick(v),
        size: 10,
        color: LABEL,
        anchor: "middle",
      });
    }

    // series
    for (const s of panel.series) {
      if (s.t.length === 1) {
        prims.push({ kind: "marker", x: xOf(s.t[0]), y: yOf(s.y[0]), size: 5, color: s.color });
        continue;
      }
      const pts = new Float64Array(s.t.length * 2);
      for (let i = 0; i < s.t.length; i += 1) {
        pts[2 * i] = xOf(s.t[i]);
        pts[2 * i + 1] = yOf(s.y[i]);
      }
      prims.push({
        kind: "polyline",
        points: pts,
        color: s.color,
        width: s.width ?? 1.1,
        dash: s.dash,
      });
    }

    // frame
    prims.push({
      kind: "polyline",
      points: new Float64Array([ml, top + mt, ml, top + mt + ph, ml + pw, top + mt + ph]),
      color: AXIS,
      width: 1,
    });
    // titles and labels
    prims.push({
      kind: "text",
      x: ml,
      y: top + 18,
      text: panel.title,
      size: 12,
      color: "#222222",
      anchor: "start",
    });
    prims.push({
      kind: "text",
      x: 16,
      y: top + mt + ph / 2,
      text: panel.yLabel,
      size: 11,
      color: LABEL,
      anchor: "middle",
      rotate: true,
    });
    prims.push({
      kind: "text",
      x: ml + pw / 2,
      y: top + panelHeight - 12,
      text: "t",
      size: 11,
      color: LABEL,
      anchor: "middle",
    });
    // legend (top-right, one entry per series)
    let lx = ml + pw;
    for (let i = panel.series.length - 1; i >= 0; i -= 1) {
      const s = panel.series[i];
      const labelW = s.label.length * 6 + 26;
      lx -= labelW;
      prims.push({
        kind: "polyline",
        points: new Float64Array([lx, top + 14, lx + 16, top + 14]),
        color: s.color,
        width: s.width ?? 1.1,
        dash: s.dash,
      });
      prims.push({
        kind: "text",
        x: lx + 20,
        y: top + 17,
        text: s.label,
        size: 10,
        color: LABEL,
        anchor: "start",
      });
    }
  });

  return { width, height, primitives: prims };
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function figureToSvg(fig: Figure): string {
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${fig.width}" height="${fig.height}" ` +
      `viewBox="0 0 ${fig.width} ${fig.height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  for (const p of fig.primitives) {
    if (p.kind === "rect") {
      parts.push(`<rect x="${p.x}" y="${p.y}" width="${p.w}" height="${p.h}" fill="${p.fill}"/>`);
    } else if (p.kind === "marker") {
      const h = p.size / 2;
      parts.push(
        `<rect x="${(p.x - h).toFixed(2)}" y="${(p.y - h).toFixed(2)}" width="${p.size}" ` +
          `height="${p.size}" fill="${p.color}"/>`,
      );
    } else if (p.kind === "polyline") {
      const pts: string[] = [];
      for (let i = 0; i < p.points.length; i += 2) {
        pts.push(`${p.points[i].toFixed(2)},${p.points[i + 1].toFixed(2)}`);
      }
      const dash = p.dash ? ` stroke-dasharray="${p.dash.join(",")}"` : "";
      parts.push(
        `<polyline fill="none" stroke="${p.color}" stroke-width="${p.width}"${dash} ` +
          `points="${pts.join(" ")}"/>`,
      );
    } else {
      const rot = p.rotate ? ` transform="rotate(-90,${p.x},${p.y})"` : "";
      parts.push(
        `<text x="${p.x}" y="${p.y}" font-size="${p.size}" fill="${p.color}" ` +
          `text-anchor="${p.anchor}"${rot}>${esc(p.text)}</text>`,
      );
    }
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
