/**
 * Telemetry CSV -> figure file. Panels: mz_vs_t (optional steering overlay),
 * g_vs_t (raw trace plus rolling max-|g| envelope), e_vs_t.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { buildFigure, figureToSvg, type Figure, type PanelSpec, type Series } from "./chart.js";
import { column, parseTelemetry, requireColumns, type Telemetry } from "./csv.js";
import { medianSpacing, rollingMaxAbs } from "./envelope.js";
import { encodePng } from "./png.js";
import { rasterize } from "./raster.js";

export const PANELS = ["mz_vs_t", "g_vs_t", "e_vs_t"] as const;
export type PanelName = (typeof PANELS)[number];

export interface PlotSpec {
  input: string; // CSV path (or raw text via renderText)
  panels: PanelName[];
  overlayF: boolean;
  output: string;
  format?: "png" | "svg"; // default: from the output extension
  /** envelope window in time units; default 10 telemetry samples
   * (= 10 drive periods at the default one-period telemetry cadence) */
  envelopeWindow?: number;
  width?: number;
}

const SERIES_BLUE = "#2456d6";
const STEER_RED = "#c63a2f";
const DRIVE_GRAY = "#6d7b8d";
const ENVELOPE_ORANGE = "#e07a1f";
const ENERGY_GREEN = "#2c7a3f";

const REQUIRED: Record<PanelName, string[]> = {
  mz_vs_t: ["t", "mz"],
  g_vs_t: ["t", "g"],
  e_vs_t: ["t", "e"],
};

export function buildPanels(tel: Telemetry, spec: Pick<PlotSpec, "panels" | "overlayF" | "envelopeWindow">): PanelSpec[] {
  if (spec.panels.length === 0) {
    throw new Error("at least one panel is required");
  }
  for (const p of spec.panels) {
    if (!PANELS.includes(p)) {
      throw new Error(`unknown panel ${p}; valid: ${PANELS.join(", ")}`);
    }
    requireColumns(tel, REQUIRED[p]);
  }
  if (spec.overlayF && spec.panels.includes("mz_vs_t")) {
    requireColumns(tel, ["f"]);
  }
  const t = column(tel, "t");
  const out: PanelSpec[] = [];
  for (const name of spec.panels) {
    if (name === "mz_vs_t") {
      const series: Series[] = [
        { label: "Mz", t, y: column(tel, "mz"), color: SERIES_BLUE, width: 1.2 },
      ];
      if (spec.overlayF) {
        series.push({
          label: "f(t)",
          t,
          y: column(tel, "f"),
          color: STEER_RED,
          width: 1.2,
          dash: [6, 4],
        });
      }
      out.push({ title: "Steered polarization", yLabel: "Mz", series });
    } else if (name === "g_vs_t") {
      const g = column(tel, "g");
      const window = spec.envelopeWindow ?? 10 * medianSpacing(t);
      const env = rollingMaxAbs(t, g, window);
      const negEnv = new Float64Array(env.length);
      for (let i = 0; i < env.length; i += 1) negEnv[i] = -env[i];
      out.push({
        title: "Feedback drive",
        yLabel: "g",
        series: [
          { label: "g(t)", t, y: g, color: DRIVE_GRAY, width: 0.8 },
          { label: "max|g| envelope", t, y: env, color: ENVELOPE_ORANGE, width: 1.4 },
          { label: "", t, y: negEnv, color: ENVELOPE_ORANGE, width: 1.4, dash: [3, 3] },
        ],
      });
    } else {
      out.push({
        title: "Internal energy",
        yLabel: "E",
        series: [{ label: "E(t)", t, y: column(tel, "e"), color: ENERGY_GREEN, width: 1.2 }],
      });
    }
  }
  return out;
}

export function renderText(csvText: string, spec: PlotSpec): { figure: Figure; bytes: Buffer } {
  const tel = parseTelemetry(csvText);
  const panels = buildPanels(tel, spec);
  const figure = buildFigure(panels, spec.width ?? 800);
  const format = spec.format ?? (spec.output.toLowerCase().endsWith(".png") ? "png" : "svg");
  if (format === "svg") {
    return { figure, bytes: Buffer.from(figureToSvg(figure), "utf-8") };
  }
  const canvas = rasterize(figure);
  return { figure, bytes: encodePng(canvas.width, canvas.height, canvas.pixels) };
}

export function render(spec: PlotSpec): void {
  const text = readFileSync(spec.input, "utf-8");
  const { bytes } = renderText(text, spec);
  writeFileSync(spec.output, bytes);
}
