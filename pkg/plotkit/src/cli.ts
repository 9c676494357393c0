#!/usr/bin/env node
/**
 * spincool-plot --input FILE --panels mz_vs_t,g_vs_t --overlay-f --output fig.png
 *
 * Renders figures from spincool telemetry CSV files. Output format comes
 * from --format or the output extension (.svg / .png).
 */

import { PANELS, render, type PanelName, type PlotSpec } from "./render.js";

const USAGE = `usage: spincool-plot --input FILE --panels ${PANELS.join(",")} [--overlay-f]
                     --output FILE [--format svg|png] [--envelope-window T] [--width W]`;

export function parseArgs(argv: string[]): PlotSpec {
  let input: string | undefined;
  let output: string | undefined;
  let panels: PanelName[] = [];
  let overlayF = false;
  let format: "png" | "svg" | undefined;
  let envelopeWindow: number | undefined;
  let width: number | undefined;

  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`${arg} needs a value`);
      return argv[i];
    };
    switch (arg) {
      case "--input":
        input = next();
        break;
      case "--output":
        output = next();
        break;
      case "--panels":
        panels = next().split(",").map((p) => p.trim()) as PanelName[];
        break;
      case "--overlay-f":
        overlayF = true;
        break;
      case "--format": {
        const f = next();
        if (f !== "png" && f !== "svg") throw new Error(`--format must be png or svg, got ${f}`);
        format = f;
        break;
      }
      case "--envelope-window":
        envelopeWindow = Number(next());
        if (!Number.isFinite(envelopeWindow) || envelopeWindow < 0) {
          throw new Error("--envelope-window must be a non-negative number");
        }
        break;
      case "--width":
        width = Number(next());
        if (!Number.isFinite(width) || width < 100) throw new Error("--width must be >= 100");
        break;
      case "--help":
      case "-h":
        console.log(USAGE);
        process.exit(0);
        break;
      default:
        throw new Error(`unknown argument ${arg}\n${USAGE}`);
    }
  }
  if (!input) throw new Error(`--input is required\n${USAGE}`);
  if (!output) throw new Error(`--output is required\n${USAGE}`);
  if (panels.length === 0) throw new Error(`--panels is required\n${USAGE}`);
  return { input, output, panels, overlayF, format, envelopeWindow, width };
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    render(spec);
    console.log(`wrote ${spec.output}`);
    return 0;
  } catch (err) {
    console.error(`spincool-plot: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

import { fileURLToPath } from "node:url";

if (process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1]) {
  process.exit(main(process.argv.slice(2)));
}
