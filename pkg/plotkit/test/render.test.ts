import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { parseTelemetry, column } from "../src/csv.js";
import { buildPanels, renderText, render, type PlotSpec } from "../src/render.js";
import { main } from "../src/cli.js";

const FIXTURE_PATH = new URL("./fixtures/desk_telemetry.csv", import.meta.url).pathname;
const SINGLE_PATH = new URL("./fixtures/single_row.csv", import.meta.url).pathname;
const FIXTURE = readFileSync(FIXTURE_PATH, "utf-8");
const SINGLE = readFileSync(SINGLE_PATH, "utf-8");

function spec(partial: Partial<PlotSpec>): PlotSpec {
  return {
    input: FIXTURE_PATH,
    panels: ["mz_vs_t", "g_vs_t"],
    overlayF: true,
    output: "out.svg",
    ...partial,
  };
}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

describe("renderText", () => {
  it("renders the desk run to SVG with overlay and envelope", () => {
    const { bytes } = renderText(FIXTURE, spec({}));
    const svg = bytes.toString("utf-8");
    expect(svg).toContain("<svg");
    expect(svg).toContain("Steered polarization");
    expect(svg).toContain("f(t)"); // overlay legend
    expect(svg).toContain("max|g| envelope");
    expect((svg.match(/<polyline/g) ?? []).length).toBeGreaterThan(5);
  });

  it("renders PNG with a valid signature", () => {
    const { bytes } = renderText(FIXTURE, spec({ output: "fig.png" }));
    expect(bytes.subarray(0, 8).equals(PNG_MAGIC)).toBe(true);
    // IHDR follows immediately
    expect(bytes.subarray(12, 16).toString("ascii")).toBe("IHDR");
  });

  it("is deterministic", () => {
    const a = renderText(FIXTURE, spec({ output: "fig.png" })).bytes;
    const b = renderText(FIXTURE, spec({ output: "fig.png" })).bytes;
    expect(a.equals(b)).toBe(true);
    const s1 = renderText(FIXTURE, spec({})).bytes;
    const s2 = renderText(FIXTURE, spec({})).bytes;
    expect(s1.equals(s2)).toBe(true);
  });

  it("renders a single-row file without crashing, both formats", () => {
    for (const output of ["one.svg", "one.png"]) {
      const { bytes } = renderText(SINGLE, spec({ output, panels: ["mz_vs_t", "g_vs_t", "e_vs_t"] }));
      expect(bytes.length).toBeGreaterThan(100);
    }
  });

  it("rejects missing columns and unknown panels", () => {
    expect(() => renderText("t,mz\n0,1\n", spec({}))).toThrow(/missing required column/);
    expect(() => renderText(FIXTURE, spec({ panels: [] }))).toThrow(/at least one panel/);
    expect(() =>
      renderText(FIXTURE, spec({ panels: ["nope" as never] })),
    ).toThrow(/unknown panel/);
  });

  it("rejects an empty file", () => {
    expect(() => renderText("", spec({}))).toThrow(/empty/);
  });
});

describe("envelope panel semantics", () => {
  it("envelope dominates |g| for the desk fixture", () => {
    const tel = parseTelemetry(FIXTURE);
    const panels = buildPanels(tel, { panels: ["g_vs_t"], overlayF: false });
    const g = column(tel, "g");
    const env = panels[0].series[1].y;
    for (let i = 0; i < g.length; i += 1) {
      expect(env[i]).toBeGreaterThanOrEqual(Math.abs(g[i]));
    }
  });
});

describe("cli", () => {
  it("end-to-end render via main()", () => {
    const dir = mkdtempSync(join(tmpdir(), "spincool-plot-"));
    const out = join(dir, "fig.png");
    const code = main([
      "--input", FIXTURE_PATH,
      "--panels", "mz_vs_t,g_vs_t",
      "--overlay-f",
      "--output", out,
    ]);
    expect(code).toBe(0);
    expect(readFileSync(out).subarray(0, 8).equals(PNG_MAGIC)).toBe(true);
  });

  it("reports bad usage and bad input with exit 1", () => {
    expect(main(["--input", FIXTURE_PATH])).toBe(1); // no output/panels
    const dir = mkdtempSync(join(tmpdir(), "spincool-plot-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "t,mz\n0,1\n");
    expect(
      main(["--input", bad, "--panels", "g_vs_t", "--output", join(dir, "x.svg")]),
    ).toBe(1);
  });

  it("does not mutate the input CSV", () => {
    const before = readFileSync(FIXTURE_PATH);
    const dir = mkdtempSync(join(tmpdir(), "spincool-plot-"));
    render(spec({ output: join(dir, "fig.svg") }));
    expect(readFileSync(FIXTURE_PATH).equals(before)).toBe(true);
  });
});
