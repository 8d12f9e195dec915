import { describe, expect, it } from "vitest";

import { parseCsv } from "../src/csv.js";
import { crc32, encodePng } from "../src/png.js";
import { fmtTick, linearScale, niceTicks } from "../src/scale.js";
import { runStats } from "../src/figures.js";

describe("csv", () => {
  it("parses header and rows", () => {
    const t = parseCsv("a,b\n1,2\n3,4\n");
    expect(t.columns).toEqual(["a", "b"]);
    expect(t.rows).toHaveLength(2);
    expect(t.rows[1]["b"]).toBe("4");
  });

  it("handles header-only files", () => {
    const t = parseCsv("a,b\n");
    expect(t.columns).toEqual(["a", "b"]);
    expect(t.rows).toHaveLength(0);
  });
});

describe("scale", () => {
  it("maps linearly", () => {
    const s = linearScale([0, 10], [100, 200]);
    expect(s.map(0)).toBe(100);
    expect(s.map(5)).toBe(150);
    expect(s.map(10)).toBe(200);
  });

  it("produces round ticks covering the domain", () => {
    const ticks = niceTicks(0, 5000);
    expect(ticks[0]).toBe(0);
    expect(ticks.at(-1)).toBe(5000);
    const steps = new Set(ticks.slice(1).map((t, i) => t - ticks[i]));
    expect(steps.size).toBe(1);
  });

  it("formats ticks compactly", () => {
    expect(fmtTick(0)).toBe("0");
    expect(fmtTick(2500)).toBe("2500");
    expect(fmtTick(1e6)).toBe("1.0e6");
  });
});

describe("png encoder", () => {
  it("crc32 matches the reference vector", () => {
    expect(crc32(new TextEncoder().encode("123456789"))).toBe(0xcbf43926);
  });

  it("writes a well-formed header", () => {
    const rgba = new Uint8Array(3 * 2 * 4).fill(200);
    const png = encodePng(3, 2, rgba);
    expect([...png.subarray(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
    expect(png.readUInt32BE(8)).toBe(13);             // IHDR length
    expect(png.subarray(12, 16).toString("ascii")).toBe("IHDR");
    expect(png.readUInt32BE(16)).toBe(3);             // width
    expect(png.readUInt32BE(20)).toBe(2);             // height
    expect(png.subarray(png.length - 8, png.length - 4).toString("ascii")).toBe("IEND");
  });
});

describe("runStats", () => {
  const table = {
    columns: ["iteration", "policy", "average_return", "run_id"],
    rows: [
      { iteration: "100", policy: "trained", average_return: "4.0", run_id: "1" },
      { iteration: "100", policy: "trained", average_return: "6.0", run_id: "2" },
      { iteration: "200", policy: "trained", average_return: "8.0", run_id: "1" },
      { iteration: "200", policy: "trained", average_return: "8.0", run_id: "2" },
      { iteration: "100", policy: "random", average_return: "1.0", run_id: "1" },
    ],
  };

  it("computes mean and population std across runs", () => {
    const s = runStats(table, "iteration", "average_return", (r) => r["policy"] === "trained");
    expect(s.x).toEqual([100, 200]);
    expect(s.mean).toEqual([5.0, 8.0]);
    expect(s.std).toEqual([1.0, 0.0]);
  });

  it("single-run data yields zero-width bands", () => {
    const s = runStats(table, "iteration", "average_return", (r) => r["policy"] === "random");
    expect(s.std).toEqual([0.0]);
  });
});
