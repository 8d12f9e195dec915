/** Filesystem layer: render a figure id to <out>/<id>.svg and .png, with a
 * checksum guard proving the inputs were left untouched. */

import { createHash } from "crypto";
import { existsSync, mkdirSync, readFileSync, writeFileSync } from "fs";
import { join } from "path";

import { buildFigure, FigureId, figureInputs } from "./figures.js";
import { sceneToPng } from "./png.js";
import { sceneToSvg } from "./svg.js";

function sha256(path: string): string | null {
  if (!existsSync(path)) return null;
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

export interface RenderResult {
  svgPath: string;
  pngPath: string;
}

export function renderFigure(id: FigureId, inDir: string, outDir: string): RenderResult {
  const inputs = figureInputs(id).map((name) => join(inDir, name));
  const before = inputs.map(sha256);

  const scene = buildFigure(id, inDir);
  mkdirSync(outDir, { recursive: true });
  const svgPath = join(outDir, `${id}.svg`);
  const pngPath = join(outDir, `${id}.png`);
  writeFileSync(svgPath, sceneToSvg(scene));
  writeFileSync(pngPath, sceneToPng(scene));

  const after = inputs.map(sha256);
  before.forEach((h, i) => {
    if (h !== after[i]) {
      throw new Error(`input file changed during rendering: ${inputs[i]}`);
    }
  });
  return { svgPath, pngPath };
}
