#!/usr/bin/env node
/** plot --figure <id|all> --in <artifact dir> --out <image dir> */

import { FIGURE_IDS, FigureId } from "./figures.js";
import { renderFigure } from "./render.js";

function usage(): string {
  return `usage: plotkit --figure <${FIGURE_IDS.join("|")}|all> --in <dir> --out <dir>`;
}

export function main(argv: string[]): number {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || argv[i + 1] === undefined) {
      console.error(usage());
      return 2;
    }
    args.set(argv[i].slice(2), argv[i + 1]);
  }
  const figure = args.get("figure");
  const inDir = args.get("in");
  const outDir = args.get("out");
  if (!figure || !inDir || !outDir) {
    console.error(usage());
    return 2;
  }
  const ids: FigureId[] = figure === "all"
    ? [...FIGURE_IDS]
    : [figure as FigureId];
  if (!ids.every((id) => (FIGURE_IDS as readonly string[]).includes(id))) {
    console.error(`unknown figure id '${figure}'\n${usage()}`);
    return 2;
  }
  try {
    for (const id of ids) {
      const res = renderFigure(id, inDir, outDir);
      console.log(`rendered ${id}: ${res.svgPath}, ${res.pngPath}`);
    }
  } catch (e) {
    console.error(`error: ${e instanceof Error ? e.message : e}`);
    return 1;
  }
  return 0;
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
