/** Serialize a scene to standalone SVG markup. */

import { Scene, Shape } from "./scene.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function pts(list: [number, number][]): string {
  return list.map(([x, y]) => `${round(x)},${round(y)}`).join(" ");
}

function round(v: number): number {
  return Math.round(v * 100) / 100;
}

function shapeSvg(s: Shape): string {
  switch (s.kind) {
    case "rect": {
      const fill = s.fill ?? "none";
      const stroke = s.stroke ? ` stroke="${s.stroke}"` : "";
      return `<rect x="${round(s.x)}" y="${round(s.y)}" width="${round(s.w)}" height="${round(s.h)}" fill="${fill}"${stroke}/>`;
    }
    case "line": {
      const dash = s.dash ? ` stroke-dasharray="5,4"` : "";
      return `<line x1="${round(s.x1)}" y1="${round(s.y1)}" x2="${round(s.x2)}" y2="${round(s.y2)}" stroke="${s.color}" stroke-width="${s.width ?? 1}"${dash}/>`;
    }
    case "polyline": {
      const dash = s.dash ? ` stroke-dasharray="5,4"` : "";
      const op = s.opacity !== undefined ? ` stroke-opacity="${s.opacity}"` : "";
      return `<polyline points="${pts(s.pts)}" fill="none" stroke="${s.color}" stroke-width="${s.width ?? 1.5}"${op}${dash}/>`;
    }
    case "band": {
      const path = [...s.upper, ...[...s.lower].reverse()];
      return `<polygon points="${pts(path)}" fill="${s.color}" fill-opacity="${s.opacity}" stroke="none"/>`;
    }
    case "circle":
      return `<circle cx="${round(s.cx)}" cy="${round(s.cy)}" r="${s.r}" fill="${s.fill}"/>`;
    case "text": {
      const anchor = s.anchor ?? "start";
      const size = s.size ?? 12;
      const color = s.color ?? "#222";
      return `<text x="${round(s.x)}" y="${round(s.y)}" font-family="Helvetica, Arial, sans-serif" font-size="${size}" fill="${color}" text-anchor="${anchor}">${esc(s.text)}</text>`;
    }
  }
}

export function sceneToSvg(scene: Scene): string {
  const body = scene.shapes.map(shapeSvg).join("\n  ");
  return `<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="${scene.width}" height="${scene.height}" viewBox="0 0 ${scene.width} ${scene.height}">
  <rect x="0" y="0" width="${scene.width}" height="${scene.height}" fill="#ffffff"/>
  ${body}
</svg>
`;
}
