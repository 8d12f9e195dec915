/** Figure description shared by the SVG and PNG backends: everything is in
 * pixel coordinates by the time it lands here. */

export type Shape =
  | { kind: "rect"; x: number; y: number; w: number; h: number; fill?: string; stroke?: string }
  | { kind: "line"; x1: number; y1: number; x2: number; y2: number; color: string; width?: number; dash?: boolean }
  | { kind: "polyline"; pts: [number, number][]; color: string; width?: number; opacity?: number; dash?: boolean }
  | { kind: "band"; upper: [number, number][]; lower: [number, number][]; color: string; opacity: number }
  | { kind: "circle"; cx: number; cy: number; r: number; fill: string }
  | { kind: "text"; x: number; y: number; text: string; size?: number; color?: string; anchor?: "start" | "middle" | "end" };

export interface Scene {
  width: number;
  height: number;
  shapes: Shape[];
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

export function seriesColor(i: number): string {
  return PALETTE[i % PALETTE.length];
}
