/** Rasterize a scene and encode it as PNG without native dependencies:
 * RGBA buffer, scanline drawing, a 5x7 bitmap font, and zlib from node. */

import { deflateSync } from "zlib";

import { Scene, Shape } from "./scene.js";

// -- 5x7 font (uppercase + digits + plot punctuation) -------------------------

const GLYPHS: Record<string, number[]> = {
  "0": [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
  "1": [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
  "2": [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
  "3": [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
  "4": [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
  "5": [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
  "6": [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
  "7": [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
  "8": [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
  "9": [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
  A: [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
  B: [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110],
  C: [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110],
  D: [0b11100, 0b10010, 0b10001, 0b10001, 0b10001, 0b10010, 0b11100],
  E: [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111],
  F: [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000],
  G: [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111],
  H: [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
  I: [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
  J: [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100],
  K: [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001],
  L: [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111],
  M: [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001],
  N: [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001],
  O: [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
  P: [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000],
  Q: [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101],
  R: [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001],
  S: [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110],
  T: [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100],
  U: [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
  V: [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100],
  W: [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010],
  X: [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001],
  Y: [0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100],
  Z: [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111],
  " ": [0, 0, 0, 0, 0, 0, 0],
  "-": [0, 0, 0, 0b11111, 0, 0, 0],
  "+": [0, 0b00100, 0b00100, 0b11111, 0b00100, 0b00100, 0],
  ".": [0, 0, 0, 0, 0, 0b01100, 0b01100],
  ",": [0, 0, 0, 0, 0b01100, 0b00100, 0b01000],
  ":": [0, 0b01100, 0b01100, 0, 0b01100, 0b01100, 0],
  "(": [0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010],
  ")": [0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000],
  "/": [0b00001, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b10000],
  "=": [0, 0, 0b11111, 0, 0b11111, 0, 0],
};

// -- raster canvas -------------------------------------------------------------

function parseColor(c: string): [number, number, number] {
  if (c.startsWith("#") && c.length === 7) {
    return [parseInt(c.slice(1, 3), 16), parseInt(c.slice(3, 5), 16), parseInt(c.slice(5, 7), 16)];
  }
  if (c === "white") return [255, 255, 255];
  return [34, 34, 34];
}

class Canvas {
  data: Uint8Array;

  constructor(readonly width: number, readonly height: number) {
    this.data = new Uint8Array(width * height * 4).fill(255);
  }

  blend(x: number, y: number, rgb: [number, number, number], alpha: number) {
    x = Math.round(x);
    y = Math.round(y);
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return;
    const i = (y * this.width + x) * 4;
    for (let c = 0; c < 3; c++) {
      this.data[i + c] = Math.round(rgb[c] * alpha + this.data[i + c] * (1 - alpha));
    }
  }

  brush(x: number, y: number, rgb: [number, number, number], alpha: number, width: number) {
    const r = Math.max(0, Math.floor(width / 2));
    for (let dx = -r; dx <= r; dx++) {
      for (let dy = -r; dy <= r; dy++) {
        this.blend(x + dx, y + dy, rgb, alpha);
      }
    }
  }

  line(x1: number, y1: number, x2: number, y2: number,
       rgb: [number, number, number], alpha: number, width: number, dash: boolean) {
    const steps = Math.max(Math.abs(x2 - x1), Math.abs(y2 - y1), 1);
    for (let s = 0; s <= steps; s++) {
      if (dash && Math.floor(s / 5) % 2 === 1) continue;
      const t = s / steps;
      this.brush(x1 + (x2 - x1) * t, y1 + (y2 - y1) * t, rgb, alpha, width);
    }
  }

  /** x-monotone band between two sampled curves. */
  band(upper: [number, number][], lower: [number, number][],
       rgb: [number, number, number], alpha: number) {
    const xs = upper.map((p) => p[0]);
    const x0 = Math.ceil(Math.min(...xs));
    const x1 = Math.floor(Math.max(...xs));
    const at = (curve: [number, number][], x: number): number => {
      for (let i = 1; i < curve.length; i++) {
        if (x <= curve[i][0]) {
          const [xa, ya] = curve[i - 1];
          const [xb, yb] = curve[i];
          const t = xb === xa ? 0 : (x - xa) / (xb - xa);
          return ya + (yb - ya) * t;
        }
      }
      return curve[curve.length - 1][1];
    };
    for (let x = x0; x <= x1; x++) {
      const yu = at(upper, x);
      const yl = at(lower, x);
      const lo = Math.round(Math.min(yu, yl));
      const hi = Math.round(Math.max(yu, yl));
      for (let y = lo; y <= hi; y++) {
        this.blend(x, y, rgb, alpha);
      }
    }
  }

  text(x: number, y: number, text: string, size: number,
       rgb: [number, number, number], anchor: "start" | "middle" | "end") {
    const scale = size >= 14 ? 2 : 1;
    const advance = 6 * scale;
    const total = text.length * advance - scale;
    if (anchor === "middle") x -= total / 2;
    if (anchor === "end") x -= total;
    const top = y - 7 * scale;   // y is the text baseline
    for (const ch of text.toUpperCase()) {
      const glyph = GLYPHS[ch] ?? GLYPHS[" "];
      for (let r = 0; r < 7; r++) {
        for (let c = 0; c < 5; c++) {
          if ((glyph[r] >> (4 - c)) & 1) {
            for (let sx = 0; sx < scale; sx++) {
              for (let sy = 0; sy < scale; sy++) {
                this.blend(x + c * scale + sx, top + r * scale + sy, rgb, 1.0);
              }
            }
          }
        }
      }
      x += advance;
    }
  }
}

// -- PNG encoding ---------------------------------------------------------------

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(buf: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Uint8Array): Buffer {
  const out = Buffer.alloc(12 + data.length);
  out.writeUInt32BE(data.length, 0);
  out.write(type, 4, "ascii");
  Buffer.from(data).copy(out, 8);
  const body = out.subarray(4, 8 + data.length);
  out.writeUInt32BE(crc32(body), 8 + data.length);
  return out;
}

export function encodePng(width: number, height: number, rgba: Uint8Array): Buffer {
  const signature = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8;    // bit depth
  ihdr[9] = 6;    // RGBA
  const raw = Buffer.alloc(height * (1 + width * 4));
  for (let y = 0; y < height; y++) {
    raw[y * (1 + width * 4)] = 0;   // filter: none
    Buffer.from(rgba.subarray(y * width * 4, (y + 1) * width * 4))
      .copy(raw, y * (1 + width * 4) + 1);
  }
  return Buffer.concat([
    signature,
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(raw, { level: 6 })),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

export function sceneToPng(scene: Scene): Buffer {
  const canvas = new Canvas(scene.width, scene.height);
  for (const s of scene.shapes) {
    switch (s.kind) {
      case "rect": {
        if (s.fill && s.fill !== "none") {
          const rgb = parseColor(s.fill);
          for (let y = Math.round(s.y); y < s.y + s.h; y++) {
            for (let x = Math.round(s.x); x < s.x + s.w; x++) {
              canvas.blend(x, y, rgb, 1.0);
            }
          }
        }
        if (s.stroke) {
          const rgb = parseColor(s.stroke);
          canvas.line(s.x, s.y, s.x + s.w, s.y, rgb, 1, 1, false);
          canvas.line(s.x, s.y + s.h, s.x + s.w, s.y + s.h, rgb, 1, 1, false);
          canvas.line(s.x, s.y, s.x, s.y + s.h, rgb, 1, 1, false);
          canvas.line(s.x + s.w, s.y, s.x + s.w, s.y + s.h, rgb, 1, 1, false);
        }
        break;
      }
      case "line":
        canvas.line(s.x1, s.y1, s.x2, s.y2, parseColor(s.color), 1, s.width ?? 1, !!s.dash);
        break;
      case "polyline": {
        const rgb = parseColor(s.color);
        const alpha = s.opacity ?? 1;
        for (let i = 1; i < s.pts.length; i++) {
          canvas.line(s.pts[i - 1][0], s.pts[i - 1][1], s.pts[i][0], s.pts[i][1],
                      rgb, alpha, Math.round(s.width ?? 1.5), !!s.dash);
        }
        break;
      }
      case "band":
        canvas.band(s.upper, s.lower, parseColor(s.color), s.opacity);
        break;
      case "circle":
        canvas.brush(s.cx, s.cy, parseColor(s.fill), 1.0, s.r * 2);
        break;
      case "text":
        canvas.text(s.x, s.y, s.text, s.size ?? 12, parseColor(s.color ?? "#222"),
                    s.anchor ?? "start");
        break;
    }
  }
  return encodePng(scene.width, scene.height, canvas.data);
}
