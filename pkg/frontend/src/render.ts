/**
 * Frame and contour drawing helpers.  The greyscale view copies the exact
 * PGM bytes into RGBA channels; there is no client-side rescaling, so the
 * canvas shows precisely what a batch render of the same cycle would.
 */

import type { Frame } from "./pgm.js";
import type { ContoursMsg } from "./protocol.js";

/** Expand grey bytes to RGBA, one canvas pixel per node, byte for byte. */
export function frameToRgba(frame: Frame): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(frame.width * frame.height * 4);
  for (let i = 0; i < frame.pixels.length; i++) {
    const v = frame.pixels[i];
    const j = i * 4;
    out[j] = v;
    out[j + 1] = v;
    out[j + 2] = v;
    out[j + 3] = 255;
  }
  return out;
}

export const CONTOUR_COLORS = [
  "#e67816", "#d23c3c", "#b42878", "#783cb4",
  "#3c64d2", "#28a0b4", "#3cbe6e", "#96be3c",
];

export interface ContourDrawCommand {
  color: string;
  points: [number, number][];
  closed: boolean;
}

/**
 * Canvas-space polyline commands for a stack of contour sets, oldest ring
 * first, colors cycling by arrival order; `zoom` is pixels per node.
 */
export function contourDrawCommands(
  sets: ContoursMsg[],
  zoom: number,
): ContourDrawCommand[] {
  const commands: ContourDrawCommand[] = [];
  sets.forEach((set, index) => {
    const color = CONTOUR_COLORS[index % CONTOUR_COLORS.length];
    for (const line of set.polylines) {
      if (line.length < 2) continue;
      const first = line[0];
      const last = line[line.length - 1];
      commands.push({
        color,
        points: line.map(([x, y]) => [(x + 0.5) * zoom, (y + 0.5) * zoom]),
        closed: first[0] === last[0] && first[1] === last[1],
      });
    }
  });
  return commands;
}
