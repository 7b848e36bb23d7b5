/**
 * Strip-chart preparation.  The rolling window and point decimation exist
 * only for display; exports must always use the full-precision records the
 * service sent (see SessionView.exportSeriesCsv).
 */

import type { SeriesRecord } from "./protocol.js";

export const CHART_WINDOW = 500;

/** Trailing display window of the series (default 500 cycles). */
export function chartWindow(records: SeriesRecord[], window = CHART_WINDOW): SeriesRecord[] {
  if (records.length <= window) return records.slice();
  return records.slice(records.length - window);
}

/**
 * Thin out points for drawing, keeping first and last and exact values of
 * the survivors; never interpolates or averages.
 */
export function decimate(records: SeriesRecord[], maxPoints: number): SeriesRecord[] {
  if (maxPoints < 2) throw new Error("maxPoints must be >= 2");
  if (records.length <= maxPoints) return records.slice();
  const out: SeriesRecord[] = [];
  const stride = (records.length - 1) / (maxPoints - 1);
  for (let i = 0; i < maxPoints; i++) {
    out.push(records[Math.round(i * stride)]);
  }
  return out;
}
