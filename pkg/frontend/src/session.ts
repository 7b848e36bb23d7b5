/**
 * Client-side view of one steering session: a state machine fed by server
 * messages.  It never computes model math; every number it exposes (cycle,
 * frame bytes, exchange/turnover rates, series, contours) is stored exactly
 * as it arrived.  The displayed cycle is monotone: stale stream messages
 * are dropped.  Parameter changes stay listed as pending until the session
 * reaches their acknowledged apply cycle.
 */

import { CHART_WINDOW, chartWindow } from "./charts.js";
import type { FieldProblem, ModelParams, ParamUpdate } from "./params.js";
import { validateParamUpdate } from "./params.js";
import { decodePgmBase64, type Frame } from "./pgm.js";
import type {
  ClientMessage,
  ContoursMsg,
  ErrorMsg,
  SeriesRecord,
  ServerMessage,
} from "./protocol.js";

export interface PendingChange {
  appliesAtCycle: number;
  updates: ParamUpdate;
}

export type RunState = "paused" | "running";

export class SessionView {
  sessionId: string | null = null;
  cycle = 0;
  frame: Frame | null = null;
  frameKe: number | null = null;
  frameKt: number | null = null;
  contours: ContoursMsg[] = [];
  runState: RunState = "paused";
  connected = true;
  currentParams: ModelParams;
  pendingChanges: PendingChange[] = [];
  marks: Record<string, number> = {};
  lastError: ErrorMsg | null = null;
  readonly omega: number;

  private records: SeriesRecord[] = [];
  private byCycle = new Set<number>();

  constructor(initialParams: ModelParams, omega: number) {
    this.currentParams = initialParams;
    this.omega = omega;
  }

  /** Full-precision series records, ordered by cycle. */
  get series(): SeriesRecord[] {
    return this.records;
  }

  /** Trailing window used by the strip charts (display only). */
  get chartSeries(): SeriesRecord[] {
    return chartWindow(this.records, CHART_WINDOW);
  }

  /**
   * Validate a knob move against the mirrored parameter ranges; when clean,
   * return the message to send.  The change only becomes "pending" once the
   * service acknowledges it with its apply cycle.
   */
  prepareTune(updates: ParamUpdate):
    | { ok: true; message: ClientMessage }
    | { ok: false; problems: FieldProblem[] } {
    const problems = validateParamUpdate(updates, this.omega);
    if (problems.length > 0) return { ok: false, problems };
    if (this.sessionId === null) {
      return { ok: false, problems: [{ path: "session", message: "not connected" }] };
    }
    return {
      ok: true,
      message: { type: "set_params", session: this.sessionId, params: updates },
    };
  }

  /** View reaction to a dropped socket: freeze the view, not the session. */
  disconnected(): void {
    this.connected = false;
    this.runState = "paused";
  }

  handle(msg: ServerMessage): void {
    switch (msg.type) {
      case "created":
        this.sessionId = msg.session;
        this.cycle = msg.cycle;
        break;
      case "ok":
        if (msg.command === "start") this.runState = "running";
        if (msg.command === "pause" || msg.command === "close") this.runState = "paused";
        this.advanceCycle(msg.cycle);
        break;
      case "stepped":
        this.runState = "paused";
        this.advanceCycle(msg.cycle);
        break;
      case "params_ack":
        this.pendingChanges.push({
          appliesAtCycle: msg.applies_at_cycle,
          updates: msg.updates,
        });
        this.promotePending();
        break;
      case "subscribed":
        break;
      case "frame":
        if (msg.cycle < this.cycle) return; // stale, view cycle is monotone
        this.advanceCycle(msg.cycle);
        this.frame = decodePgmBase64(msg.pgm_base64);
        this.frameKe = msg.ke;
        this.frameKt = msg.kt;
        if (msg.cycle > 0) {
          this.mergeRecords([{ cycle: msg.cycle, ke: msg.ke, kt: msg.kt, drift: NaN }]);
        }
        break;
      case "contours":
        if (msg.cycle < this.cycle) return;
        this.advanceCycle(msg.cycle);
        this.contours.push(msg);
        break;
      case "series":
        this.advanceCycle(msg.cycle);
        this.mergeRecords(msg.records);
        this.marks = msg.marks;
        break;
      case "snapshot":
        this.advanceCycle(msg.cycle);
        break;
      case "error":
        this.lastError = msg;
        break;
    }
  }

  /** CSV of everything the service reported, full precision, no decimation. */
  exportSeriesCsv(): string {
    const lines = ["cycle,Ke,Kt,drift"];
    for (const r of this.records) {
      lines.push(`${r.cycle},${fmt(r.ke)},${fmt(r.kt)},${fmt(r.drift)}`);
    }
    return lines.join("\n") + "\n";
  }

  private advanceCycle(cycle: number): void {
    if (cycle > this.cycle) this.cycle = cycle;
    this.promotePending();
  }

  private promotePending(): void {
    const still: PendingChange[] = [];
    for (const change of this.pendingChanges) {
      if (this.cycle >= change.appliesAtCycle) {
        this.currentParams = mergeParams(this.currentParams, change.updates);
      } else {
        still.push(change);
      }
    }
    this.pendingChanges = still;
  }

  private mergeRecords(records: SeriesRecord[]): void {
    let added = false;
    for (const rec of records) {
      if (this.byCycle.has(rec.cycle)) {
        // a full series record (with drift) replaces a frame-derived stub
        const idx = this.records.findIndex((r) => r.cycle === rec.cycle);
        if (idx >= 0 && Number.isNaN(this.records[idx].drift)) {
          this.records[idx] = rec;
        }
        continue;
      }
      this.byCycle.add(rec.cycle);
      this.records.push(rec);
      added = true;
    }
    if (added) this.records.sort((a, b) => a.cycle - b.cycle);
  }
}

function mergeParams(params: ModelParams, updates: ParamUpdate): ModelParams {
  return {
    kappa: updates.kappa ?? params.kappa,
    lambda: updates.lambda ?? params.lambda,
    eta: updates.eta ?? params.eta,
    theta: updates.theta ?? params.theta,
    psi: updates.psi ?? params.psi,
  };
}

function fmt(value: number): string {
  if (Number.isNaN(value)) return "";
  return String(value);
}
