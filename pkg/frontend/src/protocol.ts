/**
 * Wire types of the steering service's JSON message schema (protocol v1).
 * The console consumes these verbatim; every displayed number originates
 * from one of the server messages below.
 */

import type { ModelParams, ParamUpdate } from "./params.js";

export const PROTOCOL_VERSION = 1;

// client -> server
export type ClientMessage =
  | { type: "create"; config: unknown; req?: number }
  | { type: "start"; session: string; req?: number }
  | { type: "pause"; session: string; req?: number }
  | { type: "step"; session: string; cycles: number; req?: number }
  | { type: "set_params"; session: string; params: ParamUpdate; req?: number }
  | { type: "subscribe"; session: string; stride: number; req?: number }
  | { type: "get_frame"; session: string; req?: number }
  | { type: "get_contours"; session: string; req?: number }
  | { type: "get_series"; session: string; since?: number; req?: number }
  | { type: "snapshot"; session: string; req?: number }
  | { type: "close"; session: string; req?: number };

// server -> client
export interface CreatedMsg {
  type: "created";
  session: string;
  cycle: number;
  protocol: number;
  req?: number;
}

export interface OkMsg {
  type: "ok";
  command: string;
  session: string;
  cycle: number;
  req?: number;
}

export interface SteppedMsg {
  type: "stepped";
  session: string;
  cycle: number;
  req?: number;
}

export interface ParamsAckMsg {
  type: "params_ack";
  session: string;
  applies_at_cycle: number;
  updates: ParamUpdate;
  params: ModelParams;
  req?: number;
}

export interface SubscribedMsg {
  type: "subscribed";
  session: string;
  sub: number;
  stride: number;
  cycle: number;
  req?: number;
}

export interface FrameMsg {
  type: "frame";
  session: string;
  cycle: number;
  ke: number;
  kt: number;
  pgm_base64: string;
  req?: number;
}

export interface ContoursMsg {
  type: "contours";
  session: string;
  cycle: number;
  level: number;
  width: number;
  height: number;
  polylines: [number, number][][];
  req?: number;
}

export interface SeriesRecord {
  cycle: number;
  ke: number;
  kt: number;
  drift: number;
}

export interface SeriesMsg {
  type: "series";
  session: string;
  cycle: number;
  records: SeriesRecord[];
  marks: Record<string, number>;
  req?: number;
}

export interface SnapshotMsg {
  type: "snapshot";
  session: string;
  cycle: number;
  data_base64: string;
  req?: number;
}

export interface ErrorMsg {
  type: "error";
  code: string;
  message: string;
  session?: string;
  fields?: { path: string; message: string }[];
  req?: number;
}

export type ServerMessage =
  | CreatedMsg
  | OkMsg
  | SteppedMsg
  | ParamsAckMsg
  | SubscribedMsg
  | FrameMsg
  | ContoursMsg
  | SeriesMsg
  | SnapshotMsg
  | ErrorMsg;

const SERVER_TYPES = new Set([
  "created", "ok", "stepped", "params_ack", "subscribed",
  "frame", "contours", "series", "snapshot", "error",
]);

/** Narrow a decoded JSON value to a server message or report why not. */
export function parseServerMessage(raw: unknown): ServerMessage {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("server message must be a JSON object");
  }
  const type = (raw as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) {
    throw new Error(`unknown server message type ${String(type)}`);
  }
  return raw as ServerMessage;
}
