/**
 * Browser entry point: wire the session view, transport and canvases to
 * the controls in index.html.  All logic that has behavior worth testing
 * lives in the imported modules; this file only moves data to the DOM.
 */

import { decimate } from "./charts.js";
import type { ModelParams, ParamUpdate } from "./params.js";
import { decodeBase64 } from "./pgm.js";
import type { SeriesRecord, ServerMessage } from "./protocol.js";
import { contourDrawCommands, frameToRgba } from "./render.js";
import { SessionView } from "./session.js";
import { Connection, connectWebSocket } from "./transport.js";

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

const DEFAULT_CONFIG = {
  topology: { degree_class: 4, width: 128, height: 128, boundary: "periodic" },
  omega: 8192.0,
  seed: "center",
  params: { kappa: 3.0, lambda: 0.5, eta: 0.0, theta: 1.0, psi: { kind: "identity" } },
  schedule: { max_cycles: 100000, frame_stride: 0, contour_stride: 20 },
};

let view: SessionView | null = null;
let conn: Connection | null = null;
let zoom = 4;

function status(text: string): void {
  $("status").textContent = text;
}

function currentParamsFromConfig(config: typeof DEFAULT_CONFIG): ModelParams {
  const p = config.params;
  return {
    kappa: p.kappa, lambda: p.lambda, eta: p.eta, theta: p.theta,
    psi: { kind: p.psi.kind as ModelParams["psi"]["kind"], gamma: (p.psi as { gamma?: number }).gamma },
  };
}

function onServerMessage(msg: ServerMessage): void {
  if (!view) return;
  view.handle(msg);
  if (msg.type === "error") {
    const fields = msg.fields?.map((f) => `${f.path}: ${f.message}`).join("; ");
    status(`service error (${msg.code}): ${msg.message}${fields ? " - " + fields : ""}`);
    return;
  }
  if (msg.type === "created" && view.sessionId) {
    conn?.send({ type: "subscribe", session: view.sessionId, stride: strideInput() });
    conn?.send({ type: "get_frame", session: view.sessionId });
    status(`session ${view.sessionId.slice(0, 8)} created`);
  }
  if (msg.type === "snapshot") {
    download(`state_${msg.cycle}.snap`, decodeBase64(msg.data_base64));
  }
  redraw();
}

function connect(): void {
  const config = JSON.parse(($("config") as HTMLTextAreaElement).value);
  view = new SessionView(currentParamsFromConfig(config), config.omega);
  conn = connectWebSocket(($("endpoint") as HTMLInputElement).value, {
    onMessage: onServerMessage,
    onOpen: () => conn?.send({ type: "create", config }),
    onClose: () => {
      view?.disconnected();
      status("disconnected (view frozen; session keeps running)");
    },
    onProtocolError: (err) => status(`protocol error: ${err.message}`),
  });
  status("connecting...");
}

function redraw(): void {
  if (!view) return;
  $("cycle").textContent = String(view.cycle);
  $("runstate").textContent = view.connected ? view.runState : "disconnected";
  $("ke").textContent = view.frameKe === null ? "-" : String(view.frameKe);
  $("kt").textContent = view.frameKt === null ? "-" : String(view.frameKt);
  drawField();
  drawChart("chart-ke", view.chartSeries, (r) => r.ke, "#d23c3c");
  drawChart("chart-kt", view.chartSeries, (r) => r.kt, "#3c64d2");
  drawParams();
}

function drawField(): void {
  if (!view?.frame) return;
  const frame = view.frame;
  const canvas = $("field") as HTMLCanvasElement;
  canvas.width = frame.width * zoom;
  canvas.height = frame.height * zoom;
  const ctx = canvas.getContext("2d")!;
  const base = new OffscreenCanvas(frame.width, frame.height);
  const bctx = base.getContext("2d")!;
  bctx.putImageData(new ImageData(frameToRgba(frame), frame.width, frame.height), 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(base, 0, 0, canvas.width, canvas.height);
  if (($("contour-toggle") as HTMLInputElement).checked) {
    for (const cmd of contourDrawCommands(view.contours, zoom)) {
      ctx.strokeStyle = cmd.color;
      ctx.beginPath();
      cmd.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
      if (cmd.closed) ctx.closePath();
      ctx.stroke();
    }
  }
}

function drawChart(
  id: string,
  records: SeriesRecord[],
  pick: (r: SeriesRecord) => number,
  color: string,
): void {
  const canvas = $(id) as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (records.length < 2) return;
  const points = decimate(records, Math.min(records.length, canvas.width));
  const max = Math.max(...points.map(pick), 1e-12);
  ctx.strokeStyle = color;
  ctx.beginPath();
  points.forEach((r, i) => {
    const x = (i / (points.length - 1)) * (canvas.width - 2) + 1;
    const y = canvas.height - 2 - (pick(r) / max) * (canvas.height - 4);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.fillStyle = "#9aa";
  ctx.fillText(max.toPrecision(3), 4, 10);
}

function drawParams(): void {
  if (!view) return;
  const rows: string[] = [];
  const entries = Object.entries(view.currentParams) as [string, unknown][];
  for (const [name, value] of entries) {
    rows.push(`<tr><td>${name}</td><td>${
      typeof value === "object" ? JSON.stringify(value) : String(value)
    }</td></tr>`);
  }
  for (const pending of view.pendingChanges) {
    for (const [name, value] of Object.entries(pending.updates)) {
      rows.push(`<tr class="pending"><td>${name}</td><td>${
        typeof value === "object" ? JSON.stringify(value) : String(value)
      } @ ${pending.appliesAtCycle}</td></tr>`);
    }
  }
  $("params-table").innerHTML = rows.join("");
}

function strideInput(): number {
  return Math.max(1, parseInt(($("stride") as HTMLInputElement).value, 10) || 1);
}

function tune(updates: ParamUpdate): void {
  if (!view || !conn) return;
  const result = view.prepareTune(updates);
  if (!result.ok) {
    status(result.problems.map((p) => `${p.path}: ${p.message}`).join("; "));
    return;
  }
  conn.send(result.message);
  status("change queued");
}

function download(name: string, data: Uint8Array | string): void {
  const blob = data instanceof Uint8Array
    ? new Blob([data.buffer as ArrayBuffer], { type: "application/octet-stream" })
    : new Blob([data], { type: "text/csv" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = name;
  link.click();
  URL.revokeObjectURL(link.href);
}

function sessionCommand(type: "start" | "pause" | "snapshot" | "close"): void {
  if (view?.sessionId && conn) conn.send({ type, session: view.sessionId });
}

export function setup(): void {
  ($("config") as HTMLTextAreaElement).value = JSON.stringify(DEFAULT_CONFIG, null, 2);
  $("connect").onclick = connect;
  $("start").onclick = () => sessionCommand("start");
  $("pause").onclick = () => sessionCommand("pause");
  $("step").onclick = () => {
    if (view?.sessionId && conn) {
      const n = Math.max(1, parseInt(($("step-n") as HTMLInputElement).value, 10) || 1);
      conn.send({ type: "step", session: view.sessionId, cycles: n });
    }
  };
  $("snapshot").onclick = () => sessionCommand("snapshot");
  $("refresh-series").onclick = () => {
    if (view?.sessionId && conn) {
      conn.send({ type: "get_series", session: view.sessionId, since: 0 });
    }
  };
  $("export-csv").onclick = () => view && download("series.csv", view.exportSeriesCsv());
  $("export-png").onclick = () => {
    ($("field") as HTMLCanvasElement).toBlob((blob) => {
      if (!blob) return;
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = `field_${view?.cycle ?? 0}.png`;
      link.click();
      URL.revokeObjectURL(link.href);
    });
  };
  $("zoom").oninput = () => {
    zoom = parseInt(($("zoom") as HTMLInputElement).value, 10);
    redraw();
  };
  $("contour-toggle").onchange = () => redraw();
  for (const name of ["kappa", "lambda", "eta", "theta"] as const) {
    $(`knob-${name}`).onchange = () => {
      const value = parseFloat(($(`knob-${name}`) as HTMLInputElement).value);
      tune({ [name]: value });
    };
  }
  $("knob-psi").onchange = () => {
    const kind = ($("knob-psi") as HTMLSelectElement).value as ModelParams["psi"]["kind"];
    const gammaRaw = ($("knob-gamma") as HTMLInputElement).value;
    const psi = kind === "power" ? { kind, gamma: parseFloat(gammaRaw) } : { kind };
    tune({ psi });
  };
  $("knob-gamma").onchange = () => $("knob-psi").onchange?.(new Event("change"));
}

if (typeof document !== "undefined") {
  setup();
}
