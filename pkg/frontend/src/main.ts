/**
 * DOM wiring: one socket, one meter model, a draw loop decoupled from
 * message receipt, editors, transport, threshold and unit controls.
 */

import { ConsoleClient, SocketLike } from "./client.js";
import { DocumentEditor, errorField } from "./editors.js";
import { MeterModel, chartView } from "./meters.js";
import { TransportControl } from "./transport.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
};

function wsUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

const model = new MeterModel();
const banner = $("banner");
// WebSocket's handlers take an Event argument the client ignores, so the
// structural mismatch is only in unused parameters.
const toSocket = (u: string): SocketLike => new WebSocket(u) as unknown as SocketLike;

const client = new ConsoleClient(wsUrl(), toSocket, {
  onMetrics: (frame) => {
    model.push(frame);
    $("section-label").textContent = `section ${frame.current_section}`;
  },
  onState: (state) => {
    banner.className = state;
    if (state === "open") {
      banner.textContent = "connected";
    } else if (state === "connecting") {
      banner.textContent = "connecting…";
    } else {
      banner.textContent = "disconnected: meters show the last received state";
      model.freeze();
    }
  },
});

const transport = new TransportControl(client);
const scoreEditor = new DocumentEditor("score", client);
const mappingEditor = new DocumentEditor("mapping", client);

function note(text: string, isError = false): void {
  const el = $("note");
  el.textContent = text;
  el.className = isError ? "error" : "";
}

// -- chart -------------------------------------------------------------------

function drawChart(): void {
  const canvas = $("chart") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (model.points.length === 0) {
    requestAnimationFrame(drawChart);
    return;
  }
  const view = chartView(model, width, height);

  const polyline = (pts: Array<[number, number]>, color: string) => {
    if (pts.length < 2) return;
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(pts[0]![0], pts[0]![1]);
    for (const [x, y] of pts) ctx.lineTo(x, y);
    ctx.stroke();
  };
  polyline(view.envelope, "#3a5f3a");
  polyline(view.qom, "#4f9dde");
  polyline(view.soa, "#e0a83c");

  if (view.thresholdY !== null) {
    ctx.strokeStyle = "#d05050";
    ctx.setLineDash([6, 4]);
    ctx.beginPath();
    ctx.moveTo(0, view.thresholdY);
    ctx.lineTo(width, view.thresholdY);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  ctx.strokeStyle = "#ffffff";
  for (const x of view.markerXs) {
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, height);
    ctx.stroke();
  }

  const last = model.lastFrame;
  if (last !== null) {
    $("readout").textContent =
      `qom ${last.qom.toFixed(4)}  soa ${last.soa.toExponential(2)}  ` +
      `theta ${last.effective_theta_hi.toExponential(2)}  ` +
      `env ${last.envelope.toFixed(3)}  triggers ${model.triggerCount}` +
      (model.frozen ? "  [frozen]" : "");
  }
  requestAnimationFrame(drawChart);
}

// -- controls ------------------------------------------------------------------

function wireTransport(): void {
  for (const action of ["start", "stop", "recalibrate"] as const) {
    const btn = $(`btn-${action}`) as HTMLButtonElement;
    btn.onclick = async () => {
      btn.disabled = true;
      const sent = await transport.press(action);
      btn.disabled = false;
      if (!sent && transport.warning !== null) note(transport.warning, true);
      else if (sent) note(`${action} acknowledged`);
    };
  }
}

function wireThreshold(): void {
  ($("btn-threshold") as HTMLButtonElement).onclick = async () => {
    const hi = Number(($("theta-hi") as HTMLInputElement).value);
    const loText = ($("theta-lo") as HTMLInputElement).value.trim();
    try {
      await client.setThreshold(hi, loText === "" ? undefined : Number(loText));
      note(`threshold ${hi} applied`);
    } catch (exc) {
      note(`threshold: ${(exc as Error).message}`, true);
    }
  };
}

function wireUnitToggle(): void {
  const send = async (active: boolean) => {
    const unit = ($("unit-id") as HTMLInputElement).value.trim();
    try {
      await client.setActive(unit, active);
      note(`${unit} ${active ? "activated" : "bypassed"}`);
    } catch (exc) {
      note(`${unit}: ${(exc as Error).message}`, true);
    }
  };
  ($("btn-activate") as HTMLButtonElement).onclick = () => void send(true);
  ($("btn-bypass") as HTMLButtonElement).onclick = () => void send(false);
}

function wireEditor(editor: DocumentEditor, prefix: string): void {
  const text = $(`${prefix}-text`) as HTMLTextAreaElement;
  const errors = $(`${prefix}-errors`) as HTMLUListElement;
  const applyBtn = $(`${prefix}-apply`) as HTMLButtonElement;

  const render = () => {
    errors.replaceChildren();
    for (const msg of editor.localErrors) {
      const li = document.createElement("li");
      const field = errorField(msg);
      li.textContent = field === null ? msg : msg;
      if (field !== null) li.dataset.field = field;
      errors.appendChild(li);
    }
    if (editor.engineError !== null) {
      const li = document.createElement("li");
      li.className = "engine";
      li.textContent = `engine: ${editor.engineError}`;
      errors.appendChild(li);
    }
    applyBtn.disabled = editor.localErrors.length > 0 || editor.pending;
  };

  text.oninput = () => {
    editor.setText(text.value);
    editor.engineError = null;
    render();
  };
  applyBtn.onclick = async () => {
    editor.setText(text.value);
    render();
    const ok = await editor.apply();
    render();
    note(ok ? `${editor.kind} applied` : `${editor.kind} not applied`, !ok);
  };
  render();
}

wireTransport();
wireThreshold();
wireUnitToggle();
wireEditor(scoreEditor, "score");
wireEditor(mappingEditor, "mapping");
client.connect();
requestAnimationFrame(drawChart);
