/**
 * Control-plane message schemas for the engine's WebSocket endpoint.
 *
 * Outgoing requests are validated locally with the same rules the engine
 * enforces, so a malformed message is caught before it leaves the console.
 */

export type RequestKind =
  | "SET_THRESHOLD"
  | "SET_TRIGGER_CONFIG"
  | "LOAD_SCORE"
  | "LOAD_MAPPING"
  | "SET_PARAM"
  | "SET_ACTIVE"
  | "TRANSPORT"
  | "SUBSCRIBE"
  | "PING";

export interface Request {
  kind: RequestKind;
  request_id: number;
  payload?: Record<string, unknown>;
}

export interface Reply {
  t: "reply";
  request_id: number | string | null;
  ok: boolean;
  result?: unknown;
  error?: string;
}

export interface MetricsFrame {
  t: "metrics";
  ts: number;
  qom: number;
  soa: number;
  effective_theta_hi: number;
  trigger_flag: boolean;
  current_section: number;
  envelope: number;
}

export type ServerFrame = Reply | MetricsFrame;

const SOA_SOURCES = ["QOM_VARIANCE", "PARAM_CHANGE_VARIANCE"];
const TRANSPORT_ACTIONS = ["start", "stop", "recalibrate"];

function isObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function isNum(v: unknown): v is number {
  return typeof v === "number";
}

function isFiniteNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isInt(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v);
}

/** Schema-check one outgoing payload; returns a reason string or null. */
export function validateRequest(kind: RequestKind, payload: Record<string, unknown>): string | null {
  const p = payload;
  const bad = (field: string, why: string) => `'${field}' ${why}`;
  switch (kind) {
    case "SET_THRESHOLD":
      if (!isFiniteNum(p.theta_hi)) return bad("theta_hi", "must be a finite number");
      if ("theta_lo" in p && !isFiniteNum(p.theta_lo)) return bad("theta_lo", "must be a finite number");
      return null;
    case "SET_TRIGGER_CONFIG":
      for (const f of ["theta_hi", "theta_lo", "k_adapt"]) {
        if (f in p && !isFiniteNum(p[f])) return bad(f, "must be a finite number");
      }
      if ("refractory" in p && !(isInt(p.refractory) && p.refractory >= 0)) {
        return bad("refractory", "must be an integer >= 0");
      }
      if ("adaptive" in p && typeof p.adaptive !== "boolean") return bad("adaptive", "must be a boolean");
      if ("long_window" in p && !(isInt(p.long_window) && p.long_window > 2)) {
        return bad("long_window", "must be an integer > 2");
      }
      if ("soa_source" in p && !(typeof p.soa_source === "string" && SOA_SOURCES.includes(p.soa_source))) {
        return bad("soa_source", `must be one of ${SOA_SOURCES.join("/")}`);
      }
      return null;
    case "LOAD_SCORE":
    case "LOAD_MAPPING":
      if (!isObject(p.document)) return bad("document", "must be an object");
      return null;
    case "SET_PARAM":
      if (!(typeof p.target === "string" && p.target.split(".").length === 2)) {
        return bad("target", "must be 'unit.param'");
      }
      if (!isFiniteNum(p.value)) return bad("value", "must be a finite number");
      if ("ramp_ms" in p && !(isFiniteNum(p.ramp_ms) && p.ramp_ms >= 0)) {
        return bad("ramp_ms", "must be a finite number >= 0");
      }
      return null;
    case "SET_ACTIVE":
      if (!(typeof p.unit_id === "string" && p.unit_id.length > 0)) {
        return bad("unit_id", "must be a non-empty string");
      }
      if (typeof p.active !== "boolean") return bad("active", "must be a boolean");
      return null;
    case "TRANSPORT":
      if (!(typeof p.action === "string" && TRANSPORT_ACTIONS.includes(p.action))) {
        return bad("action", `must be one of ${TRANSPORT_ACTIONS.join("/")}`);
      }
      return null;
    case "SUBSCRIBE":
      if ("rate_hz" in p && !(isNum(p.rate_hz) && p.rate_hz >= 1 && p.rate_hz <= 60)) {
        return bad("rate_hz", "must be a number in [1, 60]");
      }
      return null;
    case "PING":
      return null;
  }
}

/** Parse one inbound message; returns null for anything malformed. */
export function parseServerFrame(text: string): ServerFrame | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (!isObject(obj)) return null;
  if (obj.t === "reply" && typeof obj.ok === "boolean") {
    return obj as unknown as Reply;
  }
  if (
    obj.t === "metrics" &&
    isNum(obj.ts) &&
    isNum(obj.qom) &&
    isNum(obj.soa) &&
    isNum(obj.effective_theta_hi) &&
    typeof obj.trigger_flag === "boolean" &&
    isNum(obj.current_section) &&
    isNum(obj.envelope)
  ) {
    return obj as unknown as MetricsFrame;
  }
  return null;
}
