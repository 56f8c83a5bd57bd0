/**
 * WebSocket client for the engine control plane.
 *
 * One socket, request/reply correlation by request_id, automatic reconnect
 * with backoff, and re-subscription after every connect. The engine is never
 * mutated except through a request whose reply is awaited.
 */

import {
  MetricsFrame,
  Reply,
  Request,
  RequestKind,
  parseServerFrame,
  validateRequest,
} from "./protocol.js";

/** The slice of the WebSocket API the client needs; tests inject fakes. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionState = "connecting" | "open" | "stale";

export interface ClientHooks {
  onMetrics?: (frame: MetricsFrame) => void;
  onState?: (state: ConnectionState) => void;
}

interface Pending {
  resolve: (result: unknown) => void;
  reject: (err: Error) => void;
  timer: ReturnType<typeof setTimeout>;
}

export class EngineError extends Error {}

export class ConsoleClient {
  state: ConnectionState = "stale";
  requestTimeoutMs = 3000;
  subscribeRateHz = 20;

  private sock: SocketLike | null = null;
  private pending = new Map<number, Pending>();
  private nextId = 1;
  private reconnectDelayMs = 500;
  private readonly maxReconnectDelayMs = 5000;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(
    private url: string,
    private factory: SocketFactory,
    private hooks: ClientHooks = {},
  ) {}

  connect(): void {
    this.closed = false;
    this.setState("connecting");
    const sock = this.factory(this.url);
    this.sock = sock;
    sock.onopen = () => {
      this.reconnectDelayMs = 500;
      this.setState("open");
      // resubscribe on every (re)connect so meters resume automatically
      void this.request("SUBSCRIBE", { rate_hz: this.subscribeRateHz }).catch(() => {});
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onclose = () => this.handleClose();
    sock.onerror = () => {};
  }

  /** Stop for good: no reconnect, all pending requests rejected. */
  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.sock?.close();
    this.failAllPending("connection closed");
    this.setState("stale");
  }

  request(kind: RequestKind, payload: Record<string, unknown> = {}): Promise<unknown> {
    const problem = validateRequest(kind, payload);
    if (problem !== null) {
      return Promise.reject(new EngineError(`${kind}: ${problem}`));
    }
    if (this.state !== "open" || this.sock === null) {
      return Promise.reject(new EngineError("not connected"));
    }
    const id = this.nextId++;
    const msg: Request = { kind, request_id: id, payload };
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.pending.delete(id);
        reject(new EngineError(`${kind}: no reply within ${this.requestTimeoutMs} ms`));
      }, this.requestTimeoutMs);
      this.pending.set(id, { resolve, reject, timer });
      this.sock!.send(JSON.stringify(msg));
    });
  }

  setThreshold(thetaHi: number, thetaLo?: number): Promise<unknown> {
    const payload: Record<string, unknown> = { theta_hi: thetaHi };
    if (thetaLo !== undefined) payload.theta_lo = thetaLo;
    return this.request("SET_THRESHOLD", payload);
  }

  loadScore(document: Record<string, unknown>): Promise<unknown> {
    return this.request("LOAD_SCORE", { document });
  }

  loadMapping(document: Record<string, unknown>): Promise<unknown> {
    return this.request("LOAD_MAPPING", { document });
  }

  setParam(target: string, value: number, rampMs?: number): Promise<unknown> {
    const payload: Record<string, unknown> = { target, value };
    if (rampMs !== undefined) payload.ramp_ms = rampMs;
    return this.request("SET_PARAM", payload);
  }

  setActive(unitId: string, active: boolean): Promise<unknown> {
    return this.request("SET_ACTIVE", { unit_id: unitId, active });
  }

  transport(action: "start" | "stop" | "recalibrate"): Promise<unknown> {
    return this.request("TRANSPORT", { action });
  }

  ping(): Promise<unknown> {
    return this.request("PING");
  }

  private handleMessage(text: string): void {
    const frame = parseServerFrame(text);
    if (frame === null) return;
    if (frame.t === "metrics") {
      this.hooks.onMetrics?.(frame);
      return;
    }
    this.settle(frame);
  }

  private settle(reply: Reply): void {
    const id = typeof reply.request_id === "number" ? reply.request_id : NaN;
    const entry = this.pending.get(id);
    if (entry === undefined) return;
    this.pending.delete(id);
    clearTimeout(entry.timer);
    if (reply.ok) entry.resolve(reply.result);
    else entry.reject(new EngineError(reply.error ?? "engine error"));
  }

  private handleClose(): void {
    this.sock = null;
    this.failAllPending("connection lost");
    if (this.closed) return;
    this.setState("stale");
    this.reconnectTimer = setTimeout(() => this.connect(), this.reconnectDelayMs);
    this.reconnectDelayMs = Math.min(this.reconnectDelayMs * 2, this.maxReconnectDelayMs);
  }

  private failAllPending(reason: string): void {
    for (const [, entry] of this.pending) {
      clearTimeout(entry.timer);
      entry.reject(new EngineError(reason));
    }
    this.pending.clear();
  }

  private setState(state: ConnectionState): void {
    if (state === this.state) return;
    this.state = state;
    this.hooks.onState?.(state);
  }
}
