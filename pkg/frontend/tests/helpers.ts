/**
 * In-process loopback doubles for the engine's WebSocket endpoint.
 *
 * MockEngine reproduces the control plane's observable behavior: schema
 * errors reply immediately, engine commands are queued and acknowledged
 * only after the next tick applies them, subscriptions stream metrics at
 * the requested rate, and replies carry the same envelope shape.
 */

import { SocketLike } from "../src/client.js";
import { Request, validateRequest } from "../src/protocol.js";

export class FakeSocket implements SocketLike {
  onopen: (() => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  closed = false;

  constructor(private engine: MockEngine) {
    engine.attach(this);
    queueMicrotask(() => {
      if (!this.closed) this.onopen?.();
    });
  }

  send(data: string): void {
    if (!this.closed) this.engine.receive(this, data);
  }

  close(): void {
    if (this.closed) return;
    this.closed = true;
    this.engine.detach(this);
    queueMicrotask(() => this.onclose?.());
  }

  /** Server-side delivery into the client's message handler. */
  deliver(text: string): void {
    if (!this.closed) this.onmessage?.({ data: text });
  }
}

interface QueuedCommand {
  sock: FakeSocket;
  id: unknown;
  apply: () => unknown; // throws to produce an error reply
}

interface Subscription {
  timer: ReturnType<typeof setInterval>;
  intervalUs: number;
  index: number;
}

export interface MockOptions {
  tickMs?: number;
  qomFn?: (i: number) => number;
  /** Emit trigger_flag on every n-th metrics frame (never when null). */
  triggerEvery?: number | null;
  scoreVerdict?: (doc: unknown) => string | null;
  mappingVerdict?: (doc: unknown) => string | null;
  /** Swallow every request without replying (timeout scenarios). */
  mute?: boolean;
}

export class MockEngine {
  thetaHi = 0.01;
  running = true;
  timeUs = 0;
  received: Request[] = [];
  transportLog: string[] = [];
  /** Timestamps of every trigger_flag frame actually sent (the oracle). */
  sentFlags: number[] = [];
  framesSent = 0;

  private readonly tickMs: number;
  private sockets = new Set<FakeSocket>();
  private subs = new Map<FakeSocket, Subscription>();
  private queued: QueuedCommand[] = [];
  private tickTimer: ReturnType<typeof setInterval>;

  constructor(private opts: MockOptions = {}) {
    this.tickMs = opts.tickMs ?? 100 / 3;
    this.tickTimer = setInterval(() => this.tick(), this.tickMs);
  }

  /** SocketFactory for ConsoleClient. */
  connect = (_url: string): FakeSocket => new FakeSocket(this);

  attach(sock: FakeSocket): void {
    this.sockets.add(sock);
  }

  detach(sock: FakeSocket): void {
    this.sockets.delete(sock);
    const sub = this.subs.get(sock);
    if (sub !== undefined) clearInterval(sub.timer);
    this.subs.delete(sock);
  }

  /** Server-initiated close of every connection. */
  closeAll(): void {
    for (const sock of [...this.sockets]) sock.close();
  }

  shutdown(): void {
    clearInterval(this.tickTimer);
    this.closeAll();
  }

  /** Start answering again after a mute (timeout recovery scenarios). */
  unmute(): void {
    this.opts.mute = false;
  }

  receive(sock: FakeSocket, data: string): void {
    const msg = JSON.parse(data) as Request;
    this.received.push(msg);
    if (this.opts.mute) return;
    const id = msg.request_id;
    const payload = msg.payload ?? {};
    const problem = validateRequest(msg.kind, payload);
    if (problem !== null) return this.reply(sock, id, false, undefined, problem);

    switch (msg.kind) {
      case "PING":
        return this.reply(sock, id, true, { pong: true });
      case "SUBSCRIBE": {
        const rate = (payload.rate_hz as number | undefined) ?? 20;
        const prev = this.subs.get(sock);
        if (prev !== undefined) clearInterval(prev.timer);
        const sub: Subscription = {
          intervalUs: Math.round(1e6 / rate),
          index: 0,
          timer: setInterval(() => this.sendFrame(sock), 1000 / rate),
        };
        this.subs.set(sock, sub);
        return this.reply(sock, id, true, { rate_hz: rate });
      }
      case "TRANSPORT": {
        const action = payload.action as string;
        return this.queue(sock, id, () => {
          this.transportLog.push(action);
          if (action === "start") this.running = true;
          if (action === "stop") this.running = false;
          return { running: this.running };
        });
      }
      case "SET_THRESHOLD":
        return this.queue(sock, id, () => {
          this.thetaHi = payload.theta_hi as number;
          return { applied_at_us: this.timeUs };
        });
      case "LOAD_SCORE":
        return this.queue(sock, id, () => {
          const err = this.opts.scoreVerdict?.(payload.document) ?? null;
          if (err !== null) throw new Error(err);
          return { sections: 1 };
        });
      case "LOAD_MAPPING":
        return this.queue(sock, id, () => {
          const err = this.opts.mappingVerdict?.(payload.document) ?? null;
          if (err !== null) throw new Error(err);
          return { routes: 1 };
        });
      default:
        // SET_PARAM / SET_ACTIVE / SET_TRIGGER_CONFIG
        return this.queue(sock, id, () => ({ applied_at_us: this.timeUs }));
    }
  }

  private queue(sock: FakeSocket, id: unknown, apply: () => unknown): void {
    this.queued.push({ sock, id, apply });
  }

  private tick(): void {
    this.timeUs += Math.round(this.tickMs * 1000);
    for (const cmd of this.queued.splice(0)) {
      try {
        this.reply(cmd.sock, cmd.id, true, cmd.apply());
      } catch (exc) {
        this.reply(cmd.sock, cmd.id, false, undefined, (exc as Error).message);
      }
    }
  }

  private sendFrame(sock: FakeSocket): void {
    const sub = this.subs.get(sock);
    if (sub === undefined) return;
    const i = sub.index++;
    const ts = i * sub.intervalUs;
    const every = this.opts.triggerEvery;
    const flag = every != null && i > 0 && i % every === 0;
    if (flag) this.sentFlags.push(ts);
    this.framesSent += 1;
    sock.deliver(
      JSON.stringify({
        t: "metrics",
        ts,
        qom: this.opts.qomFn?.(i) ?? 0.1,
        soa: 0.001,
        effective_theta_hi: this.thetaHi,
        trigger_flag: flag,
        current_section: 0,
        envelope: 0.2,
      }),
    );
  }

  private reply(sock: FakeSocket, id: unknown, ok: boolean, result?: unknown, error?: string): void {
    const body: Record<string, unknown> = { t: "reply", request_id: id, ok };
    if (ok) body.result = result;
    else body.error = error;
    sock.deliver(JSON.stringify(body));
  }
}

/** Run queued microtasks so FakeSocket open/close callbacks land. */
export async function settle(rounds = 4): Promise<void> {
  for (let i = 0; i < rounds; i++) await Promise.resolve();
}
