/**
 * Transport button state: exactly one TRANSPORT command in flight at a time.
 *
 * A press while a command is pending is ignored, so rapid double-clicks send
 * one command per acknowledged state change. A timeout re-enables the
 * buttons and leaves a warning for the banner.
 */

import { ConsoleClient } from "./client.js";

export type TransportAction = "start" | "stop" | "recalibrate";

export class TransportControl {
  pending: TransportAction | null = null;
  /** Last acknowledged engine run state; null until the first ack. */
  running: boolean | null = null;
  warning: string | null = null;

  constructor(private client: ConsoleClient) {}

  /** Returns true when a command was actually sent. */
  async press(action: TransportAction): Promise<boolean> {
    if (this.pending !== null) return false;
    this.pending = action;
    this.warning = null;
    try {
      await this.client.transport(action);
      if (action === "start") this.running = true;
      if (action === "stop") this.running = false;
      return true;
    } catch (exc) {
      this.warning = `${action}: ${(exc as Error).message}`;
      return false;
    } finally {
      this.pending = null;
    }
  }
}
