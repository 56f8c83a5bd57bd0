/**
 * Staged-then-applied document editing.
 *
 * Edits stay local until an explicit apply; the applied document always
 * reflects the engine's last acknowledgment. A document with local
 * validation errors is never sent, and an engine rejection keeps both the
 * staged text and the applied document untouched.
 */

import { ConsoleClient } from "./client.js";
import { ChainInfo, Verdict, validateMapping, validateScore } from "./schema.js";

export type DocKind = "score" | "mapping";

export class DocumentEditor {
  stagedText = "";
  appliedDoc: Record<string, unknown> | null = null;
  localErrors: string[] = [];
  engineError: string | null = null;
  pending = false;

  constructor(
    public kind: DocKind,
    private client: ConsoleClient,
    public chain: ChainInfo | null = null,
  ) {}

  /** Stage new text and re-validate locally; nothing is sent. */
  setText(text: string): void {
    this.stagedText = text;
    this.localErrors = this.validate(text).errors;
  }

  validate(text: string): Verdict {
    let doc: unknown;
    try {
      doc = JSON.parse(text);
    } catch (exc) {
      return { ok: false, errors: [`not valid JSON: ${(exc as Error).message}`] };
    }
    const chain = this.chain ?? undefined;
    return this.kind === "score" ? validateScore(doc, chain) : validateMapping(doc, chain);
  }

  get dirty(): boolean {
    if (this.appliedDoc === null) return this.stagedText.trim().length > 0;
    try {
      return JSON.stringify(JSON.parse(this.stagedText)) !== JSON.stringify(this.appliedDoc);
    } catch {
      return true;
    }
  }

  /** Send the staged document; returns true on engine acknowledgment. */
  async apply(): Promise<boolean> {
    if (this.localErrors.length > 0 || this.pending) return false;
    let doc: Record<string, unknown>;
    try {
      doc = JSON.parse(this.stagedText);
    } catch {
      return false;
    }
    this.pending = true;
    this.engineError = null;
    try {
      if (this.kind === "score") await this.client.loadScore(doc);
      else await this.client.loadMapping(doc);
      this.appliedDoc = doc;
      return true;
    } catch (exc) {
      this.engineError = (exc as Error).message;
      return false;
    } finally {
      this.pending = false;
    }
  }
}

/** Pull the field path out of an engine error line for inline highlighting;
 * messages look like "sections[0].distributions[1]: ..." or "routes[2]: ...". */
export function errorField(message: string): string | null {
  const m = /^((?:sections|routes|units)\[\d+\](?:\.\w+\[\d+\])*)/.exec(message);
  return m ? m[1]! : null;
}
