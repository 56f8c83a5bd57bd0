/**
 * Client-side validation for chain / score / mapping documents.
 *
 * These checks mirror the engine's validators rule for rule, including its
 * numeric coercions (booleans count as numbers, numeric strings parse, ints
 * truncate), so a document is accepted here exactly when the engine accepts
 * it. The shared corpus contract test holds the two sides together.
 */

export interface Verdict {
  ok: boolean;
  errors: string[];
}

export type UnitKind = "GAIN" | "DELAY" | "RINGMOD" | "LOWPASS";

/** What target resolution needs to know about a validated chain. */
export interface ChainInfo {
  sampleRate: number;
  units: Map<string, UnitKind>;
}

const UNIT_KINDS: UnitKind[] = ["GAIN", "DELAY", "RINGMOD", "LOWPASS"];
const SAMPLE_RATES = [44100, 48000];
const MASTER_UNIT_ID = "master";
const MASTER_PARAMS = ["dry_gain", "wet_gain"];
const DIST_KINDS = ["UNIFORM", "GAUSSIAN", "CHOICE"];
const SPREAD_POLICIES = ["FIXED", "SHRINK_WITH_LOW_SOA"];
const TRIGGER_ACTIONS = ["ADVANCE", "RESAMPLE", "HOLD"];
const ROUTE_SOURCES = ["QOM", "SOA", "AUDIO_ENVELOPE"];
const CURVE_KINDS = ["LINEAR", "EXPONENT", "INVERT"];

function isPlainObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

/** Engine-style float coercion: numbers pass, booleans are 1/0, numeric
 * strings (incl. inf/nan spellings) parse; everything else throws. */
function toFloat(v: unknown): number {
  if (typeof v === "number") return v;
  if (typeof v === "boolean") return v ? 1 : 0;
  if (typeof v === "string") {
    const t = v.trim();
    const signless = t.replace(/^[+-]/, "").toLowerCase();
    if (signless === "inf" || signless === "infinity") {
      return t.startsWith("-") ? -Infinity : Infinity;
    }
    if (signless === "nan") return NaN;
    if (t === "" || /^[+-]?0[xbo]/i.test(t)) throw new Error(`not a number: '${v}'`);
    const n = Number(t);
    if (Number.isNaN(n)) throw new Error(`not a number: '${v}'`);
    return n;
  }
  throw new Error(`not a number: ${JSON.stringify(v)}`);
}

/** Engine-style int coercion: floats truncate, strings need an integer
 * literal, booleans are 1/0. */
function toInt(v: unknown): number {
  if (typeof v === "number") {
    if (!Number.isFinite(v)) throw new Error(`not an integer: ${v}`);
    return Math.trunc(v);
  }
  if (typeof v === "boolean") return v ? 1 : 0;
  if (typeof v === "string") {
    const t = v.trim();
    if (!/^[+-]?\d+$/.test(t)) throw new Error(`not an integer: '${v}'`);
    return Number(t);
  }
  throw new Error(`not an integer: ${JSON.stringify(v)}`);
}

/** Engine-style truthiness: empty strings/arrays/objects are false. */
function toBool(v: unknown): boolean {
  if (typeof v === "boolean") return v;
  if (typeof v === "number") return v !== 0;
  if (typeof v === "string") return v.length > 0;
  if (Array.isArray(v)) return v.length > 0;
  if (isPlainObject(v)) return Object.keys(v).length > 0;
  return v != null;
}

function toStr(v: unknown): string {
  if (typeof v === "string") return v;
  if (v === null) return "None";
  if (v === true) return "True";
  if (v === false) return "False";
  return String(v);
}

function paramRanges(kind: UnitKind, sampleRate: number): Record<string, [number, number]> {
  const fs = sampleRate;
  switch (kind) {
    case "GAIN":
      return { level: [0.0, 2.0] };
    case "DELAY":
      return { time_samples: [1.0, fs], feedback: [0.0, 0.95], mix: [0.0, 1.0] };
    case "RINGMOD":
      return { freq_hz: [0.0, fs / 2.0], mix: [0.0, 1.0] };
    case "LOWPASS":
      return { cutoff_hz: [1.0, fs / 2.0 - 1.0], q: [0.1, 10.0] };
  }
}

/** 'unit.param' addresses must have exactly two non-empty parts. */
function splitTarget(target: string): [string, string] | null {
  const parts = target.split(".");
  if (parts.length !== 2 || !parts[0] || !parts[1]) return null;
  return [parts[0], parts[1]];
}

/** Returns an error message when the target does not resolve, else null. */
function resolveTarget(chain: ChainInfo, target: string): string | null {
  const parts = splitTarget(target);
  if (parts === null) return `parameter address must be 'unit.param': '${target}'`;
  const [unitId, param] = parts;
  if (unitId === MASTER_UNIT_ID) {
    return MASTER_PARAMS.includes(param)
      ? null
      : `unknown master parameter '${param}' in '${target}'`;
  }
  const kind = chain.units.get(unitId);
  if (kind === undefined) return `no unit '${unitId}' in chain for target '${target}'`;
  if (!(param in paramRanges(kind, chain.sampleRate))) {
    return `unit '${unitId}' has no parameter '${param}' (target '${target}')`;
  }
  return null;
}

// -- chain ------------------------------------------------------------------

export function validateChain(doc: unknown): Verdict {
  if (!isPlainObject(doc)) return { ok: false, errors: ["chain document must be a JSON object"] };
  const rawUnits = "units" in doc ? doc.units : [];
  if (!Array.isArray(rawUnits)) {
    return { ok: false, errors: ["chain 'units' must be a list"] };
  }

  interface Unit { id: string; kind: UnitKind; params: Record<string, number>; }
  const units: Unit[] = [];
  const errors: string[] = [];
  rawUnits.forEach((raw, i) => {
    try {
      if (!isPlainObject(raw)) throw new Error("unit entry must be an object");
      const id = toStr(raw.id ?? "");
      const kind = raw.kind;
      if (typeof kind !== "string" || !UNIT_KINDS.includes(kind as UnitKind)) {
        throw new Error(`'${String(kind)}' is not a valid unit kind`);
      }
      const rawParams = raw.params ?? {};
      if (!isPlainObject(rawParams)) throw new Error("unit params must be an object");
      const params: Record<string, number> = {};
      for (const [k, v] of Object.entries(rawParams)) params[k] = toFloat(v);
      if (!id || id.includes(".")) throw new Error(`unit id must be non-empty without dots: '${id}'`);
      if (id === MASTER_UNIT_ID) throw new Error(`unit id '${MASTER_UNIT_ID}' is reserved`);
      units.push({ id, kind: kind as UnitKind, params });
    } catch (exc) {
      errors.push(`units[${i}]: ${(exc as Error).message}`);
    }
  });
  if (errors.length) return { ok: false, errors };

  let sampleRate: number, blockSize: number, dryGain: number, wetGain: number;
  try {
    sampleRate = toInt(doc.sample_rate ?? 48000);
    blockSize = toInt(doc.block_size ?? 512);
    dryGain = toFloat(doc.dry_gain ?? 1.0);
    wetGain = toFloat(doc.wet_gain ?? 1.0);
  } catch (exc) {
    return { ok: false, errors: [`chain header invalid: ${(exc as Error).message}`] };
  }

  if (!SAMPLE_RATES.includes(sampleRate)) {
    errors.push(`sample_rate must be one of ${SAMPLE_RATES.join("/")}: ${sampleRate}`);
  }
  if (blockSize < 64 || blockSize > 2048 || (blockSize & (blockSize - 1)) !== 0) {
    errors.push(`block_size must be a power of two in [64, 2048]: ${blockSize}`);
  }
  if (!(dryGain >= 0 && dryGain <= 1) || !(wetGain >= 0 && wetGain <= 1)) {
    errors.push(`dry/wet gains must lie in [0, 1]: ${dryGain}/${wetGain}`);
  }
  const ids = units.map((u) => u.id);
  if (new Set(ids).size !== ids.length) {
    errors.push(`unit ids must be unique: ${ids.join(", ")}`);
  }
  const rate = SAMPLE_RATES.includes(sampleRate) ? sampleRate : 48000;
  for (const u of units) {
    const ranges = paramRanges(u.kind, rate);
    const missing = Object.keys(ranges).filter((k) => !(k in u.params)).sort();
    const extra = Object.keys(u.params).filter((k) => !(k in ranges)).sort();
    if (missing.length) errors.push(`unit '${u.id}': missing params ${missing.join(", ")}`);
    if (extra.length) errors.push(`unit '${u.id}': unknown params ${extra.join(", ")}`);
    for (const [name, [lo, hi]] of Object.entries(ranges)) {
      const v = u.params[name];
      if (v !== undefined && !(v >= lo && v <= hi)) {
        errors.push(`unit '${u.id}': ${name}=${v} outside [${lo}, ${hi}]`);
      }
    }
  }
  return { ok: errors.length === 0, errors };
}

/** Extract target-resolution context from a chain document known to be valid. */
export function chainInfo(doc: unknown): ChainInfo | null {
  const verdict = validateChain(doc);
  if (!verdict.ok || !isPlainObject(doc)) return null;
  const units = new Map<string, UnitKind>();
  for (const raw of (doc.units as Record<string, unknown>[] | undefined) ?? []) {
    units.set(toStr(raw.id ?? ""), raw.kind as UnitKind);
  }
  let rate = 48000;
  try {
    rate = toInt(doc.sample_rate ?? 48000);
  } catch {
    /* validated above */
  }
  return { sampleRate: rate, units };
}

// -- score --------------------------------------------------------------------

function needFloats(params: Record<string, unknown>, where: string, names: string[]): number[] {
  return names.map((name) => {
    if (!(name in params)) throw new Error(`${where}: missing parameter '${name}'`);
    return toFloat(params[name]);
  });
}

function checkDistribution(rd: Record<string, unknown>): void {
  const kind = rd.kind;
  if (typeof kind !== "string" || !DIST_KINDS.includes(kind)) {
    throw new Error(`'${String(kind)}' is not a valid distribution kind`);
  }
  const rawParams = rd.params ?? {};
  if (!isPlainObject(rawParams)) throw new Error("distribution params must be an object");
  const target = toStr(rd.target ?? "");
  if (splitTarget(target) === null) {
    throw new Error(`parameter address must be 'unit.param': '${target}'`);
  }
  const policy = rd.spread_policy ?? "FIXED";
  if (typeof policy !== "string" || !SPREAD_POLICIES.includes(policy)) {
    throw new Error(`'${String(policy)}' is not a valid spread policy`);
  }
  const where = `distribution for '${target}'`;
  if (kind === "UNIFORM") {
    const [lo, hi] = needFloats(rawParams, where, ["lo", "hi"]) as [number, number];
    if (!(lo >= 0 && lo <= hi && hi <= 1)) {
      throw new Error(`${where}: need 0 <= lo <= hi <= 1, got lo=${lo} hi=${hi}`);
    }
  } else if (kind === "GAUSSIAN") {
    const [mu, sigma] = needFloats(rawParams, where, ["mu", "sigma_base"]) as [number, number];
    if (!(mu >= 0 && mu <= 1)) throw new Error(`${where}: mu out of [0, 1]: ${mu}`);
    if (sigma < 0) throw new Error(`${where}: sigma_base must be >= 0: ${sigma}`);
  } else {
    const values = rawParams.values;
    if (!toBool(values ?? null)) throw new Error(`${where}: CHOICE needs a non-empty 'values' list`);
    if (!Array.isArray(values)) throw new Error(`${where}: CHOICE values must be a list`);
    for (const v of values) {
      const x = toFloat(v);
      if (!(x >= 0 && x <= 1)) throw new Error(`${where}: CHOICE values must lie in [0, 1]`);
    }
    const weights = (rawParams.weights ?? values.map(() => 1.0)) as unknown[];
    if (!Array.isArray(weights) || weights.length !== values.length) {
      const n = Array.isArray(weights) ? weights.length : 0;
      throw new Error(`${where}: weights length ${n} != values length ${values.length}`);
    }
    let sum = 0;
    for (const w of weights) {
      if (typeof w !== "number" || w < 0) {
        throw new Error(`${where}: weights must be >= 0 with positive sum`);
      }
      sum += w;
    }
    if (sum <= 0) throw new Error(`${where}: weights must be >= 0 with positive sum`);
  }
}

export function validateScore(doc: unknown, chain?: ChainInfo): Verdict {
  if (!isPlainObject(doc)) return { ok: false, errors: ["score document must be a JSON object"] };
  const rawSections = doc.sections;
  if (!Array.isArray(rawSections) || rawSections.length === 0) {
    return { ok: false, errors: ["score needs a non-empty 'sections' list"] };
  }

  const errors: string[] = [];
  const sections: { id: number }[] = [];
  const targets: string[] = [];
  rawSections.forEach((raw, i) => {
    if (!isPlainObject(raw)) {
      errors.push(`sections[${i}]: section entry must be an object`);
      return;
    }
    const rawDists = raw.distributions ?? [];
    const dists = Array.isArray(rawDists) ? rawDists : [];
    if (!Array.isArray(rawDists)) errors.push(`sections[${i}]: distributions must be a list`);
    dists.forEach((rd, j) => {
      try {
        if (!isPlainObject(rd)) throw new Error("distribution entry must be an object");
        checkDistribution(rd);
        targets.push(toStr(rd.target ?? ""));
      } catch (exc) {
        errors.push(`sections[${i}].distributions[${j}]: ${(exc as Error).message}`);
      }
    });
    if (errors.length) return;
    try {
      const id = toInt(raw.id ?? i);
      const action = raw.on_trigger ?? "ADVANCE";
      if (typeof action !== "string" || !TRIGGER_ACTIONS.includes(action)) {
        throw new Error(`'${String(action)}' is not a valid trigger action`);
      }
      const duration = raw.duration_limit ?? null;
      if (duration !== null) {
        const d = typeof duration === "boolean" ? (duration ? 1 : 0) : duration;
        if (typeof d !== "number") throw new Error(`section ${id}: duration_limit must be a number`);
        if (d <= 0) throw new Error(`section ${id}: duration_limit must be positive`);
      }
      if (dists.length === 0) throw new Error(`section ${id}: distributions must be non-empty`);
      sections.push({ id });
    } catch (exc) {
      errors.push(`sections[${i}]: ${(exc as Error).message}`);
    }
  });
  if (errors.length) return { ok: false, errors };

  let seed: number, sRef: number;
  try {
    seed = toInt(doc.seed ?? 0);
    sRef = toFloat(doc.s_ref ?? 1.0);
    toBool(doc.wrap ?? false);
  } catch (exc) {
    return { ok: false, errors: [`score header invalid: ${(exc as Error).message}`] };
  }
  if (sRef <= 0) errors.push(`s_ref must be positive: ${sRef}`);
  if (!(seed >= 0 && seed < 2 ** 64)) errors.push(`seed must be a 64-bit unsigned value: ${seed}`);
  sections.forEach((sec, i) => {
    if (sec.id !== i) {
      errors.push(`section ids must be contiguous from 0; index ${i} has id ${sec.id}`);
    }
  });
  if (errors.length) return { ok: false, errors };

  if (chain) {
    const seen = new Set<string>();
    for (const target of targets) {
      if (seen.has(target)) continue;
      seen.add(target);
      if (resolveTarget(chain, target) !== null) errors.push(`unresolved target '${target}'`);
    }
  }
  return { ok: errors.length === 0, errors };
}

// -- mapping ------------------------------------------------------------------

export function validateMapping(doc: unknown, chain?: ChainInfo): Verdict {
  if (!isPlainObject(doc)) return { ok: false, errors: ["mapping document must be a JSON object"] };
  const rawRoutes = "routes" in doc ? doc.routes : [];
  if (!Array.isArray(rawRoutes)) return { ok: false, errors: ["mapping 'routes' must be a list"] };

  interface Rt { source: string; target: string; enabled: boolean; }
  const routes: Rt[] = [];
  const errors: string[] = [];
  rawRoutes.forEach((raw, i) => {
    try {
      if (!isPlainObject(raw)) throw new Error("route entry must be an object");
      const source = raw.source;
      if (typeof source !== "string" || !ROUTE_SOURCES.includes(source)) {
        throw new Error(`'${String(source)}' is not a valid route source`);
      }
      const target = toStr(raw.target ?? "");
      const curve = raw.curve ?? "LINEAR";
      if (typeof curve !== "string" || !CURVE_KINDS.includes(curve)) {
        throw new Error(`'${String(curve)}' is not a valid curve kind`);
      }
      const p = toFloat(raw.p ?? 1.0);
      const outLo = toFloat(raw.out_lo ?? 0.0);
      const outHi = toFloat(raw.out_hi ?? 1.0);
      const smoothing = toFloat(raw.smoothing_ms ?? 0.0);
      const enabled = toBool(raw.enabled ?? true);
      if (splitTarget(target) === null) {
        throw new Error(`route target must be 'unit.param': '${target}'`);
      }
      if (outLo > outHi) throw new Error(`route to '${target}': out_lo ${outLo} > out_hi ${outHi}`);
      if (curve === "EXPONENT" && p <= 0) {
        throw new Error(`route to '${target}': exponent p must be > 0, got ${p}`);
      }
      if (smoothing < 0) throw new Error(`route to '${target}': smoothing_ms must be >= 0`);
      routes.push({ source, target, enabled });
    } catch (exc) {
      errors.push(`routes[${i}]: ${(exc as Error).message}`);
    }
  });
  if (errors.length) return { ok: false, errors };

  const seen = new Set<string>();
  for (const r of routes) {
    if (!r.enabled) continue;
    const key = `${r.source}\u0000${r.target}`;
    if (seen.has(key)) {
      errors.push(`duplicate enabled route ${r.source} -> '${r.target}'`);
      break;
    }
    seen.add(key);
  }
  if (errors.length) return { ok: false, errors };

  if (chain) {
    const dup = new Set<string>();
    routes.forEach((r, i) => {
      const problem = resolveTarget(chain, r.target);
      if (problem !== null) errors.push(`routes[${i}]: ${problem}`);
      if (r.enabled) {
        const key = `${r.source}\u0000${r.target}`;
        if (dup.has(key)) {
          errors.push(`routes[${i}]: duplicate enabled route ${r.source} -> '${r.target}'`);
        }
        dup.add(key);
      }
    });
  }
  return { ok: errors.length === 0, errors };
}

/** Validate any corpus document by kind, resolving against a chain context. */
export function validateDocument(
  kind: "chain" | "score" | "mapping",
  doc: unknown,
  chain?: ChainInfo,
): Verdict {
  if (kind === "chain") return validateChain(doc);
  if (kind === "score") return validateScore(doc, chain);
  return validateMapping(doc, chain);
}
