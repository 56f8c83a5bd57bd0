/**
 * Rolling meter state fed by metrics frames.
 *
 * The model is the frame buffer that decouples rendering from message
 * receipt: the socket pushes frames in, the draw loop pulls a consistent
 * view out whenever it likes. The window keeps the last 30 s; every
 * trigger_flag frame contributes exactly one marker.
 */

import { MetricsFrame } from "./protocol.js";

export interface MeterPoint {
  ts: number; // engine microseconds
  qom: number;
  soa: number;
  thetaHi: number;
  envelope: number;
}

export const WINDOW_US = 30_000_000;

export class MeterModel {
  points: MeterPoint[] = [];
  /** Timestamps of trigger markers still inside the window. */
  markers: number[] = [];
  /** All-time trigger count (markers scroll out of the window; this does not). */
  triggerCount = 0;
  /** Incremented when the gap between frames exceeds twice the expected interval. */
  staleWarnings = 0;
  expectedIntervalUs = 100_000;
  lastFrame: MetricsFrame | null = null;
  /** Meters freeze on disconnect; the banner explains why. */
  frozen = false;

  setRate(rateHz: number): void {
    this.expectedIntervalUs = Math.round(1e6 / rateHz);
  }

  push(frame: MetricsFrame): void {
    if (this.lastFrame !== null && frame.ts - this.lastFrame.ts > 2 * this.expectedIntervalUs) {
      this.staleWarnings += 1;
    }
    this.lastFrame = frame;
    this.frozen = false;
    this.points.push({
      ts: frame.ts,
      qom: frame.qom,
      soa: frame.soa,
      thetaHi: frame.effective_theta_hi,
      envelope: frame.envelope,
    });
    if (frame.trigger_flag) {
      this.markers.push(frame.ts);
      this.triggerCount += 1;
    }
    const cutoff = frame.ts - WINDOW_US;
    while (this.points.length && this.points[0]!.ts < cutoff) this.points.shift();
    while (this.markers.length && this.markers[0]! < cutoff) this.markers.shift();
  }

  freeze(): void {
    this.frozen = true;
  }

  thresholdLine(): number | null {
    return this.lastFrame?.effective_theta_hi ?? null;
  }

  currentSection(): number | null {
    return this.lastFrame?.current_section ?? null;
  }

  /** Upper bound of the saliency axis: headroom over data and threshold. */
  soaScale(): number {
    let top = 0;
    for (const p of this.points) top = Math.max(top, p.soa, p.thetaHi);
    return top > 0 ? top * 1.1 : 1.0;
  }
}

/** Map an engine timestamp to an x pixel inside a window ending at `nowUs`. */
export function tsToX(tsUs: number, nowUs: number, width: number): number {
  const t0 = nowUs - WINDOW_US;
  return ((tsUs - t0) / WINDOW_US) * width;
}

/** Map a value on a [0, scale] axis to a y pixel (0 at the top). */
export function valueToY(value: number, scale: number, height: number): number {
  const clamped = Math.min(Math.max(value / scale, 0), 1);
  return (1 - clamped) * height;
}

export interface ChartView {
  qom: Array<[number, number]>;
  soa: Array<[number, number]>;
  envelope: Array<[number, number]>;
  thresholdY: number | null;
  markerXs: number[];
  soaScale: number;
}

/** Pure view transform: model plus canvas size to polyline coordinates. */
export function chartView(model: MeterModel, width: number, height: number): ChartView {
  const now = model.lastFrame?.ts ?? 0;
  const scale = model.soaScale();
  const qom: Array<[number, number]> = [];
  const soa: Array<[number, number]> = [];
  const envelope: Array<[number, number]> = [];
  for (const p of model.points) {
    const x = tsToX(p.ts, now, width);
    qom.push([x, valueToY(p.qom, 1.0, height)]);
    soa.push([x, valueToY(p.soa, scale, height)]);
    envelope.push([x, valueToY(p.envelope, 1.0, height)]);
  }
  const theta = model.thresholdLine();
  return {
    qom,
    soa,
    envelope,
    thresholdY: theta === null ? null : valueToY(theta, scale, height),
    markerXs: model.markers.map((ts) => tsToX(ts, now, width)),
    soaScale: scale,
  };
}
