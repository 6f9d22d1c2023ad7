/**
 * Frame buffer and chart-series builders.
 *
 * Everything here is pure in the buffer contents: replaying the same record
 * log yields identical series, which is what the replay test pins down.
 * Out-of-order and duplicate frames are tolerated; rendering follows
 * latest-by-timestamp.
 */

import type { TelemetryPoint } from "./schema.js";

export const DEFAULT_WINDOW_S = 60;

export class FrameBuffer {
  private points: TelemetryPoint[] = [];
  readonly windowS: number;

  constructor(windowS: number = DEFAULT_WINDOW_S) {
    this.windowS = windowS;
  }

  /** Insert keeping time order; a frame with a known timestamp replaces the
   * earlier copy. Frames older than the rolling window are discarded. */
  push(point: TelemetryPoint): void {
    const pts = this.points;
    let i = pts.length;
    while (i > 0 && pts[i - 1]!.t_ms > point.t_ms) i--;
    if (i > 0 && pts[i - 1]!.t_ms === point.t_ms) {
      pts[i - 1] = point;
    } else {
      pts.splice(i, 0, point);
    }
    const horizon = this.latest()!.t_ms - this.windowS * 1000;
    let drop = 0;
    while (drop < pts.length && pts[drop]!.t_ms < horizon) drop++;
    if (drop > 0) pts.splice(0, drop);
  }

  latest(): TelemetryPoint | null {
    return this.points.length ? this.points[this.points.length - 1]! : null;
  }

  all(): readonly TelemetryPoint[] {
    return this.points;
  }

  clear(): void {
    this.points = [];
  }

  get size(): number {
    return this.points.length;
  }
}

export interface XYSeries {
  meas: [number, number][];
  est: [number, number][];
  ref: [number, number][];
}

export type Plane = "xy" | "xz";

export function trajectorySeries(points: readonly TelemetryPoint[], plane: Plane): XYSeries {
  const pick: (p: TelemetryPoint) => [[number, number], [number, number], [number, number]] =
    plane === "xy"
      ? (p) => [[p.px, p.py], [p.phx, p.phy], [p.rx, p.ry]]
      : (p) => [[p.px, p.pz], [p.phx, p.phz], [p.rx, p.rz]];
  const out: XYSeries = { meas: [], est: [], ref: [] };
  for (const p of points) {
    const [m, e, r] = pick(p);
    out.meas.push(m);
    out.est.push(e);
    out.ref.push(r);
  }
  return out;
}

export interface StripSeries {
  t: number[];
  meas: number[];
  est: number[];
  ref: number[];
}

export type Axis = "x" | "y" | "z";

const AXIS_KEYS: Record<Axis, [keyof TelemetryPoint, keyof TelemetryPoint, keyof TelemetryPoint]> = {
  x: ["px", "phx", "rx"],
  y: ["py", "phy", "ry"],
  z: ["pz", "phz", "rz"],
};

export function axisSeries(points: readonly TelemetryPoint[], axis: Axis): StripSeries {
  const [mk, ek, rk] = AXIS_KEYS[axis];
  const out: StripSeries = { t: [], meas: [], est: [], ref: [] };
  for (const p of points) {
    out.t.push(p.t_ms / 1000);
    out.meas.push(p[mk]);
    out.est.push(p[ek]);
    out.ref.push(p[rk]);
  }
  return out;
}

export interface DelaySeries {
  t: number[];
  tau_raw: number[];
  tau_hat: number[];
}

export function delaySeries(points: readonly TelemetryPoint[]): DelaySeries {
  const out: DelaySeries = { t: [], tau_raw: [], tau_hat: [] };
  for (const p of points) {
    out.t.push(p.t_ms / 1000);
    out.tau_raw.push(p.tau_raw_ms);
    out.tau_hat.push(p.tau_hat_ms);
  }
  return out;
}

/** Trailing mean of the raw round-trip samples, for the RTT trend readout. */
export function rttTrend(points: readonly TelemetryPoint[], lastN = 25): number | null {
  const raws: number[] = [];
  for (let i = points.length - 1; i >= 0 && raws.length < lastN; i--) {
    const v = points[i]!.tau_raw_ms;
    if (v > 0) raws.push(v);
  }
  if (!raws.length) return null;
  return raws.reduce((a, b) => a + b, 0) / raws.length;
}
