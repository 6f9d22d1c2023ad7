import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { axisSeries, delaySeries, FrameBuffer, rttTrend, trajectorySeries } from "../src/frames.js";
import { parseTelemetryLine, TelemetryPoint } from "../src/schema.js";

function point(t_ms: number, overrides: Partial<TelemetryPoint> = {}): TelemetryPoint {
  return {
    t_ms, px: 0, py: 0, pz: 0, phx: 0, phy: 0, phz: 0, rx: 0, ry: 0, rz: 0,
    tau_raw_ms: 0, tau_hat_ms: 0, vcx: 0, vcy: 0, vcz: 0, seq_state: 0, seq_ctrl: 0,
    ...overrides,
  };
}

function loadFixture(): TelemetryPoint[] {
  const path = fileURLToPath(new URL("./fixtures/telemetry.ndjson", import.meta.url));
  return readFileSync(path, "utf-8")
    .split("\n")
    .filter((l) => l.trim())
    .map((l) => parseTelemetryLine(l)!)
    .filter((p) => p !== null);
}

describe("FrameBuffer", () => {
  it("keeps frames in time order despite out-of-order arrival", () => {
    const buf = new FrameBuffer();
    buf.push(point(40));
    buf.push(point(20));
    buf.push(point(60));
    buf.push(point(50));
    expect(buf.all().map((p) => p.t_ms)).toEqual([20, 40, 50, 60]);
    expect(buf.latest()!.t_ms).toBe(60);
  });

  it("replaces duplicate timestamps with the latest copy", () => {
    const buf = new FrameBuffer();
    buf.push(point(20, { px: 1 }));
    buf.push(point(20, { px: 2 }));
    expect(buf.size).toBe(1);
    expect(buf.all()[0]!.px).toBe(2);
  });

  it("trims to the rolling window", () => {
    const buf = new FrameBuffer(60);
    buf.push(point(0));
    buf.push(point(30_000));
    buf.push(point(61_000));
    expect(buf.all().map((p) => p.t_ms)).toEqual([30_000, 61_000]);
  });

  it("a late frame older than the window is not resurrected", () => {
    const buf = new FrameBuffer(60);
    buf.push(point(100_000));
    buf.push(point(1_000)); // way before the window
    expect(buf.all().map((p) => p.t_ms)).toEqual([100_000]);
  });
});

describe("series builders", () => {
  const fixture = loadFixture();

  it("fixture parsed fully", () => {
    expect(fixture.length).toBe(240);
  });

  it("trajectory picks the right planes", () => {
    const pts = [point(0, { px: 1, py: 2, pz: 3, phx: 4, phy: 5, phz: 6, rx: 7, ry: 8, rz: 9 })];
    expect(trajectorySeries(pts, "xy")).toEqual({ meas: [[1, 2]], est: [[4, 5]], ref: [[7, 8]] });
    expect(trajectorySeries(pts, "xz")).toEqual({ meas: [[1, 3]], est: [[4, 6]], ref: [[7, 9]] });
  });

  it("axis strips carry seconds on the time axis", () => {
    const s = axisSeries([point(2000, { px: 0.5, phx: 0.6, rx: 1 })], "x");
    expect(s.t).toEqual([2]);
    expect(s.meas).toEqual([0.5]);
    expect(s.est).toEqual([0.6]);
    expect(s.ref).toEqual([1]);
  });

  it("replaying the recorded log yields identical series", () => {
    const build = () => {
      const buf = new FrameBuffer(600);
      for (const p of fixture) buf.push(p);
      return {
        xy: trajectorySeries(buf.all(), "xy"),
        xz: trajectorySeries(buf.all(), "xz"),
        x: axisSeries(buf.all(), "x"),
        y: axisSeries(buf.all(), "y"),
        z: axisSeries(buf.all(), "z"),
        delay: delaySeries(buf.all()),
      };
    };
    const a = build();
    const b = build();
    expect(a).toEqual(b);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });

  it("fixture shows the expected closed-loop shape", () => {
    const buf = new FrameBuffer(600);
    for (const p of fixture) buf.push(p);
    const s = axisSeries(buf.all(), "x");
    const last = s.t.length - 1;
    // reference steps to 1 m at t=1 s; measured follows and converges
    expect(Math.max(...s.ref)).toBe(1);
    expect(Math.abs(s.meas[last]! - 1)).toBeLessThan(0.1);
    // estimate leads the (delayed) measurement during the climb
    const climbing = buf.all().filter((p) => p.t_ms > 1500 && p.t_ms < 2500 && p.rx === 1);
    const leadCount = climbing.filter((p) => p.phx >= p.px).length;
    expect(leadCount / climbing.length).toBeGreaterThan(0.8);
  });

  it("rtt trend averages recent raw samples", () => {
    const pts = Array.from({ length: 30 }, (_, i) =>
      point(i * 20, { tau_raw_ms: i < 5 ? 0 : 100 + (i % 3) }));
    const trend = rttTrend(pts, 10);
    expect(trend).toBeGreaterThan(99);
    expect(trend).toBeLessThan(103);
    expect(rttTrend([point(0)])).toBeNull();
  });
});
