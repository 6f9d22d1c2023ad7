/**
 * Live loop test against the real Python stack (robot agent, two netem
 * proxies, cloud agent) plus the bridge. Requires the cloudloop package to
 * be installed for python3; enable with CLOUDLOOP_E2E=1.
 *
 * Checks the cockpit-facing contract end to end:
 *   - posting a waypoint changes p_ref in telemetry within 2 stream frames
 *   - raising the delay knob to 70 ms lifts the RTT trend above 130 ms
 *     within 5 s
 */

import { spawn, ChildProcess } from "node:child_process";
import * as http from "node:http";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Bridge } from "../src/bridge.js";
import { parseTelemetryLine, TelemetryPoint } from "../src/schema.js";
import { rttTrend } from "../src/frames.js";

const RUN_E2E = process.env.CLOUDLOOP_E2E === "1";
const ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "../..");

const PORTS = {
  robot: 48501, cloud: 48502, upListen: 48510, downListen: 48511,
  upCtl: 48530, downCtl: 48531, gateway: 48520,
};

const SCENARIO = `
schema: cloudloop-scenario/1
name: e2e
duration_s: 60.0
seed: 5
robot:
  start: {p: [0.0, 0.0, 1.0], yaw: 0.0}
network:
  uplink:
    schedule:
      - {t_s: 0, delay_ms: 30, jitter_ms: 5, loss: 0.0}
  downlink:
    schedule:
      - {t_s: 0, delay_ms: 30, jitter_ms: 5, loss: 0.0}
waypoints: []
`;

function waitFor(cond: () => boolean, timeoutMs: number, label: string): Promise<void> {
  return new Promise((resolve, reject) => {
    const t0 = Date.now();
    const timer = setInterval(() => {
      if (cond()) {
        clearInterval(timer);
        resolve();
      } else if (Date.now() - t0 > timeoutMs) {
        clearInterval(timer);
        reject(new Error(`timeout waiting for ${label}`));
      }
    }, 20);
  });
}

function post(port: number, pathName: string, body: string): Promise<{ status: number; body: string }> {
  return new Promise((resolve, reject) => {
    const req = http.request({ host: "127.0.0.1", port, path: pathName, method: "POST" },
      (res) => {
        let data = "";
        res.on("data", (c) => (data += c));
        res.on("end", () => resolve({ status: res.statusCode ?? 0, body: data }));
      });
    req.on("error", reject);
    req.end(body);
  });
}

describe.runIf(RUN_E2E)("live loop via bridge", () => {
  const procs: ChildProcess[] = [];
  let bridge: Bridge;
  let bridgePort = 0;
  const frames: TelemetryPoint[] = [];
  let stream: http.IncomingMessage | null = null;

  beforeAll(async () => {
    const dir = mkdtempSync(path.join(tmpdir(), "cloudloop-e2e-"));
    const scenario = path.join(dir, "e2e.scn");
    writeFileSync(scenario, SCENARIO);

    const py = (args: string[]) =>
      spawn("python3", args, { cwd: ROOT, stdio: "ignore" });
    procs.push(py(["-m", "cloudloop.netem_proxy",
      "--listen", `127.0.0.1:${PORTS.upListen}`, "--forward", `127.0.0.1:${PORTS.cloud}`,
      "--delay-ms", "30", "--jitter-ms", "5", "--seed", "7",
      "--control", `127.0.0.1:${PORTS.upCtl}`, "--direction", "uplink"]));
    procs.push(py(["-m", "cloudloop.netem_proxy",
      "--listen", `127.0.0.1:${PORTS.downListen}`, "--forward", `127.0.0.1:${PORTS.robot}`,
      "--delay-ms", "30", "--jitter-ms", "5", "--seed", "8",
      "--control", `127.0.0.1:${PORTS.downCtl}`, "--direction", "downlink"]));
    procs.push(py(["-m", "cloudloop.robot_agent", "--config", scenario, "--realtime",
      "--bind", `127.0.0.1:${PORTS.robot}`, "--peer", `127.0.0.1:${PORTS.upListen}`]));
    procs.push(py(["-m", "cloudloop.cloud_agent", "--config", scenario, "--realtime",
      "--bind", `127.0.0.1:${PORTS.cloud}`, "--peer", `127.0.0.1:${PORTS.downListen}`,
      "--gateway", `127.0.0.1:${PORTS.gateway}`,
      "--netem-control", `127.0.0.1:${PORTS.upCtl},127.0.0.1:${PORTS.downCtl}`]));

    bridge = new Bridge({ gatewayHost: "127.0.0.1", gatewayPort: PORTS.gateway,
                          listenPort: 0, staticDirs: [] });
    bridgePort = await bridge.start();

    await waitFor(() => frames.length > 0 || stream !== null, 1, "noop").catch(() => {});
    // open the stream (retry while the stack boots)
    for (let attempt = 0; attempt < 50 && !stream; attempt++) {
      try {
        stream = await new Promise<http.IncomingMessage>((resolve, reject) => {
          const req = http.get({ host: "127.0.0.1", port: bridgePort, path: "/api/stream" },
            resolve);
          req.on("error", reject);
        });
      } catch {
        await new Promise((r) => setTimeout(r, 100));
      }
    }
    if (!stream) throw new Error("could not open bridge stream");
    let buf = "";
    stream.on("data", (chunk: Buffer) => {
      buf += chunk.toString();
      let idx;
      while ((idx = buf.indexOf("\n")) >= 0) {
        const point = parseTelemetryLine(buf.slice(0, idx));
        buf = buf.slice(idx + 1);
        if (point) frames.push(point);
      }
    });
    await waitFor(() => frames.length >= 5, 15000, "first telemetry frames");
  }, 30000);

  afterAll(() => {
    stream?.destroy();
    bridge?.stop();
    for (const p of procs) p.kill("SIGTERM");
  });

  it("waypoint from the UI lands in p_ref within 2 stream frames", async () => {
    const markFrame = frames.length;
    const reply = await post(bridgePort, "/api/command", "waypoint 0.6 0.2 1.2 0");
    expect(JSON.parse(reply.body).ok).toBe(true);
    await waitFor(() => frames.length >= markFrame + 3, 5000, "frames after waypoint");
    // within two new stream frames the reference must have switched
    const after = frames.slice(markFrame);
    const hit = after.findIndex((f) => f.rx === 0.6 && f.ry === 0.2 && f.rz === 1.2);
    expect(hit).toBeGreaterThanOrEqual(0);
    expect(hit).toBeLessThanOrEqual(2);
  }, 15000);

  it("raising the delay knob lifts the RTT trend above 130 ms within 5 s", async () => {
    const before = rttTrend(frames, 25);
    expect(before).not.toBeNull();
    expect(before!).toBeLessThan(100); // 2 x 30 ms + offset
    const reply = await post(bridgePort, "/api/command", "netprofile 70 0 0");
    expect(JSON.parse(reply.body).ok).toBe(true);
    await waitFor(() => (rttTrend(frames, 25) ?? 0) > 130, 5000, "rtt trend > 130 ms");
    expect(rttTrend(frames, 25)!).toBeGreaterThan(130);
  }, 15000);
});
