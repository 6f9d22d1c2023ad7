/**
 * Cockpit page wiring: session lifecycle, command forms, and chart redraws
 * from the rolling frame buffer.
 */

import { GatewaySession, SessionState } from "./client.js";
import { drawChart, Line } from "./charts.js";
import { axisSeries, delaySeries, FrameBuffer, rttTrend, trajectorySeries } from "./frames.js";
import { formatNetProfileCommand, formatWaypointCommand } from "./schema.js";

const COLORS = { meas: "#4fa3ff", est: "#ffb648", ref: "#7ce38b" };

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function num(id: string): number {
  return Number(($(id) as HTMLInputElement).value);
}

function toast(message: string, isError: boolean): void {
  const el = $("toast");
  el.textContent = message;
  el.className = isError ? "toast error" : "toast ok";
  el.style.opacity = "1";
  setTimeout(() => (el.style.opacity = "0"), 2500);
}

function main(): void {
  const params = new URLSearchParams(location.search);
  const base = params.get("bridge") ?? "";
  const buffer = new FrameBuffer(60);
  let state: SessionState = "connecting";

  const session = new GatewaySession(base, {
    onFrame: (point) => buffer.push(point),
    onState: (s) => {
      state = s;
      const banner = $("banner");
      banner.textContent = s === "connected" ? "connected" : s;
      banner.className = `banner ${s}`;
    },
  });
  session.start();

  $("waypoint-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void (async () => {
      try {
        const line = formatWaypointCommand({
          x: num("wp-x"), y: num("wp-y"), z: num("wp-z"), yaw: num("wp-yaw"),
        });
        const ack = await session.sendCommand(line);
        if (ack.ok) toast("waypoint accepted", false);
        else toast(`gateway rejected: ${ack.error ?? "unknown"}`, true);
      } catch (err) {
        toast(String(err instanceof Error ? err.message : err), true);
      }
    })();
  });

  $("netprofile-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void (async () => {
      try {
        const line = formatNetProfileCommand({
          delay_ms: num("np-delay"), jitter_ms: num("np-jitter"), loss: num("np-loss"),
        });
        const ack = await session.sendCommand(line);
        if (ack.ok) toast("network profile applied", false);
        else toast(`gateway rejected: ${ack.error ?? "unknown"}`, true);
      } catch (err) {
        toast(String(err instanceof Error ? err.message : err), true);
      }
    })();
  });

  const canvases = {
    xy: $("chart-xy") as HTMLCanvasElement,
    xz: $("chart-xz") as HTMLCanvasElement,
    strips: (["x", "y", "z"] as const).map((a) => $(`chart-${a}`) as HTMLCanvasElement),
    delay: $("chart-delay") as HTMLCanvasElement,
  };

  function redraw(): void {
    const points = buffer.all();
    for (const [canvas, plane] of [[canvases.xy, "xy"], [canvases.xz, "xz"]] as const) {
      const s = trajectorySeries(points, plane);
      const lines: Line[] = [
        { label: "measured", color: COLORS.meas, xs: s.meas.map((p) => p[0]), ys: s.meas.map((p) => p[1]) },
        { label: "estimated", color: COLORS.est, xs: s.est.map((p) => p[0]), ys: s.est.map((p) => p[1]) },
        { label: "reference", color: COLORS.ref, dashed: true, xs: s.ref.map((p) => p[0]), ys: s.ref.map((p) => p[1]) },
      ];
      drawChart(canvas, `trajectory ${plane.toUpperCase()} (m)`, lines, { square: true });
    }
    (["x", "y", "z"] as const).forEach((axis, i) => {
      const s = axisSeries(points, axis);
      drawChart(canvases.strips[i]!, `${axis} (m) vs t (s)`, [
        { label: "measured", color: COLORS.meas, xs: s.t, ys: s.meas },
        { label: "estimated", color: COLORS.est, xs: s.t, ys: s.est },
        { label: "reference", color: COLORS.ref, dashed: true, xs: s.t, ys: s.ref },
      ]);
    });
    const d = delaySeries(points);
    drawChart(canvases.delay, "round trip (ms) vs t (s)", [
      { label: "raw", color: COLORS.meas, xs: d.t, ys: d.tau_raw },
      { label: "estimate", color: COLORS.est, xs: d.t, ys: d.tau_hat },
    ]);
    const trend = rttTrend(points);
    $("rtt-trend").textContent = trend === null ? "rtt: --" : `rtt: ${trend.toFixed(1)} ms`;
    const latest = buffer.latest();
    $("frame-info").textContent = latest
      ? `t=${(latest.t_ms / 1000).toFixed(1)} s  frames=${buffer.size}  state=${state}`
      : "no frames yet";
    requestAnimationFrame(redraw);
  }
  requestAnimationFrame(redraw);
}

main();
