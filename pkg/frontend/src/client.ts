/**
 * Gateway session for the browser: reads the NDJSON record stream exposed by
 * the bridge at /api/stream (reconnecting with backoff) and posts command
 * lines to /api/command.
 */

import { Ack, parseAck, parseTelemetry, TelemetryPoint } from "./schema.js";

export type SessionState = "connecting" | "connected" | "disconnected";

export interface SessionEvents {
  onFrame: (point: TelemetryPoint) => void;
  onState: (state: SessionState) => void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_MAX_MS = 5000;

export class GatewaySession {
  private stopped = false;
  private backoffMs = BACKOFF_START_MS;

  constructor(private baseUrl: string, private events: SessionEvents) {}

  start(): void {
    this.stopped = false;
    void this.readLoop();
  }

  stop(): void {
    this.stopped = true;
  }

  private async readLoop(): Promise<void> {
    while (!this.stopped) {
      this.events.onState("connecting");
      try {
        const resp = await fetch(`${this.baseUrl}/api/stream`);
        if (!resp.ok || !resp.body) throw new Error(`stream http ${resp.status}`);
        this.events.onState("connected");
        this.backoffMs = BACKOFF_START_MS;
        await this.consume(resp.body);
      } catch {
        // fall through to reconnect
      }
      if (this.stopped) break;
      this.events.onState("disconnected");
      await sleep(this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let pending = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done || this.stopped) return;
      pending += decoder.decode(value, { stream: true });
      let idx;
      while ((idx = pending.indexOf("\n")) >= 0) {
        const line = pending.slice(0, idx);
        pending = pending.slice(idx + 1);
        const point = parseTelemetryLineSafe(line);
        if (point) this.events.onFrame(point);
      }
    }
  }

  /** Post one already-formatted command line; resolves with the gateway ack. */
  async sendCommand(line: string): Promise<Ack> {
    const resp = await fetch(`${this.baseUrl}/api/command`, {
      method: "POST",
      headers: { "content-type": "text/plain" },
      body: line,
    });
    if (!resp.ok) throw new Error(`command http ${resp.status}`);
    const ack = parseAck(await resp.json());
    if (!ack) throw new Error("gateway reply was not an ack");
    return ack;
  }
}

function parseTelemetryLineSafe(line: string): TelemetryPoint | null {
  if (!line.trim()) return null;
  try {
    return parseTelemetry(JSON.parse(line));
  } catch {
    return null;
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
