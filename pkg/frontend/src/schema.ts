/**
 * Mirror of the gateway record/command schema (v1).
 *
 * Outbound commands are plain text lines; inbound records are JSON objects
 * with a "type" and schema version "v". Client-side validation matches the
 * gateway's rules exactly so a well-formed UI request is never rejected for
 * format reasons.
 */

export const SCHEMA_VERSION = 1;

export interface TelemetryPoint {
  t_ms: number;
  px: number; py: number; pz: number;       // measured (delayed) position
  phx: number; phy: number; phz: number;    // predicted position
  rx: number; ry: number; rz: number;       // reference position
  tau_raw_ms: number;
  tau_hat_ms: number;
  vcx: number; vcy: number; vcz: number;
  seq_state: number;
  seq_ctrl: number;
}

export interface WaypointForm {
  x: number;
  y: number;
  z: number;
  yaw: number;
}

export interface NetProfileForm {
  delay_ms: number;
  jitter_ms: number;
  loss: number;
}

const TELEMETRY_FIELDS: (keyof TelemetryPoint)[] = [
  "t_ms", "px", "py", "pz", "phx", "phy", "phz", "rx", "ry", "rz",
  "tau_raw_ms", "tau_hat_ms", "vcx", "vcy", "vcz", "seq_state", "seq_ctrl",
];

/** Parse one stream record; returns null for anything that is not a valid
 * v1 telemetry record (acks, status replies, garbage). */
export function parseTelemetry(record: unknown): TelemetryPoint | null {
  if (typeof record !== "object" || record === null) return null;
  const obj = record as Record<string, unknown>;
  if (obj["type"] !== "telemetry" || obj["v"] !== SCHEMA_VERSION) return null;
  const out: Partial<Record<keyof TelemetryPoint, number>> = {};
  for (const field of TELEMETRY_FIELDS) {
    const value = obj[field];
    if (typeof value !== "number" || !Number.isFinite(value)) return null;
    out[field] = value;
  }
  return out as TelemetryPoint;
}

export function parseTelemetryLine(line: string): TelemetryPoint | null {
  try {
    return parseTelemetry(JSON.parse(line));
  } catch {
    return null;
  }
}

export function validateWaypoint(form: WaypointForm): string | null {
  for (const [name, value] of Object.entries(form)) {
    if (typeof value !== "number" || !Number.isFinite(value)) {
      return `waypoint ${name} must be a finite number`;
    }
  }
  return null;
}

export function validateNetProfile(form: NetProfileForm): string | null {
  for (const [name, value] of Object.entries(form)) {
    if (typeof value !== "number" || !Number.isFinite(value)) {
      return `netprofile ${name} must be a finite number`;
    }
  }
  if (form.delay_ms < 0) return "delay_ms must be >= 0";
  if (form.jitter_ms < 0) return "jitter_ms must be >= 0";
  if (form.loss < 0 || form.loss > 1) return "loss must be in [0, 1]";
  return null;
}

/** Format after validation; throws on invalid input so an unchecked call can
 * never put a malformed line on the wire. */
export function formatWaypointCommand(form: WaypointForm): string {
  const err = validateWaypoint(form);
  if (err) throw new Error(err);
  return `waypoint ${form.x} ${form.y} ${form.z} ${form.yaw}`;
}

export function formatNetProfileCommand(form: NetProfileForm): string {
  const err = validateNetProfile(form);
  if (err) throw new Error(err);
  return `netprofile ${form.delay_ms} ${form.jitter_ms} ${form.loss}`;
}

export interface Ack {
  type: "ack";
  v: number;
  ok: boolean;
  cmd?: string;
  error?: string;
}

export function parseAck(record: unknown): Ack | null {
  if (typeof record !== "object" || record === null) return null;
  const obj = record as Record<string, unknown>;
  if (obj["type"] !== "ack" || typeof obj["ok"] !== "boolean") return null;
  return obj as unknown as Ack;
}
