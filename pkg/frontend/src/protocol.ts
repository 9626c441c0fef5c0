/**
 * Gateway wire protocol: one JSON object per WebSocket message.
 *
 * {"type", "topic", "payload", "seq", "t"} with topics shaped
 * agents/<vehicle>/{telemetry,ghost,command,mission,state}.  This file is
 * the single source of truth for frame handling on the console side and
 * mirrors the schema the gateway documents.
 */

export const FRAME_TYPES = [
  "hello",
  "subscribe",
  "command",
  "telemetry",
  "ghost",
  "mission_status",
  "error",
  "inject_state",
] as const;

export type FrameType = (typeof FRAME_TYPES)[number];

export interface Frame {
  type: FrameType;
  topic: string;
  payload: Record<string, unknown>;
  seq: number;
  t: number;
}

export interface TelemetryPayload {
  pos: [number, number, number];
  heading?: number;
  depth?: number;
  quat?: number[];
  nu?: number[];
  predicted: boolean;
  quantized?: boolean;
  source?: string;
  tx_time?: number;
  mission_status?: string;
  task_index?: number;
  energy_j?: number;
}

export function parseFrame(text: string): Frame {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new Error(`frame is not valid JSON: ${e}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("frame must be a JSON object");
  }
  const f = doc as Record<string, unknown>;
  if (!FRAME_TYPES.includes(f.type as FrameType)) {
    throw new Error(`unknown frame type ${JSON.stringify(f.type)}`);
  }
  return {
    type: f.type as FrameType,
    topic: typeof f.topic === "string" ? f.topic : "",
    payload:
      typeof f.payload === "object" && f.payload !== null
        ? (f.payload as Record<string, unknown>)
        : {},
    seq: typeof f.seq === "number" ? f.seq : 0,
    t: typeof f.t === "number" ? f.t : 0,
  };
}

export function topicVehicle(topic: string): string | null {
  const parts = topic.split("/");
  return parts.length === 3 && parts[0] === "agents" ? parts[1] : null;
}

/** Serialize exactly like the wire expects: insertion order, no spaces. */
export function frameText(
  type: FrameType,
  topic: string,
  payload: Record<string, unknown>,
  seq: number,
): string {
  return JSON.stringify({ type, topic, payload, seq, t: 0 });
}
