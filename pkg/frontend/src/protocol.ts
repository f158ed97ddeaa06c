// Wire protocol shared with the simulator's telemetry bridge.
// One JSON object per WebSocket text frame.

export const SCHEMA_VERSION = 1;

export interface RobotState {
  id: number;
  x: number;
  y: number;
  heading: number;
}

export interface EdgeState {
  id: number;
  i: number;
  j: number;
  d: number;
  e_tail: number;
  e_head: number;
  mu_hat?: number;
}

export interface MotionPayload {
  vx: number;
  vy: number;
  omega: number;
  scale: number;
}

export interface Snapshot {
  type: "snapshot";
  t: number;
  robots: RobotState[];
  edges: EdgeState[];
  centroid: { x: number; y: number };
  orient: number;
  active_command: MotionPayload;
  estimator_enabled: boolean;
}

export interface Hello {
  type: "hello";
  schema_version: number;
  scenario_digest: string;
}

export interface ErrorReply {
  type: "error";
  detail: string;
}

export type ServerMessage = Snapshot | Hello | ErrorReply;

export type CommandMessage =
  | ({ type: "motion" } & MotionPayload)
  | { type: "estimator"; enabled: boolean }
  | { type: "reset"; scenario?: string };

export function parseServerMessage(raw: string): ServerMessage {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    throw new Error(`unparseable frame: ${raw.slice(0, 80)}`);
  }
  if (typeof msg !== "object" || msg === null || !("type" in msg)) {
    throw new Error("frame is not a typed message");
  }
  const type = (msg as { type: unknown }).type;
  if (type === "snapshot" || type === "hello" || type === "error") {
    return msg as ServerMessage;
  }
  throw new Error(`unknown server message type: ${String(type)}`);
}

export function sameCommand(a: CommandMessage, b: CommandMessage): boolean {
  if (a.type !== b.type) return false;
  if (a.type === "motion" && b.type === "motion") {
    return (
      a.vx === b.vx && a.vy === b.vy && a.omega === b.omega && a.scale === b.scale
    );
  }
  if (a.type === "estimator" && b.type === "estimator") {
    return a.enabled === b.enabled;
  }
  if (a.type === "reset" && b.type === "reset") {
    return a.scenario === b.scenario;
  }
  return false;
}
