// View state: everything rendered comes from received snapshots, nothing is
// simulated locally. Reconnecting rebuilds the whole view from the next
// snapshot.

import {
  SCHEMA_VERSION,
  ServerMessage,
  Snapshot,
  parseServerMessage,
} from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface EdgeTrace {
  tail: number[];
  head: number[];
}

export const STALE_AFTER_MS = 1000;

export class ViewModel {
  latest: Snapshot | null = null;
  connection: ConnectionState = "connecting";
  schemaMismatch: string | null = null;
  scenarioDigest: string | null = null;
  lastError: string | null = null;
  lastSnapshotAt: number | null = null;
  snapshotCount = 0;

  private traces = new Map<number, EdgeTrace>();

  constructor(readonly traceLength = 600) {}

  ingestRaw(raw: string, now: number): ServerMessage {
    const msg = parseServerMessage(raw);
    this.ingest(msg, now);
    return msg;
  }

  ingest(msg: ServerMessage, now: number): void {
    if (msg.type === "hello") {
      this.scenarioDigest = msg.scenario_digest;
      this.schemaMismatch =
        msg.schema_version === SCHEMA_VERSION
          ? null
          : `server speaks schema v${msg.schema_version}, console expects v${SCHEMA_VERSION}`;
      return;
    }
    if (msg.type === "error") {
      this.lastError = msg.detail;
      return;
    }
    this.latest = msg;
    this.lastSnapshotAt = now;
    this.snapshotCount += 1;
    for (const edge of msg.edges) {
      let trace = this.traces.get(edge.id);
      if (!trace) {
        trace = { tail: [], head: [] };
        this.traces.set(edge.id, trace);
      }
      trace.tail.push(edge.e_tail);
      trace.head.push(edge.e_head);
      if (trace.tail.length > this.traceLength) {
        trace.tail.splice(0, trace.tail.length - this.traceLength);
        trace.head.splice(0, trace.head.length - this.traceLength);
      }
    }
  }

  trace(edgeId: number): EdgeTrace {
    return this.traces.get(edgeId) ?? { tail: [], head: [] };
  }

  get edgeIds(): number[] {
    return [...this.traces.keys()].sort((a, b) => a - b);
  }

  isStale(now: number): boolean {
    if (this.lastSnapshotAt === null) return true;
    return now - this.lastSnapshotAt > STALE_AFTER_MS;
  }

  onConnected(): void {
    this.connection = "connected";
  }

  onDisconnected(): void {
    // Simulation truth lives on the server: drop it all and rebuild from
    // the next snapshot after reconnecting.
    this.connection = "disconnected";
    this.latest = null;
    this.lastSnapshotAt = null;
    this.traces.clear();
  }
}
