// Operator intent -> command messages, with the rate/dedup discipline the
// bridge expects: at most one send per stream interval, identical
// consecutive commands suppressed, writes while disconnected dropped (but
// counted, so the UI can show it).

import { CommandMessage, MotionPayload, sameCommand } from "./protocol.js";

export interface WidgetState {
  joyX: number; // -1 .. 1, +x = right
  joyY: number; // -1 .. 1, +y = up (already flipped from screen coords)
  omega: number; // rad/s from the rotation dial
  scale: number; // 1/s from the scale slider
}

export function widgetToMotion(state: WidgetState, maxSpeed: number): CommandMessage {
  // Joystick displacement maps linearly to velocity up to the configured max.
  const payload: MotionPayload = {
    vx: state.joyX * maxSpeed,
    vy: state.joyY * maxSpeed,
    omega: state.omega,
    scale: state.scale,
  };
  return { type: "motion", ...payload };
}

export class CommandSender {
  connected = false;
  droppedWhileDisconnected = 0;
  readonly sentLog: CommandMessage[] = [];

  private lastSent: CommandMessage | null = null;
  private lastSendAt = -Infinity;
  private pending: CommandMessage | null = null;

  constructor(
    private readonly transmit: (msg: CommandMessage) => void,
    private readonly maxRateHz = 20,
  ) {}

  get minIntervalMs(): number {
    return 1000 / this.maxRateHz;
  }

  /** Queue a command; it goes out now if the rate budget allows, else on the
   * next flush. Returns true if it was transmitted immediately. */
  offer(msg: CommandMessage, now: number): boolean {
    if (!this.connected) {
      this.droppedWhileDisconnected += 1;
      return false;
    }
    if (this.lastSent !== null && sameCommand(msg, this.lastSent) && this.pending === null) {
      return false;
    }
    if (now - this.lastSendAt >= this.minIntervalMs) {
      this.send(msg, now);
      this.pending = null;
      return true;
    }
    this.pending = msg;
    return false;
  }

  /** Called periodically (at most at the stream rate) to drain a held command. */
  flush(now: number): void {
    if (this.pending === null || !this.connected) return;
    if (now - this.lastSendAt < this.minIntervalMs) return;
    if (this.lastSent !== null && sameCommand(this.pending, this.lastSent)) {
      this.pending = null;
      return;
    }
    this.send(this.pending, now);
    this.pending = null;
  }

  onConnected(): void {
    this.connected = true;
    // A fresh session starts from a clean slate on the server side.
    this.lastSent = null;
    this.pending = null;
  }

  onDisconnected(): void {
    this.connected = false;
    this.pending = null;
  }

  private send(msg: CommandMessage, now: number): void {
    this.transmit(msg);
    this.sentLog.push(msg);
    this.lastSent = msg;
    this.lastSendAt = now;
  }
}
