// Immediate-mode 2D rendering of the formation plus per-edge error traces.

import { ViewModel } from "./model.js";
import { Snapshot } from "./protocol.js";

export interface Viewport {
  pixelsPerMeter: number;
  centerX: number; // world coords at the canvas center
  centerY: number;
}

export function worldToScreen(
  view: Viewport,
  width: number,
  height: number,
  x: number,
  y: number,
): [number, number] {
  return [
    width / 2 + (x - view.centerX) * view.pixelsPerMeter,
    height / 2 - (y - view.centerY) * view.pixelsPerMeter,
  ];
}

/** Edge color from its worst-side |error|: green when converged, red at 2 cm+. */
export function edgeColor(eTail: number, eHead: number): string {
  const worst = Math.max(Math.abs(eTail), Math.abs(eHead));
  const frac = Math.min(worst / 0.02, 1.0);
  const hue = 120 * (1 - frac);
  return `hsl(${hue.toFixed(0)}, 85%, 45%)`;
}

export class SceneRenderer {
  view: Viewport = { pixelsPerMeter: 120, centerX: 0.5, centerY: 0.5 };

  constructor(private readonly canvas: HTMLCanvasElement) {}

  draw(vm: ViewModel, now: number): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, width, height);

    if (vm.schemaMismatch) {
      this.banner(ctx, width, `schema mismatch: ${vm.schemaMismatch}`, "#c0392b");
      return;
    }
    const snap = vm.latest;
    if (!snap) {
      this.banner(ctx, width, `waiting for telemetry (${vm.connection})`, "#7f8c8d");
      return;
    }

    this.followCentroid(snap);
    this.grid(ctx, width, height);
    this.edges(ctx, width, height, snap);
    this.robots(ctx, width, height, snap);
    this.centroidAxes(ctx, width, height, snap);
    this.statusLine(ctx, snap, vm, height);
    this.sparklines(ctx, width, vm, snap);

    if (vm.isStale(now)) {
      this.banner(ctx, width, "telemetry stale", "#c0392b");
    }
  }

  private followCentroid(snap: Snapshot): void {
    // Gentle follow keeps the formation on screen during long drives.
    this.view.centerX += 0.05 * (snap.centroid.x - this.view.centerX);
    this.view.centerY += 0.05 * (snap.centroid.y - this.view.centerY);
  }

  private banner(ctx: CanvasRenderingContext2D, width: number, text: string,
                 color: string): void {
    ctx.fillStyle = color;
    ctx.fillRect(0, 0, width, 28);
    ctx.fillStyle = "#fff";
    ctx.font = "14px system-ui, sans-serif";
    ctx.fillText(text, 10, 19);
  }

  private grid(ctx: CanvasRenderingContext2D, width: number, height: number): void {
    const step = this.view.pixelsPerMeter;
    ctx.strokeStyle = "rgba(255,255,255,0.07)";
    ctx.lineWidth = 1;
    const [ox, oy] = worldToScreen(this.view, width, height,
                                   Math.floor(this.view.centerX), Math.ceil(this.view.centerY));
    for (let x = ox % step; x < width; x += step) {
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, height);
      ctx.stroke();
    }
    for (let y = oy % step; y < height; y += step) {
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(width, y);
      ctx.stroke();
    }
  }

  private edges(ctx: CanvasRenderingContext2D, width: number, height: number,
                snap: Snapshot): void {
    for (const edge of snap.edges) {
      const a = snap.robots[edge.i];
      const b = snap.robots[edge.j];
      const [ax, ay] = worldToScreen(this.view, width, height, a.x, a.y);
      const [bx, by] = worldToScreen(this.view, width, height, b.x, b.y);
      ctx.strokeStyle = edgeColor(edge.e_tail, edge.e_head);
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(ax, ay);
      ctx.lineTo(bx, by);
      ctx.stroke();
      if (edge.mu_hat !== undefined) {
        ctx.fillStyle = "#9b59b6";
        ctx.font = "11px system-ui, sans-serif";
        ctx.fillText(`${(edge.mu_hat * 1000).toFixed(1)}mm`,
                     (ax + bx) / 2 + 6, (ay + by) / 2 - 6);
      }
    }
  }

  private robots(ctx: CanvasRenderingContext2D, width: number, height: number,
                 snap: Snapshot): void {
    for (const robot of snap.robots) {
      const [x, y] = worldToScreen(this.view, width, height, robot.x, robot.y);
      ctx.fillStyle = "#3498db";
      ctx.beginPath();
      ctx.arc(x, y, 9, 0, 2 * Math.PI);
      ctx.fill();
      // mount heading tick
      ctx.strokeStyle = "#ecf0f1";
      ctx.beginPath();
      ctx.moveTo(x, y);
      ctx.lineTo(x + 14 * Math.cos(robot.heading), y - 14 * Math.sin(robot.heading));
      ctx.stroke();
      ctx.fillStyle = "#ecf0f1";
      ctx.font = "11px system-ui, sans-serif";
      ctx.fillText(String(robot.id), x - 3, y + 4);
    }
  }

  private centroidAxes(ctx: CanvasRenderingContext2D, width: number, height: number,
                       snap: Snapshot): void {
    const [cx, cy] = worldToScreen(this.view, width, height,
                                   snap.centroid.x, snap.centroid.y);
    const len = 0.35 * this.view.pixelsPerMeter;
    // shape-fixed frame: x axis along the formation orientation
    const drawAxis = (angle: number, color: string) => {
      ctx.strokeStyle = color;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(cx, cy);
      ctx.lineTo(cx + len * Math.cos(angle), cy - len * Math.sin(angle));
      ctx.stroke();
    };
    drawAxis(snap.orient, "#e67e22");
    drawAxis(snap.orient + Math.PI / 2, "#f1c40f");
    ctx.fillStyle = "#e74c3c";
    ctx.fillRect(cx - 3, cy - 3, 6, 6);
  }

  private statusLine(ctx: CanvasRenderingContext2D, snap: Snapshot, vm: ViewModel,
                     height: number): void {
    const cmd = snap.active_command;
    ctx.fillStyle = "#bdc3c7";
    ctx.font = "12px ui-monospace, monospace";
    ctx.fillText(
      `t=${snap.t.toFixed(1)}s  cmd v=(${cmd.vx.toFixed(2)},${cmd.vy.toFixed(2)})` +
      ` w=${cmd.omega.toFixed(2)} s=${cmd.scale.toFixed(3)}` +
      `  estimator ${snap.estimator_enabled ? "ON" : "off"}  [${vm.connection}]`,
      10, height - 10,
    );
  }

  private sparklines(ctx: CanvasRenderingContext2D, width: number, vm: ViewModel,
                     snap: Snapshot): void {
    // Right-hand strip: per-edge tail/head error traces, +-10 mm scale.
    const stripWidth = 150;
    const stripHeight = 44;
    const x0 = width - stripWidth - 10;
    snap.edges.forEach((edge, idx) => {
      const y0 = 10 + idx * (stripHeight + 8);
      ctx.fillStyle = "rgba(255,255,255,0.06)";
      ctx.fillRect(x0, y0, stripWidth, stripHeight);
      const trace = vm.trace(edge.id);
      this.polyline(ctx, trace.tail, x0, y0, stripWidth, stripHeight, "#2ecc71");
      this.polyline(ctx, trace.head, x0, y0, stripWidth, stripHeight, "#e74c3c");
      ctx.fillStyle = "#95a5a6";
      ctx.font = "10px system-ui, sans-serif";
      ctx.fillText(`e${edge.id} (${edge.i}-${edge.j})`, x0 + 4, y0 + 11);
    });
  }

  private polyline(ctx: CanvasRenderingContext2D, values: number[], x0: number,
                   y0: number, w: number, h: number, color: string): void {
    if (values.length < 2) return;
    const scale = 0.010; // full half-height at 10 mm
    ctx.strokeStyle = color;
    ctx.lineWidth = 1;
    ctx.beginPath();
    const start = Math.max(0, values.length - w);
    for (let i = start; i < values.length; i++) {
      const x = x0 + (i - start) * (w / Math.min(values.length, w));
      const y = y0 + h / 2 - Math.max(-1, Math.min(1, values[i] / scale)) * (h / 2 - 2);
      if (i === start) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
}
