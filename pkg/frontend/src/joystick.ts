// Virtual joystick: pointer-driven pad emitting a normalized vector in the
// unit disc. Releasing snaps back to (0, 0) and reports it exactly once.

export class VirtualJoystick {
  private pointerId: number | null = null;
  private centerX = 0;
  private centerY = 0;
  private radius = 60;

  axisX = 0; // -1 .. 1, +x right
  axisY = 0; // -1 .. 1, +y up

  constructor(
    base: HTMLElement,
    private readonly knob: HTMLElement,
    private readonly onChange: (x: number, y: number) => void,
  ) {
    base.addEventListener("pointerdown", (e) => {
      if (this.pointerId !== null) return;
      this.pointerId = e.pointerId;
      base.setPointerCapture(e.pointerId);
      const rect = base.getBoundingClientRect();
      this.centerX = rect.left + rect.width / 2;
      this.centerY = rect.top + rect.height / 2;
      this.radius = rect.width / 2;
      this.track(e.clientX, e.clientY);
    });
    base.addEventListener("pointermove", (e) => {
      if (e.pointerId !== this.pointerId) return;
      this.track(e.clientX, e.clientY);
    });
    const release = (e: PointerEvent) => {
      if (e.pointerId !== this.pointerId) return;
      this.pointerId = null;
      this.set(0, 0);
    };
    base.addEventListener("pointerup", release);
    base.addEventListener("pointercancel", release);
  }

  private track(clientX: number, clientY: number): void {
    let dx = (clientX - this.centerX) / this.radius;
    let dy = (clientY - this.centerY) / this.radius;
    const r = Math.hypot(dx, dy);
    if (r > 1) {
      dx /= r;
      dy /= r;
    }
    // screen y grows downward; world/shape-frame y grows upward
    this.set(dx, -dy);
  }

  private set(x: number, y: number): void {
    this.axisX = x;
    this.axisY = y;
    this.knob.style.transform =
      `translate(${x * this.radius * 0.6}px, ${-y * this.radius * 0.6}px)`;
    this.onChange(x, y);
  }
}
