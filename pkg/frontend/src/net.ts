// Thin WebSocket wrapper with automatic reconnect.

export interface SocketEvents {
  onOpen: () => void;
  onClose: () => void;
  onFrame: (raw: string) => void;
}

export class SocketClient {
  private ws: WebSocket | null = null;
  private closed = false;

  constructor(
    readonly url: string,
    private readonly events: SocketEvents,
    private readonly reconnectDelayMs = 1000,
  ) {}

  connect(): void {
    if (this.closed) return;
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => this.events.onOpen();
    ws.onmessage = (event: MessageEvent) => this.events.onFrame(String(event.data));
    ws.onclose = () => {
      this.events.onClose();
      if (!this.closed) {
        setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
    ws.onerror = () => ws.close();
  }

  send(payload: string): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(payload);
      return true;
    }
    return false;
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
