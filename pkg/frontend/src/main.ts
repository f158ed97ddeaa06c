import { CommandSender, WidgetState, widgetToMotion } from "./commands.js";
import { VirtualJoystick } from "./joystick.js";
import { ViewModel } from "./model.js";
import { SocketClient } from "./net.js";
import { SceneRenderer } from "./render.js";

const params = new URLSearchParams(window.location.search);
const serverUrl = params.get("server") ?? "ws://127.0.0.1:8765";
const maxSpeed = Number(params.get("maxSpeed") ?? "0.5");
const streamRate = Number(params.get("streamRate") ?? "20");

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const vm = new ViewModel();
const renderer = new SceneRenderer(canvas);

const client = new SocketClient(serverUrl, {
  onOpen: () => {
    vm.onConnected();
    sender.onConnected();
  },
  onClose: () => {
    vm.onDisconnected();
    sender.onDisconnected();
  },
  onFrame: (raw) => {
    try {
      vm.ingestRaw(raw, performance.now());
    } catch (err) {
      console.warn(err);
    }
  },
});

const sender = new CommandSender((msg) => client.send(JSON.stringify(msg)), streamRate);

const widget: WidgetState = { joyX: 0, joyY: 0, omega: 0, scale: 0 };

function pushMotion(): void {
  sender.offer(widgetToMotion(widget, maxSpeed), performance.now());
}

new VirtualJoystick(
  document.getElementById("joy-base")!,
  document.getElementById("joy-knob")!,
  (x, y) => {
    widget.joyX = x;
    widget.joyY = y;
    pushMotion();
  },
);

const omegaDial = document.getElementById("omega") as HTMLInputElement;
const scaleSlider = document.getElementById("scale") as HTMLInputElement;
const estimatorToggle = document.getElementById("estimator") as HTMLInputElement;
const resetButton = document.getElementById("reset") as HTMLButtonElement;
const dropIndicator = document.getElementById("dropped")!;

omegaDial.addEventListener("input", () => {
  widget.omega = Number(omegaDial.value);
  pushMotion();
});
omegaDial.addEventListener("dblclick", () => {
  omegaDial.value = "0";
  widget.omega = 0;
  pushMotion();
});
scaleSlider.addEventListener("input", () => {
  widget.scale = Number(scaleSlider.value);
  pushMotion();
});
scaleSlider.addEventListener("dblclick", () => {
  scaleSlider.value = "0";
  widget.scale = 0;
  pushMotion();
});
estimatorToggle.addEventListener("change", () => {
  sender.offer(
    { type: "estimator", enabled: estimatorToggle.checked },
    performance.now(),
  );
});
resetButton.addEventListener("click", () => {
  sender.offer({ type: "reset" }, performance.now());
});

setInterval(() => sender.flush(performance.now()), 1000 / streamRate);

function frame(): void {
  renderer.draw(vm, performance.now());
  dropIndicator.textContent =
    sender.droppedWhileDisconnected > 0
      ? `${sender.droppedWhileDisconnected} commands dropped while disconnected`
      : "";
  requestAnimationFrame(frame);
}

client.connect();
requestAnimationFrame(frame);
