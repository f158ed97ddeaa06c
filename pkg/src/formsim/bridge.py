"""Live telemetry streaming and operator command ingestion.

The sim loop is the sole owner of the world: network handlers only enqueue
validated command messages and read immutable snapshot dicts. Commands are
applied at tick boundaries (last writer wins within a tick), so no snapshot
ever reflects a half-applied command. Transport is WebSocket text frames,
one JSON object per frame.
"""

from __future__ import annotations

import asyncio
import json
import math
import time
from dataclasses import dataclass, field

from websockets.asyncio.server import broadcast, serve

from .core import MotionCommand
from .engine import Simulator, TickRecord
from .errors import FormationBrokenError
from .scenario import Scenario

SCHEMA_VERSION = 1


def snapshot_message(sim: Simulator, record: TickRecord) -> dict:
    """Wire snapshot for one completed tick."""
    world = sim.world
    shape = sim.effective_shape()
    graph = sim.config.shape.graph
    robots = [
        {
            "id": i,
            "x": float(record.positions[i, 0]),
            "y": float(record.positions[i, 1]),
            "heading": float(world.headings[i]),
        }
        for i in range(graph.n)
    ]
    edges = []
    for k, (i, j) in enumerate(graph.edges):
        entry = {
            "id": k,
            "i": i,
            "j": j,
            "d": float(shape.desired_distances[k]),
            "e_tail": float(record.e_tail[k]),
            "e_head": float(record.e_head[k]),
        }
        if not math.isnan(record.mu_hat[k]):
            entry["mu_hat"] = float(record.mu_hat[k])
        edges.append(entry)
    cmd = world.command
    return {
        "type": "snapshot",
        "t": float(record.t),
        "robots": robots,
        "edges": edges,
        "centroid": {"x": float(record.centroid[0]), "y": float(record.centroid[1])},
        "orient": float(record.orient),
        "active_command": {
            "vx": cmd.vx, "vy": cmd.vy, "omega": cmd.omega, "scale": cmd.scale,
        },
        "estimator_enabled": world.estimator_enabled,
    }


def parse_command(raw: str) -> dict:
    """Validate one client frame; raises ValueError with a client-facing detail."""
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc.msg}")
    if not isinstance(msg, dict) or "type" not in msg:
        raise ValueError("message must be an object with a 'type' field")
    kind = msg["type"]
    if kind == "motion":
        for key in ("vx", "vy", "omega", "scale"):
            value = msg.get(key, 0.0)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"motion.{key} must be a number")
            if not math.isfinite(value):
                raise ValueError(f"motion.{key} must be finite")
        return msg
    if kind == "estimator":
        if not isinstance(msg.get("enabled"), bool):
            raise ValueError("estimator.enabled must be true or false")
        return msg
    if kind == "reset":
        name = msg.get("scenario")
        if name is not None and not isinstance(name, str):
            raise ValueError("reset.scenario must be a string")
        return msg
    raise ValueError(f"unknown message type {kind!r}")


@dataclass
class BridgeServer:
    """Paces a Simulator in (scaled) real time and serves the wire protocol."""

    scenario: Scenario
    host: str = "127.0.0.1"
    port: int = 8765
    stream_rate: float = 20.0
    speed: float = 1.0
    command_log: str | None = None
    until_duration: bool = False

    sim: Simulator = field(init=False)
    records: list[TickRecord] = field(init=False, default_factory=list)
    applied_commands: list[dict] = field(init=False, default_factory=list)

    def __post_init__(self):
        self.sim = Simulator(self.scenario.config)
        self._queue: list[dict] = []
        self._connections = set()
        self._latest: str | None = None
        self._latest_snapshot: dict | None = None
        self._done = asyncio.Event()
        self._server = None

    # -- network side -----------------------------------------------------

    async def _handler(self, ws):
        hello = {
            "type": "hello",
            "schema_version": SCHEMA_VERSION,
            "scenario_digest": self.scenario.digest,
        }
        await ws.send(json.dumps(hello))
        self._connections.add(ws)
        try:
            async for raw in ws:
                try:
                    msg = parse_command(raw)
                except ValueError as exc:
                    await ws.send(json.dumps({"type": "error", "detail": str(exc)}))
                    continue
                self._queue.append(msg)
        finally:
            self._connections.discard(ws)

    async def _stream(self):
        interval = 1.0 / self.stream_rate
        while not self._done.is_set():
            if self._latest is not None:
                broadcast(self._connections, self._latest)
            try:
                await asyncio.wait_for(self._done.wait(), timeout=interval)
            except asyncio.TimeoutError:
                pass

    # -- sim side ---------------------------------------------------------

    def _apply_pending(self):
        """Drain queued messages; within a tick the last of each type wins."""
        if not self._queue:
            return
        pending, self._queue = self._queue, []
        motion = None
        estimator = None
        reset = None
        for msg in pending:
            if msg["type"] == "motion":
                motion = msg
            elif msg["type"] == "estimator":
                estimator = msg
            elif msg["type"] == "reset":
                reset = msg
        applied = []
        if reset is not None:
            name = reset.get("scenario")
            if name:
                from .scenario import load_bundled_scenario

                self.scenario = load_bundled_scenario(name)
            self.sim = Simulator(self.scenario.config)
            applied.append(reset)
        if estimator is not None:
            self.sim.set_estimator_enabled(estimator["enabled"])
            applied.append(estimator)
        if motion is not None:
            cmd = MotionCommand(
                vx=float(motion.get("vx", 0.0)),
                vy=float(motion.get("vy", 0.0)),
                omega=float(motion.get("omega", 0.0)),
                scale=float(motion.get("scale", 0.0)),
            ).clamped(max_speed=self.sim.config.actuator.max_speed)
            self.sim.set_command(cmd)
            applied.append(motion)
        for msg in applied:
            self.applied_commands.append(
                {"tick": self.sim.world.tick, "t": self.sim.world.t, "message": msg}
            )

    async def _sim_loop(self):
        dt_wall = self.sim.config.dt / self.speed
        n_ticks = self.sim.config.n_ticks
        start = time.monotonic()
        done_ticks = 0
        while not self._done.is_set():
            self._apply_pending()
            try:
                record = self.sim.step()
            except FormationBrokenError:
                break
            self.records.append(record)
            snap = snapshot_message(self.sim, record)
            self._latest_snapshot = snap
            self._latest = json.dumps(snap)
            done_ticks += 1
            if self.until_duration and done_ticks >= n_ticks:
                break
            target = start + done_ticks * dt_wall
            delay = target - time.monotonic()
            await asyncio.sleep(delay if delay > 0 else 0)
        if self._latest is not None:
            # final state must reach viewers before the server closes
            broadcast(self._connections, self._latest)
            await asyncio.sleep(0.3)
        self._done.set()

    # -- lifecycle ---------------------------------------------------------

    async def start(self):
        self._server = await serve(self._handler, self.host, self.port)
        self._stream_task = asyncio.create_task(self._stream())
        self._sim_task = asyncio.create_task(self._sim_loop())

    @property
    def bound_port(self) -> int:
        return self._server.sockets[0].getsockname()[1]

    async def wait_done(self):
        await self._done.wait()

    async def stop(self):
        self._done.set()
        for task in (self._sim_task, self._stream_task):
            task.cancel()
            try:
                await task
            except asyncio.CancelledError:
                pass
        self._server.close()
        await self._server.wait_closed()
        self._write_command_log()

    def _write_command_log(self):
        if not self.command_log:
            return
        with open(self.command_log, "w", encoding="utf-8") as fh:
            for entry in self.applied_commands:
                fh.write(json.dumps(entry) + "\n")
            if self._latest_snapshot is not None:
                fh.write(
                    json.dumps({"type": "final_snapshot", "snapshot": self._latest_snapshot})
                    + "\n"
                )


async def _serve_async(bridge_server: BridgeServer):
    await bridge_server.start()
    try:
        await bridge_server.wait_done()
    finally:
        await bridge_server.stop()


def serve_forever(
    scn: Scenario,
    host: str = "127.0.0.1",
    port: int = 8765,
    stream_rate: float = 20.0,
    speed: float = 1.0,
    command_log: str | None = None,
    until_duration: bool = False,
) -> None:
    server = BridgeServer(
        scenario=scn,
        host=host,
        port=port,
        stream_rate=stream_rate,
        speed=speed,
        command_log=command_log,
        until_duration=until_duration,
    )
    print(f"serving {scn.name} on ws://{host}:{port} "
          f"(dt={scn.config.dt}s, speed x{speed}, stream {stream_rate} Hz)")
    try:
        asyncio.run(_serve_async(server))
    except KeyboardInterrupt:
        pass


def replay_snapshot(record: TickRecord, graph_edges) -> dict:
    """Snapshot reconstructed from a stored log row (no live world state)."""
    n = record.positions.shape[0]
    robots = [
        {"id": i, "x": float(record.positions[i, 0]), "y": float(record.positions[i, 1]),
         "heading": 0.0}
        for i in range(n)
    ]
    edges = []
    for k, (i, j) in enumerate(graph_edges):
        entry = {
            "id": k, "i": i, "j": j,
            "d": 0.0,
            "e_tail": float(record.e_tail[k]),
            "e_head": float(record.e_head[k]),
        }
        if not math.isnan(record.mu_hat[k]):
            entry["mu_hat"] = float(record.mu_hat[k])
        edges.append(entry)
    return {
        "type": "snapshot",
        "t": float(record.t),
        "robots": robots,
        "edges": edges,
        "centroid": {"x": float(record.centroid[0]), "y": float(record.centroid[1])},
        "orient": float(record.orient),
        "active_command": {"vx": 0.0, "vy": 0.0, "omega": 0.0, "scale": 0.0},
        "estimator_enabled": False,
    }


def replay_forever(
    records: list[TickRecord],
    digest: str,
    host: str = "127.0.0.1",
    port: int = 8765,
    speed: float = 1.0,
) -> None:
    """Re-emit a stored log over the wire protocol at a configurable pace."""
    if not records:
        print("log is empty, nothing to replay")
        return
    # Edge endpoints are not stored in logs; replay uses edge ids only.
    m = records[0].e_tail.shape[0]
    edges = [(-1, -1)] * m

    async def _run():
        connections = set()

        async def handler(ws):
            await ws.send(json.dumps({
                "type": "hello", "schema_version": SCHEMA_VERSION, "scenario_digest": digest,
            }))
            connections.add(ws)
            try:
                async for _ in ws:
                    await ws.send(json.dumps(
                        {"type": "error", "detail": "replay does not accept commands"}
                    ))
            finally:
                connections.discard(ws)

        server = await serve(handler, host, port)
        start = time.monotonic()
        t0 = records[0].t
        try:
            for record in records:
                target = start + (record.t - t0) / speed
                delay = target - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                broadcast(connections, json.dumps(replay_snapshot(record, edges)))
            await asyncio.sleep(0.25)
        finally:
            server.close()
            await server.wait_closed()

    print(f"replaying {len(records)} ticks on ws://{host}:{port} (speed x{speed})")
    try:
        asyncio.run(_run())
    except KeyboardInterrupt:
        pass
