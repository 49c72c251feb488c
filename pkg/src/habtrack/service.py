"""Composition root: sources in, tracker in the middle, clients out.

Concurrent source readers (audio, KISS TCP, NMEA, scenario playback)
feed one serialized ingestion queue; the tracker is only ever touched by
the queue worker, so the event stream has a total order. Fan-out to
HTTP/WebSocket clients is one-way broadcast with per-client queues.

Everything here works without internet access; the optional map tiles
and UI bundle are served from local directories.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import sys
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, Response
from fastapi.staticfiles import StaticFiles

from .audio import AudioBlock, read_wav
from .ax25 import Ax25Frame, FrameEvent, LinebitsDecoder
from .errors import ConfigError, ValidationError
from .kiss import KissDecoder, kiss_encode
from .modem import Demodulator, ModemConfig
from .nmea import FixQuality, OwnFix, apply_sentence, parse_sentence
from .sim import Scenario
from .tracker import EventFold, EventLog, Tracker, TrackerEvent, read_log

_SHUTDOWN = object()


@dataclass
class ServiceConfig:
    """Service wiring; at least one packet source must be configured."""

    wav_path: str | None = None
    raw_pcm_path: str | None = None
    raw_pcm_rate: int = 48000
    kiss_listen_port: int | None = None
    kiss_connect: str | None = None  # host:port
    nmea_path: str | None = None
    http_port: int = 8080
    http_host: str = "127.0.0.1"
    log_path: str | None = None
    tail_window_s: float = 7200.0
    loss_threshold_s: float = 120.0
    pattern_path: str | None = None
    target: str | None = None
    ui_dir: str | None = None
    tiles_dir: str | None = None
    realtime: bool = True

    def validate(self) -> None:
        sources = (
            self.wav_path,
            self.raw_pcm_path,
            self.kiss_listen_port,
            self.kiss_connect,
        )
        if not any(s is not None for s in sources):
            raise ConfigError(
                "no packet source: configure a WAV/PCM file or a KISS endpoint"
            )
        if not 0 < self.http_port < 65536:
            raise ConfigError(f"bad http port {self.http_port}")
        if self.kiss_listen_port is not None and not 0 < self.kiss_listen_port < 65536:
            raise ConfigError(f"bad kiss port {self.kiss_listen_port}")


class ServiceCore:
    """Single-writer tracker behind an asyncio ingestion queue."""

    def __init__(self, tracker: Tracker, log_path=None, clock=time.time):
        self.tracker = tracker
        self.clock = clock
        self.log = EventLog(log_path) if log_path else None
        self.subscribers: list[asyncio.Queue] = []
        self.queue: asyncio.Queue = asyncio.Queue()
        self.frames_rejected = 0
        self._worker_task: asyncio.Task | None = None

    # lifecycle ---------------------------------------------------------

    @property
    def started(self) -> bool:
        return self._worker_task is not None

    async def start(self) -> None:
        if self.started:
            return
        self._publish([self.tracker.config_event(self.clock())])
        self._worker_task = asyncio.create_task(self._worker())

    async def stop(self) -> None:
        if self._worker_task:
            await self.queue.put(_SHUTDOWN)
            await asyncio.wait_for(self._worker_task, timeout=2.0)
            self._worker_task = None
        if self.log:
            self.log.close()
            self.log = None

    async def drain(self) -> None:
        await self.queue.join()

    # fan-out -----------------------------------------------------------

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue()
        self.subscribers.append(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        with contextlib.suppress(ValueError):
            self.subscribers.remove(q)

    def _publish(self, events: list[TrackerEvent]) -> None:
        for event in events:
            if self.log:
                self.log.append(event)
            for q in self.subscribers:
                q.put_nowait(event)

    # ingestion ---------------------------------------------------------

    async def put(self, item) -> None:
        await self.queue.put(item)

    async def submit(self, kind: str, *args) -> list[TrackerEvent]:
        """Run a control command through the queue and await its events."""
        future: asyncio.Future = asyncio.get_running_loop().create_future()
        await self.queue.put(("command", kind, args, future))
        return await future

    async def _worker(self) -> None:
        own_state = OwnFix()
        while True:
            item = await self.queue.get()
            try:
                if item is _SHUTDOWN:
                    return
                kind = item[0]
                if kind == "frame":
                    self._publish(self.tracker.ingest_frame(item[1]))
                elif kind == "ownfix":
                    self._publish(self.tracker.ingest_own_fix(item[1], at=item[2]))
                elif kind == "nmea":
                    own_state = self._handle_nmea(own_state, item[1], item[2])
                elif kind == "tick":
                    self._publish(self.tracker.watchdog(item[1]))
                elif kind == "command":
                    _, name, args, future = item
                    try:
                        if name == "set_target":
                            events = self.tracker.set_target(args[0], self.clock())
                        elif name == "set_tail_window":
                            events = self.tracker.set_tail_window(args[0], self.clock())
                        else:
                            raise ValidationError(f"unknown command {name}")
                        self._publish(events)
                        future.set_result(events)
                    except Exception as exc:  # surfaced to the HTTP handler
                        future.set_exception(exc)
            finally:
                self.queue.task_done()

    def _handle_nmea(self, own_state: OwnFix, line: str, at: float) -> OwnFix:
        try:
            sentence = parse_sentence(line)
        except ValueError:
            return own_state
        own_state = apply_sentence(own_state, sentence, at=at)
        # GGA closes a fix epoch; RMC in between only enriches course/speed.
        if sentence.type == "GGA" and own_state.fix_quality is not FixQuality.NONE:
            self._publish(self.tracker.ingest_own_fix(own_state, at=at))
        return own_state


# --- sources ------------------------------------------------------------


async def feed_audio(
    core: ServiceCore,
    audio: AudioBlock,
    cfg: ModemConfig | None = None,
    base_time: float = 0.0,
    speed: float = 0.0,
    block_s: float = 0.5,
) -> int:
    """Demodulate an audio block into the core; returns frames decoded.

    ``speed`` > 0 paces ingestion at that multiple of real time;
    0 runs flat out. Frame timestamps come from the audio timeline.
    """
    cfg = cfg or ModemConfig(sample_rate=audio.sample_rate)
    demod = Demodulator(cfg)
    decoder = LinebitsDecoder()
    block = max(1, int(block_s * audio.sample_rate))
    count = 0
    for start in range(0, len(audio), block):
        chunk = AudioBlock(audio.samples[start : start + block], audio.sample_rate)
        at = base_time + (start + len(chunk)) / audio.sample_rate
        bits = demod.process(chunk)
        for event in decoder.push(bits, at=at):
            await core.put(("frame", event))
            count += 1
        await core.put(("tick", at))
        if speed > 0:
            await asyncio.sleep(len(chunk) / audio.sample_rate / speed)
    final_at = base_time + audio.duration_s
    for event in decoder.push(demod.flush(), at=final_at):
        await core.put(("frame", event))
        count += 1
    await core.put(("tick", final_at))
    return count


async def wav_source(core: ServiceCore, path, speed: float = 0.0) -> int:
    return await feed_audio(core, read_wav(path), speed=speed)


async def kiss_stream_reader(core: ServiceCore, reader: asyncio.StreamReader) -> None:
    """Consume one KISS byte stream until EOF."""
    decoder = KissDecoder()
    while True:
        data = await reader.read(4096)
        if not data:
            return
        for _port, payload in decoder.push(data):
            try:
                frame = Ax25Frame.from_bytes(payload)
            except ValidationError:
                core.frames_rejected += 1
                continue
            await core.put(
                ("frame", FrameEvent(frame=frame, received_at=core.clock(), raw=payload))
            )


async def kiss_server(core: ServiceCore, port: int, host: str = "0.0.0.0"):
    """Accept KISS TCP clients and ingest their frames."""

    async def handle(reader, writer):
        try:
            await kiss_stream_reader(core, reader)
        finally:
            writer.close()
            with contextlib.suppress(Exception):
                await writer.wait_closed()

    return await asyncio.start_server(handle, host, port)


async def kiss_client(core: ServiceCore, host: str, port: int) -> None:
    """Connect out to a KISS TNC and ingest until the peer closes."""
    reader, writer = await asyncio.open_connection(host, port)
    try:
        await kiss_stream_reader(core, reader)
    finally:
        writer.close()
        with contextlib.suppress(Exception):
            await writer.wait_closed()


def _open_nmea(spec: str):
    """Open an NMEA source: '-' for stdin, 'path' or 'path:baud' for a
    file or serial-like device (baud applied via termios when possible)."""
    if spec == "-":
        return sys.stdin
    path, _, baud_text = spec.rpartition(":")
    if path and baud_text.isdigit():
        fh = open(path, encoding="ascii", errors="replace")
        try:
            import termios

            baud = getattr(termios, f"B{baud_text}")
            attrs = termios.tcgetattr(fh.fileno())
            attrs[4] = attrs[5] = baud
            termios.tcsetattr(fh.fileno(), termios.TCSANOW, attrs)
        except Exception:
            pass  # regular file, or rate already set on the device
        return fh
    return open(spec, encoding="ascii", errors="replace")


async def nmea_file_source(
    core: ServiceCore, spec: str, base_time: float = 0.0, speed: float = 0.0
) -> int:
    """Feed NMEA lines from a file, serial device, or stdin ('-');
    each GGA opens a new 1 Hz epoch."""
    epoch = 0
    count = 0
    fh = _open_nmea(str(spec))
    try:
        loop = asyncio.get_running_loop()
        while True:
            line = await loop.run_in_executor(None, fh.readline)
            if not line:
                break
            line = line.strip()
            if not line:
                continue
            if line.startswith("$") and "GGA" in line[:7]:
                epoch += 1
                if speed > 0:
                    await asyncio.sleep(1.0 / speed)
            at = base_time + epoch
            await core.put(("nmea", line, at))
            count += 1
    finally:
        if fh is not sys.stdin:
            fh.close()
    return count


def scenario_items(scenario: Scenario) -> list[tuple]:
    """Merged, time-ordered ingestion items for a simulated flight.

    Ticks run after same-second traffic so the watchdog always sees the
    freshest packet ages.
    """
    items: list[tuple[float, int, tuple]] = []
    delivered, _ = scenario.delivered()
    for d in delivered:
        frame_event = FrameEvent(
            frame=d.beacon.frame, received_at=d.beacon.time, raw=d.beacon.frame.to_bytes()
        )
        items.append((d.beacon.time, 0, ("frame", frame_event)))
    if scenario.own_path is not None:
        for t, line in scenario.own_path.nmea_lines(scenario.start_time):
            items.append((t, 1, ("nmea", line, t)))
    trajectory = scenario.trajectory()
    t = scenario.start_time
    end = trajectory[-1].time
    while t <= end:
        items.append((t, 2, ("tick", t)))
        t += 1.0
    items.sort(key=lambda entry: (entry[0], entry[1]))
    return [entry[2] for entry in items]


async def scenario_source(core: ServiceCore, scenario: Scenario, speed: float = 0.0):
    """Push a scenario's traffic through the core at the given speed."""
    last_t = None
    for item in scenario_items(scenario):
        t = item[1].received_at if item[0] == "frame" else item[-1]
        if speed > 0 and last_t is not None and t > last_t:
            await asyncio.sleep((t - last_t) / speed)
        last_t = t
        await core.put(item)
    await core.drain()


async def kiss_playback(
    delivered, port: int, host: str = "127.0.0.1", speed: float = 0.0
):
    """Serve a delivered-beacon timeline as a KISS TCP server (one shot).

    Waits for one client, then writes each frame at its (scaled)
    timestamp and closes.
    """
    done = asyncio.Event()

    async def handle(reader, writer):
        last_t = None
        try:
            for d in delivered:
                if speed > 0 and last_t is not None:
                    await asyncio.sleep((d.beacon.time - last_t) / speed)
                last_t = d.beacon.time
                writer.write(kiss_encode(d.beacon.frame.to_bytes()))
                await writer.drain()
        finally:
            writer.close()
            with contextlib.suppress(Exception):
                await writer.wait_closed()
            done.set()

    server = await asyncio.start_server(handle, host, port)
    await done.wait()
    server.close()
    await server.wait_closed()


# --- HTTP/WebSocket layer ------------------------------------------------


def build_app(core: ServiceCore, ui_dir=None, tiles_dir=None):
    """FastAPI app exposing state, events, tails, and controls.

    The app's lifespan starts the core worker inside the server's event
    loop unless the caller already did.
    """

    @asynccontextmanager
    async def lifespan(_app):
        started_here = not core.started
        if started_here:
            await core.start()
        yield
        if started_here:
            await core.stop()

    app = FastAPI(title="habtrack", docs_url=None, redoc_url=None, lifespan=lifespan)

    @app.get("/state")
    async def state():
        return Response(
            content=core.tracker.snapshot_json(), media_type="application/json"
        )

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        queue = core.subscribe()
        try:
            while True:
                event = await queue.get()
                await ws.send_text(event.to_json())
        except WebSocketDisconnect:
            pass
        finally:
            core.unsubscribe(queue)

    @app.get("/stations/{callsign}/tail")
    async def tail(callsign: str, window: float | None = None, now: float | None = None):
        at = now if now is not None else core.clock()
        fixes = core.tracker.track_tail(callsign, at, window_s=window)
        return {
            "callsign": callsign,
            "fixes": [
                {"alt_m": f.alt_m, "lat": f.lat, "lon": f.lon, "time": f.time}
                for f in fixes
            ],
        }

    @app.post("/target")
    async def set_target(body: dict):
        callsign = body.get("callsign")
        if callsign is not None and not isinstance(callsign, str):
            raise HTTPException(422, "callsign must be a string or null")
        events = await core.submit("set_target", callsign)
        return {"target": core.tracker.target, "seq": events[-1].seq}

    @app.post("/config/tail_window")
    async def set_tail_window(body: dict):
        seconds = body.get("seconds")
        if not isinstance(seconds, (int, float)) or seconds <= 0:
            raise HTTPException(422, "seconds must be a positive number")
        events = await core.submit("set_tail_window", float(seconds))
        return {"tail_window_s": core.tracker.tail_window_s, "seq": events[-1].seq}

    if tiles_dir:
        app.mount("/tiles", StaticFiles(directory=tiles_dir), name="tiles")

        @app.get("/tiles-available")
        async def tiles_available():
            return {"tiles": True}

    else:

        @app.get("/tiles-available")
        async def tiles_available():
            return {"tiles": False}

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/")
        async def index():
            return HTMLResponse(
                "<html><body><h1>habtrack</h1>"
                "<p>No UI bundle configured. The API lives at /state, "
                "/events (WebSocket), /stations/{call}/tail.</p></body></html>"
            )

    return app


# --- replay of recorded logs ---------------------------------------------


class ReplayCore:
    """Serves a recorded NDJSON log: folded /state plus re-broadcast events."""

    def __init__(self, records: list[dict]):
        self.records = records
        self.fold = EventFold()
        self.subscribers: list[asyncio.Queue] = []

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue()
        self.subscribers.append(q)
        return q

    def unsubscribe(self, q: asyncio.Queue) -> None:
        with contextlib.suppress(ValueError):
            self.subscribers.remove(q)

    def snapshot_json(self) -> str:
        return self.fold.snapshot_json()

    async def run(self, speed: float = 0.0) -> None:
        last_t = None
        for record in self.records:
            t = record.get("time")
            if speed > 0 and last_t is not None and t is not None and t > last_t:
                await asyncio.sleep((t - last_t) / speed)
            if t is not None:
                last_t = t
            self.fold.apply(record)
            line = json.dumps(record, sort_keys=True, separators=(",", ":"))
            for q in self.subscribers:
                q.put_nowait(line)


def load_replay(path) -> ReplayCore:
    return ReplayCore(read_log(path))


def build_replay_app(core: ReplayCore, ui_dir=None, tiles_dir=None):
    """Read-only app over a recorded log: /state, /events, tails."""
    app = FastAPI(title="habtrack replay", docs_url=None, redoc_url=None)

    @app.get("/state")
    async def state():
        return Response(content=core.snapshot_json(), media_type="application/json")

    @app.websocket("/events")
    async def events(ws: WebSocket):
        await ws.accept()
        queue = core.subscribe()
        try:
            while True:
                await ws.send_text(await queue.get())
        except WebSocketDisconnect:
            pass
        finally:
            core.unsubscribe(queue)

    @app.get("/stations/{callsign}/tail")
    async def tail(callsign: str, window: float | None = None, now: float | None = None):
        entry = core.fold.stations.get(callsign)
        fixes = list(entry["fixes"]) if entry else []
        if fixes and window is not None:
            at = now if now is not None else max(f["time"] for f in fixes)
            fixes = [f for f in fixes if f["time"] >= at - window]
        return {"callsign": callsign, "fixes": fixes}

    @app.post("/target")
    async def set_target():
        raise HTTPException(409, "replay is read-only")

    @app.post("/config/tail_window")
    async def set_tail_window():
        raise HTTPException(409, "replay is read-only")

    if tiles_dir:
        app.mount("/tiles", StaticFiles(directory=tiles_dir), name="tiles")

    @app.get("/tiles-available")
    async def tiles_available():
        return {"tiles": bool(tiles_dir)}

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/")
        async def index():
            return HTMLResponse("<html><body><h1>habtrack replay</h1></body></html>")

    return app


# --- top-level serve ------------------------------------------------------


async def serve_async(cfg: ServiceConfig) -> None:
    """Run the full service until interrupted; flushes the log on exit."""
    import uvicorn

    cfg.validate()
    tracker = Tracker(
        tail_window_s=cfg.tail_window_s,
        loss_threshold_s=cfg.loss_threshold_s,
        target=cfg.target,
    )
    core = ServiceCore(tracker, log_path=cfg.log_path)
    await core.start()

    tasks: list[asyncio.Task] = []
    servers = []
    if cfg.kiss_listen_port is not None:
        servers.append(await kiss_server(core, cfg.kiss_listen_port))
    if cfg.kiss_connect:
        host, _, port = cfg.kiss_connect.partition(":")
        tasks.append(asyncio.create_task(kiss_client(core, host, int(port or 8001))))
    if cfg.wav_path:
        speed = 1.0 if cfg.realtime else 0.0
        tasks.append(asyncio.create_task(wav_source(core, cfg.wav_path, speed=speed)))
    if cfg.raw_pcm_path:
        from .audio import pcm16_to_block

        raw = Path(cfg.raw_pcm_path).read_bytes()
        block = pcm16_to_block(raw, cfg.raw_pcm_rate)
        speed = 1.0 if cfg.realtime else 0.0
        tasks.append(asyncio.create_task(feed_audio(core, block, speed=speed)))
    if cfg.nmea_path:
        speed = 1.0 if cfg.realtime else 0.0
        tasks.append(
            asyncio.create_task(nmea_file_source(core, cfg.nmea_path, speed=speed))
        )

    async def ticker():
        while True:
            await core.put(("tick", core.clock()))
            await asyncio.sleep(1.0)

    if cfg.realtime:
        tasks.append(asyncio.create_task(ticker()))

    app = build_app(core, ui_dir=cfg.ui_dir, tiles_dir=cfg.tiles_dir)
    server = uvicorn.Server(
        uvicorn.Config(
            app, host=cfg.http_host, port=cfg.http_port, log_level="warning"
        )
    )
    try:
        await server.serve()
    finally:
        for task in tasks:
            task.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)
        for srv in servers:
            srv.close()
            await srv.wait_closed()
        await core.drain()
        await core.stop()


def serve(cfg: ServiceConfig) -> None:
    asyncio.run(serve_async(cfg))
