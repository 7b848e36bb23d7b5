"""Interactive steering service: sessions over a WebSocket JSON protocol.

Each session owns one simulation thread.  Commands arrive as JSON objects
with a ``type`` field, are queued, and are applied only between cycles, so
parameter changes land exactly at cycle boundaries and a scripted session
reproduces a batch run bit for bit.  Subscribers receive (cycle, frame,
exchange rate, turnover rate) every stride cycles, plus contour sets at the
configured contour stride; frames travel as base64 PGM payloads.

The message schema is versioned (see docs/protocol.md) and is the contract
consumed by the web console.
"""

from __future__ import annotations

import asyncio
import base64
import queue
import threading
import uuid
from concurrent.futures import Future

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .io import ConfigError, isolines_to_data, params_to_data, parse_config_data, render_frame
from .run import AuditError, SimulationRun

PROTOCOL_VERSION = 1

_PARKED = object()


class SessionClosed(RuntimeError):
    pass


class _Subscriber:
    def __init__(self, sub_id: int, stride: int, push):
        self.sub_id = sub_id
        self.stride = stride
        self.push = push
        self.last_cycle = -1


class Session:
    """One live simulation driven by boundary-applied commands."""

    def __init__(self, session_id: str, config, workers: int = 1):
        self.session_id = session_id
        self.runner = SimulationRun(config, workers=workers)
        self.running = False
        self.closed = False
        self.error: AuditError | None = None
        self.step_budget = 0
        self._step_waiters: list[tuple[int, Future]] = []
        self._commands: queue.Queue = queue.Queue()
        self._subscribers: dict[int, _Subscriber] = {}
        self._sub_lock = threading.Lock()
        self._next_sub = 0
        self._thread = threading.Thread(
            target=self._loop, name=f"kinon-session-{session_id[:8]}", daemon=True)
        self._thread.start()

    # -- command plumbing --------------------------------------------------

    def submit(self, fn) -> Future:
        """Queue a command for execution at the next cycle boundary."""
        fut: Future = Future()
        if self.closed:
            fut.set_exception(SessionClosed("session is closed"))
            return fut
        self._commands.put((fn, fut))
        return fut

    def _drain(self, block: bool) -> list:
        drained = []
        try:
            drained.append(self._commands.get(block=block, timeout=0.1 if block else None))
        except queue.Empty:
            return drained
        while True:
            try:
                drained.append(self._commands.get_nowait())
            except queue.Empty:
                return drained

    def _loop(self) -> None:
        while not self.closed:
            active = (self.running or self.step_budget > 0) and self.error is None
            for fn, fut in self._drain(block=not active):
                try:
                    result = fn(self, fut)
                    if result is not _PARKED:
                        fut.set_result(result)
                except Exception as exc:
                    fut.set_exception(exc)
            if self.closed:
                break
            if (self.running or self.step_budget > 0) and self.error is None:
                try:
                    executed = self.runner.advance(1, on_cycle=self._after_cycle)
                except AuditError as exc:
                    self.error = exc
                    self.running = False
                    self.step_budget = 0
                    self._fail_waiters(exc)
                    self._broadcast({
                        "type": "error", "code": "audit",
                        "session": self.session_id, "message": str(exc),
                    })
                    continue
                if executed == 0:
                    # schedule stopped the run (stasis); unblock any steppers
                    self.running = False
                    self.step_budget = 0
                    self._resolve_waiters(force=True)
                else:
                    if self.step_budget > 0:
                        self.step_budget -= 1
                    self._resolve_waiters()
        self._resolve_waiters(force=True)

    def _resolve_waiters(self, force: bool = False) -> None:
        cycle = self.runner.cycle
        remaining = []
        for target, fut in self._step_waiters:
            if force or cycle >= target:
                if not fut.done():
                    fut.set_result({"cycle": cycle})
            else:
                remaining.append((target, fut))
        self._step_waiters = remaining

    def _fail_waiters(self, exc: Exception) -> None:
        for _, fut in self._step_waiters:
            if not fut.done():
                fut.set_exception(exc)
        self._step_waiters = []

    # -- streaming ----------------------------------------------------------

    def subscribe(self, stride: int, push) -> int:
        with self._sub_lock:
            sub_id = self._next_sub
            self._next_sub += 1
            self._subscribers[sub_id] = _Subscriber(sub_id, stride, push)
        return sub_id

    def unsubscribe(self, sub_id: int) -> None:
        with self._sub_lock:
            self._subscribers.pop(sub_id, None)

    def _broadcast(self, message: dict) -> None:
        with self._sub_lock:
            subs = list(self._subscribers.values())
        for sub in subs:
            sub.push(message)

    def _after_cycle(self, runner: SimulationRun) -> None:
        cycle = runner.cycle
        with self._sub_lock:
            subs = list(self._subscribers.values())
        frame_msg = None
        for sub in subs:
            if cycle % sub.stride == 0 and cycle > sub.last_cycle:
                if frame_msg is None:
                    frame_msg = self.frame_message()
                sub.last_cycle = cycle
                sub.push(frame_msg)
        stride = self.runner.config.schedule.contour_stride
        if subs and stride > 0 and cycle % stride == 0:
            contour_msg = self.contours_message()
            for sub in subs:
                sub.push(contour_msg)

    # -- message builders ----------------------------------------------------

    def frame_message(self) -> dict:
        runner = self.runner
        record = runner.series.records[-1] if runner.series.records else None
        pgm = render_frame(runner.field_snapshot(), runner.config.render.scale, "pgm")
        return {
            "type": "frame",
            "session": self.session_id,
            "cycle": runner.cycle,
            "ke": record.ke if record else 0.0,
            "kt": record.kt if record else 0.0,
            "pgm_base64": base64.b64encode(pgm).decode("ascii"),
        }

    def contours_message(self) -> dict:
        data = isolines_to_data(self.runner.contours())
        data["type"] = "contours"
        data["session"] = self.session_id
        return data

    def series_message(self, since: int) -> dict:
        records = [
            {"cycle": r.cycle, "ke": r.ke, "kt": r.kt, "drift": r.drift}
            for r in self.runner.series.records if r.cycle > since
        ]
        return {
            "type": "series",
            "session": self.session_id,
            "cycle": self.runner.cycle,
            "records": records,
            "marks": dict(sorted(self.runner.series.marks.items())),
        }


class SessionManager:
    def __init__(self, workers: int = 1):
        self.workers = workers
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, config_data) -> Session:
        config = parse_config_data(config_data)
        session = Session(uuid.uuid4().hex, config, workers=self.workers)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def remove(self, session_id: str) -> None:
        with self._lock:
            self._sessions.pop(session_id, None)


def _error(code: str, message: str, req=None, fields=None) -> dict:
    msg = {"type": "error", "code": code, "message": message}
    if req is not None:
        msg["req"] = req
    if fields:
        msg["fields"] = [{"path": path, "message": text} for path, text in fields]
    return msg


def create_app(workers: int = 1) -> FastAPI:
    app = FastAPI(title="kinonsim steering service")
    manager = SessionManager(workers=workers)
    app.state.manager = manager

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "protocol": PROTOCOL_VERSION}

    @app.websocket("/ws")
    async def ws_endpoint(sock: WebSocket):
        await sock.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue = asyncio.Queue()
        my_subs: list[tuple[Session, int]] = []

        def push(message: dict) -> None:
            loop.call_soon_threadsafe(outbox.put_nowait, message)

        async def sender():
            while True:
                await sock.send_json(await outbox.get())

        sender_task = asyncio.create_task(sender())
        try:
            while True:
                msg = await sock.receive_json()
                reply = await _dispatch(manager, msg, push, my_subs)
                if reply is not None:
                    push(reply)
        except WebSocketDisconnect:
            pass
        finally:
            sender_task.cancel()
            for session, sub_id in my_subs:
                session.unsubscribe(sub_id)

    return app


async def _dispatch(manager: SessionManager, msg, push, my_subs) -> dict | None:
    if not isinstance(msg, dict) or "type" not in msg:
        return _error("bad_request", "message must be an object with a 'type'")
    req = msg.get("req")
    kind = msg["type"]

    if kind == "create":
        try:
            session = manager.create(msg.get("config"))
        except ConfigError as exc:
            return _error("validation", "invalid config", req, exc.problems)
        reply = {"type": "created", "session": session.session_id,
                 "cycle": 0, "protocol": PROTOCOL_VERSION}
        if req is not None:
            reply["req"] = req
        return reply

    session = manager.get(msg.get("session", ""))
    if session is None or session.closed:
        return _error("unknown_session", f"no session {msg.get('session')!r}", req)

    async def run_command(fn):
        return await asyncio.wrap_future(session.submit(fn))

    try:
        if kind == "start":
            def fn(sess, fut):
                sess.running = True
                return {"type": "ok", "command": "start", "cycle": sess.runner.cycle}
            reply = await run_command(fn)
        elif kind == "pause":
            def fn(sess, fut):
                sess.running = False
                sess.step_budget = 0
                sess._resolve_waiters(force=True)
                return {"type": "ok", "command": "pause", "cycle": sess.runner.cycle}
            reply = await run_command(fn)
        elif kind == "step":
            cycles = msg.get("cycles", 1)
            if not isinstance(cycles, int) or isinstance(cycles, bool) or cycles < 0:
                return _error("bad_request", "cycles must be a non-negative integer", req)

            def fn(sess, fut):
                if cycles == 0:
                    return {"type": "stepped", "cycle": sess.runner.cycle}
                target = sess.runner.cycle + sess.step_budget + cycles
                sess.step_budget += cycles
                sess._step_waiters.append((target, fut))
                return _PARKED
            result = await run_command(fn)
            reply = {"type": "stepped", "cycle": result["cycle"]} \
                if "type" not in result else result
        elif kind == "set_params":
            updates = msg.get("params")

            def fn(sess, fut):
                target = sess.runner.queue_param_change(updates or {})
                return {
                    "type": "params_ack",
                    "applies_at_cycle": target,
                    "updates": updates,
                    "params": params_to_data(sess.runner.params),
                }
            reply = await run_command(fn)
        elif kind == "subscribe":
            stride = msg.get("stride", 1)
            if not isinstance(stride, int) or isinstance(stride, bool) or stride < 1:
                return _error("bad_request", "stride must be a positive integer", req)
            sub_id = session.subscribe(stride, push)
            my_subs.append((session, sub_id))
            reply = {"type": "subscribed", "sub": sub_id, "stride": stride,
                     "cycle": session.runner.cycle}
        elif kind == "get_frame":
            reply = await run_command(lambda sess, fut: sess.frame_message())
        elif kind == "get_contours":
            reply = await run_command(lambda sess, fut: sess.contours_message())
        elif kind == "get_series":
            since = msg.get("since", 0)
            if not isinstance(since, int) or isinstance(since, bool):
                return _error("bad_request", "since must be an integer", req)
            reply = await run_command(lambda sess, fut: sess.series_message(since))
        elif kind == "snapshot":
            def fn(sess, fut):
                return {
                    "type": "snapshot",
                    "cycle": sess.runner.cycle,
                    "data_base64": base64.b64encode(sess.runner.snapshot().to_bytes()).decode("ascii"),
                }
            reply = await run_command(fn)
        elif kind == "close":
            def fn(sess, fut):
                sess.closed = True
                sess.running = False
                return {"type": "ok", "command": "close", "cycle": sess.runner.cycle}
            reply = await run_command(fn)
            manager.remove(session.session_id)
        else:
            return _error("bad_request", f"unknown command type {kind!r}", req)
    except ConfigError as exc:
        return _error("validation", "invalid parameters", req, exc.problems)
    except (SessionClosed, ValueError) as exc:
        return _error("bad_request", str(exc), req)

    if isinstance(reply, dict):
        reply.setdefault("session", session.session_id)
        if req is not None:
            reply["req"] = req
    return reply


def main(argv=None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="kinonsim-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8700)
    parser.add_argument("--workers", type=int, default=1,
                        help="within-cycle worker stripes per session")
    args = parser.parse_args(argv)
    uvicorn.run(create_app(workers=args.workers), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
