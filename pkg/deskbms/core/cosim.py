"""Lock-step co-simulation over newline-delimited JSON.

One message per line, UTF-8. The controller sends `init`, then one `step` per
slot and finally `end`; the simulator answers every message with exactly one
`state` (or `end`/`error`) line. An `error` reply closes the session.
"""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
from dataclasses import asdict, dataclass
from typing import IO, Any, Callable, Dict, List, Optional, Tuple

from deskbms.core.thermal import SimulationState, get_stepper, thermostat_actuation
from deskbms.models import DeskBmsError, ProtocolError, ZoneThermalParams

logger = logging.getLogger(__name__)

MESSAGE_TYPES = ("init", "step", "state", "end", "error")


def encode(msg: Dict[str, Any]) -> bytes:
    return (json.dumps(msg, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def decode(line: bytes) -> Dict[str, Any]:
    try:
        msg = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError("MALFORMED", f"not a JSON line: {e}") from None
    if not isinstance(msg, dict) or msg.get("type") not in MESSAGE_TYPES:
        raise ProtocolError("MALFORMED", "message must be an object with a known 'type'")
    return msg


def error_message(code: str, text: str) -> Dict[str, Any]:
    return {"type": "error", "code": code, "message": text}


@dataclass(frozen=True)
class PlantReply:
    clock: int
    t_in: float
    energy_wh: float    # this step
    hvac_on: bool
    q_ac: float


class SimulatorSession:
    """Simulator side of one session; maps request dicts to reply dicts."""

    def __init__(self):
        self.params: Optional[ZoneThermalParams] = None
        self.state: Optional[SimulationState] = None
        self.method = "euler"
        self.dt = 0.0
        self.closed = False

    def handle(self, msg: Dict[str, Any]) -> Dict[str, Any]:
        try:
            reply = self._dispatch(msg)
        except DeskBmsError as e:
            self.closed = True
            return error_message(e.code, e.message)
        except (KeyError, TypeError, ValueError) as e:
            self.closed = True
            return error_message("MALFORMED", f"bad payload: {e}")
        if reply["type"] == "end":
            self.closed = True
        return reply

    def _dispatch(self, msg: Dict[str, Any]) -> Dict[str, Any]:
        kind = msg.get("type")
        if kind == "init":
            if self.params is not None:
                raise ProtocolError("DUPLICATE_INIT", "session already initialized")
            self.params = ZoneThermalParams(**msg["params"])
            self.method = str(msg.get("method", "euler"))
            get_stepper(self.method)
            self.dt = float(msg["dt"])
            self.state = SimulationState(
                indoor_temp=float(msg["initial_temp"]),
                cumulative_energy=0.0,
                hvac_on=bool(msg.get("hvac_on", False)),
            )
            logger.info("co-sim session initialized (dt=%.0f s, method=%s)", self.dt, self.method)
            return {"type": "state", "clock": -1, "t_in": self.state.indoor_temp,
                    "energy_wh": 0.0, "hvac_on": self.state.hvac_on, "q_ac": 0.0}

        if self.params is None or self.state is None:
            raise ProtocolError("UNINITIALIZED", f"'{kind}' before init")

        if kind == "step":
            clock = int(msg["clock"])
            if clock != self.state.clock:
                raise ProtocolError("OUT_OF_ORDER", f"expected clock {self.state.clock}, got {clock}")
            if "q_ac" in msg:
                q_ac = float(msg["q_ac"])
            else:
                q_ac, _ = thermostat_actuation(float(msg["setpoint"]), self.params, self.state)
            before = self.state.cumulative_energy
            self.state = get_stepper(self.method)(
                self.state, self.params, float(msg["t_out"]), float(msg.get("occupancy", 0)), q_ac, self.dt
            )
            return {"type": "state", "clock": clock, "t_in": self.state.indoor_temp,
                    "energy_wh": self.state.cumulative_energy - before,
                    "hvac_on": self.state.hvac_on, "q_ac": q_ac}

        if kind == "end":
            logger.info("co-sim session ended after %d steps", self.state.clock)
            return {"type": "end", "steps": self.state.clock, "energy_wh": self.state.cumulative_energy}

        raise ProtocolError("UNEXPECTED", f"simulator does not accept '{kind}'")


def serve_stream(reader: IO[bytes], writer: IO[bytes]) -> bool:
    """Runs one session over a pair of binary streams; True when it closed with `end`."""
    session = SimulatorSession()
    for line in reader:
        if not line.strip():
            continue
        try:
            reply = session.handle(decode(line))
        except ProtocolError as e:
            session.closed = True
            reply = error_message(e.code, e.message)
        writer.write(encode(reply))
        writer.flush()
        if session.closed:
            if reply["type"] == "error":
                logger.warning("co-sim session closed: %s %s", reply["code"], reply["message"])
            return reply["type"] == "end"
    logger.warning("co-sim peer disconnected without 'end'")
    return False


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        logger.info("co-sim connection from %s:%d", *self.client_address[:2])
        if not serve_stream(self.rfile, self.wfile):
            self.server.dropped = True


class SimulatorServer(socketserver.TCPServer):
    """Sequential TCP server: one session at a time."""

    allow_reuse_address = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _SessionHandler)
        self.dropped = False

    @property
    def endpoint(self) -> Tuple[str, int]:
        host, port = self.server_address[:2]
        return host, port


def serve_simulator(host: str = "127.0.0.1", port: int = 0, sessions: int = 1,
                    on_listening: Optional[Callable[[Tuple[str, int]], None]] = None) -> int:
    """Serves up to `sessions` sessions; stops early after one that ends without `end`. Returns sessions served."""
    with SimulatorServer(host, port) as server:
        logger.info("co-sim simulator listening on %s:%d", *server.endpoint)
        if on_listening is not None:
            on_listening(server.endpoint)
        served = 0
        while served < sessions:
            server.handle_request()
            served += 1
            if server.dropped:
                logger.warning("co-sim session %d dropped; shutting down", served)
                break
        return served


def start_server_thread(host: str = "127.0.0.1", port: int = 0, sessions: int = 1,
                        timeout: float = 10.0) -> Tuple[Tuple[str, int], threading.Thread]:
    ready = threading.Event()
    box: List[Any] = []

    def listening(endpoint: Tuple[str, int]) -> None:
        box.append(endpoint)
        ready.set()

    def target() -> None:
        try:
            serve_simulator(host, port, sessions, listening)
        except OSError as e:
            box.append(e)
            ready.set()

    thread = threading.Thread(target=target, daemon=True)
    thread.start()
    if not ready.wait(timeout=timeout) or not box:
        raise ProtocolError("SERVER_TIMEOUT", f"simulator did not start listening within {timeout:g} s")
    if isinstance(box[0], OSError):
        raise ProtocolError("SERVER_BIND", f"cannot listen on {host}:{port}: {box[0]}") from box[0]
    return box[0], thread


# -------------------------
# Controller side
# -------------------------

class Plant:
    """Controller-side handle on a simulator session."""

    def request(self, msg: Dict[str, Any]) -> Dict[str, Any]:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def _checked(self, reply: Dict[str, Any]) -> Dict[str, Any]:
        if reply.get("type") == "error":
            raise ProtocolError(str(reply.get("code", "REMOTE_ERROR")), str(reply.get("message", "")))
        return reply

    def init(self, params: ZoneThermalParams, initial_temp: float, dt: float, method: str = "euler") -> None:
        self._checked(self.request({
            "type": "init", "params": asdict(params), "initial_temp": initial_temp, "dt": dt, "method": method,
        }))

    def step(self, clock: int, t_out: float, occupancy: float, setpoint: Optional[float] = None,
             q_ac: Optional[float] = None, rh: Optional[float] = None) -> PlantReply:
        msg: Dict[str, Any] = {"type": "step", "clock": clock, "t_out": t_out, "occupancy": occupancy}
        if q_ac is not None:
            msg["q_ac"] = q_ac
        else:
            msg["setpoint"] = setpoint
        if rh is not None:
            msg["rh"] = rh
        r = self._checked(self.request(msg))
        return PlantReply(int(r["clock"]), float(r["t_in"]), float(r["energy_wh"]), bool(r["hvac_on"]), float(r["q_ac"]))

    def end(self) -> float:
        return float(self._checked(self.request({"type": "end"}))["energy_wh"])


class InProcessPlant(Plant):
    def __init__(self):
        self.session = SimulatorSession()

    def request(self, msg: Dict[str, Any]) -> Dict[str, Any]:
        return decode(encode(self.session.handle(decode(encode(msg)))))


class SocketPlant(Plant):
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.stream = self.sock.makefile("rwb")

    def request(self, msg: Dict[str, Any]) -> Dict[str, Any]:
        self.stream.write(encode(msg))
        self.stream.flush()
        line = self.stream.readline()
        if not line:
            raise ProtocolError("DISCONNECTED", "simulator closed the connection")
        return decode(line)

    def close(self) -> None:
        try:
            self.stream.close()
        finally:
            self.sock.close()
