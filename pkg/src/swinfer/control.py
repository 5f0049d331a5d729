"""HTTP control plane for the cloud daemon.

Versioned JSON endpoints under /api:

  GET  /api/model    layer table (FLOPs, output bytes), hash, active split
  GET  /api/profiles stored device/server profiles and measured totals
  POST /api/whatif   predicted breakdown per candidate for a hypothetical link
  POST /api/plan     compute + persist + activate a plan (server re-arms)
  GET  /api/live     server-sent event stream of recent measured breakdowns
  POST /api/live     ingest a measured breakdown (edges report here)

The daemon is the single source of truth for plans: the console only
renders numbers computed here.
"""

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import modelgraph as mg
from . import planner as pl
from . import profiler as prof
from .errors import InvalidArgumentError, SwinferError
from .runtime import CloudServer, EventBus

LIVE_KEEPALIVE_S = 15.0


@dataclass
class ControlState:
    graph: mg.ModelGraph
    server: CloudServer = None  # re-armed on plan activation
    device_profile: prof.LayerProfile = None
    server_profile: prof.LayerProfile = None
    measured_totals: dict = None
    plan: pl.SplitPlan = None
    plan_path: Path = None
    events: EventBus = field(default_factory=EventBus)
    model_hash_hex: str = ""

    def __post_init__(self):
        if not self.model_hash_hex and self.graph.has_weights:
            self.model_hash_hex = mg.model_hash(self.graph).hex()
        if self.server is not None:
            self.events = self.server.events


def _model_doc(state: ControlState) -> dict:
    g = state.graph
    return {
        "model_hash": state.model_hash_hex,
        "input_shape": list(g.input_shape) if g.input_shape else None,
        "input_bytes": mg.input_bytes(g),
        "num_layers": g.num_layers,
        "split_point": state.server.split_point if state.server else (
            state.plan.split_point if state.plan else None
        ),
        "layers": [
            {
                "layer": l.index,
                "name": l.name,
                "kind": l.kind,
                "output_shape": list(l.output_shape),
                "flops": mg.flops_of_layer(l),
                "output_bytes": mg.output_bytes_of_layer(l),
            }
            for l in g.layers
        ],
    }


def _whatif(state: ControlState, body: dict) -> dict:
    n = state.graph.num_layers
    include_endpoints = bool(body.get("include_endpoints", False))
    candidates = list(range(0 if include_endpoints else 1, n + 1))
    if state.device_profile and state.server_profile:
        link = prof.LinkModel(
            float(body["bandwidth_mbps"]), float(body.get("overhead_ms", 0.0))
        )
        plan = pl.greedy_split(state.device_profile, state.server_profile, link, candidates)
        doc = {
            "mode": pl.PREDICTED,
            "candidates": [b.as_dict() for b in plan.candidates],
            "argmin": plan.breakdown.as_dict(),
        }
        if "split_point" in body and body["split_point"] is not None:
            c = int(body["split_point"])
            doc["requested"] = prof.predict_latency(
                state.device_profile, state.server_profile, link, c
            ).as_dict()
        return doc
    if state.measured_totals:
        plan = pl.greedy_split_from_totals(state.measured_totals)
        return {
            "mode": pl.MEASURED,
            "candidates": [
                {"split_point": b.split_point, "total_ms": b.total_ms} for b in plan.candidates
            ],
            "argmin": {"split_point": plan.split_point, "total_ms": plan.breakdown.total_ms},
        }
    raise SwinferError("no profiles or measured totals loaded; cannot evaluate candidates")


def _make_plan(state: ControlState, body: dict) -> pl.SplitPlan:
    if state.device_profile and state.server_profile:
        link = prof.LinkModel(
            float(body["bandwidth_mbps"]), float(body.get("overhead_ms", 0.0))
        )
        if body.get("split_point") is not None:
            c = int(body["split_point"])
            breakdown = prof.predict_latency(state.device_profile, state.server_profile, link, c)
            plan = pl.SplitPlan(c, breakdown, pl.PREDICTED, link=link)
        else:
            n = state.graph.num_layers
            include_endpoints = bool(body.get("include_endpoints", False))
            plan = pl.greedy_split(
                state.device_profile, state.server_profile, link,
                list(range(0 if include_endpoints else 1, n + 1)),
            )
    elif state.measured_totals:
        if body.get("split_point") is not None:
            c = int(body["split_point"])
            totals = {c: state.measured_totals[c]} if c in state.measured_totals else None
            if totals is None:
                raise SwinferError(f"no measured total recorded for split {c}")
            plan = pl.greedy_split_from_totals(totals)
        else:
            plan = pl.greedy_split_from_totals(state.measured_totals)
    else:
        raise SwinferError("no profiles or measured totals loaded; cannot plan")
    plan.model_hash = state.model_hash_hex
    return plan


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def state(self) -> ControlState:
        return self.server.state

    def log_message(self, fmt, *args):
        pass

    def _send_json(self, code: int, obj):
        body = json.dumps(obj).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise ValueError("empty body")
        return json.loads(raw)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        if self.path == "/api/model":
            self._send_json(200, _model_doc(self.state))
        elif self.path == "/api/profiles":
            st = self.state
            self._send_json(
                200,
                {
                    "device": st.device_profile.to_dict() if st.device_profile else None,
                    "server": st.server_profile.to_dict() if st.server_profile else None,
                    "measured_totals": (
                        {str(k): v for k, v in st.measured_totals.items()}
                        if st.measured_totals
                        else None
                    ),
                },
            )
        elif self.path == "/api/plan":
            plan = self.state.plan
            if plan is None:
                self._send_json(404, {"error": "no active plan"})
            else:
                self._send_json(200, json.loads(plan.to_json()))
        elif self.path == "/api/live":
            self._stream_live()
        else:
            self._send_json(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):
        try:
            body = self._read_json()
        except (ValueError, json.JSONDecodeError) as exc:
            self._send_json(400, {"error": f"invalid JSON body: {exc}"})
            return
        if self.path == "/api/whatif":
            try:
                self._send_json(200, _whatif(self.state, body))
            except (KeyError, TypeError, ValueError) as exc:
                self._send_json(400, {"error": f"bad what-if request: {exc}"})
            except (SwinferError, InvalidArgumentError) as exc:
                self._send_json(422, {"error": str(exc)})
        elif self.path == "/api/plan":
            try:
                plan = _make_plan(self.state, body)
            except (KeyError, TypeError, ValueError) as exc:
                self._send_json(400, {"error": f"bad plan request: {exc}"})
                return
            except SwinferError as exc:
                self._send_json(422, {"error": str(exc)})
                return
            st = self.state
            st.plan = plan
            if st.plan_path:
                plan.save(st.plan_path)
            if st.server is not None:
                st.server.activate_split(plan.split_point)
            st.events.publish({"kind": "plan", "split_point": plan.split_point,
                               "predicted_total_ms": plan.breakdown.total_ms})
            self._send_json(200, json.loads(plan.to_json()))
        elif self.path == "/api/live":
            required = {"t_device_ms", "t_tx_ms", "t_server_ms", "split_point"}
            if not required <= set(body):
                self._send_json(400, {"error": f"breakdown needs fields {sorted(required)}"})
                return
            event = {"kind": "measured"} | {k: body[k] for k in sorted(required)}
            event["total_ms"] = body.get(
                "total_ms", body["t_device_ms"] + body["t_tx_ms"] + body["t_server_ms"]
            )
            if "mode" in body:
                event["mode"] = body["mode"]
            self.state.events.publish(event)
            self._send_json(200, {"accepted": True})
        else:
            self._send_json(404, {"error": f"unknown path {self.path}"})

    def _stream_live(self):
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        last = -1
        try:
            while True:
                events = self.state.events.wait_since(last, timeout=LIVE_KEEPALIVE_S)
                if not events:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                for eid, event in events:
                    payload = json.dumps(event)
                    self.wfile.write(f"id: {eid}\ndata: {payload}\n\n".encode())
                    last = eid
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            return


class ControlApi:
    def __init__(self, state: ControlState, listen=("127.0.0.1", 0)):
        self.state = state
        self._httpd = ThreadingHTTPServer(listen, _Handler)
        self._httpd.daemon_threads = True
        self._httpd.state = state
        self._thread = None

    def start(self):
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=2.0)

    @property
    def address(self):
        return self._httpd.server_address
