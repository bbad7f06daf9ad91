"""Optional loopback-socket front end for the simulator.

Serves a Simulation's HTTP behaviour over a real 127.0.0.1 listener so
integration tests can exercise genuine sockets; resolution still happens
in-memory. The in-memory transport remains the default everywhere.
"""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import urlsplit

import urllib.error
import urllib.request

from .dns_audit import Rcode
from .prober import FailureKind, ProbePolicy, TransportReply
from .simnet import ConnectionRefused, Simulation


class LoopbackWebServer:
    """HTTP listener that answers for the simulated web layer.

    The requested domain arrives in the Host header and the address the
    client "connected to" in X-Resolved-IP; the simulation decides whether
    that pair yields the block page, scripted content, or a refusal (mapped
    to 503 here, since the socket itself is already open).
    """

    def __init__(self, sim: Simulation):
        self._sim = sim
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def _respond(self, include_body: bool) -> None:
                domain = (self.headers.get("Host") or "").split(":")[0].lower()
                ip = self.headers.get("X-Resolved-IP", "")
                try:
                    status, body = outer._sim.serve_http(ip, domain)
                except ConnectionRefused:
                    self.send_response(503)
                    self.send_header("X-Sim-Refused", "1")
                    self.end_headers()
                    return
                payload = body.encode("utf-8")
                self.send_response(status)
                scripted = outer._sim.config.scripted_http.get(domain)
                if scripted is not None and scripted.location:
                    self.send_header("Location", scripted.location)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                if include_body:
                    self.wfile.write(payload)

            def do_GET(self):  # noqa: N802 - http.server naming
                self._respond(include_body=True)

            def do_HEAD(self):  # noqa: N802
                self._respond(include_body=False)

            def log_message(self, fmt, *args):  # silence per-request stderr noise
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self) -> "LoopbackWebServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


class LoopbackTransport:
    """TransportPort that resolves in-memory but fetches over real sockets."""

    def __init__(self, sim: Simulation, server: LoopbackWebServer, path: str = "default"):
        self._sim = sim
        self._server = server
        self._path = path

    def request(self, url: str, method: str, policy: ProbePolicy) -> TransportReply:
        domain = (urlsplit(url).hostname or "").lower()
        if not domain:
            return TransportReply(failure=FailureKind.PROTOCOL, note=f"bad url {url!r}")
        answer = self._sim.intercept_query(domain, self._path)
        if answer.rcode == Rcode.TIMEOUT:
            return TransportReply(failure=FailureKind.TIMEOUT, note="dns query dropped")
        if answer.rcode != Rcode.NOERROR or not answer.addresses:
            return TransportReply(failure=FailureKind.DNS, note=answer.rcode.value)
        ip = min(answer.addresses)
        req = urllib.request.Request(
            f"http://127.0.0.1:{self._server.port}/",
            method=method,
            headers={"Host": domain, "X-Resolved-IP": ip, "User-Agent": policy.user_agent},
        )
        opener = urllib.request.build_opener(_NoRedirect())
        try:
            with opener.open(req, timeout=policy.total_timeout) as resp:
                if resp.headers.get("X-Sim-Refused"):
                    return TransportReply(failure=FailureKind.REFUSED, note="connection refused")
                body = b"" if method == "HEAD" else resp.read()
                return TransportReply(
                    status=resp.status, body=body, location=resp.headers.get("Location")
                )
        except urllib.error.HTTPError as exc:
            if exc.headers.get("X-Sim-Refused"):
                return TransportReply(failure=FailureKind.REFUSED, note="connection refused")
            return TransportReply(
                status=exc.code, body=exc.read(), location=exc.headers.get("Location")
            )
        except OSError as exc:
            return TransportReply(failure=FailureKind.PROTOCOL, note=str(exc))


class _NoRedirect(urllib.request.HTTPRedirectHandler):
    def redirect_request(self, req, fp, code, msg, headers, newurl):
        return None
