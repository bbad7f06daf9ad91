"""Offline tests of the live adapters: reply parsing and a loopback SOCKS5 server.

Nothing here touches the real network; the SOCKS tests run against an
in-process fake proxy that serves canned HTTP.
"""

from __future__ import annotations

import socket
import struct
import threading

import pytest

from censornet.live import Socks5Transport, _parse_http_reply
from censornet.prober import FailureKind, ProbePolicy


class FakeSocksServer:
    """Accepts one SOCKS5 no-auth CONNECT and answers any HTTP request with a canned page."""

    def __init__(self, http_status=200, body=b"proxied content", fail_connect=False):
        self.http_status = http_status
        self.body = body
        self.fail_connect = fail_connect
        self.seen_hosts = []
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(("127.0.0.1", 0))
        self._sock.listen(4)
        self.port = self._sock.getsockname()[1]
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    def _serve(self):
        while True:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            with conn:
                try:
                    self._handle(conn)
                except OSError:
                    pass

    def _handle(self, conn):
        conn.recv(2 + 255)  # greeting
        conn.sendall(b"\x05\x00")
        header = conn.recv(4)
        if len(header) < 4:
            return
        atyp = header[3]
        if atyp == 0x03:
            n = conn.recv(1)[0]
            host = conn.recv(n).decode()
            self.seen_hosts.append(host)
        conn.recv(2)  # port
        if self.fail_connect:
            conn.sendall(b"\x05\x04\x00\x01" + b"\x00" * 6)
            return
        conn.sendall(b"\x05\x00\x00\x01" + socket.inet_aton("0.0.0.0") + struct.pack(">H", 0))
        conn.recv(65536)  # the HTTP request
        reply = (
            f"HTTP/1.0 {self.http_status} Whatever\r\n"
            "Content-Type: text/html\r\n"
            "\r\n"
        ).encode() + self.body
        conn.sendall(reply)

    def close(self):
        self._sock.close()


@pytest.fixture()
def proxy():
    server = FakeSocksServer()
    yield server
    server.close()


class TestSocks5Transport:
    def test_fetch_through_proxy(self, proxy):
        transport = Socks5Transport("127.0.0.1", proxy.port)
        reply = transport.request("http://hidden.example/page", "GET", ProbePolicy())
        assert reply.status == 200
        assert reply.body == b"proxied content"
        assert proxy.seen_hosts == ["hidden.example"]  # name resolved proxy-side

    def test_head_drops_body(self, proxy):
        transport = Socks5Transport("127.0.0.1", proxy.port)
        reply = transport.request("http://hidden.example/", "HEAD", ProbePolicy())
        assert reply.status == 200
        assert reply.body == b""

    def test_proxy_side_dns_failure(self):
        server = FakeSocksServer(fail_connect=True)
        try:
            transport = Socks5Transport("127.0.0.1", server.port)
            reply = transport.request("http://nowhere.example/", "GET", ProbePolicy())
            assert reply.failure == FailureKind.DNS
        finally:
            server.close()

    def test_unreachable_proxy_is_refused(self):
        transport = Socks5Transport("127.0.0.1", 1)  # nothing listens there
        reply = transport.request("http://x.example/", "GET", ProbePolicy(connect_timeout=0.2, total_timeout=0.5))
        assert reply.failure == FailureKind.REFUSED

    def test_https_is_not_attempted(self, proxy):
        transport = Socks5Transport("127.0.0.1", proxy.port)
        reply = transport.request("https://x.example/", "GET", ProbePolicy())
        assert reply.failure == FailureKind.PROTOCOL


class TestHttpReplyParsing:
    def test_status_and_body(self):
        reply = _parse_http_reply(b"HTTP/1.1 301 Moved\r\nLocation: http://b/\r\n\r\nbody", "GET", 0.1)
        assert reply.status == 301
        assert reply.location == "http://b/"
        assert reply.body == b"body"

    def test_malformed_reply(self):
        reply = _parse_http_reply(b"garbage", "GET", 0.1)
        assert reply.failure == FailureKind.PROTOCOL
