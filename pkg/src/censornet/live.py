"""Live-network adapters behind the same ports the simulator implements.

These probe the real internet. They are wired up only when the operator
explicitly asks for live mode; nothing in the test suite touches the network.
"""

from __future__ import annotations

import socket
import struct
import time
import urllib.error
import urllib.request
from typing import Optional
from urllib.parse import urlsplit

from .dns_audit import AvailabilityLookupError, DnsAnswer, Rcode
from .prober import FailureKind, ProbePolicy, TransportReply

_BODY_READ_CAP = 64 * 1024


class _NoRedirect(urllib.request.HTTPRedirectHandler):
    def redirect_request(self, req, fp, code, msg, headers, newurl):  # noqa: D102
        return None


class LiveTransport:
    """TransportPort over urllib. Never follows redirects itself; the prober does."""

    def request(self, url: str, method: str, policy: ProbePolicy) -> TransportReply:
        opener = urllib.request.build_opener(_NoRedirect())
        req = urllib.request.Request(url, method=method, headers={"User-Agent": policy.user_agent})
        start = time.monotonic()
        try:
            with opener.open(req, timeout=policy.total_timeout) as resp:
                elapsed = time.monotonic() - start
                body = b"" if method == "HEAD" else resp.read(_BODY_READ_CAP)
                return TransportReply(
                    status=resp.status,
                    body=body,
                    elapsed=elapsed,
                    location=resp.headers.get("Location"),
                )
        except urllib.error.HTTPError as exc:
            elapsed = time.monotonic() - start
            body = b"" if method == "HEAD" else exc.read()[:_BODY_READ_CAP]
            return TransportReply(
                status=exc.code, body=body, elapsed=elapsed, location=exc.headers.get("Location")
            )
        except urllib.error.URLError as exc:
            elapsed = time.monotonic() - start
            reason = exc.reason
            if isinstance(reason, socket.gaierror):
                kind = FailureKind.DNS
            elif isinstance(reason, socket.timeout) or isinstance(reason, TimeoutError):
                kind = FailureKind.TIMEOUT
            elif isinstance(reason, ConnectionRefusedError):
                kind = FailureKind.REFUSED
            elif "ssl" in type(reason).__name__.lower() or "certificate" in str(reason).lower():
                kind = FailureKind.TLS
            else:
                kind = FailureKind.PROTOCOL
            return TransportReply(failure=kind, note=str(reason), elapsed=elapsed)
        except socket.timeout:
            return TransportReply(
                failure=FailureKind.TIMEOUT, note="socket timeout", elapsed=time.monotonic() - start
            )
        except OSError as exc:
            return TransportReply(
                failure=FailureKind.PROTOCOL, note=str(exc), elapsed=time.monotonic() - start
            )


class LiveDnsPort:
    """A-record lookups through the system resolver."""

    def __init__(self, timeout: float = 10.0):
        self._timeout = timeout

    def resolve(self, domain: str) -> DnsAnswer:
        old = socket.getdefaulttimeout()
        socket.setdefaulttimeout(self._timeout)
        try:
            infos = socket.getaddrinfo(domain, 80, family=socket.AF_INET, type=socket.SOCK_STREAM)
        except socket.gaierror as exc:
            if exc.errno in (socket.EAI_NONAME, getattr(socket, "EAI_NODATA", -5)):
                return DnsAnswer(rcode=Rcode.NXDOMAIN)
            return DnsAnswer(rcode=Rcode.SERVFAIL)
        except (socket.timeout, TimeoutError):
            return DnsAnswer(rcode=Rcode.TIMEOUT)
        finally:
            socket.setdefaulttimeout(old)
        addresses = frozenset(info[4][0] for info in infos)
        if not addresses:
            return DnsAnswer(rcode=Rcode.NOERROR)
        return DnsAnswer(rcode=Rcode.NOERROR, addresses=addresses)


class RdapAvailabilityPort:
    """Registrar availability via RDAP: a 404 for the domain means unregistered."""

    def __init__(self, base_url: str = "https://rdap.org/domain/", timeout: float = 15.0):
        self._base_url = base_url
        self._timeout = timeout

    def is_available(self, domain: str) -> bool:
        url = self._base_url + domain
        try:
            with urllib.request.urlopen(url, timeout=self._timeout) as resp:
                if resp.status == 200:
                    return False
                raise AvailabilityLookupError(f"unexpected RDAP status {resp.status} for {domain}")
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                return True
            raise AvailabilityLookupError(f"RDAP lookup failed for {domain}: HTTP {exc.code}")
        except OSError as exc:
            raise AvailabilityLookupError(f"RDAP lookup failed for {domain}: {exc}")


class Socks5Transport:
    """Minimal SOCKS5 client for plain-http fetches through a local proxy (e.g. Tor).

    Optional alternate-path adapter: hostname resolution happens proxy-side
    (SOCKS5h semantics), which is what circumvention through Tor needs.
    """

    def __init__(self, proxy_host: str = "127.0.0.1", proxy_port: int = 9050):
        self._proxy = (proxy_host, proxy_port)

    def request(self, url: str, method: str, policy: ProbePolicy) -> TransportReply:
        parts = urlsplit(url)
        if parts.scheme != "http":
            return TransportReply(
                failure=FailureKind.PROTOCOL, note="only plain http is supported over SOCKS here"
            )
        host = parts.hostname or ""
        port = parts.port or 80
        path = parts.path or "/"
        if parts.query:
            path += "?" + parts.query
        start = time.monotonic()
        try:
            sock = socket.create_connection(self._proxy, timeout=policy.connect_timeout)
        except OSError as exc:
            return TransportReply(failure=FailureKind.REFUSED, note=f"proxy: {exc}")
        try:
            sock.settimeout(policy.total_timeout)
            sock.sendall(b"\x05\x01\x00")  # version 5, one method: no auth
            if sock.recv(2) != b"\x05\x00":
                return TransportReply(failure=FailureKind.PROTOCOL, note="proxy refused no-auth")
            req = b"\x05\x01\x00\x03" + bytes([len(host)]) + host.encode("idna") + struct.pack(">H", port)
            sock.sendall(req)
            reply = sock.recv(4)
            if len(reply) < 4 or reply[1] != 0x00:
                code = reply[1] if len(reply) > 1 else -1
                kind = FailureKind.DNS if code == 0x04 else FailureKind.REFUSED
                return TransportReply(failure=kind, note=f"socks connect failed (code {code})")
            # drain the bound address
            atyp = reply[3]
            if atyp == 0x01:
                sock.recv(4 + 2)
            elif atyp == 0x03:
                n = sock.recv(1)
                sock.recv(n[0] + 2)
            elif atyp == 0x04:
                sock.recv(16 + 2)
            request_lines = (
                f"{method} {path} HTTP/1.0\r\n"
                f"Host: {host}\r\n"
                f"User-Agent: {policy.user_agent}\r\n"
                "Connection: close\r\n\r\n"
            )
            sock.sendall(request_lines.encode("ascii"))
            raw = b""
            while len(raw) < _BODY_READ_CAP + 4096:
                chunk = sock.recv(8192)
                if not chunk:
                    break
                raw += chunk
        except (socket.timeout, TimeoutError):
            return TransportReply(
                failure=FailureKind.TIMEOUT, note="socks fetch timed out", elapsed=time.monotonic() - start
            )
        except OSError as exc:
            return TransportReply(failure=FailureKind.PROTOCOL, note=str(exc))
        finally:
            sock.close()
        elapsed = time.monotonic() - start
        return _parse_http_reply(raw, method, elapsed)


def _parse_http_reply(raw: bytes, method: str, elapsed: float) -> TransportReply:
    head, _, body = raw.partition(b"\r\n\r\n")
    lines = head.split(b"\r\n")
    if not lines or not lines[0].startswith(b"HTTP/"):
        return TransportReply(failure=FailureKind.PROTOCOL, note="malformed HTTP reply", elapsed=elapsed)
    try:
        status = int(lines[0].split()[1])
    except (IndexError, ValueError):
        return TransportReply(failure=FailureKind.PROTOCOL, note="malformed status line", elapsed=elapsed)
    location: Optional[str] = None
    for line in lines[1:]:
        name, _, value = line.partition(b":")
        if name.strip().lower() == b"location":
            location = value.strip().decode("latin-1")
    return TransportReply(
        status=status,
        body=b"" if method == "HEAD" else body[:_BODY_READ_CAP],
        elapsed=elapsed,
        location=location,
    )
