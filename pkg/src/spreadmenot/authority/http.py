"""HTTP front end for :class:`ReportStore` and the matching client.

    POST /v1/reports                 body: report body, Authorization: Bearer <token>
    GET  /v1/reports?cursor=&limit=  body: report frames (see encode_frames)

Both sides use only the standard library.
"""
from __future__ import annotations

import json
import logging
import struct
import threading
import urllib.error
import urllib.parse
import urllib.request
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..beacon import Beacon
from ..ecc import GroupParams
from ..report import PublishedReport
from ..wire import DecodeError, MalformedEntry, decode_report_body, encode_report_body
from .store import CurveMismatch, InvalidCursor, ReportStore, Unauthorized

logger = logging.getLogger(__name__)

CURVE_HEADER = "X-SpreadMeNot-Curve"
MAX_BODY = 1 << 30
DEFAULT_PAGE = 100
MAX_PAGE = 10_000


def encode_frames(reports, next_cursor: int) -> bytes:
    """[u64 next_cursor][u32 n] then per report [u64 seq][u64 published_at][u8 id_len][id][report body]."""
    out = [struct.pack(">QI", next_cursor, len(reports))]
    for rep in reports:
        rid = rep.report_id.encode()
        out.append(struct.pack(">QQB", rep.seq, rep.published_at, len(rid)) + rid + rep.body)
    return b"".join(out)


def decode_frames(params: GroupParams, data: bytes) -> tuple[list[PublishedReport], int]:
    try:
        next_cursor, n = struct.unpack_from(">QI", data)
        pos = 12
        entry_size = Beacon.encoded_size(params)
        reports = []
        for _ in range(n):
            seq, published_at, id_len = struct.unpack_from(">QQB", data, pos)
            pos += 17
            report_id = data[pos:pos + id_len].decode()
            pos += id_len
            (count,) = struct.unpack_from(">I", data, pos)
            end = pos + 4 + count * entry_size
            if end > len(data):
                raise DecodeError("truncated report frame")
            reports.append(PublishedReport(decode_report_body(params, data[pos:end]),
                                           report_id, published_at))
            pos = end
    except struct.error as exc:
        raise DecodeError(f"bad frame stream: {exc}") from None
    if pos != len(data):
        raise DecodeError("trailing bytes after report frames")
    return reports, next_cursor


class _Handler(BaseHTTPRequestHandler):
    server_version = "spreadmenot-authority/1"
    store: ReportStore

    def log_message(self, fmt, *args):
        logger.debug("%s - " + fmt, self.address_string(), *args)

    def _reply(self, status: int, body: bytes, ctype="application/json", headers=None):
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, code: str, detail: str, **extra):
        payload = {"error": code, "detail": detail, **extra}
        self._reply(status, json.dumps(payload).encode())

    def do_POST(self):
        url = urllib.parse.urlsplit(self.path)
        if url.path != "/v1/reports":
            return self._error(HTTPStatus.NOT_FOUND, "not-found", url.path)
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY:
            return self._error(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, "too-large", str(length))
        body = self.rfile.read(length)
        auth = self.headers.get("Authorization", "")
        token = auth[7:] if auth.startswith("Bearer ") else None
        curve = self.headers.get(CURVE_HEADER)
        store = self.store
        try:
            if curve is not None and curve != store.params.curve_id.value:
                raise CurveMismatch(f"server runs {store.params.curve_id.value}, got {curve}")
            report_id = store.submit_report(token, body)
        except Unauthorized as exc:
            return self._error(HTTPStatus.UNAUTHORIZED, exc.code, str(exc))
        except CurveMismatch as exc:
            return self._error(HTTPStatus.UNPROCESSABLE_ENTITY, exc.code, str(exc))
        except MalformedEntry as exc:
            return self._error(HTTPStatus.BAD_REQUEST, "malformed-entry", str(exc), index=exc.index)
        except DecodeError as exc:
            return self._error(HTTPStatus.BAD_REQUEST, "malformed-body", str(exc))
        self._reply(HTTPStatus.CREATED, json.dumps({"report_id": report_id}).encode())

    def do_GET(self):
        url = urllib.parse.urlsplit(self.path)
        if url.path == "/v1/health":
            return self._reply(HTTPStatus.OK, json.dumps(
                {"curve": self.store.params.curve_id.value, "reports": len(self.store)}).encode())
        if url.path != "/v1/reports":
            return self._error(HTTPStatus.NOT_FOUND, "not-found", url.path)
        query = urllib.parse.parse_qs(url.query)
        try:
            cursor = int(query.get("cursor", ["0"])[0] or 0)
            limit = int(query.get("limit", [str(DEFAULT_PAGE)])[0] or DEFAULT_PAGE)
            if not 1 <= limit <= MAX_PAGE:
                raise ValueError(f"limit must be in [1, {MAX_PAGE}]")
            page, next_cursor = self.store.fetch_reports(cursor, limit)
        except InvalidCursor as exc:
            return self._error(HTTPStatus.BAD_REQUEST, exc.code, str(exc))
        except ValueError as exc:
            return self._error(HTTPStatus.BAD_REQUEST, "bad-request", str(exc))
        self._reply(HTTPStatus.OK, encode_frames(page, next_cursor), "application/octet-stream",
                    {"X-Next-Cursor": str(next_cursor), CURVE_HEADER: self.store.params.curve_id.value})


def make_server(store: ReportStore, host: str = "127.0.0.1", port: int = 8787) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"store": store})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve_in_thread(store: ReportStore, host="127.0.0.1", port=0):
    """Start a server on a background thread; returns (server, base_url)."""
    server = make_server(store, host, port)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    h, p = server.server_address[:2]
    return server, f"http://{h}:{p}"


class ServiceUnavailable(OSError):
    pass


class AuthorityClient:
    def __init__(self, base_url: str, params: GroupParams, token: str | None = None, timeout=30.0):
        self.base_url = base_url.rstrip("/")
        self.params = params
        self.token = token
        self.timeout = timeout

    def _open(self, req):
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read()
        except urllib.error.HTTPError as exc:
            try:
                info = json.loads(exc.read() or b"{}")
            except ValueError:
                info = {}
            code, detail = info.get("error", ""), info.get("detail", str(exc))
            if code == "unauthorized":
                raise Unauthorized(detail) from None
            if code == "curve-mismatch":
                raise CurveMismatch(detail) from None
            if code == "invalid-cursor":
                raise InvalidCursor(detail) from None
            if code == "malformed-entry":
                raise MalformedEntry(info.get("index", -1), detail) from None
            raise DecodeError(f"{exc.code}: {detail}") from None
        except urllib.error.URLError as exc:
            raise ServiceUnavailable(str(exc.reason)) from None

    def submit(self, report) -> str:
        """Upload a PublishedReport, a list of beacons, or an already encoded body."""
        if isinstance(report, (bytes, bytearray)):
            body = bytes(report)
        else:
            body = encode_report_body(report.entries if isinstance(report, PublishedReport) else report)
        req = urllib.request.Request(
            f"{self.base_url}/v1/reports", data=body, method="POST",
            headers={"Content-Type": "application/octet-stream",
                     CURVE_HEADER: self.params.curve_id.value,
                     **({"Authorization": f"Bearer {self.token}"} if self.token else {})})
        return json.loads(self._open(req))["report_id"]

    def fetch(self, cursor: int = 0, limit: int = DEFAULT_PAGE) -> tuple[list[PublishedReport], int]:
        qs = urllib.parse.urlencode({"cursor": cursor, "limit": limit})
        return decode_frames(self.params, self._open(f"{self.base_url}/v1/reports?{qs}"))

    def fetch_all(self, cursor: int = 0, limit: int = DEFAULT_PAGE) -> tuple[list[PublishedReport], int]:
        out = []
        while True:
            page, cursor = self.fetch(cursor, limit)
            if not page:
                return out, cursor
            out.extend(page)
