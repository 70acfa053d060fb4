"""HTTP API: a thin JSON transport over the service layer.

Endpoints:

    GET  /countries                      catalogue of stored series
    GET  /forecast/{country}             ?from=ISO&hours=1..24
    POST /forecast/{country}/issue       run and persist a forecast batch now
    POST /data/{country}                 ?source=total_load|vertical_load, body: CSV
    POST /models/{country}/rebuild       retrain all models for the country
    GET  /quality?from=ISO&to=ISO        audit reports for every country

Responses are JSON; errors carry {"error": {"code", "message", "detail?"}}
with the status picked by the error code (not_found 404, invalid_input 400,
insufficient_data 422, internal 500).
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .errors import InvalidInputError, LoadcastError, NotFoundError
from .series import SOURCES, TOTAL_LOAD
from .service import HTTP_STATUS, Service, error_payload

log = logging.getLogger("loadcast.api")

MAX_BODY_BYTES = 64 * 1024 * 1024


def to_json(payload) -> bytes:
    return (json.dumps(payload, indent=2, allow_nan=False) + "\n").encode("utf-8")


def _single(params: dict, key: str) -> str | None:
    values = params.get(key)
    if not values:
        return None
    if len(values) > 1:
        raise InvalidInputError(f"query parameter {key!r} given more than once")
    return values[0]


class ApiHandler(BaseHTTPRequestHandler):
    server_version = "loadcast"
    protocol_version = "HTTP/1.1"

    @property
    def service(self) -> Service:
        return self.server.service  # type: ignore[attr-defined]

    def log_message(self, format, *args):  # noqa: A002  stdlib signature
        log.debug("%s %s", self.address_string(), format % args)

    def _respond(self, status: int, payload) -> None:
        body = to_json(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _fail(self, exc: LoadcastError) -> None:
        self._respond(HTTP_STATUS[exc.code], error_payload(exc))

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        if length < 0 or length > MAX_BODY_BYTES:
            raise InvalidInputError(f"request body length out of range: {length}")
        return self.rfile.read(length)

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        segments = [s for s in parsed.path.split("/") if s]
        params = parse_qs(parsed.query, keep_blank_values=True)
        try:
            route = self._route(method, segments, params)
        except LoadcastError as exc:
            self._fail(exc)
        except Exception:
            log.exception("unhandled error serving %s %s", method, self.path)
            self._fail(LoadcastError("internal error"))
        else:
            self._respond(*route)

    def _route(self, method: str, segments: list[str], params: dict) -> tuple[int, object]:
        if method == "GET" and segments == ["countries"]:
            return 200, self.service.countries_summary()

        if method == "GET" and segments == ["quality"]:
            from_ = _single(params, "from")
            to = _single(params, "to")
            reports = self.service.quality_reports(from_, to)
            return 200, [report.to_doc() for report in reports]

        if method == "GET" and len(segments) == 2 and segments[0] == "forecast":
            hours = _single(params, "hours")
            return 200, self.service.forecast_window(
                segments[1], from_=_single(params, "from"),
                hours=hours if hours is not None else 24)

        if method == "POST" and len(segments) == 3 and segments[0] == "forecast" \
                and segments[2] == "issue":
            self._read_body()  # drain so keep-alive connections stay usable
            return 200, self.service.issue_forecast(segments[1])

        if method == "POST" and len(segments) == 2 and segments[0] == "data":
            source = _single(params, "source") or TOTAL_LOAD
            if source not in SOURCES:
                raise InvalidInputError(f"unknown source {source!r}")
            return 200, self.service.ingest_csv(segments[1], self._read_body(), source)

        if method == "POST" and len(segments) == 3 and segments[0] == "models" \
                and segments[2] == "rebuild":
            self._read_body()
            return 200, self.service.rebuild(segments[1])

        raise NotFoundError(f"no route for {method} /{'/'.join(segments)}")

    def do_GET(self):  # noqa: N802  stdlib naming
        self._dispatch("GET")

    def do_POST(self):  # noqa: N802
        self._dispatch("POST")


def make_server(service: Service, host: str | None = None,
                port: int | None = None) -> ThreadingHTTPServer:
    host = host if host is not None else service.config.listen_host
    port = port if port is not None else service.config.listen_port
    server = ThreadingHTTPServer((host, port), ApiHandler)
    server.service = service  # type: ignore[attr-defined]
    return server


def serve(service: Service, host: str | None = None, port: int | None = None) -> None:
    server = make_server(service, host, port)
    log.info("listening on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    finally:
        server.server_close()
