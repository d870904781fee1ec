"""Mock consent-redirect endpoint.

Emulates a CMP-owned redirector: a third party requests
``/redirect?redirect_uri=<destination>``, the browser attaches the
``euconsent`` cookie, and the server answers ``302`` with the
destination URL carrying the cookie value in a ``gdpr_consent``
parameter. Destinations must be allow-listed; shipping an open
redirect, even a mock one, is not acceptable.
"""

from __future__ import annotations

import logging
import threading
from http.cookies import SimpleCookie
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

__all__ = ["RedirectServer", "run_mock_redirect_server"]

log = logging.getLogger(__name__)

CONSENT_PARAM = "gdpr_consent"
NONSTANDARD_CONSENT_PARAM = "gdpr_consent_string"
TARGET_PARAM = "redirect_uri"
GDPR_PARAM = "gdpr"
COOKIE_NAME = "euconsent"


def _with_params(url: str, params: list[tuple[str, str]]) -> str:
    parts = urlsplit(url)
    query = parse_qsl(parts.query, keep_blank_values=True) + params
    return urlunsplit(
        (parts.scheme, parts.netloc, parts.path, urlencode(query), parts.fragment)
    )


class _Handler(BaseHTTPRequestHandler):
    server: "RedirectServer"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        log.debug("redirect server: " + format, *args)

    def _cookie_value(self) -> str | None:
        header = self.headers.get("Cookie")
        if not header:
            return None
        cookie = SimpleCookie()
        try:
            cookie.load(header)
        except Exception:
            return None
        morsel = cookie.get(COOKIE_NAME)
        return morsel.value if morsel else None

    def do_GET(self):  # noqa: N802 - stdlib handler name
        parts = urlsplit(self.path)
        if parts.path != "/redirect":
            self.send_error(404, "unknown endpoint")
            return
        params = dict(parse_qsl(parts.query, keep_blank_values=True))

        target = params.get(TARGET_PARAM)
        if not target:
            self.send_error(400, f"missing {TARGET_PARAM} parameter")
            return
        target_host = urlsplit(target).hostname
        if not target_host or target_host not in self.server.allowed_hosts:
            self.send_error(400, "destination not allow-listed")
            return

        extra: list[tuple[str, str]] = []
        if GDPR_PARAM in params:
            extra.append((GDPR_PARAM, params[GDPR_PARAM]))

        consent = self._cookie_value()
        if consent is not None:
            extra.append((CONSENT_PARAM, consent))
        else:
            # passthrough of a consent value the caller already holds
            if CONSENT_PARAM in params:
                extra.append((CONSENT_PARAM, params[CONSENT_PARAM]))
            elif (
                self.server.accept_nonstandard_param
                and NONSTANDARD_CONSENT_PARAM in params
            ):
                extra.append(
                    (NONSTANDARD_CONSENT_PARAM, params[NONSTANDARD_CONSENT_PARAM])
                )

        self.send_response(302)
        self.send_header("Location", _with_params(target, extra))
        self.send_header("X-Cmp-Host", self.server.cmp_host)
        self.send_header("Content-Length", "0")
        self.end_headers()


class RedirectServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(
        self,
        port: int = 0,
        cmp_subdomain_label: str = "mockcmp",
        allowed_hosts: tuple[str, ...] = (),
        accept_nonstandard_param: bool = False,
    ):
        super().__init__(("127.0.0.1", port), _Handler)
        self.cmp_host = f"{cmp_subdomain_label}.consensu.org"
        self.allowed_hosts = frozenset(allowed_hosts)
        self.accept_nonstandard_param = accept_nonstandard_param
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> "RedirectServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.server_close()

    def __enter__(self) -> "RedirectServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def run_mock_redirect_server(
    port: int,
    cmp_subdomain_label: str = "mockcmp",
    allowed_hosts: tuple[str, ...] = (),
    accept_nonstandard_param: bool = False,
) -> RedirectServer:
    """Start the redirect service on a background thread and return it.

    ``port`` 0 picks a free port (see ``server.port``).
    """
    server = RedirectServer(
        port=port,
        cmp_subdomain_label=cmp_subdomain_label,
        allowed_hosts=allowed_hosts,
        accept_nonstandard_param=accept_nonstandard_param,
    )
    return server.start()
