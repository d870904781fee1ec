"""Robots gating tests against local mock HTTP servers."""

import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from tcfaudit.harness import AccessStatus, check_site_access, parse_robots
from tcfaudit.harness.robots import check_many


class _RobotsHandler(BaseHTTPRequestHandler):
    body: bytes = b""
    status: int = 200
    delay: float = 0.0

    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.delay:
            time.sleep(self.delay)
        if self.status == 404:
            self.send_error(404)
            return
        self.send_response(self.status)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(self.body)))
        self.end_headers()
        self.wfile.write(self.body)


@pytest.fixture
def serve():
    servers = []

    def start(body: bytes = b"", status: int = 200, delay: float = 0.0):
        handler = type(
            "Handler", (_RobotsHandler,), {"body": body, "status": status, "delay": delay}
        )
        server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        server.daemon_threads = True
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return f"127.0.0.1:{server.server_address[1]}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()


class TestParser:
    def test_deny_all(self):
        rules = parse_robots("User-agent: *\nDisallow: /")
        assert not rules.allowed("/", "anybot")

    def test_empty_disallow_allows(self):
        rules = parse_robots("User-agent: *\nDisallow:")
        assert rules.allowed("/", "anybot")

    def test_longest_match_wins_allow_on_tie(self):
        text = "User-agent: *\nDisallow: /private\nAllow: /private/ok\n"
        rules = parse_robots(text)
        assert not rules.allowed("/private/page")
        assert rules.allowed("/private/ok/page")
        tie = parse_robots("User-agent: *\nDisallow: /a\nAllow: /a\n")
        assert tie.allowed("/a/x")

    def test_specific_agent_group_preferred(self):
        text = (
            "User-agent: *\nDisallow:\n\n"
            "User-agent: tcfaudit\nDisallow: /\n"
        )
        rules = parse_robots(text)
        assert not rules.allowed("/", "tcfaudit")
        assert rules.allowed("/", "otherbot")

    def test_stacked_agents_share_rules(self):
        text = "User-agent: a\nUser-agent: b\nDisallow: /\n"
        rules = parse_robots(text)
        assert not rules.allowed("/", "a")
        assert not rules.allowed("/", "b")

    def test_no_groups_means_allowed(self):
        assert parse_robots("").allowed("/")


class TestGate:
    def test_allow_rules(self, serve):
        domain = serve(body=b"User-agent: *\nDisallow: /private\n")
        assert check_site_access(domain, timeout=2.0) is AccessStatus.ALLOWED

    def test_deny_all(self, serve):
        domain = serve(body=b"User-agent: *\nDisallow: /\n")
        assert (
            check_site_access(domain, timeout=2.0)
            is AccessStatus.DISALLOWED_BY_ROBOTS
        )

    def test_missing_robots_is_allowed(self, serve):
        domain = serve(status=404)
        assert check_site_access(domain, timeout=2.0) is AccessStatus.ALLOWED

    def test_triple_timeout_unreachable(self, serve):
        timeout = 0.4
        domain = serve(body=b"irrelevant", delay=5.0)
        start = time.monotonic()
        status = check_site_access(domain, timeout=timeout, attempts=3)
        elapsed = time.monotonic() - start
        assert status is AccessStatus.UNREACHABLE
        assert elapsed < 3 * timeout + 2.0  # three attempts plus slack

    def test_unresolvable_host_unreachable(self):
        status = check_site_access(
            "no-such-host.invalid", timeout=1.0, attempts=1
        )
        assert status is AccessStatus.UNREACHABLE

    def test_check_many_parallel(self, serve):
        allowed = serve(status=404)
        denied = serve(body=b"User-agent: *\nDisallow: /\n")
        results = check_many([allowed, denied], timeout=2.0, parallelism=4)
        assert results[allowed] is AccessStatus.ALLOWED
        assert results[denied] is AccessStatus.DISALLOWED_BY_ROBOTS
