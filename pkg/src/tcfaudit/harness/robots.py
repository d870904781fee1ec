"""Crawl gating: robots.txt authorization and reachability.

Sites are fetched at ``https://www.<domain>/robots.txt`` first, falling
back to HTTP on network errors and to the bare domain when the ``www``
name does not resolve. Loading uses a 10-second timeout by default and
gives up after three timeouts. A missing robots.txt (404) means
crawling is allowed.

Rule matching follows the robot exclusion convention: the group with
the most specific User-agent match applies, the longest matching path
rule wins, and Allow beats Disallow on equal length. Crawl-delay is
ignored; this gate only decides allow versus deny.
"""

from __future__ import annotations

import logging
import socket
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

__all__ = ["AccessStatus", "RobotsRules", "parse_robots", "check_site_access", "check_many"]

log = logging.getLogger(__name__)

DEFAULT_AGENT = "tcfaudit"
DEFAULT_TIMEOUT = 10.0
DEFAULT_ATTEMPTS = 3


class AccessStatus(Enum):
    ALLOWED = "allowed"
    DISALLOWED_BY_ROBOTS = "disallowed_by_robots"
    UNREACHABLE = "unreachable"


@dataclass
class _Group:
    agents: list[str]
    rules: list[tuple[str, bool]]  # (path prefix, allow)


class RobotsRules:
    def __init__(self, groups: list[_Group]):
        self._groups = groups

    def _group_for(self, agent: str) -> _Group | None:
        agent = agent.lower()
        best: _Group | None = None
        best_len = -1
        fallback: _Group | None = None
        for group in self._groups:
            for name in group.agents:
                if name == "*":
                    if fallback is None:
                        fallback = group
                elif name in agent and len(name) > best_len:
                    best = group
                    best_len = len(name)
        return best or fallback

    def allowed(self, path: str, agent: str = DEFAULT_AGENT) -> bool:
        group = self._group_for(agent)
        if group is None:
            return True
        if not path.startswith("/"):
            path = "/" + path
        verdict = True
        longest = -1
        for prefix, allow in group.rules:
            if path.startswith(prefix) and (
                len(prefix) > longest or (len(prefix) == longest and allow)
            ):
                verdict = allow
                longest = len(prefix)
        return verdict


def parse_robots(text: str) -> RobotsRules:
    groups: list[_Group] = []
    current: _Group | None = None
    last_was_agent = False
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line or ":" not in line:
            continue
        key, _, value = line.partition(":")
        key = key.strip().lower()
        value = value.strip()
        if key == "user-agent":
            if current is None or not last_was_agent:
                current = _Group(agents=[], rules=[])
                groups.append(current)
            current.agents.append(value.lower())
            last_was_agent = True
            continue
        last_was_agent = False
        if key in ("disallow", "allow") and current is not None:
            if key == "disallow" and not value:
                continue  # empty Disallow means allow everything
            current.rules.append((value, key == "allow"))
    return RobotsRules(groups)


def _fetch(url: str, agent: str, timeout: float) -> tuple[int, str]:
    request = urllib.request.Request(url, headers={"User-Agent": agent})
    with urllib.request.urlopen(request, timeout=timeout) as response:
        body = response.read(512 * 1024)
        return response.status, body.decode("utf-8", errors="replace")


def _resolves(host: str) -> bool:
    try:
        socket.getaddrinfo(host, None)
        return True
    except OSError:
        return False


def _is_timeout(exc: Exception) -> bool:
    if isinstance(exc, (TimeoutError, socket.timeout)):
        return True
    reason = getattr(exc, "reason", None)
    return isinstance(reason, (TimeoutError, socket.timeout))


def check_site_access(
    domain: str,
    agent: str = DEFAULT_AGENT,
    timeout: float = DEFAULT_TIMEOUT,
    attempts: int = DEFAULT_ATTEMPTS,
    path: str = "/",
) -> AccessStatus:
    """Gate one domain: Allowed, DisallowedByRobots, or Unreachable."""
    bare = domain
    www = domain if domain.startswith("www.") else f"www.{domain}"
    hosts = [www] if _resolves(www.split(":")[0]) else []
    if bare != www:
        hosts.append(bare)
    if not hosts:
        hosts = [bare]

    timeouts_left = attempts
    reached_server = False
    for candidate in hosts:
        for scheme in ("https", "http"):
            url = f"{scheme}://{candidate}/robots.txt"
            while timeouts_left > 0:
                try:
                    status, body = _fetch(url, agent, timeout)
                except urllib.error.HTTPError as exc:
                    reached_server = True
                    if exc.code == 404:
                        return AccessStatus.ALLOWED
                    log.debug("robots fetch %s -> HTTP %s", url, exc.code)
                    break  # robots unavailable here, try next scheme/host
                except (urllib.error.URLError, OSError) as exc:
                    if _is_timeout(exc):
                        timeouts_left -= 1
                        log.debug(
                            "robots fetch %s timed out (%d left)", url, timeouts_left
                        )
                        continue
                    log.debug("robots fetch %s failed: %s", url, exc)
                    break  # network-level failure, try next scheme/host
                if status == 200:
                    rules = parse_robots(body)
                    if rules.allowed(path, agent):
                        return AccessStatus.ALLOWED
                    return AccessStatus.DISALLOWED_BY_ROBOTS
                reached_server = True
                break
            if timeouts_left <= 0:
                return AccessStatus.UNREACHABLE
    # the server answered but never produced a usable robots.txt: treat
    # like an absent file (permissive default)
    return AccessStatus.ALLOWED if reached_server else AccessStatus.UNREACHABLE


def check_many(
    domains: list[str],
    agent: str = DEFAULT_AGENT,
    timeout: float = DEFAULT_TIMEOUT,
    attempts: int = DEFAULT_ATTEMPTS,
    parallelism: int = 8,
) -> dict[str, AccessStatus]:
    """Gate a batch of domains with a bounded worker pool."""
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        results = pool.map(
            lambda d: (d, check_site_access(d, agent, timeout, attempts)), domains
        )
        return dict(results)
