"""Test harness: seeded corpus simulator with violation injection, a
mock consent-redirect HTTP server, robots/reachability gating, and
rank-list target selection."""

from .robots import AccessStatus, check_site_access, parse_robots
from .redirect import RedirectServer, run_mock_redirect_server
from .simulate import InvalidPlan, SimulationPlan, SiteSpec, simulate_corpus
from .targets import MalformedRankLine, select_targets

__all__ = [
    "AccessStatus",
    "check_site_access",
    "parse_robots",
    "RedirectServer",
    "run_mock_redirect_server",
    "InvalidPlan",
    "SimulationPlan",
    "SiteSpec",
    "simulate_corpus",
    "MalformedRankLine",
    "select_targets",
]
