"""tcfaudit: compliance-audit toolkit for TCF v1.1 consent banners.

Decodes and encodes consent strings bit-exactly, ingests captured audit
sessions, detects suspected GDPR/ePD violation patterns, aggregates
them into reports, and verifies itself against a seeded simulator.
"""

__version__ = "0.1.0"

from .codec import (  # noqa: F401
    ConsentString,
    decode_consent_string,
    encode_consent_string,
)
from .registry import VendorRegistry, identify_cmp  # noqa: F401
from .capture import SessionRecord, load_sessions  # noqa: F401
from .engine import ViolationFinding, ViolationKind, audit_record  # noqa: F401
from .report import AuditReport, build_report, render_report  # noqa: F401
