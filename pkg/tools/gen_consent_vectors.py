#!/usr/bin/env python3
"""Regenerate the shared consent-string vector file.

The vector file pins decoder parity between the Python codec and the
browser extension: both must produce these exact fields for each raw
string. Output is deterministic (fixed seed).

Usage: python tools/gen_consent_vectors.py [out_path]
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from helpers import FIG3_STRING, random_consent  # noqa: E402
from tcfaudit.codec import (  # noqa: E402
    ConsentString,
    decode_consent_string,
    encode_consent_string,
    render_timestamp,
)

SEED = 190923
COUNT = 60


def vector_for(raw: str) -> dict:
    c = decode_consent_string(raw)
    return {
        "raw": raw,
        "decoded": {
            "version": c.version,
            "created": c.created,
            "createdText": render_timestamp(c.created),
            "lastUpdated": c.last_updated,
            "cmpId": c.cmp_id,
            "cmpVersion": c.cmp_version,
            "consentScreen": c.consent_screen,
            "consentLanguage": c.consent_language,
            "vendorListVersion": c.vendor_list_version,
            "allowedPurposeIds": sorted(c.allowed_purposes),
            "maxVendorId": c.max_vendor_id,
            "allowedVendorIds": sorted(c.allowed_vendors),
        },
    }


def build_vectors() -> list[dict]:
    vectors = [vector_for(FIG3_STRING)]
    empty = ConsentString(created=0, last_updated=0, cmp_id=0, vendor_list_version=0)
    vectors.append(vector_for(encode_consent_string(empty)))
    rng = random.Random(SEED)
    while len(vectors) < COUNT:
        c = random_consent(rng)
        if c.max_vendor_id > 300:  # keep the committed file compact
            continue
        vectors.append(vector_for(encode_consent_string(c)))
    return vectors


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "shared" / "consent_vectors.json"
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(build_vectors(), indent=1) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
