"""Command-line interface.

Audits run fully offline from pinned snapshots; only ``check-access``
and ``serve-redirect`` touch the network. Outputs are reproducible:
identical inputs and flags give identical bytes, with no clock reads.

Exit codes: 0 success, 1 input/usage error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .capture import load_sessions, serialize_sessions
from .codec import (
    Bitfield,
    ConsentError,
    ConsentString,
    Range,
    decode_consent_string,
    encode_consent_string,
    render_timestamp,
)
from .engine import audit_record, finding_from_dict, finding_to_dict
from .harness.redirect import run_mock_redirect_server
from .harness.robots import (
    DEFAULT_AGENT,
    DEFAULT_ATTEMPTS,
    DEFAULT_TIMEOUT,
    check_many,
)
from .harness.simulate import InvalidPlan, SimulationPlan, simulate_corpus
from .harness.targets import MalformedRankLine, select_targets
from .registry import (
    SchemaError,
    VendorRegistry,
    load_cmp_list,
    load_purposes,
    load_vendor_list,
)
from .report import (
    InconsistentInputs,
    RecordSummary,
    build_report,
    render_report,
    summarize_record,
)
from .trackers import load_disconnect_list, load_domain_lines

SNAPSHOT_DIR_ENV = "TCFAUDIT_SNAPSHOT_DIR"

_INPUT_ERRORS = (
    ConsentError,
    SchemaError,
    InvalidPlan,
    InconsistentInputs,
    MalformedRankLine,
    FileNotFoundError,
    IsADirectoryError,
    json.JSONDecodeError,
)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _snapshot_path(value: str | None, name: str) -> str | None:
    if value:
        return value
    base = os.environ.get(SNAPSHOT_DIR_ENV)
    if base and (Path(base) / name).exists():
        return str(Path(base) / name)
    return None


def _load_registry(args) -> VendorRegistry:
    registry = VendorRegistry()
    gvl = _snapshot_path(getattr(args, "gvl", None), "gvl.json")
    cmp_list = _snapshot_path(getattr(args, "cmp_list", None), "cmp-list.json")
    purposes = _snapshot_path(getattr(args, "purposes", None), "purposes.json")
    if gvl:
        load_vendor_list(_read(gvl), registry)
    if cmp_list:
        load_cmp_list(_read(cmp_list), registry)
    if purposes:
        load_purposes(_read(purposes), registry)
    return registry


# -- decode / encode -------------------------------------------------------


def _consent_to_json(consent: ConsentString, zone: str | None) -> dict:
    encoding: dict | None = None
    if isinstance(consent.vendor_encoding, Range):
        encoding = {
            "type": "range",
            "defaultConsent": consent.vendor_encoding.default_consent,
            "entries": [list(e) for e in consent.vendor_encoding.entries],
        }
    elif isinstance(consent.vendor_encoding, Bitfield):
        encoding = {"type": "bitfield"}
    return {
        "version": consent.version,
        "created": consent.created,
        "createdText": render_timestamp(consent.created, zone),
        "lastUpdated": consent.last_updated,
        "lastUpdatedText": render_timestamp(consent.last_updated, zone),
        "cmpId": consent.cmp_id,
        "cmpVersion": consent.cmp_version,
        "consentScreen": consent.consent_screen,
        "consentLanguage": consent.consent_language,
        "vendorListVersion": consent.vendor_list_version,
        "allowedPurposeIds": sorted(consent.allowed_purposes),
        "maxVendorId": consent.max_vendor_id,
        "allowedVendorIds": sorted(consent.allowed_vendors),
        "vendorEncoding": encoding,
    }


def _consent_from_json(data: dict) -> ConsentString:
    encoding = None
    raw_encoding = data.get("vendorEncoding")
    if raw_encoding:
        if raw_encoding.get("type") == "bitfield":
            encoding = Bitfield()
        elif raw_encoding.get("type") == "range":
            encoding = Range(
                default_consent=bool(raw_encoding.get("defaultConsent", False)),
                entries=tuple(
                    (int(e[0]), int(e[1])) for e in raw_encoding.get("entries", ())
                ),
            )
        else:
            raise SchemaError(f"unknown vendorEncoding type {raw_encoding!r}")
    return ConsentString(
        version=int(data.get("version", 1)),
        created=int(data["created"]),
        last_updated=int(data.get("lastUpdated", data["created"])),
        cmp_id=int(data["cmpId"]),
        cmp_version=int(data.get("cmpVersion", 0)),
        consent_screen=int(data.get("consentScreen", 0)),
        consent_language=str(data.get("consentLanguage", "EN")),
        vendor_list_version=int(data.get("vendorListVersion", 1)),
        allowed_purposes=frozenset(data.get("allowedPurposeIds", ())),
        max_vendor_id=int(data.get("maxVendorId", 0)),
        allowed_vendors=frozenset(data.get("allowedVendorIds", ())),
        vendor_encoding=encoding,
    )


def _format_vendor_ids(ids: list[int]) -> str:
    if len(ids) <= 8:
        return str(ids)
    head = ", ".join(str(i) for i in ids[:3])
    tail = ", ".join(str(i) for i in ids[-3:])
    return f"[{head} ... {tail}]"


def _cmd_decode(args) -> int:
    consent = decode_consent_string(args.consent_string.strip())
    payload = _consent_to_json(consent, args.zone)
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    encoding = payload["vendorEncoding"]
    encoding_text = "none"
    if encoding is not None:
        encoding_text = encoding["type"]
        if encoding["type"] == "range":
            encoding_text += (
                f" (defaultConsent={str(encoding['defaultConsent']).lower()},"
                f" {len(encoding['entries'])} entries)"
            )
    zone_name = args.zone or "UTC"
    print(f"version: {payload['version']}")
    print(f"created: {payload['createdText']} {zone_name} ({payload['created']} ds)")
    print(
        f"lastUpdated: {payload['lastUpdatedText']} {zone_name} "
        f"({payload['lastUpdated']} ds)"
    )
    print(f"cmpId: {payload['cmpId']}")
    print(f"cmpVersion: {payload['cmpVersion']}")
    print(f"consentScreen: {payload['consentScreen']}")
    print(f"consentLanguage: {payload['consentLanguage']}")
    print(f"vendorListVersion: {payload['vendorListVersion']}")
    print(f"allowedPurposeIds: {payload['allowedPurposeIds']}")
    print(f"maxVendorId: {payload['maxVendorId']}")
    print(
        f"allowedVendorIds: {len(payload['allowedVendorIds'])} vendors "
        f"{_format_vendor_ids(payload['allowedVendorIds'])}"
    )
    print(f"vendorEncoding: {encoding_text}")
    return 0


def _cmd_encode(args) -> int:
    if args.consent_json == "-":
        text = sys.stdin.read()
    else:
        candidate = args.consent_json
        try:
            is_file = not candidate.lstrip().startswith("{") and Path(candidate).exists()
        except OSError:
            is_file = False
        text = _read(candidate) if is_file else candidate
    data = json.loads(text)
    print(encode_consent_string(_consent_from_json(data)))
    return 0


# -- audit / report ---------------------------------------------------------


def _cmd_audit(args) -> int:
    registry = _load_registry(args)
    if not registry.vendors and not registry.cmps:
        print(
            "audit needs at least --gvl or --cmp-list snapshots "
            f"(or ${SNAPSHOT_DIR_ENV})",
            file=sys.stderr,
        )
        return 1
    tracker_list = None
    if args.trackers:
        text = _read(args.trackers)
        if text.lstrip().startswith("{"):
            tracker_list = load_disconnect_list(text)
        else:
            tracker_list = load_domain_lines(text)

    result = load_sessions(_read(args.captures))
    lines = []
    meta = {
        "type": "meta",
        "tool": "tcfaudit",
        "version": __version__,
        "gvl_version": registry.gvl_version or None,
        "records": len(result.records),
        "rejected_lines": len(result.errors),
    }
    lines.append(json.dumps(meta, sort_keys=True, separators=(",", ":")))
    finding_count = 0
    for record in result.records:
        audit = audit_record(record, registry, tracker_list)
        summary = summarize_record(record, audit).to_dict()
        summary["type"] = "record"
        summary["cmp_status"] = audit.cmp.status.value if audit.cmp else None
        summary["cmp_name"] = audit.cmp.name if audit.cmp else None
        summary["anomalies"] = audit.anomalies
        lines.append(json.dumps(summary, sort_keys=True, separators=(",", ":")))
        for finding in audit.findings:
            payload = finding_to_dict(finding)
            payload["type"] = "finding"
            lines.append(json.dumps(payload, sort_keys=True, separators=(",", ":")))
            finding_count += 1
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"audited {len(result.records)} records "
        f"({len(result.errors)} invalid lines skipped), "
        f"{finding_count} suspected violations -> {args.out}"
    )
    return 0


def _read_bundle(path: str):
    summaries: list[RecordSummary] = []
    findings = []
    attribution: dict[str, tuple] = {}
    gvl_version = None
    for line in _read(path).splitlines():
        line = line.strip()
        if not line:
            continue
        data = json.loads(line)
        entry_type = data.get("type")
        if entry_type == "meta":
            gvl_version = data.get("gvl_version")
        elif entry_type == "record":
            summaries.append(RecordSummary.from_dict(data))
            if data.get("cmp_status") is not None:
                attribution[data["domain"]] = (
                    data.get("cmp_status"),
                    data.get("cmp_name"),
                )
        elif entry_type == "finding":
            findings.append(finding_from_dict(data))
        else:
            raise SchemaError(f"unknown bundle entry type {entry_type!r}")
    return summaries, findings, attribution, gvl_version


def _cmd_report(args) -> int:
    summaries, findings, attribution, gvl_version = _read_bundle(args.findings)
    report = build_report(
        findings,
        summaries,
        cmp_attribution=attribution,
        cmp_row_threshold=args.cmp_threshold,
        top_n=args.top,
        gvl_version=gvl_version,
    )
    rendered = render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    return 0


# -- harness ----------------------------------------------------------------


def _cmd_simulate(args) -> int:
    plan = SimulationPlan.from_dict(json.loads(_read(args.plan)))
    if args.seed is not None:
        plan.seed = args.seed
    registry = _load_registry(args)
    records, manifest = simulate_corpus(plan, registry)
    Path(args.out).write_text(serialize_sessions(records), encoding="utf-8")
    if args.manifest:
        Path(args.manifest).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(f"simulated {len(records)} sites (seed {plan.seed}) -> {args.out}")
    return 0


def _cmd_select_targets(args) -> int:
    targets = select_targets(_read(args.ranks), args.tlds, args.cap)
    lines = [f"{t.rank},{t.domain},{t.tld}" for t in targets]
    output = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    print(f"selected {len(targets)} targets", file=sys.stderr)
    return 0


def _cmd_check_access(args) -> int:
    domains = [
        line.strip()
        for line in _read(args.domains).splitlines()
        if line.strip() and not line.startswith("#")
    ]
    results = check_many(
        domains,
        agent=args.agent,
        timeout=args.timeout,
        attempts=args.attempts,
        parallelism=args.parallelism,
    )
    for domain in domains:
        print(f"{domain},{results[domain].value}")
    return 0


def _cmd_serve_redirect(args) -> int:
    server = run_mock_redirect_server(
        port=args.port,
        cmp_subdomain_label=args.label,
        allowed_hosts=tuple(args.allow or ()),
        accept_nonstandard_param=args.accept_nonstandard_param,
    )
    print(
        f"consent redirect endpoint on http://127.0.0.1:{server.port}/redirect "
        f"(as {server.cmp_host}); Ctrl-C to stop"
    )
    try:
        import threading

        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcfaudit",
        description="Compliance-audit toolkit for TCF v1.1 consent banners",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode a consent string")
    p.add_argument("consent_string")
    p.add_argument("--zone", help="IANA zone for timestamp rendering (default UTC)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("encode", help="encode consent JSON into a string")
    p.add_argument("consent_json", help="JSON text, a file path, or - for stdin")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("audit", help="detect suspected violations in captures")
    p.add_argument("--captures", required=True, help="JSON-lines capture file")
    p.add_argument("--gvl", help="Global Vendor List snapshot (JSON)")
    p.add_argument("--cmp-list", dest="cmp_list", help="CMP list snapshot (JSON)")
    p.add_argument("--purposes", help="purpose catalog override (JSON)")
    p.add_argument("--trackers", help="tracker list (Disconnect JSON or plain text)")
    p.add_argument("--out", required=True, help="output bundle (JSON-lines)")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("report", help="aggregate an audit bundle into a report")
    p.add_argument("--findings", required=True, help="audit bundle from `audit --out`")
    p.add_argument(
        "--format", default="json", choices=["json", "csv", "markdown", "md"]
    )
    p.add_argument("--out", help="write here instead of stdout")
    p.add_argument("--cmp-threshold", type=int, default=5, dest="cmp_threshold")
    p.add_argument("--top", type=int, default=20, help="top violating sites per kind")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("simulate", help="generate a seeded corpus with injections")
    p.add_argument("--plan", required=True, help="simulation plan (JSON)")
    p.add_argument("--seed", type=int, help="override the plan's seed")
    p.add_argument("--gvl", help="Global Vendor List snapshot (JSON)")
    p.add_argument("--cmp-list", dest="cmp_list", help="CMP list snapshot (JSON)")
    p.add_argument("--out", required=True, help="corpus output (JSON-lines)")
    p.add_argument("--manifest", help="write the injection manifest here (JSON)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("select-targets", help="pick per-TLD audit targets by rank")
    p.add_argument("--ranks", required=True, help="CSV rank,domain sorted by rank")
    p.add_argument("--tlds", required=True, nargs="+")
    p.add_argument("--cap", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_select_targets)

    p = sub.add_parser("check-access", help="robots.txt and reachability gate")
    p.add_argument("--domains", required=True, help="file with one domain per line")
    p.add_argument("--agent", default=DEFAULT_AGENT)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--attempts", type=int, default=DEFAULT_ATTEMPTS)
    p.add_argument("--parallelism", type=int, default=8)
    p.set_defaults(func=_cmd_check_access)

    p = sub.add_parser("serve-redirect", help="run the mock consent redirector")
    p.add_argument("--port", type=int, default=8228)
    p.add_argument("--label", default="mockcmp", help="consensu.org subdomain label")
    p.add_argument(
        "--allow", nargs="*", help="allow-listed destination hosts", default=[]
    )
    p.add_argument("--accept-nonstandard-param", action="store_true")
    p.set_defaults(func=_cmd_serve_redirect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; remap to input-error code 1
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal error
        import traceback

        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
