"""Clinician adjudication of proposed roadmap terms, with an HTTP review API.

Proposed terms that matched at least one in-sample diagnosis code form the
review queue. Decisions land in an append-only JSONL log (written and flushed
before any acknowledgment), so the exported roadmap is a pure function of the
log: replaying it reproduces the export byte for byte. Retention rules are
pluggable; any_approve is the default.
"""

from __future__ import annotations

import json
import os
import threading
import time
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .cohort_store import Cohort
from .errors import InvalidConfig, InvalidVerdict, SchemaViolation, UnknownTerm
from .icd_catalog import Catalog
from .matcher import MatchResult
from .roadmap import (
    AliComponent,
    Provenance,
    Roadmap,
    SearchTerm,
    TermStatus,
    roadmap_csv_text,
)

VERDICTS = ("approve", "reject")

_COMPONENT_ORDER = {component: i for i, component in enumerate(AliComponent)}


@dataclass(frozen=True)
class AdjudicationDecision:
    term_id: str
    reviewer_id: str
    verdict: str
    note: str = ""
    timestamp: float = 0.0

    def to_json(self) -> dict:
        return {
            "term_id": self.term_id,
            "reviewer_id": self.reviewer_id,
            "verdict": self.verdict,
            "note": self.note,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "AdjudicationDecision":
        return cls(
            term_id=str(payload["term_id"]),
            reviewer_id=str(payload["reviewer_id"]),
            verdict=str(payload["verdict"]),
            note=str(payload.get("note", "")),
            timestamp=float(payload.get("timestamp", 0.0)),
        )


@dataclass(frozen=True)
class QueueCode:
    code: str
    description: str
    patient_count: int


@dataclass(frozen=True)
class ReviewQueueItem:
    term: SearchTerm
    codes: tuple[QueueCode, ...]

    @property
    def term_id(self) -> str:
        return self.term.term_id


def build_queue(
    roadmap: Roadmap,
    match_results: list[MatchResult],
    cohort: Cohort | None = None,
    catalog: Catalog | None = None,
) -> list[ReviewQueueItem]:
    """Queue of proposed terms that matched at least one in-sample code.

    Clinician-original terms are pre-retained and never queued; proposed
    terms with no in-sample match have nothing for a reviewer to look at.
    Sorted by component, then phrase.
    """
    code_patients: dict[str, int] = {}
    if cohort is not None:
        for patient in cohort.patients:
            for code in patient.diagnoses:
                code_patients[code] = code_patients.get(code, 0) + 1

    by_term = {result.term_id: result for result in match_results}
    items: list[ReviewQueueItem] = []
    for term in roadmap.terms:
        if term.status is not TermStatus.PROPOSED:
            continue
        result = by_term.get(term.term_id)
        if result is None or not result.in_sample_codes:
            continue
        codes = []
        for code in sorted(result.in_sample_codes):
            entry = catalog.get(code) if catalog is not None else None
            codes.append(QueueCode(
                code=code,
                description=entry.description if entry else "",
                patient_count=code_patients.get(code, 0),
            ))
        items.append(ReviewQueueItem(term=term, codes=tuple(codes)))
    items.sort(key=lambda item: (_COMPONENT_ORDER[item.term.component], item.term.phrase))
    return items


class DecisionStore:
    """Append-only JSONL decision log with derived in-memory tallies.

    The log line is flushed and fsynced before record() returns, so an
    acknowledged decision survives a crash. Later decisions by the same
    reviewer on the same term supersede earlier ones; the full history stays
    in the log.
    """

    def __init__(self, log_path: str | Path, known_term_ids: Iterable[str]):
        self._path = Path(log_path)
        self._known = set(known_term_ids)
        self._lock = threading.Lock()
        self._history: list[AdjudicationDecision] = []
        self._latest: dict[tuple[str, str], AdjudicationDecision] = {}
        if self._path.is_file():
            with self._path.open(encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    self._apply(AdjudicationDecision.from_json(json.loads(line)))

    def _apply(self, decision: AdjudicationDecision) -> None:
        self._history.append(decision)
        self._latest[(decision.term_id, decision.reviewer_id)] = decision

    def record(self, decision: AdjudicationDecision) -> AdjudicationDecision:
        if decision.verdict not in VERDICTS:
            raise InvalidVerdict(decision.verdict)
        if decision.term_id not in self._known:
            raise UnknownTerm(decision.term_id)
        if not decision.reviewer_id.strip():
            raise SchemaViolation("reviewer_id must be non-empty")
        if decision.timestamp == 0.0:
            decision = replace(decision, timestamp=time.time())
        with self._lock:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(decision.to_json(), sort_keys=True) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            self._apply(decision)
        return decision

    def history(self, term_id: str) -> list[AdjudicationDecision]:
        with self._lock:
            return [d for d in self._history if d.term_id == term_id]

    def latest_by_reviewer(self, term_id: str) -> dict[str, str]:
        with self._lock:
            return {
                reviewer: decision.verdict
                for (tid, reviewer), decision in self._latest.items()
                if tid == term_id
            }

    def decided_term_ids(self) -> set[str]:
        with self._lock:
            return {tid for tid, _ in self._latest}

    @property
    def log_path(self) -> Path:
        return self._path


def rule_any_approve(verdicts: Mapping[str, str]) -> bool:
    return any(v == "approve" for v in verdicts.values())


def rule_all_approve(verdicts: Mapping[str, str]) -> bool:
    return bool(verdicts) and all(v == "approve" for v in verdicts.values())


def rule_majority(verdicts: Mapping[str, str]) -> bool:
    approvals = sum(1 for v in verdicts.values() if v == "approve")
    rejections = sum(1 for v in verdicts.values() if v == "reject")
    return approvals > rejections


RETENTION_RULES = {
    "any_approve": rule_any_approve,
    "all_approve": rule_all_approve,
    "majority": rule_majority,
}


def export_adjudicated(
    roadmap: Roadmap,
    store: DecisionStore,
    queue: list[ReviewQueueItem],
    rule: str = "any_approve",
) -> Roadmap:
    """Apply the retention rule and freeze the roadmap.

    Retained: clinician-original terms plus queued terms the rule accepts
    (those move to provenance llm_context_clinician). Every other proposed
    term is excluded. No term is ever invented here.
    """
    if rule not in RETENTION_RULES:
        raise InvalidConfig(f"unknown retention rule: {rule}")
    accept = RETENTION_RULES[rule]
    queued_ids = {item.term_id for item in queue}
    exported: list[SearchTerm] = []
    for term in roadmap.terms:
        if term.provenance is Provenance.CLINICIAN_ORIGINAL:
            exported.append(term)
            continue
        if term.status is not TermStatus.PROPOSED:
            exported.append(term)
            continue
        if term.term_id in queued_ids and accept(store.latest_by_reviewer(term.term_id)):
            exported.append(replace(
                term,
                provenance=Provenance.LLM_CONTEXT_CLINICIAN,
                status=TermStatus.RETAINED,
            ))
        else:
            exported.append(replace(term, status=TermStatus.EXCLUDED))
    return Roadmap(name=f"{roadmap.name}_adjudicated", terms=exported)


def progress(
    roadmap: Roadmap,
    store: DecisionStore,
    queue: list[ReviewQueueItem],
    rule: str = "any_approve",
) -> dict:
    decided = store.decided_term_ids() & {item.term_id for item in queue}
    exported = export_adjudicated(roadmap, store, queue, rule)
    retained = sum(1 for t in exported.terms if t.status is TermStatus.RETAINED)
    return {
        "pending": len(queue) - len(decided),
        "decided": len(decided),
        "retained_if_exported": retained,
    }


# --- HTTP service ------------------------------------------------------------


class AdjudicationService:
    """State shared by all request handler threads."""

    def __init__(
        self,
        roadmap: Roadmap,
        queue: list[ReviewQueueItem],
        store: DecisionStore,
        static_dir: str | Path | None = None,
    ):
        self.roadmap = roadmap
        self.queue = queue
        self.items_by_id = {item.term_id: item for item in queue}
        self.store = store
        self.static_dir = Path(static_dir) if static_dir else None

    def item_json(self, item: ReviewQueueItem) -> dict:
        return {
            "term_id": item.term_id,
            "component": item.term.component.value,
            "phrase": item.term.phrase,
            "provenance": item.term.provenance.value,
            "codes": [
                {
                    "code": c.code,
                    "description": c.description,
                    "patient_count": c.patient_count,
                }
                for c in item.codes
            ],
            "decisions": [d.to_json() for d in self.store.history(item.term_id)],
            "latest": self.store.latest_by_reviewer(item.term_id),
        }


_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".ico": "image/x-icon",
    ".svg": "image/svg+xml",
}


class _Handler(BaseHTTPRequestHandler):
    service: AdjudicationService  # assigned by make_server

    # silence per-request stderr chatter; tests assert on responses
    def log_message(self, format: str, *args) -> None:
        pass

    def _send_json(self, payload: dict | list, status: int = 200) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json({"error": message}, status=status)

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        url = urlparse(self.path)
        service = self.service
        if url.path == "/api/queue":
            self._send_json({
                "items": [service.item_json(item) for item in service.queue],
            })
            return
        if url.path.startswith("/api/terms/"):
            term_id = url.path[len("/api/terms/"):]
            item = service.items_by_id.get(term_id)
            if item is None:
                self._send_error_json(404, f"unknown term: {term_id}")
                return
            self._send_json(service.item_json(item))
            return
        if url.path == "/api/progress":
            rule = parse_qs(url.query).get("rule", ["any_approve"])[0]
            if rule not in RETENTION_RULES:
                self._send_error_json(400, f"unknown retention rule: {rule}")
                return
            self._send_json(progress(service.roadmap, service.store, service.queue, rule))
            return
        if url.path == "/api/export":
            rule = parse_qs(url.query).get("rule", ["any_approve"])[0]
            if rule not in RETENTION_RULES:
                self._send_error_json(400, f"unknown retention rule: {rule}")
                return
            exported = export_adjudicated(
                service.roadmap, service.store, service.queue, rule
            )
            body = roadmap_csv_text(exported).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "text/csv; charset=utf-8")
            self.send_header(
                "Content-Disposition",
                f'attachment; filename="{exported.name}.csv"',
            )
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        self._serve_static(url.path)

    def _serve_static(self, path: str) -> None:
        service = self.service
        if service.static_dir is None:
            self._send_error_json(
                404, "no static UI bundled; use the /api endpoints"
            )
            return
        relative = path.lstrip("/") or "index.html"
        target = (service.static_dir / relative).resolve()
        try:
            target.relative_to(service.static_dir.resolve())
        except ValueError:
            self._send_error_json(404, "not found")
            return
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            self._send_error_json(404, "not found")
            return
        body = target.read_bytes()
        self.send_response(200)
        content_type = _STATIC_TYPES.get(target.suffix.lower(), "application/octet-stream")
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self) -> None:  # noqa: N802 (http.server API)
        url = urlparse(self.path)
        if url.path != "/api/decisions":
            self._send_error_json(404, "not found")
            return
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            payload = json.loads(raw.decode("utf-8"))
            decision = AdjudicationDecision(
                term_id=str(payload["term_id"]),
                reviewer_id=str(payload["reviewer_id"]),
                verdict=str(payload["verdict"]),
                note=str(payload.get("note", "")),
            )
        except (ValueError, KeyError, TypeError):
            self._send_error_json(400, "body must be JSON with term_id, reviewer_id, verdict")
            return
        try:
            recorded = self.service.store.record(decision)
        except UnknownTerm as exc:
            self._send_error_json(404, str(exc))
            return
        except (InvalidVerdict, SchemaViolation) as exc:
            self._send_error_json(400, str(exc))
            return
        item = self.service.items_by_id[recorded.term_id]
        self._send_json({"ok": True, "term": self.service.item_json(item)})


def make_server(
    service: AdjudicationService, host: str = "127.0.0.1", port: int = 8080
) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)
