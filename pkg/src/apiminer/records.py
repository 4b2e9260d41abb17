"""Traffic ingestion: HAR and JSONL capture files into a uniform record list."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

KNOWN_VERBS = {"GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"}

STRUCTURED_CONTENT_PREFIXES = (
    "application/json",
    "application/x-www-form-urlencoded",
    "multipart/form-data",
    "application/xml",
    "text/json",
)

# Canonical JSONL field order for write_dataset / round-trip stability.
_FIELD_ORDER = (
    "id",
    "method",
    "url",
    "headers",
    "content_type",
    "body_size",
    "body_field_count",
    "body_nesting_depth",
    "label",
)


class IngestError(ValueError):
    """Raised for malformed capture input."""


@dataclass
class HttpRecord:
    id: int
    method: str
    url: str
    headers: list[tuple[str, str]] = field(default_factory=list)
    content_type: str | None = None
    body_size: int = 0
    body_field_count: int | None = None
    body_nesting_depth: int | None = None
    label: str | None = None

    def __post_init__(self):
        self.method = self.method.upper()
        if self.body_size < 0:
            self.body_size = 0
        if self.body_size == 0:
            # no body implies no structure metrics
            if self.body_field_count:
                self.body_field_count = 0
            if self.body_nesting_depth:
                self.body_nesting_depth = 0

    @property
    def known_verb(self) -> bool:
        return self.method in KNOWN_VERBS


@dataclass
class Dataset:
    records: list[HttpRecord] = field(default_factory=list)
    source: str = ""
    ground_truth: dict[int, str] = field(default_factory=dict)
    # entries skipped with a warning during ingest (e.g. HAR entry without url)
    skipped: int = 0

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise IngestError("duplicate record ids in dataset")
        for rid in self.ground_truth:
            if rid not in set(ids):
                raise IngestError(f"ground_truth refers to unknown record id {rid}")

    def __len__(self) -> int:
        return len(self.records)


def _header_lookup(headers: list[tuple[str, str]], name: str) -> str | None:
    """Case-insensitive header lookup, first occurrence wins."""
    lname = name.lower()
    for hname, hvalue in headers:
        if hname.lower() == lname:
            return hvalue
    return None


def _json_structure(text: str) -> tuple[int, int]:
    """Top-level field count and nesting depth of a JSON body, (0, 0) if opaque."""
    try:
        obj = json.loads(text)
    except (ValueError, TypeError):
        return 0, 0

    def depth(node) -> int:
        if isinstance(node, dict):
            return 1 + max((depth(v) for v in node.values()), default=0)
        if isinstance(node, list):
            return 1 + max((depth(v) for v in node), default=0)
        return 0

    if isinstance(obj, dict):
        return len(obj), depth(obj)
    if isinstance(obj, list):
        return len(obj), depth(obj)
    return 0, depth(obj)


def parse_har(data: bytes) -> Dataset:
    """Parse a HAR 1.2 document into a Dataset.

    Only the request side of each entry is consumed.  Entries lacking a
    request URL are skipped and counted in ``Dataset.skipped``.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise IngestError(f"HAR is not valid UTF-8 at byte {exc.start}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed HAR document at byte offset {exc.pos}") from exc
    if not isinstance(doc, dict) or "log" not in doc:
        raise IngestError("malformed HAR document: missing top-level 'log'")
    entries = doc["log"].get("entries", [])
    if not isinstance(entries, list):
        raise IngestError("malformed HAR document: log.entries is not a list")

    records: list[HttpRecord] = []
    ground_truth: dict[int, str] = {}
    skipped = 0
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict) or "request" not in entry:
            raise IngestError(f"malformed HAR entry at index {index}: missing request")
        request = entry["request"]
        url = request.get("url")
        if not url:
            skipped += 1
            continue
        headers = [
            (h.get("name", ""), h.get("value", ""))
            for h in request.get("headers", [])
        ]
        content_type = _header_lookup(headers, "Content-Type")
        body_size = max(0, int(request.get("bodySize") or 0))
        field_count = None
        nesting = None
        post_data = request.get("postData")
        if body_size > 0 and post_data and content_type:
            if content_type.lower().startswith(STRUCTURED_CONTENT_PREFIXES[0]):
                field_count, nesting = _json_structure(post_data.get("text", ""))
        rid = len(records)
        record = HttpRecord(
            id=rid,
            method=str(request.get("method", "GET")),
            url=url,
            headers=headers,
            content_type=content_type,
            body_size=body_size,
            body_field_count=field_count,
            body_nesting_depth=nesting,
        )
        records.append(record)
    return Dataset(records=records, source="har", ground_truth=ground_truth, skipped=skipped)


def parse_jsonl(text: str) -> Dataset:
    """Parse JSONL capture text, one request object per non-empty line."""
    records: list[HttpRecord] = []
    ground_truth: dict[int, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"malformed JSONL object at line {lineno}: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise IngestError(f"malformed JSONL object at line {lineno}: not an object")
        if "method" not in obj or "url" not in obj:
            raise IngestError(f"malformed JSONL object at line {lineno}: missing method/url")
        headers = [tuple(h) for h in obj.get("headers", [])]
        rid = len(records)
        record = HttpRecord(
            id=rid,
            method=str(obj["method"]),
            url=str(obj["url"]),
            headers=headers,
            content_type=obj.get("content_type"),
            body_size=int(obj.get("body_size", 0)),
            body_field_count=obj.get("body_field_count"),
            body_nesting_depth=obj.get("body_nesting_depth"),
            label=obj.get("label"),
        )
        records.append(record)
        if record.label is not None:
            ground_truth[rid] = record.label
    return Dataset(records=records, source="jsonl", ground_truth=ground_truth)


def write_dataset(dataset: Dataset) -> str:
    """Emit the canonical JSONL form; parse_jsonl(write_dataset(d)) == d."""
    lines = []
    for record in dataset.records:
        obj = {
            "id": record.id,
            "method": record.method,
            "url": record.url,
            "headers": [list(h) for h in record.headers],
            "content_type": record.content_type,
            "body_size": record.body_size,
            "body_field_count": record.body_field_count,
            "body_nesting_depth": record.body_nesting_depth,
            "label": record.label,
        }
        out = {k: obj[k] for k in _FIELD_ORDER if obj[k] is not None or k in ("id", "method", "url")}
        # headers/body_size always emitted for stability
        out.setdefault("headers", [])
        out.setdefault("body_size", 0)
        lines.append(json.dumps(out, separators=(",", ":"), sort_keys=False))
    return "\n".join(lines) + ("\n" if lines else "")
