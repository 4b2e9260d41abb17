"""Canonical request-path normalization.

Strips scheme/host/query/fragment, collapses slash noise, folds case, and
decodes unreserved percent escapes so superficially different URLs of the
same interface compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from urllib.parse import urlsplit

from .records import HttpRecord

_UNRESERVED = set(
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "0123456789-._~"
)


@dataclass
class NormalizedRequest:
    record_id: int
    method: str
    segments: list[str]
    raw_query_keys: list[str] = field(default_factory=list)
    feature_cache: object | None = None


def _decode_unreserved(path: str) -> str:
    """Decode %XX escapes only when they encode an unreserved ASCII char.

    Reserved escapes (e.g. %2F) are preserved so decoding can never create
    a new segment boundary.
    """
    out = []
    i = 0
    while i < len(path):
        ch = path[i]
        if ch == "%" and i + 3 <= len(path):
            hexpart = path[i + 1 : i + 3]
            try:
                decoded = chr(int(hexpart, 16))
            except ValueError:
                decoded = None
            if decoded is not None and decoded in _UNRESERVED:
                out.append(decoded)
                i += 3
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _query_keys(query: str) -> list[str]:
    """Parameter names in order, duplicates kept."""
    if not query:
        return []
    keys = []
    for pair in query.split("&"):
        if not pair:
            continue
        keys.append(pair.split("=", 1)[0])
    return keys


def normalize(record: HttpRecord) -> NormalizedRequest:
    """Canonicalize a record's URL into (method, path segments)."""
    if record.url.startswith("//") and "://" not in record.url.split("?", 1)[0]:
        # schemeless '//…' is leading slash noise on a relative path, not a
        # network-path reference with an authority component
        raw = record.url.partition("#")[0]
        path, _, query = raw.partition("?")
    else:
        parts = urlsplit(record.url)
        path, query = parts.path, parts.query
    raw_query_keys = _query_keys(query)
    path = _decode_unreserved(path)
    segments = [seg.lower() for seg in path.split("/") if seg]
    return NormalizedRequest(
        record_id=record.id,
        method=record.method,
        segments=segments,
        raw_query_keys=raw_query_keys,
    )


def canonical_path(nr: NormalizedRequest) -> str:
    if not nr.segments:
        return "/"
    return "/" + "/".join(nr.segments)
