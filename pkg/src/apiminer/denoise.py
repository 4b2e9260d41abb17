"""Non-API traffic filtering: cascaded rule signals plus a logistic sanity gate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .records import Dataset, HttpRecord, STRUCTURED_CONTENT_PREFIXES
from .normalize import normalize
from .templates import is_variable_segment

READ_VERBS = {"GET", "HEAD", "OPTIONS"}

DEFAULT_STATIC_EXTENSIONS = frozenset(
    {
        "js", "css", "png", "jpg", "jpeg", "gif", "svg", "ico",
        "html", "htm", "woff", "woff2", "ttf", "mp4", "map",
    }
)
DEFAULT_STATIC_PATH_MARKERS = (
    "/static/", "/assets/", "/images/", "/img/", "/fonts/", "/media/", "/cdn-cgi/",
)
DEFAULT_NON_API_CONTENT_TYPES = (
    "text/html", "image/", "font/", "audio/", "video/",
    "application/zip", "application/gzip",
)

# Drop reason tags, cascade order.
STATIC_EXTENSION = "StaticExtension"
STATIC_PATH_PATTERN = "StaticPathPattern"
MISSING_CONTENT_TYPE = "MissingContentType"
NON_API_CONTENT_TYPE = "NonApiContentType"
LOGISTIC_GATE = "LogisticGate"

# Logistic gate weights over the feature vector
# (bias, method-is-read, path-depth, has-identifier-placeholder, has-query,
#  is-structured-payload).  The gate is deliberately permissive:
# a plain JSON API call scores >= 0.9 while a featureless record scores < 0.01.
DEFAULT_LOGISTIC_WEIGHTS = (-5.0, 1.0, 1.5, 1.0, 0.5, 3.0)
DEFAULT_TAU = 0.01


@dataclass
class FilterConfig:
    static_extensions: frozenset[str] = DEFAULT_STATIC_EXTENSIONS
    static_path_markers: tuple[str, ...] = DEFAULT_STATIC_PATH_MARKERS
    non_api_content_types: tuple[str, ...] = DEFAULT_NON_API_CONTENT_TYPES
    logistic_weights: tuple[float, ...] = DEFAULT_LOGISTIC_WEIGHTS
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ValueError(f"tau must be in (0,1), got {self.tau}")
        if len(self.logistic_weights) != 6:
            raise ValueError("logistic_weights must have 6 components")


@dataclass
class FilterOutcome:
    kept: list[int] = field(default_factory=list)
    dropped: list[tuple[int, str]] = field(default_factory=list)


def _path_and_query(url: str) -> tuple[str, str]:
    from urllib.parse import urlsplit

    parts = urlsplit(url)
    return parts.path, parts.query


def rule_signal(record: HttpRecord, config: FilterConfig) -> str | None:
    """First matching drop reason in cascade order, or None."""
    path, _query = _path_and_query(record.url)
    last_segment = path.rsplit("/", 1)[-1]
    if "." in last_segment:
        ext = last_segment.rsplit(".", 1)[-1].lower()
        if ext in config.static_extensions:
            return STATIC_EXTENSION
    lowered = path.lower()
    if not lowered.endswith("/"):
        lowered = lowered + "/"
    for marker in config.static_path_markers:
        if marker in lowered:
            return STATIC_PATH_PATTERN
    if record.content_type is None:
        return MISSING_CONTENT_TYPE
    ct = record.content_type.lower()
    for prefix in config.non_api_content_types:
        if ct.startswith(prefix):
            return NON_API_CONTENT_TYPE
    return None


def gate_features(record: HttpRecord) -> tuple[float, ...]:
    """Structural feature vector x for the logistic gate."""
    path, query = _path_and_query(record.url)
    segments = [s for s in path.split("/") if s]
    has_placeholder = any(is_variable_segment(s) for s in segments)
    ct = (record.content_type or "").lower()
    structured = ct.startswith(STRUCTURED_CONTENT_PREFIXES)
    return (
        1.0,
        1.0 if record.method in READ_VERBS else 0.0,
        float(len(segments)),
        1.0 if has_placeholder else 0.0,
        1.0 if query else 0.0,
        1.0 if structured else 0.0,
    )


def sanity_score(record: HttpRecord, config: FilterConfig) -> float:
    """sigma(w . x), strictly inside (0, 1)."""
    z = sum(w * x for w, x in zip(config.logistic_weights, gate_features(record)))
    return 1.0 / (1.0 + math.exp(-z))


def filter_traffic(dataset: Dataset, config: FilterConfig | None = None) -> FilterOutcome:
    """Partition records into kept / dropped-with-reason, preserving input order."""
    config = config or FilterConfig()
    outcome = FilterOutcome()
    for record in dataset.records:
        reason = rule_signal(record, config)
        if reason is None and sanity_score(record, config) < config.tau:
            reason = LOGISTIC_GATE
        if reason is None:
            outcome.kept.append(record.id)
        else:
            outcome.dropped.append((record.id, reason))
    return outcome
