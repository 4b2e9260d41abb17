"""Seeded synthetic traffic corpus with per-request ground-truth labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import Dataset, HttpRecord

_HOST = "https://app.example.com"

# Resource nouns with pairwise edit distance >= 2 so that typo-tolerant
# template routing can never confuse two different endpoints.
_RESOURCE_WORDS = (
    "orders", "invoices", "customers", "payments", "shipments",
    "products", "reviews", "sessions", "tickets", "warehouses",
    "refunds", "vehicles", "bookings", "employees", "suppliers",
    "catalogs", "messages", "accounts", "licenses", "channels",
    "devices", "regions", "baskets", "coupons", "audit-logs", "price-rules",
)
_TAIL_WORDS = ("status", "history", "details", "summary", "comments", "ratings")

_METHOD_MIX = ("GET", "POST", "GET", "PUT", "DELETE")
_ID_STYLES = ("int", "uuid", "hex")
_QUERY_PROFILES = ((), ("page", "limit"), ("sort",), ("page",))

# Endpoints come in pairs every TWIN_STRIDE indices: the pair shares one path
# template and method but exposes two behavioral profiles (query-driven reads
# vs. payload-driven writes), so only second-stage refinement can tell the two
# endpoints apart.
TWIN_STRIDE = 20


@dataclass(frozen=True)
class CorpusSpec:
    endpoint_count: int = 20
    requests_per_endpoint: int = 50
    id_styles: tuple[str, ...] = _ID_STYLES
    method_mix: tuple[str, ...] = _METHOD_MIX
    depth_range: tuple[int, int] = (3, 5)
    seed: int = 42

    def __post_init__(self):
        if self.endpoint_count < 1 or self.requests_per_endpoint < 1:
            raise ValueError("all counts must be >= 1")
        if not self.id_styles or not self.method_mix:
            raise ValueError("id_styles and method_mix must be non-empty")
        lo, hi = self.depth_range
        if not (1 <= lo <= hi):
            raise ValueError("invalid depth_range")


def _word(index: int) -> str:
    base = _RESOURCE_WORDS[index % len(_RESOURCE_WORDS)]
    tier = index // len(_RESOURCE_WORDS)
    if tier == 0:
        return base
    if tier - 1 < len(_TAIL_WORDS):
        return base + "-" + _TAIL_WORDS[tier - 1]
    raise ValueError("endpoint_count exceeds the distinct-vocabulary budget")


def _id_value(style: str, rng: np.random.Generator) -> str:
    if style == "int":
        return str(int(rng.integers(100, 999999)))
    if style == "uuid":
        raw = rng.bytes(16).hex()
        return f"{raw[0:8]}-{raw[8:12]}-{raw[12:16]}-{raw[16:20]}-{raw[20:32]}"
    if style == "hex":
        return rng.bytes(8).hex()
    raise ValueError(f"unknown id style {style!r}")


@dataclass(frozen=True)
class _EndpointPlan:
    label: str
    method: str
    prefix: tuple[str, ...]      # fixed segments before the id position
    has_id: bool
    tail: str | None             # fixed segment after the id position
    id_style: str
    query_keys: tuple[str, ...]
    # (body_size, field_count, nesting); twin-B endpoints alternate between
    # the two entries, everyone else uses a single constant entry
    body_profiles: tuple[tuple[int, int, int], ...]


def _plan_endpoints(spec: CorpusSpec) -> list[_EndpointPlan]:
    lo, hi = spec.depth_range
    plans: list[_EndpointPlan] = []
    for i in range(spec.endpoint_count):
        label = f"EP_{i:02d}"
        twin_a = (i % TWIN_STRIDE == TWIN_STRIDE - 2) and (i + 1 < spec.endpoint_count)
        twin_b = i % TWIN_STRIDE == TWIN_STRIDE - 1 and i > 0
        if twin_a or twin_b:
            # the pair shares the A-endpoint's resource word and template
            word = _word(i - 1 if twin_b else i)
            prefix = ("api", "v1", word)
            if twin_a:
                plans.append(
                    _EndpointPlan(
                        label=label,
                        method="POST",
                        prefix=prefix,
                        has_id=True,
                        tail=None,
                        id_style=spec.id_styles[i % len(spec.id_styles)],
                        query_keys=("cursor",),
                        body_profiles=((0, 0, 0),),
                    )
                )
            else:
                plans.append(
                    _EndpointPlan(
                        label=label,
                        method="POST",
                        prefix=prefix,
                        has_id=True,
                        tail=None,
                        id_style=spec.id_styles[(i - 1) % len(spec.id_styles)],
                        query_keys=(),
                        body_profiles=((1, 1, 1), (8000, 20, 5)),
                    )
                )
            continue
        word = _word(i)
        # cycle through the depth range, starting one above the minimum so the
        # smallest specs still exercise a variable position
        span = hi - lo + 1
        depth = lo + (i + 1) % span if span > 1 else lo
        has_id = depth >= 4
        tail = _TAIL_WORDS[i % len(_TAIL_WORDS)] if depth >= 5 else None
        method = spec.method_mix[i % len(spec.method_mix)]
        if method in ("POST", "PUT", "PATCH", "DELETE"):
            query_keys: tuple[str, ...] = ()
            body = (120 + 35 * (i % 7), 3 + (i % 5), 1 + (i % 3))
            if method == "DELETE":
                body = (0, 0, 0)
        else:
            query_keys = _QUERY_PROFILES[i % len(_QUERY_PROFILES)]
            body = (0, 0, 0)
        plans.append(
            _EndpointPlan(
                label=label,
                method=method,
                prefix=("api", "v1", word),
                has_id=has_id,
                tail=tail,
                id_style=spec.id_styles[i % len(spec.id_styles)],
                query_keys=query_keys,
                body_profiles=(body,),
            )
        )
    return plans


def synth_corpus(spec: CorpusSpec) -> Dataset:
    """Deterministic labeled corpus: endpoint_count templates, fixed request
    count each, interleaved round-robin the way mixed live traffic arrives."""
    plans = _plan_endpoints(spec)
    rng = np.random.default_rng(spec.seed)
    per_endpoint_rngs = [
        np.random.default_rng(spec.seed * 1_000_003 + i) for i in range(len(plans))
    ]

    records: list[HttpRecord] = []
    ground_truth: dict[int, str] = {}
    for j in range(spec.requests_per_endpoint):
        for e, plan in enumerate(plans):
            erng = per_endpoint_rngs[e]
            segments = list(plan.prefix)
            if plan.has_id:
                segments.append(_id_value(plan.id_style, erng))
            if plan.tail is not None:
                segments.append(plan.tail)
            path = "/" + "/".join(segments)
            if plan.query_keys:
                value_seed = int(erng.integers(1, 500))
                query = "&".join(f"{k}={value_seed + n}" for n, k in enumerate(plan.query_keys))
                url = f"{_HOST}{path}?{query}"
            else:
                url = f"{_HOST}{path}"
            body_size, fields, nesting = plan.body_profiles[j % len(plan.body_profiles)]
            rid = len(records)
            records.append(
                HttpRecord(
                    id=rid,
                    method=plan.method,
                    url=url,
                    headers=[("Content-Type", "application/json")],
                    content_type="application/json",
                    body_size=body_size,
                    body_field_count=fields or None,
                    body_nesting_depth=nesting or None,
                    label=plan.label,
                )
            )
            ground_truth[rid] = plan.label
    # burn one draw from the top-level rng so future spec fields can hook in
    rng.integers(1 << 16)
    return Dataset(records=records, source=f"synth-seed{spec.seed}", ground_truth=ground_truth)
