"""Traffic filtering: rule cascade and the logistic sanity gate."""

import math

import pytest

from apiminer.denoise import (
    DEFAULT_LOGISTIC_WEIGHTS,
    LOGISTIC_GATE,
    MISSING_CONTENT_TYPE,
    NON_API_CONTENT_TYPE,
    STATIC_EXTENSION,
    STATIC_PATH_PATTERN,
    FilterConfig,
    filter_traffic,
    gate_features,
    rule_signal,
    sanity_score,
)
from apiminer.records import Dataset, HttpRecord


def rec(rid=0, method="GET", url="/api/v1/items", content_type="application/json",
        body_size=0):
    return HttpRecord(
        id=rid, method=method, url=url, content_type=content_type, body_size=body_size
    )


CFG = FilterConfig()


class TestRuleCascade:
    def test_static_extension(self):
        assert rule_signal(rec(url="/app/main.js"), CFG) == STATIC_EXTENSION

    def test_extension_only_on_last_segment(self):
        assert rule_signal(rec(url="/v1.js/items"), CFG) is None

    def test_static_path_marker(self):
        assert rule_signal(rec(url="/static/app"), CFG) == STATIC_PATH_PATTERN

    def test_marker_matches_final_directory(self):
        assert rule_signal(rec(url="/cdn-cgi/trace", content_type=None), CFG) == STATIC_PATH_PATTERN

    def test_missing_content_type(self):
        assert rule_signal(rec(content_type=None), CFG) == MISSING_CONTENT_TYPE

    def test_non_api_content_type(self):
        assert rule_signal(rec(content_type="text/html; charset=utf-8"), CFG) == NON_API_CONTENT_TYPE

    def test_extension_beats_content_type(self):
        # cascade order: the extension rule fires even with an API content type
        assert rule_signal(rec(url="/files/x.png"), CFG) == STATIC_EXTENSION

    def test_clean_api_call_passes_rules(self):
        assert rule_signal(rec(), CFG) is None


class TestGate:
    def test_feature_vector(self):
        x = gate_features(rec(method="GET", url="/api/v1/items/42?page=1"))
        assert x == (1.0, 1.0, 4.0, 1.0, 1.0, 1.0)

    def test_json_post_scores_above_point_nine(self):
        # z = -5 + 0 + 1.5*3 + 0 + 0 + 3 = 2.5
        record = rec(method="POST", url="/api/v1/items", body_size=10)
        z = 2.5
        assert sanity_score(record, CFG) == pytest.approx(1 / (1 + math.exp(-z)))
        assert sanity_score(record, CFG) > 0.9

    def test_pathological_record_scores_below_tau(self):
        # unknown verb, zero depth, no query, unstructured: z = -5
        record = rec(method="BREW", url="/", content_type="application/octet-stream")
        assert sanity_score(record, CFG) == pytest.approx(1 / (1 + math.exp(5)))
        assert sanity_score(record, CFG) < CFG.tau

    def test_score_strictly_inside_unit_interval(self):
        s = sanity_score(rec(), CFG)
        assert 0.0 < s < 1.0


class TestFilterTraffic:
    def test_partition_preserves_order_and_reasons(self):
        ds = Dataset(
            records=[
                rec(rid=0),
                rec(rid=1, url="/static/app.css"),
                rec(rid=2, content_type=None),
                rec(rid=3, method="BREW", url="/", content_type="application/octet-stream"),
                rec(rid=4, url="/api/v1/orders"),
            ]
        )
        outcome = filter_traffic(ds, CFG)
        assert outcome.kept == [0, 4]
        assert outcome.dropped == [
            (1, STATIC_EXTENSION),
            (2, MISSING_CONTENT_TYPE),
            (3, LOGISTIC_GATE),
        ]

    def test_custom_tau_overrides(self):
        strict = FilterConfig(tau=0.999999)
        ds = Dataset(records=[rec(rid=0)])
        assert filter_traffic(ds, strict).kept == []


class TestConfigValidation:
    def test_tau_bounds(self):
        with pytest.raises(ValueError):
            FilterConfig(tau=0.0)
        with pytest.raises(ValueError):
            FilterConfig(tau=1.0)

    def test_weight_arity(self):
        with pytest.raises(ValueError):
            FilterConfig(logistic_weights=(1.0, 2.0))

    def test_default_weights_documented_shape(self):
        assert len(DEFAULT_LOGISTIC_WEIGHTS) == 6
