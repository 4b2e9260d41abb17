"""Structural template mining."""

import itertools

import pytest

from apiminer.normalize import normalize
from apiminer.records import HttpRecord
from apiminer.templates import (
    MinerConfig,
    PathTemplate,
    is_variable_segment,
    match,
    mine,
    _edit_distance_at_most_one,
)


def nr(url, method="GET", rid=0):
    return normalize(HttpRecord(id=rid, method=method, url=url))


def mine_urls(urls, method="GET", config=None):
    requests = [nr(u, method=method, rid=i) for i, u in enumerate(urls)]
    return mine(requests, config)


class TestVariableDetection:
    @pytest.mark.parametrize(
        "segment",
        [
            "42",
            "0",
            "550e8400-e29b-41d4-a716-446655440000",
            "deadbeef",
            "a1b2c3d4e5f6a7b8",
            "user1234abcd5678efgh",  # long with >= 30% digits
            "a1b2c3",  # three digit runs
        ],
    )
    def test_variable(self, segment):
        assert is_variable_segment(segment)

    @pytest.mark.parametrize(
        "segment", ["items", "v1x", "user-profile", "order", "cafe", "beef"]
    )
    def test_fixed(self, segment):
        assert not is_variable_segment(segment)


class TestEditDistanceHelper:
    def test_against_brute_force(self):
        def levenshtein(a, b):
            prev = list(range(len(b) + 1))
            for i, ca in enumerate(a, 1):
                cur = [i]
                for j, cb in enumerate(b, 1):
                    cur.append(
                        min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (ca != cb))
                    )
                prev = cur
            return prev[-1]

        words = ["order", "order_", "ordr", "odrer", "orders", "invoice", "or", ""]
        for a, b in itertools.product(words, repeat=2):
            assert _edit_distance_at_most_one(a, b) == (levenshtein(a, b) <= 1), (a, b)


class TestGoldenTemplates:
    PATHS = [
        "/api/v1/items/101",
        "/api/v1/items/102",
        "/api/v1/items/103",
        "/api/v1/order/101/status",
        "/api/v1/order/102/status",
        "/api/v1/order/103/status",
    ]

    def test_two_templates(self):
        groups = mine_urls(self.PATHS)
        rendered = sorted(g.template.render() for g in groups)
        assert rendered == ["/api/v1/items/{*}", "/api/v1/order/{*}/status"]

    def test_order_invariance_sample(self):
        for perm in itertools.islice(itertools.permutations(self.PATHS), 0, 720, 14):
            groups = mine_urls(list(perm))
            rendered = sorted(g.template.render() for g in groups)
            assert rendered == ["/api/v1/items/{*}", "/api/v1/order/{*}/status"]


class TestGrouping:
    def test_method_splits_before_routing(self):
        requests = [nr("/api/user", "GET", 0), nr("/api/user", "POST", 1)]
        groups = mine(requests)
        assert len(groups) == 2
        assert {g.template.method for g in groups} == {"GET", "POST"}

    def test_depth_splits(self):
        groups = mine_urls(["/api/user", "/api/user/42"])
        assert len(groups) == 2

    def test_routing_depth_keeps_shallow_fixed_tokens_apart(self):
        # every segment is a routing level here, so distinct fixed tokens
        # mean distinct leaves
        groups = mine_urls(["/api/items/fresh", "/api/items/stale"])
        assert len(groups) == 2

    def test_wildcard_on_position_past_routing_depth(self):
        groups = mine_urls(
            ["/api/v1/items/bulk/fresh", "/api/v1/items/bulk/stale"]
        )
        assert len(groups) == 1
        assert groups[0].template.render() == "/api/v1/items/bulk/{*}"

    def test_distinct_paths_counted(self):
        groups = mine_urls(["/api/items/1", "/api/items/2", "/api/items/1"])
        assert groups[0].distinct_paths == 2

    def test_members_always_match_template(self):
        urls = [f"/api/v1/things/{i}" for i in range(5)] + ["/api/v1/other/name"]
        requests = [nr(u, rid=i) for i, u in enumerate(urls)]
        by_id = {r.record_id: r for r in requests}
        for g in mine(requests):
            for rid in g.member_ids:
                assert match(g.template, by_id[rid])

    def test_single_character_token_corruption_groups_together(self):
        urls = ["/api/v1/orders/1", "/api/v1/orders/2", "/api/v1/orders_/3"]
        groups = mine_urls(urls)
        assert len(groups) == 1
        assert sorted(groups[0].member_ids) == [0, 1, 2]

    def test_max_children_collapses_level(self):
        config = MinerConfig(max_children=3)
        urls = ["/api/alpha/x", "/api/bravo/x", "/api/candle/x", "/api/dragon/x",
                "/api/ember/x"]
        groups = mine_urls(urls, config=config)
        # first three tokens become children; later ones share a wildcard branch
        rendered = sorted(g.template.render() for g in groups)
        assert "/api/{*}/x" in rendered
        assert len(groups) == 4

    def test_zero_depth_paths_grouped(self):
        groups = mine_urls(["/", "/"])
        assert len(groups) == 1
        assert groups[0].template.render() == "/"


class TestMatch:
    def test_wildcard_accepts_any_segment(self):
        t = PathTemplate(method="GET", pattern=("api", "v1", "items", None))
        assert match(t, nr("/api/v1/items/42"))
        assert match(t, nr("/api/v1/items/anything"))

    def test_fixed_token_must_be_exact(self):
        t = PathTemplate(method="GET", pattern=("api", "items"))
        assert not match(t, nr("/api/item"))

    def test_method_and_depth_checked(self):
        t = PathTemplate(method="GET", pattern=("api",))
        assert not match(t, nr("/api", method="POST"))
        assert not match(t, nr("/api/x"))


class TestConfigValidation:
    def test_sim_threshold_bounds(self):
        with pytest.raises(ValueError):
            MinerConfig(sim_threshold=0.0)
        MinerConfig(sim_threshold=1.0)  # inclusive upper bound
