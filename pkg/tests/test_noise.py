"""Noise lab: perturbation rules, interference families, dataset injection."""

import numpy as np
import pytest

from apiminer.noise import (
    INTERFERE,
    INTERFERE_CATEGORIES,
    LEXIFY,
    LEXIFY_RULES,
    RULE_REGISTRY,
    TOKEN_MUTATION_RULES,
    NoiseRule,
    inject,
    interfere_sample,
    lexify,
)
from apiminer.records import Dataset, HttpRecord, write_dataset


def rec(rid=0, url="/api/v1/items?page=1", method="GET", label="EP_00"):
    return HttpRecord(
        id=rid, method=method, url=url, content_type="application/json",
        label=label,
    )


def rule(name):
    return NoiseRule(name, LEXIFY)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestRegistry:
    def test_exact_rule_names(self):
        assert len(LEXIFY_RULES) == 14
        assert len(INTERFERE_CATEGORIES) == 9
        assert len(RULE_REGISTRY) == 23
        assert len({r.name for r in RULE_REGISTRY}) == 23
        assert TOKEN_MUTATION_RULES <= set(LEXIFY_RULES)

    def test_unknown_names_rejected(self):
        with pytest.raises(ValueError):
            NoiseRule("Tilde Injection", LEXIFY)
        with pytest.raises(ValueError):
            NoiseRule("Health Check Endpoint", LEXIFY)
        with pytest.raises(ValueError):
            NoiseRule("Static Asset Request", "Other")


class TestLexifyRules:
    def test_query_order_shuffle(self):
        r = rec(url="/api/user?id=1&role=admin")
        out, applied = lexify(r, rule("Query Order Shuffle"), rng())
        assert applied
        assert out.url == "/api/user?role=admin&id=1"

    def test_shuffle_needs_two_params(self):
        r = rec(url="/api/user?id=1")
        out, applied = lexify(r, rule("Query Order Shuffle"), rng())
        assert not applied and out.url == r.url

    def test_neutral_parameter_appended(self):
        out, applied = lexify(rec(url="/api/user"), rule("Neutral Query Parameter"), rng())
        assert applied and out.url == "/api/user?tmp=0"

    def test_duplicate_query_key(self):
        out, applied = lexify(rec(url="/api/user?id=1"), rule("Duplicate Query Key"), rng())
        assert applied and out.url == "/api/user?id=1&id=1"

    def test_underscore_injection(self):
        out, applied = lexify(rec(url="/api/user/profile"), rule("Underscore Injection"), rng())
        assert applied
        segs = out.url.split("?")[0].strip("/").split("/")
        changed = [s for s in segs if s.endswith("_")]
        assert len(changed) == 1

    def test_hyphen_duplication(self):
        out, applied = lexify(rec(url="/api/audit-logs/3"), rule("Hyphen Duplication"), rng())
        assert applied and "/audit--logs/" in out.url

    def test_hyphen_needs_hyphen(self):
        out, applied = lexify(rec(url="/api/items"), rule("Hyphen Duplication"), rng())
        assert not applied

    def test_dot_injection(self):
        out, applied = lexify(rec(url="/api/orders"), rule("Dot Injection"), rng())
        assert applied
        segs = out.url.split("?")[0].strip("/").split("/")
        dotted = [s for s in segs if "." in s]
        assert len(dotted) == 1 and dotted[0].replace(".", "") in ("api", "orders")

    def test_repeated_slash(self):
        out, applied = lexify(rec(url="/api/items"), rule("Repeated Slash"), rng())
        assert applied and "//" in out.url

    def test_trailing_slash_addition_and_removal(self):
        out, applied = lexify(rec(url="/api/items"), rule("Trailing Slash Addition"), rng())
        assert applied and out.url.split("?")[0] == "/api/items/"
        back, applied = lexify(out, rule("Trailing Slash Removal"), rng())
        assert applied and back.url.split("?")[0] == "/api/items"
        _, applied = lexify(rec(url="/api/items"), rule("Trailing Slash Removal"), rng())
        assert not applied

    def test_case_toggles(self):
        out, applied = lexify(rec(url="/api/items"), rule("Uppercase Token"), rng())
        assert applied
        assert any(s.isupper() for s in out.url.strip("/").split("/"))
        _, applied = lexify(rec(url="/API/ITEMS"), rule("Uppercase Token"), rng())
        assert not applied
        out, applied = lexify(rec(url="/API/items"), rule("Lowercase Token"), rng())
        assert applied and out.url == "/api/items"

    def test_space_and_plus_encoding(self):
        r = rec(url="/api/search?q=red shoes")
        out, applied = lexify(r, rule("Space Encoding"), rng())
        assert applied and out.url == "/api/search?q=red%20shoes"
        out, applied = lexify(r, rule("Plus Encoding"), rng())
        assert applied and out.url == "/api/search?q=red+shoes"
        _, applied = lexify(rec(url="/api/search?q=x"), rule("Space Encoding"), rng())
        assert not applied

    def test_hex_encoding(self):
        out, applied = lexify(rec(url="/api/search?q=test"), rule("Hex Encoding"), rng())
        assert applied and out.url == "/api/search?q=%74%65%73%74"

    def test_label_and_identity_preserved(self):
        r = rec(url="/api/user?a=1&b=2", label="EP_07")
        for name in LEXIFY_RULES:
            out, applied = lexify(r, rule(name), rng(3))
            assert out.label == "EP_07"
            assert out.method == r.method
            if not applied:
                assert out.url == r.url


class TestInterfereSample:
    def test_every_category_unlabeled_and_in_family(self):
        from apiminer.noise import _INTERFERE_FAMILIES

        for name in INTERFERE_CATEGORIES:
            cat = NoiseRule(name, INTERFERE)
            sample = interfere_sample(cat, rng(5), record_id=9)
            assert sample.label is None
            assert sample.id == 9
            family = _INTERFERE_FAMILIES[name]
            assert any(
                sample.method == m
                and sample.content_type == ct
                and (
                    sample.url == p
                    or ("{stem}" in p and sample.url.startswith(p.split("{stem}")[0]))
                )
                for m, p, ct in family
            )

    def test_asset_families_carry_real_media_types(self):
        cat = NoiseRule("Image Resource Request", INTERFERE)
        sample = interfere_sample(cat, rng(1))
        assert sample.content_type.startswith("image/")

    def test_background_families_have_no_content_type(self):
        cat = NoiseRule("Health Check Endpoint", INTERFERE)
        assert interfere_sample(cat, rng(1)).content_type is None


def small_dataset(n=10):
    records = [
        rec(rid=i, url=f"/api/v1/items/{i}?page={i}", label=f"EP_{i % 2}")
        for i in range(n)
    ]
    return Dataset(records=records, source="t", ground_truth={r.id: r.label for r in records})


class TestInject:
    def test_ratio_zero_is_byte_identical(self):
        ds = small_dataset()
        out = inject(ds, LEXIFY, 0.0, seed=3)
        assert write_dataset(out) == write_dataset(ds)

    def test_lexify_transforms_exact_count(self):
        ds = small_dataset(10)
        out = inject(ds, LEXIFY, 0.5, seed=3)
        assert len(out.records) == 10
        changed = sum(
            1 for a, b in zip(ds.records, out.records) if a.url != b.url
        )
        assert changed == 5
        assert out.ground_truth == ds.ground_truth

    def test_interfere_adds_unlabeled_records(self):
        ds = small_dataset(10)
        out = inject(ds, "Interfere", 0.5, seed=3)
        assert len(out.records) == 15
        unlabeled = [r for r in out.records if r.label is None]
        assert len(unlabeled) == 5
        assert len(out.ground_truth) == 10
        # original records keep their relative order
        kept_urls = [r.url for r in out.records if r.label is not None]
        assert kept_urls == [r.url for r in ds.records]

    def test_ids_renumbered_densely(self):
        out = inject(small_dataset(10), "Interfere", 0.5, seed=3)
        assert [r.id for r in out.records] == list(range(15))
        assert set(out.ground_truth) <= set(range(15))

    def test_deterministic(self):
        a = inject(small_dataset(), LEXIFY, 0.5, seed=7)
        b = inject(small_dataset(), LEXIFY, 0.5, seed=7)
        assert write_dataset(a) == write_dataset(b)
        c = inject(small_dataset(), LEXIFY, 0.5, seed=8)
        assert write_dataset(a) != write_dataset(c)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            inject(small_dataset(), LEXIFY, 1.5, seed=1)
        with pytest.raises(ValueError):
            inject(small_dataset(), "Garble", 0.5, seed=1)
