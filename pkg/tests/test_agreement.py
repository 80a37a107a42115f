"""Agreement rates, disagreement concentration, corpus annotation."""

import csv
import random

import pytest

from glid.agreement import (AnnotatedPair, AnnotateStats, agreement_rate,
                            annotate_corpus, emit_map_csv, hhi,
                            hhi_by_language, write_group_tsv, write_hhi_tsv)
from glid.router import BASELINE, ModelRegistry


def _pair(country="AA", geo="aaa", base="aaa"):
    return AnnotatedPair(country=country, geo_label=geo, base_label=base)


# --- agreement_rate ----------------------------------------------------------

def test_all_agree_rate_one():
    report = agreement_rate([_pair(), _pair()], "country")
    assert report.groups["AA"].rate == 1.0


def test_half_agree():
    report = agreement_rate([_pair(), _pair(base="bbb")], "country")
    assert report.groups["AA"].rate == 0.5
    assert report.groups["AA"].total == 2


def test_group_by_language_keys_on_geo_label():
    pairs = [_pair(geo="aaa", base="bbb"), _pair(geo="bbb", base="bbb")]
    report = agreement_rate(pairs, "language")
    assert set(report.groups) == {"aaa", "bbb"}
    assert report.groups["aaa"].rate == 0.0
    assert report.groups["bbb"].rate == 1.0


def test_group_by_region_via_geodb(small_world):
    r0, r1 = small_world.regions
    c0, c1 = small_world.country_of[r0], small_world.country_of[r1]
    pairs = [_pair(country=c0), _pair(country=c0, base="zzz"),
             _pair(country=c1)]
    report = agreement_rate(pairs, "region", small_world.db)
    assert report.groups[r0].total == 2
    assert report.groups[r0].agree == 1
    assert report.groups[r1].rate == 1.0


def test_region_grouping_drops_uncovered_countries(small_world):
    pairs = [_pair(country="ZZ"), _pair(country=small_world.country_of[
        small_world.regions[0]])]
    report = agreement_rate(pairs, "region", small_world.db)
    assert report.dropped == 1
    assert report.overall.total == 1


def test_region_grouping_requires_db():
    with pytest.raises(ValueError):
        agreement_rate([_pair()], "region")


def test_bad_group_key():
    with pytest.raises(ValueError):
        agreement_rate([_pair()], "continent")


def test_groups_aggregate_to_global_rate():
    rng = random.Random(6)
    countries = [f"{c}A" for c in "ABCDEFGH"]
    pairs = [_pair(country=rng.choice(countries),
                   geo=rng.choice("abc"),
                   base=rng.choice("abc")) for _ in range(5000)]
    global_rate = sum(p.agrees for p in pairs) / len(pairs)
    for group_by in ("country", "language"):
        report = agreement_rate(pairs, group_by)
        weighted = sum(g.agree for g in report.groups.values())
        total = sum(g.total for g in report.groups.values())
        assert abs(weighted / total - global_rate) < 1e-12
        assert abs(report.overall.rate - global_rate) < 1e-12


def test_empty_groups_omitted():
    report = agreement_rate([], "country")
    assert report.groups == {}
    assert report.overall.total == 0


# --- hhi ----------------------------------------------------------------------

def test_hhi_monopoly():
    pairs = [_pair(geo="aaa", base="bbb") for _ in range(7)]
    assert hhi(pairs) == 1.0


def test_hhi_even_split():
    pairs = ([_pair(geo="aaa", base="bbb")] * 5
             + [_pair(geo="aaa", base="ccc")] * 5)
    assert hhi(pairs) == pytest.approx(0.5, abs=1e-12)


def test_hhi_shares_532():
    pairs = ([_pair(geo="aaa", base="bbb")] * 5
             + [_pair(geo="aaa", base="ccc")] * 3
             + [_pair(geo="aaa", base="ddd")] * 2)
    assert hhi(pairs) == pytest.approx(0.38, abs=1e-12)


def test_hhi_excludes_agreements():
    pairs = ([_pair(geo="aaa", base="aaa")] * 100
             + [_pair(geo="aaa", base="bbb")] * 3)
    assert hhi(pairs) == 1.0


def test_hhi_no_disagreements_undefined():
    assert hhi([_pair()]) is None


def test_hhi_bounds_random():
    rng = random.Random(8)
    for _ in range(1000):
        k = rng.randrange(1, 12)
        labels = [f"b{i}" for i in range(k)]
        counts = [rng.randrange(1, 30) for _ in range(k)]
        pairs = [_pair(geo="aaa", base=l)
                 for l, c in zip(labels, counts) for _ in range(c)]
        value = hhi(pairs)
        assert 1.0 / k - 1e-12 <= value <= 1.0 + 1e-12


def test_hhi_by_language():
    pairs = ([_pair(geo="aaa", base="bbb")] * 2
             + [_pair(geo="bbb", base="bbb")] * 3)
    values = hhi_by_language(pairs)
    assert values["aaa"] == 1.0
    assert values["bbb"] is None


# --- emitters -------------------------------------------------------------------

def test_map_csv_round_trip(tmp_path):
    pairs = [_pair(country="BR"), _pair(country="BR", base="xxx"),
             _pair(country="AU")]
    report = agreement_rate(pairs, "country")
    path = tmp_path / "map.csv"
    emit_map_csv(report, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["country"] for r in rows] == ["AU", "BR"]
    assert rows[1]["rate"] == "0.5000"
    for row in rows:
        g = report.groups[row["country"]]
        assert float(row["rate"]) == pytest.approx(g.rate, abs=5e-5)
        assert int(row["total"]) == g.total


def test_map_csv_requires_country_grouping(tmp_path):
    report = agreement_rate([_pair()], "language")
    with pytest.raises(ValueError):
        emit_map_csv(report, tmp_path / "x.csv")


def test_group_tsv_min_total(tmp_path):
    pairs = [_pair(geo="aaa")] * 10 + [_pair(geo="bbb")] * 2
    report = agreement_rate(pairs, "language")
    path = tmp_path / "langs.tsv"
    write_group_tsv(report, path, min_total=5)
    lines = path.read_text().splitlines()
    assert lines[0] == "language\trate\tn"
    assert len(lines) == 2 and lines[1].startswith("aaa\t")


def test_hhi_tsv(tmp_path):
    values = {"aaa": 0.38, "bbb": None}
    path = tmp_path / "hhi.tsv"
    write_hhi_tsv(values, path, totals={"aaa": 10, "bbb": 3}, min_total=1)
    lines = path.read_text().splitlines()
    assert "aaa\t0.3800\t10" in lines
    assert "bbb\tNA\t3" in lines


# --- annotate_corpus ------------------------------------------------------------

def _long(text):
    return (text + " ") * 12


def test_identical_models_always_agree(small_world):
    base = small_world.registry.model_for(BASELINE)
    reg = ModelRegistry({r: base for r in small_world.regions}, base,
                        small_world.db, validate=False)
    corpus = [(small_world.country_of[small_world.regions[0]], s.text)
              for s in small_world.test_set[:50]]
    pairs = list(annotate_corpus(reg, corpus))
    assert len(pairs) == 50
    assert all(p.agrees for p in pairs)


def test_short_texts_skipped_and_counted(small_world):
    stats = AnnotateStats()
    corpus = [("AA", "too short"), ("AA", _long("word like this"))]
    pairs = list(annotate_corpus(small_world.registry, corpus, stats=stats))
    assert stats.skipped_short == 1
    assert stats.annotated == len(pairs) == 1
    assert stats.annotated + stats.skipped_short == len(corpus)


def test_forty_five_char_cleaned_text_skipped(small_world):
    stats = AnnotateStats()
    text = "a" * 45
    assert len(text) == 45
    list(annotate_corpus(small_world.registry, [("AA", text)], stats=stats))
    assert stats.skipped_short == 1


def test_single_region_language_disagrees_systematically(small_world):
    # texts of the confusable sibling sent from the OTHER region's country:
    # the hinted model cannot emit the sibling's label, the baseline can
    a, b = small_world.confusables
    home_b = small_world.lang_home[b]
    country_b = small_world.country_of[home_b]
    texts = [s.text for s in small_world.test_set if s.label == a][:80]
    pairs = list(annotate_corpus(small_world.registry,
                                 [(country_b, t) for t in texts]))
    assert len(pairs) == len(texts)
    disagreements = [p for p in pairs if not p.agrees]
    assert len(disagreements) > len(pairs) * 0.2
    assert all(p.geo_label != a for p in pairs)


def test_annotation_is_streaming_and_batched(small_world):
    corpus = ((small_world.country_of[small_world.regions[i % 2]], s.text)
              for i, s in enumerate(small_world.test_set[:40]))
    stats = AnnotateStats()
    pairs = list(annotate_corpus(small_world.registry, corpus, batch_size=7,
                                 stats=stats))
    assert stats.annotated == 40
    assert len(pairs) == 40


def test_uncovered_country_pairs_always_agree(small_world):
    # an unknown country routes the hinted pass to the baseline as well
    texts = [s.text for s in small_world.test_set[:10]]
    pairs = list(annotate_corpus(small_world.registry,
                                 [("ZZ", t) for t in texts]))
    assert all(p.agrees for p in pairs)
