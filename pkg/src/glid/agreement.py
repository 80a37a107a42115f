"""Downstream agreement analysis between the regional models and the baseline.

Unlabeled geo-referenced texts are annotated twice, once with the country
hint and once without; the analysis reports how often the two labels agree
by country, region, or language, and how concentrated the disagreement
labels are (Herfindahl-Hirschman index over the baseline's labels on
disagreeing samples).
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .classifier import predict_batch
from .geodb import GeoDatabase, NotCovered
from .router import BASELINE, GeoHint, ModelRegistry
from . import textprep

GROUP_KEYS = ("country", "region", "language")


@dataclass(frozen=True)
class AnnotatedPair:
    country: str
    geo_label: str
    base_label: str

    @property
    def agrees(self) -> bool:
        return self.geo_label == self.base_label


@dataclass
class GroupAgreement:
    agree: int = 0
    total: int = 0

    @property
    def rate(self) -> float:
        return self.agree / self.total if self.total else 0.0


@dataclass
class AgreementReport:
    group_by: str
    groups: dict[str, GroupAgreement] = field(default_factory=dict)
    dropped: int = 0   # pairs from countries outside the geodb (region grouping)

    @property
    def overall(self) -> GroupAgreement:
        out = GroupAgreement()
        for g in self.groups.values():
            out.agree += g.agree
            out.total += g.total
        return out


def agreement_rate(pairs: Iterable[AnnotatedPair], group_by: str,
                   db: GeoDatabase | None = None) -> AgreementReport:
    """Agreement per group; single pass, empty groups never appear.

    Language grouping keys on the geographic model's label.  Region
    grouping needs ``db`` to resolve countries; pairs from countries the
    geodb does not cover are dropped and counted.
    """
    if group_by not in GROUP_KEYS:
        raise ValueError(f"group_by must be one of {GROUP_KEYS}")
    if group_by == "region" and db is None:
        raise ValueError("region grouping requires a geodb")
    report = AgreementReport(group_by=group_by)
    groups = report.groups
    for pair in pairs:
        if group_by == "country":
            key = pair.country
        elif group_by == "language":
            key = pair.geo_label
        else:
            try:
                key = db.region_of(pair.country)
            except NotCovered:
                report.dropped += 1
                continue
        g = groups.get(key)
        if g is None:
            g = groups[key] = GroupAgreement()
        g.total += 1
        g.agree += pair.geo_label == pair.base_label
    return report


def hhi(pairs: Iterable[AnnotatedPair]) -> float | None:
    """Sum of squared shares of the baseline labels over disagreeing pairs.

    Returns None when every pair agrees (the index is undefined then).
    """
    shares: Counter[str] = Counter()
    n = 0
    for pair in pairs:
        if not pair.agrees:
            shares[pair.base_label] += 1
            n += 1
    if n == 0:
        return None
    return sum((c / n) ** 2 for c in shares.values())


def hhi_by_language(pairs: Iterable[AnnotatedPair]) -> dict[str, float | None]:
    """HHI of disagreement labels per geo-model language."""
    disagreements: dict[str, Counter[str]] = defaultdict(Counter)
    langs: set[str] = set()
    for pair in pairs:
        langs.add(pair.geo_label)
        if not pair.agrees:
            disagreements[pair.geo_label][pair.base_label] += 1
    out: dict[str, float | None] = {}
    for lang in langs:
        shares = disagreements.get(lang)
        if not shares:
            out[lang] = None
            continue
        n = sum(shares.values())
        out[lang] = sum((c / n) ** 2 for c in shares.values())
    return out


def emit_map_csv(report: AgreementReport, path) -> None:
    """Write ``country,rate,total`` rows sorted by country code."""
    if report.group_by != "country":
        raise ValueError("map CSV needs a country-grouped report")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "rate", "total"])
        for country in sorted(report.groups):
            g = report.groups[country]
            writer.writerow([country, f"{g.rate:.4f}", g.total])


def write_group_tsv(report: AgreementReport, path, min_total: int = 1) -> None:
    """Generic group TSV (region or language reports), largest groups first."""
    key_col = report.group_by
    rows = [(k, g) for k, g in report.groups.items() if g.total >= min_total]
    rows.sort(key=lambda item: (-item[1].total, item[0]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{key_col}\trate\tn\n")
        for key, g in rows:
            fh.write(f"{key}\t{g.rate:.4f}\t{g.total}\n")


def write_hhi_tsv(hhi_values: dict[str, float | None], path,
                  totals: dict[str, int] | None = None,
                  min_total: int = 1) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("language\thhi\tn\n")
        for lang in sorted(hhi_values):
            n = totals.get(lang, 0) if totals else 0
            if totals and n < min_total:
                continue
            value = hhi_values[lang]
            fh.write(f"{lang}\t{'NA' if value is None else f'{value:.4f}'}"
                     f"\t{n}\n")


@dataclass
class AnnotateStats:
    annotated: int = 0
    skipped_short: int = 0


def annotate_corpus(registry: ModelRegistry,
                    corpus: Iterable[tuple[str, str]],
                    min_chars: int = textprep.MIN_SAMPLE_LEN,
                    batch_size: int = 512,
                    stats: AnnotateStats | None = None
                    ) -> Iterator[AnnotatedPair]:
    """Annotate (country, raw text) rows with both model families.

    Each text is cleaned once, then classified with the country hint and
    with no hint; texts shorter than ``min_chars`` after cleaning are
    skipped and counted in ``stats``.  Streaming: memory is bounded by
    ``batch_size``.
    """
    if stats is None:
        stats = AnnotateStats()
    buffer: list[tuple[str, str]] = []   # (country, cleaned)

    def flush() -> Iterator[AnnotatedPair]:
        if not buffer:
            return
        texts = [t for _, t in buffer]
        by_model: dict[str, list[int]] = defaultdict(list)
        model_tags: list[str] = []
        for i, (country, _) in enumerate(buffer):
            _, which = registry.select_model(GeoHint(country=country))
            model_tags.append(which)
            by_model[which].append(i)
        geo_labels: list[str | None] = [None] * len(buffer)
        for which, idxs in by_model.items():
            model = registry.model_for(which)
            preds = predict_batch(model, [texts[i] for i in idxs], k=1)
            for i, p in zip(idxs, preds):
                geo_labels[i] = p[0][0]
        base_model = registry.model_for(BASELINE)
        base_preds = predict_batch(base_model, texts, k=1)
        for (country, _), geo_label, bp in zip(buffer, geo_labels, base_preds):
            stats.annotated += 1
            yield AnnotatedPair(country=country, geo_label=geo_label,
                                base_label=bp[0][0])
        buffer.clear()

    for country, raw in corpus:
        cleaned = textprep.clean_text(raw)
        if len(cleaned) < min_chars:
            stats.skipped_short += 1
            continue
        buffer.append((country.strip().upper(), cleaned))
        if len(buffer) >= batch_size:
            yield from flush()
    yield from flush()
