"""Train/dev/test split construction with per-language and per-source caps.

Labeled samples arrive as TSV rows (``label<TAB>source<TAB>text``) and are
partitioned per language under a fixed seed.  Caps: international languages
are limited to 100k training samples unless they are also local to the
region being built; test sets are limited to 15k per language with at most
2k from any single source.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .geodb import GeoDatabase


@dataclass(frozen=True)
class LabeledSample:
    text: str
    label: str
    source: str = "other"


@dataclass(frozen=True)
class SplitConfig:
    train_cap_international: int = 100_000
    test_cap_per_lang: int = 15_000
    test_cap_per_source: int = 2_000
    split_ratios: tuple[float, float, float] = (0.90, 0.05, 0.05)
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1: {self.split_ratios}")
        for name in ("train_cap_international", "test_cap_per_lang",
                     "test_cap_per_source"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Splits:
    train: list[LabeledSample]
    dev: list[LabeledSample]
    test: list[LabeledSample]
    rejected: Counter = field(default_factory=Counter)

    def counts(self) -> dict[str, int]:
        return {"train": len(self.train), "dev": len(self.dev),
                "test": len(self.test)}


def _rng_for(seed: int, label: str) -> random.Random:
    # string seeding hashes via sha512 internally: stable across runs
    return random.Random(f"{seed}:{label}")


def build_splits(samples: Iterable[LabeledSample], db: GeoDatabase,
                 cfg: SplitConfig, region: str | None = None) -> Splits:
    """Partition samples into train/dev/test and apply the caps.

    ``region`` only controls the training-cap exemption: an international
    language that is also local to that region keeps all its training
    samples.  Pass ``None`` for a global (baseline) build.  Samples whose
    label is missing from the geodb are rejected and counted.  Output is
    deterministic for a given seed and input order.
    """
    known = db.all_languages()
    by_label: dict[str, list[LabeledSample]] = {}
    rejected: Counter = Counter()
    for s in samples:
        if s.label not in known:
            rejected[s.label] += 1
            continue
        by_label.setdefault(s.label, []).append(s)

    region_local = db.local.get(region, frozenset()) if region else frozenset()
    r_train, r_dev, _ = cfg.split_ratios
    out = Splits(train=[], dev=[], test=[], rejected=rejected)

    for label in sorted(by_label):
        rng = _rng_for(cfg.seed, label)
        pool = list(by_label[label])
        rng.shuffle(pool)
        n = len(pool)
        n_train = int(n * r_train)
        n_dev = int(n * (r_train + r_dev)) - n_train
        train, dev, test = (pool[:n_train], pool[n_train:n_train + n_dev],
                            pool[n_train + n_dev:])

        if (db.is_international(label) and label not in region_local
                and len(train) > cfg.train_cap_international):
            train = rng.sample(train, cfg.train_cap_international)

        by_source: dict[str, list[LabeledSample]] = {}
        for s in test:
            by_source.setdefault(s.source, []).append(s)
        capped: list[LabeledSample] = []
        for source in sorted(by_source):
            group = by_source[source]
            if len(group) > cfg.test_cap_per_source:
                group = rng.sample(group, cfg.test_cap_per_source)
            capped.extend(group)
        if len(capped) > cfg.test_cap_per_lang:
            capped = rng.sample(capped, cfg.test_cap_per_lang)

        out.train.extend(train)
        out.dev.extend(dev)
        out.test.extend(capped)

    return out


def restrict_to_region(samples: Iterable[LabeledSample], db: GeoDatabase,
                       region: str) -> list[LabeledSample]:
    """Keep only samples whose label is admissible for ``region``."""
    admissible = db.languages_for_region(region)
    return [s for s in samples if s.label in admissible]


def sample_line(s: LabeledSample) -> str:
    text = s.text.replace("\t", " ").replace("\n", " ")
    return f"{s.label}\t{s.source}\t{text}"


def read_samples_tsv(path) -> Iterator[LabeledSample]:
    """Stream ``label<TAB>source<TAB>text`` rows; malformed rows raise."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated "
                                 f"fields, got {len(parts)}")
            yield LabeledSample(text=parts[2], label=parts[0], source=parts[1])


def write_samples_tsv(path, samples: Iterable[LabeledSample]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(sample_line(s) + "\n")
            n += 1
    return n


def write_manifest(splits: Splits, cfg: SplitConfig, path,
                   region: str | None = None) -> None:
    """Record split membership by line hash plus the effective config."""
    def hashes(rows: list[LabeledSample]) -> list[str]:
        return [hashlib.sha256(sample_line(s).encode("utf-8")).hexdigest()
                for s in rows]

    manifest = {
        "config": {
            "train_cap_international": cfg.train_cap_international,
            "test_cap_per_lang": cfg.test_cap_per_lang,
            "test_cap_per_source": cfg.test_cap_per_source,
            "split_ratios": list(cfg.split_ratios),
            "seed": cfg.seed,
            "region": region,
        },
        "counts": splits.counts(),
        "rejected": dict(sorted(splits.rejected.items())),
        "train": hashes(splits.train),
        "dev": hashes(splits.dev),
        "test": hashes(splits.test),
    }
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True),
                          encoding="utf-8")
