"""Shared fixtures: synthetic multi-region worlds with trained models.

Local languages are generated in cross-region families: the i-th local of
every region shares a family base distribution over a common alphabet,
perturbed per language.  Siblings therefore live in different regions and
are moderately confusable, which is exactly the structure the regional
models exploit: a sibling is absent from each other's label space, so the
baseline loses a little on every local language while the regional models
do not.  Family 0 additionally hosts a pinned near-identical pair (95%
shared distribution, 5% divergence) split across the first two regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pytest

from glid.classifier import Model, ModelConfig, train
from glid.dataset import LabeledSample
from glid.geodb import REGION_IDS, GeoDatabase
from glid.router import ModelRegistry
from glid.textprep import chunk_samples

LOCAL_ALPHABET = list("abcdefghij")
INTL_ALPHABET = list("uvwxyz")
FAMILY_MIX = 0.2         # sibling divergence within a family
CONFUSABLE_MIX = 0.05    # the pinned near-identical pair


@dataclass
class SynthWorld:
    db: GeoDatabase
    registry: ModelRegistry
    regions: list[str]
    international: list[str]
    lang_home: dict[str, str]            # local language -> home region
    country_of: dict[str, str]           # region -> its single country
    confusables: tuple[str, str] | None
    train_sets: dict[str, list[LabeledSample]] = field(repr=False,
                                                       default_factory=dict)
    test_set: list[LabeledSample] = field(repr=False, default_factory=list)
    region_of_sample: list[str] = field(repr=False, default_factory=list)

    def test_for_region(self, region: str) -> list[LabeledSample]:
        return [s for s, r in zip(self.test_set, self.region_of_sample)
                if r == region]

    def all_train(self) -> list[LabeledSample]:
        return [s for lang in sorted(self.train_sets)
                for s in self.train_sets[lang]]


def _texts(rng: np.random.Generator, alphabet: list[str], probs: np.ndarray,
           n_samples: int) -> list[str]:
    """~50-char chunks of random words drawn from one letter distribution."""
    need = n_samples * 64 + 256
    chars = rng.choice(alphabet, size=need, p=probs)
    word_lens = rng.integers(2, 8, size=need // 2)
    words = []
    pos = 0
    for wl in word_lens:
        if pos + wl > need:
            break
        words.append("".join(chars[pos:pos + wl]))
        pos += wl
    chunks = chunk_samples(" ".join(words))
    assert len(chunks) >= n_samples, (len(chunks), n_samples)
    return chunks[:n_samples]


def make_world(n_regions: int = 3, locals_per_region: int = 4,
               n_international: int = 2, train_per_lang: int = 2000,
               test_per_lang: int = 400, seed: int = 0,
               config: ModelConfig | None = None) -> SynthWorld:
    rng = np.random.default_rng(seed)
    regions = list(REGION_IDS[:n_regions])
    countries = [f"{chr(ord('A') + i)}A" for i in range(n_regions)]
    international = [f"in{chr(ord('a') + i)}" for i in range(n_international)]
    n_letters = len(LOCAL_ALPHABET)

    lang_home: dict[str, str] = {}
    local_map: dict[str, set[str]] = {r: set() for r in regions}
    probs: dict[str, np.ndarray] = {}
    alphabet_of: dict[str, list[str]] = {}
    family_base = [rng.dirichlet(np.full(n_letters, 0.5))
                   for _ in range(locals_per_region)]
    confusables = None
    for r, region in enumerate(regions):
        for i in range(locals_per_region):
            lang = f"l{chr(ord('a') + r)}{chr(ord('a') + i)}"
            lang_home[lang] = region
            local_map[region].add(lang)
            mix = FAMILY_MIX
            if i == 0 and n_regions >= 2:
                # family 0: regions 0/1 get the near-identical pair, any
                # further sibling is pushed away so it stays separable
                mix = CONFUSABLE_MIX if r < 2 else 0.4
            perturb = rng.dirichlet(np.full(n_letters, 0.3))
            probs[lang] = (1.0 - mix) * family_base[i] + mix * perturb
            alphabet_of[lang] = LOCAL_ALPHABET
    if n_regions >= 2:
        confusables = ("laa", "lba")
    for lang in international:
        probs[lang] = rng.dirichlet(np.full(len(INTL_ALPHABET), 0.6))
        alphabet_of[lang] = INTL_ALPHABET

    db = GeoDatabase(
        international=frozenset(international),
        local={r: frozenset(members) for r, members in local_map.items()},
        country_region=dict(zip(countries, regions)),
    )

    all_langs = sorted(lang_home) + international
    train_sets: dict[str, list[LabeledSample]] = {}
    test_set: list[LabeledSample] = []
    region_of_sample: list[str] = []
    for lang in all_langs:
        texts = _texts(rng, alphabet_of[lang], probs[lang],
                       train_per_lang + test_per_lang)
        train_sets[lang] = [LabeledSample(t, lang, "synth")
                            for t in texts[:train_per_lang]]
        for i, t in enumerate(texts[train_per_lang:]):
            test_set.append(LabeledSample(t, lang, "synth"))
            if lang in lang_home:
                region_of_sample.append(lang_home[lang])
            else:
                region_of_sample.append(regions[i % n_regions])

    cfg = config or ModelConfig(dim=32, num_buckets=1 << 17, max_ngram=6,
                                neg_samples=100, epochs=3, lr=0.35,
                                seed=seed + 1)
    all_train = [s for lang in all_langs for s in train_sets[lang]]
    regional_models: dict[str, Model] = {}
    for region in regions:
        admissible = db.languages_for_region(region)
        subset = [s for s in all_train if s.label in admissible]
        regional_models[region] = train(subset, None, cfg, admissible)
    baseline = train(all_train, None, cfg, all_langs)
    registry = ModelRegistry(regional_models, baseline, db)

    return SynthWorld(db=db, registry=registry, regions=regions,
                      international=international, lang_home=lang_home,
                      country_of=dict(zip(regions, countries)),
                      confusables=confusables, train_sets=train_sets,
                      test_set=test_set, region_of_sample=region_of_sample)


@pytest.fixture(scope="session")
def small_world() -> SynthWorld:
    """Cheap 2-region world for routing/metrics/agreement unit tests."""
    cfg = ModelConfig(dim=24, num_buckets=1 << 13, max_ngram=4,
                      neg_samples=20, epochs=3, lr=0.4, seed=11)
    return make_world(n_regions=2, locals_per_region=2, n_international=2,
                      train_per_lang=250, test_per_lang=60, seed=5,
                      config=cfg)
