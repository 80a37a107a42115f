"""Model selection from geographic hints and end-to-end identification.

A registry holds up to 16 regional models plus one baseline sharing the
same architecture.  A country hint routes through the geodb to the region's
model; a missing or unknown hint falls back to the baseline.  Models are
loaded lazily from disk with an optional LRU budget, so a registry of 17
large models does not have to be memory-resident at once.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

from . import classifier, textprep
from .classifier import EmptyInput, Model
from .geodb import GeoDatabase, NotCovered, REGION_SET, load_geodb

BASELINE = "baseline"


class RegistryError(ValueError):
    """Manifest or model-consistency problem."""


@dataclass(frozen=True)
class GeoHint:
    """Optional geographic origin of a sample: a country, a region, or nothing."""

    country: str | None = None
    region: str | None = None

    def __post_init__(self):
        if self.country is not None and self.region is not None:
            raise ValueError("set at most one of country/region")
        if self.country is not None:
            object.__setattr__(self, "country", self.country.strip().upper())
        if self.region is not None and self.region not in REGION_SET:
            raise ValueError(f"unknown region: {self.region!r}")


NO_HINT = GeoHint()


@dataclass(frozen=True)
class IdentifyResult:
    prediction: list[tuple[str, float]]
    model_used: str
    below_min_length: bool = False

    @property
    def label(self) -> str:
        return self.prediction[0][0]

    @property
    def prob(self) -> float:
        return self.prediction[0][1]


class ModelRegistry:
    """Regional models + baseline + geodb, with lazy loading.

    ``regional`` and ``baseline`` entries may be in-memory models or file
    paths.  Label-set invariants are validated up front from the model
    file headers: each regional model's labels must equal its region's
    admissible set, and the baseline's labels must equal the union of all
    regional labels.
    """

    def __init__(self, regional: dict[str, Model | str | Path],
                 baseline: Model | str | Path, geodb: GeoDatabase,
                 max_loaded: int | None = None, validate: bool = True):
        unknown = set(regional) - REGION_SET
        if unknown:
            raise RegistryError(f"unknown regions: {sorted(unknown)}")
        self.geodb = geodb
        self._sources: dict[str, Model | str | Path] = dict(regional)
        self._sources[BASELINE] = baseline
        self._cache: OrderedDict[str, Model] = OrderedDict()
        self._max_loaded = max_loaded
        self._lock = threading.Lock()
        self.fallback_count = 0
        if validate:
            self._validate_labels()

    def _labels_of(self, which: str) -> list[str]:
        source = self._sources[which]
        if isinstance(source, Model):
            return list(source.labels)
        _, labels = classifier.read_model_labels(source)
        return labels

    def _validate_labels(self) -> None:
        for region in sorted(set(self._sources) - {BASELINE}):
            labels = set(self._labels_of(region))
            expected = set(self.geodb.languages_for_region(region))
            if labels != expected:
                raise RegistryError(
                    f"model for {region} has {len(labels)} labels, expected "
                    f"the region's {len(expected)}-language set")
        # the baseline covers the union of every region's label space, which
        # is the geodb's full inventory even when the registry is partial
        base = set(self._labels_of(BASELINE))
        expected = set(self.geodb.all_languages())
        if base != expected:
            raise RegistryError(
                f"baseline has {len(base)} labels, expected the geodb's "
                f"{len(expected)}-language inventory")

    @property
    def regions(self) -> list[str]:
        return sorted(set(self._sources) - {BASELINE})

    def model_for(self, which: str) -> Model:
        """Materialize a model, loading it at most once; LRU-evicts regionals."""
        with self._lock:
            if which in self._cache:
                self._cache.move_to_end(which)
                return self._cache[which]
            try:
                source = self._sources[which]
            except KeyError:
                raise RegistryError(f"no model for {which!r}") from None
            model = (source if isinstance(source, Model)
                     else classifier.load_model(source))
            self._cache[which] = model
            if self._max_loaded is not None:
                regionals = [k for k in self._cache if k != BASELINE]
                while len(regionals) > self._max_loaded:
                    evicted = regionals.pop(0)
                    del self._cache[evicted]
            return model

    def select_model(self, hint: GeoHint) -> tuple[Model, str]:
        """Resolve a hint to (model, tag); always resolves, baseline on fallback."""
        which = BASELINE
        if hint.region is not None:
            which = hint.region
        elif hint.country is not None:
            try:
                which = self.geodb.region_of(hint.country)
            except NotCovered:
                which = BASELINE
        if which != BASELINE and which not in self._sources:
            which = BASELINE
        if which == BASELINE and (hint.country or hint.region):
            self.fallback_count += 1
        return self.model_for(which), which

    def identify(self, text: str, hint: GeoHint = NO_HINT, k: int = 1
                 ) -> IdentifyResult:
        """Clean, featurize and classify one raw text with the hinted model.

        Texts shorter than the 50-character sample minimum after cleaning
        are still classified but flagged ``below_min_length``.
        """
        cleaned = textprep.clean_text(text)
        if not cleaned:
            raise EmptyInput("text is empty after cleaning")
        model, which = self.select_model(hint)
        prediction = classifier.predict(model, cleaned, k=k)
        return IdentifyResult(prediction=prediction, model_used=which,
                              below_min_length=len(cleaned) < textprep.MIN_SAMPLE_LEN)

    @classmethod
    def open(cls, manifest_path, max_loaded: int | None = None,
             validate: bool = True) -> "ModelRegistry":
        """Load a registry from a manifest TSV.

        Rows are ``<region_id>\\t<model path>``, plus one ``baseline`` row
        and one ``geodb`` row.  Relative paths resolve against the manifest
        location.
        """
        manifest_path = Path(manifest_path)
        base_dir = manifest_path.parent
        regional: dict[str, str] = {}
        baseline_path: str | None = None
        geodb_path: str | None = None
        with open(manifest_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise RegistryError(
                        f"{manifest_path}:{lineno}: expected 2 fields")
                key, path = parts
                resolved = str((base_dir / path).resolve())
                if key == BASELINE:
                    baseline_path = resolved
                elif key == "geodb":
                    geodb_path = resolved
                elif key in REGION_SET:
                    if key in regional:
                        raise RegistryError(
                            f"{manifest_path}:{lineno}: duplicate region {key}")
                    regional[key] = resolved
                else:
                    raise RegistryError(
                        f"{manifest_path}:{lineno}: unknown key {key!r}")
        if baseline_path is None:
            raise RegistryError(f"{manifest_path}: missing baseline row")
        if geodb_path is None:
            raise RegistryError(f"{manifest_path}: missing geodb row")
        return cls(regional, baseline_path, load_geodb(geodb_path),
                   max_loaded=max_loaded, validate=validate)
