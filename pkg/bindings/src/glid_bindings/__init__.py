"""Inference-only interface over a glid model registry.

Exposes exactly four callables: ``load`` a registry manifest into an
opaque handle, ``identify`` one text, ``identify_batch`` many, and
``version``.  Results are identical to the ``glid predict`` command on the
same model files: labels as UTF-8 strings, probabilities as 64-bit floats.
Training, evaluation, and agreement analytics are deliberately not
exposed.
"""

from __future__ import annotations

import threading

from glid import __version__ as _engine_version
from glid.router import GeoHint, ModelRegistry

__version__ = "0.1.0"

__all__ = ["load", "identify", "identify_batch", "version"]


class BoundRegistry:
    """Opaque handle to a loaded model registry.

    Shareable across threads; the underlying registry synchronizes lazy
    model loads.  After :meth:`close` every operation raises; closing
    twice is a no-op.
    """

    def __init__(self, registry: ModelRegistry):
        self._registry: ModelRegistry | None = registry
        self._lock = threading.Lock()

    def close(self) -> None:
        with self._lock:
            self._registry = None

    @property
    def closed(self) -> bool:
        return self._registry is None

    def _require_open(self) -> ModelRegistry:
        registry = self._registry
        if registry is None:
            raise ValueError("operation on a closed registry handle")
        return registry

    def __enter__(self) -> "BoundRegistry":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def load(manifest_path, max_loaded: int | None = None) -> BoundRegistry:
    """Open a registry manifest (TSV of model paths plus geodb) as a handle."""
    return BoundRegistry(ModelRegistry.open(manifest_path,
                                            max_loaded=max_loaded))


def identify(handle: BoundRegistry, text: str, country: str | None = None,
             k: int = 1) -> list[tuple[str, float]]:
    """Top-k (label, probability) for one text.

    ``country`` is an ISO 3166-1 alpha-2 hint selecting the regional
    model; omitted or unknown countries use the baseline, matching the
    command-line behavior exactly.
    """
    registry = handle._require_open()
    if not text or not text.strip():
        raise ValueError("text is empty")
    hint = GeoHint(country=country) if country else GeoHint()
    return registry.identify(text, hint, k=k).prediction


def identify_batch(handle: BoundRegistry, texts: list[str],
                   countries: list[str | None] | None = None,
                   k: int = 1) -> list[list[tuple[str, float]]]:
    """Element-wise :func:`identify` over parallel text/country lists."""
    if countries is not None and len(countries) != len(texts):
        raise ValueError(f"{len(texts)} texts but {len(countries)} countries")
    handle._require_open()
    if countries is None:
        countries = [None] * len(texts)
    return [identify(handle, text, country, k=k)
            for text, country in zip(texts, countries)]


def version() -> str:
    """Binding and engine versions as one string."""
    return f"glid-bindings {__version__} (glid {_engine_version})"
